#pragma once

#include <Eigen/Dense>

namespace minee {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;

/// Row-major dense matrix. Rows are samples, columns are coordinates.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// N samples x D coordinates. Joint samples store the x-block first, then the
/// y-block (see ColumnSplit).
using SampleBatch = Matrix;

/// Widths of the x- and y-blocks of a joint sample row.
struct ColumnSplit {
  Index dx = 1;
  Index dy = 1;

  Index total() const { return dx + dy; }
  bool operator==(const ColumnSplit&) const = default;
};

}  // namespace minee
