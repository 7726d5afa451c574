#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "minee/types.hpp"

namespace minee {

/// MG(rho): equal-weight mixture of two bivariate standard Gaussians with
/// correlations +rho and -rho.
struct MixedGaussianModel {
  double rho = 0.9;
  void validate() const;
  bool operator==(const MixedGaussianModel&) const = default;
};

/// HG(rho, d): d independent pairs (x_i, y_i), each bivariate standard
/// Gaussian with correlation rho.
struct CorrelatedGaussianModel {
  double rho = 0.9;
  int d = 1;
  void validate() const;
  bool operator==(const CorrelatedGaussianModel&) const = default;
};

using Model = std::variant<MixedGaussianModel, CorrelatedGaussianModel>;

ColumnSplit column_split(const Model& model);
std::string describe(const Model& model);

SampleBatch sample_mg(const MixedGaussianModel& model, Index n, std::uint64_t seed);
/// Columns are (x_1..x_d, y_1..y_d).
SampleBatch sample_hg(const CorrelatedGaussianModel& model, Index n, std::uint64_t seed);
SampleBatch sample_model(const Model& model, Index n, std::uint64_t seed);

/// Uniform density on an axis-aligned box.
class UniformBoxReference {
 public:
  /// Throws DegenerateBox unless lower < upper in every coordinate.
  UniformBoxReference(Vector lower, Vector upper);

  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  double log_volume() const { return log_volume_; }
  Index dim() const { return lower_.size(); }
  /// Inclusive bounds.
  bool contains(const Eigen::Ref<const Eigen::RowVectorXd>& point) const;
  /// Box over columns [first, first + count).
  UniformBoxReference sub_box(Index first, Index count) const;

 private:
  Vector lower_;
  Vector upper_;
  double log_volume_;
};

/// Empirical product of marginals: rows pair an x-row and a y-row drawn
/// independently from the pools. Sampling only; there is no density.
struct ResampledMarginalReference {
  SampleBatch x_pool;
  SampleBatch y_pool;

  static ResampledMarginalReference from_joint(const SampleBatch& joint, ColumnSplit split);
  void validate() const;
};

/// Elementwise min/max of the samples, widened by margin * range per side.
/// Throws DegenerateBox if a column ends up with zero width.
UniformBoxReference box_from_samples(const SampleBatch& samples, double margin = 0.0);

/// Log-density at each row. Rows outside the box get -infinity and are listed
/// in `out_of_support`.
struct ReferenceLogDensity {
  Vector log_density;
  std::vector<Index> out_of_support;
  bool all_in_support() const { return out_of_support.empty(); }
};
ReferenceLogDensity ref_log_density(const UniformBoxReference& ref, const SampleBatch& points);

SampleBatch ref_sample(const UniformBoxReference& ref, Index n, std::mt19937_64& rng);
SampleBatch ref_sample(const ResampledMarginalReference& ref, Index n, std::mt19937_64& rng);
SampleBatch ref_sample(const UniformBoxReference& ref, Index n, std::uint64_t seed);
SampleBatch ref_sample(const ResampledMarginalReference& ref, Index n, std::uint64_t seed);

/// Closed form -(d/2) ln(1 - rho^2), in nats.
double ground_truth_mi_hg(const CorrelatedGaussianModel& model);

struct QuadratureEstimate {
  double value = 0.0;         // result at the fine resolution
  double coarse_value = 0.0;  // result at half the resolution
  int coarse_resolution = 0;
  int fine_resolution = 0;
  double h_x = 0.0;
  double h_y = 0.0;
  double h_xy = 0.0;
};

/// Half-width (in standard deviations) of the truncated integration domain.
inline constexpr double kQuadratureHalfWidth = 8.0;
/// Largest allowed change between the two resolutions, in nats.
inline constexpr double kQuadratureTolerance = 1e-4;
inline constexpr int kDefaultQuadratureResolution = 400;

/// I = H(X) + H(Y) - H(X,Y) of MG(rho) by tensor Simpson quadrature on
/// [-8, 8]^2 at `grid_resolution` and 2 * grid_resolution intervals per
/// axis. Throws UnconvergedQuadrature if the two differ by 1e-4 nats or more.
QuadratureEstimate ground_truth_mi_mg(const MixedGaussianModel& model,
                                      int grid_resolution = kDefaultQuadratureResolution);

/// Ground truth for either model, with a short description of the method.
struct GroundTruth {
  double value = 0.0;
  std::string method;
  std::string details;
};
GroundTruth ground_truth(const Model& model,
                         int grid_resolution = kDefaultQuadratureResolution);

/// Exact densities of MG(rho).
double mg_joint_density(double rho, double x, double y);
double standard_normal_density(double x);

/// Header x1..xDx,y1..yDy, one sample per row, shortest round-trip decimals.
void write_samples_csv(std::ostream& os, const SampleBatch& samples, ColumnSplit split);
SampleBatch read_samples_csv(std::istream& is, ColumnSplit* split = nullptr);

}  // namespace minee
