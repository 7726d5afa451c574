#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "minee/nn.hpp"

namespace minee {

/// Output heads of the mutual-information network: f0 over (x, y), f1 over x,
/// f2 over y.
enum class Head : int { Joint = 0, X = 1, Y = 2 };
inline constexpr std::array<Head, 3> kAllHeads = {Head::Joint, Head::X, Head::Y};

/// One network with three scalar outputs. Each output has its own hidden
/// stack and sees only its own input block, so f1 cannot depend on y and f2
/// cannot depend on x.
struct MINetworkSpec {
  ColumnSplit split;
  std::vector<Index> hidden_widths = {100, 100, 100};
  nn::Activation activation = nn::Activation::ELU;

  nn::NetworkSpec head_spec(Head h) const;
  Index parameter_count() const;
};

struct MIParams {
  ColumnSplit split;
  std::array<nn::ParameterSet, 3> heads;

  nn::ParameterSet& head(Head h) { return heads[static_cast<std::size_t>(h)]; }
  const nn::ParameterSet& head(Head h) const { return heads[static_cast<std::size_t>(h)]; }

  /// Joint, x and y parameters concatenated in that order.
  Vector flatten() const;
  void assign_flat(const Vector& flat);
  Index parameter_count() const;
};

MIParams init_mi_params(const MINetworkSpec& spec, std::uint64_t seed);

/// Columns of `rows` seen by head `h`.
SampleBatch head_inputs(const SampleBatch& rows, ColumnSplit split, Head h);

}  // namespace minee
