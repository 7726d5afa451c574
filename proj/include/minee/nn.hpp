#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "minee/types.hpp"

namespace minee::nn {

enum class Activation { ELU, ReLU, Tanh };

std::string_view to_string(Activation a);
/// Accepts "elu", "relu", "tanh" (case-insensitive).
Activation parse_activation(std::string_view name);

/// Fully connected network: input -> hidden... -> output, activation after
/// every hidden layer, linear output layer.
struct NetworkSpec {
  Index input_dim = 1;
  std::vector<Index> hidden_widths = {100, 100, 100};
  Index output_dim = 1;
  Activation activation = Activation::ELU;

  /// Throws ContractViolation on a non-positive width.
  void validate() const;
  Index parameter_count() const;
  Index layer_count() const { return static_cast<Index>(hidden_widths.size()) + 1; }
  /// (fan_in, fan_out) of layer `l`.
  std::pair<Index, Index> layer_shape(Index l) const;
  /// Offset of layer `l` in the flat parameter vector. Each layer stores its
  /// row-major weight matrix (fan_out x fan_in) followed by its bias.
  Index layer_offset(Index l) const;

  bool operator==(const NetworkSpec&) const = default;
};

struct ParameterSet {
  NetworkSpec spec;
  Vector values;

  /// Throws ContractViolation if the length does not match or an entry is
  /// not finite.
  void validate() const;
};

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState fresh(Index size, double learning_rate);
};

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Activations retained by a forward pass; `layers[l]` is the output of layer
/// l (post-activation for hidden layers), so `layers.back()` is the network
/// output.
struct ForwardCache {
  std::vector<Matrix> layers;
  const Matrix& output() const { return layers.back(); }
};

/// phi_z(theta) for every row z of `inputs`; returns N x output_dim.
Matrix forward(const ParameterSet& params, const SampleBatch& inputs);
ForwardCache forward_cached(const ParameterSet& params, const SampleBatch& inputs);

/// Gradient of sum(cotangent .* output) with respect to the parameters.
Vector backward(const ParameterSet& params, const SampleBatch& inputs,
                const Matrix& output_cotangent);
/// Same, reusing the activations of a previous forward_cached(params, inputs).
Vector backward(const ParameterSet& params, const SampleBatch& inputs,
                const ForwardCache& cache, const Matrix& output_cotangent);

/// One Adam update with bias correction. Throws DivergenceError on a
/// non-finite gradient; `run_label` is copied into the message.
std::pair<ParameterSet, AdamState> adam_step(const ParameterSet& params, const Vector& grad,
                                             const AdamState& state,
                                             std::string_view run_label = {});
/// In-place form of adam_step used by the training loop.
void adam_update(ParameterSet& params, const Vector& grad, AdamState& state,
                 std::string_view run_label = {});

/// Rows processed per parallel work item. Fixed so that reductions over rows
/// are summed in the same order for any thread count.
inline constexpr Index kRowBlock = 512;

}  // namespace minee::nn
