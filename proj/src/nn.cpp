#include "minee/nn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>

#include "minee/errors.hpp"

namespace minee::nn {
namespace {

using ConstWeights = Eigen::Map<const Matrix>;
using WeightsView = Eigen::Map<Matrix>;

void activate(Activation act, Eigen::Ref<Matrix> z) {
  switch (act) {
    case Activation::ELU:
      // Branch-free so Eigen vectorizes it; exact for z > 0.
      z.array() = z.array().max(0.0) + (z.array().min(0.0).exp() - 1.0);
      break;
    case Activation::ReLU:
      z = z.cwiseMax(0.0);
      break;
    case Activation::Tanh:
      z = z.array().tanh();
      break;
  }
}

// Derivative expressed through the activation value a = act(z).
void scale_by_derivative(Activation act, const Eigen::Ref<const Matrix>& a,
                         Eigen::Ref<Matrix> g) {
  switch (act) {
    case Activation::ELU:
      g.array() *= a.array().min(0.0) + 1.0;
      break;
    case Activation::ReLU:
      g.array() *= (a.array() > 0.0).cast<double>();
      break;
    case Activation::Tanh:
      g = g.cwiseProduct((1.0 - a.array().square()).matrix());
      break;
  }
}

Index block_count(Index rows) { return (rows + kRowBlock - 1) / kRowBlock; }

void check_inputs(const ParameterSet& params, const SampleBatch& inputs) {
  if (params.values.size() != params.spec.parameter_count()) {
    throw ContractViolation("parameter vector length " + std::to_string(params.values.size()) +
                            " does not match network (" +
                            std::to_string(params.spec.parameter_count()) + ")");
  }
  if (inputs.cols() != params.spec.input_dim) {
    throw ContractViolation("input has " + std::to_string(inputs.cols()) +
                            " columns, network expects " +
                            std::to_string(params.spec.input_dim));
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::ELU:
      return "elu";
    case Activation::ReLU:
      return "relu";
    case Activation::Tanh:
      return "tanh";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "elu") return Activation::ELU;
  if (lower == "relu") return Activation::ReLU;
  if (lower == "tanh") return Activation::Tanh;
  throw ContractViolation("unknown activation '" + std::string(name) + "'");
}

void NetworkSpec::validate() const {
  if (input_dim < 1) throw ContractViolation("input_dim must be >= 1");
  if (output_dim < 1) throw ContractViolation("output_dim must be >= 1");
  for (Index w : hidden_widths) {
    if (w < 1) throw ContractViolation("hidden widths must be >= 1");
  }
}

std::pair<Index, Index> NetworkSpec::layer_shape(Index l) const {
  const Index n_hidden = static_cast<Index>(hidden_widths.size());
  const Index fan_in = l == 0 ? input_dim : hidden_widths[static_cast<std::size_t>(l - 1)];
  const Index fan_out = l == n_hidden ? output_dim : hidden_widths[static_cast<std::size_t>(l)];
  return {fan_in, fan_out};
}

Index NetworkSpec::layer_offset(Index l) const {
  Index offset = 0;
  for (Index k = 0; k < l; ++k) {
    const auto [in, out] = layer_shape(k);
    offset += out * (in + 1);
  }
  return offset;
}

Index NetworkSpec::parameter_count() const { return layer_offset(layer_count()); }

void ParameterSet::validate() const {
  spec.validate();
  if (values.size() != spec.parameter_count()) {
    throw ContractViolation("parameter vector length mismatch");
  }
  if (!values.allFinite()) throw ContractViolation("parameter vector has non-finite entries");
}

AdamState AdamState::fresh(Index size, double learning_rate) {
  if (!(learning_rate > 0.0)) throw ContractViolation("learning rate must be positive");
  AdamState s;
  s.first_moment = Vector::Zero(size);
  s.second_moment = Vector::Zero(size);
  s.learning_rate = learning_rate;
  return s;
}

ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParameterSet p{spec, Vector::Zero(spec.parameter_count())};
  std::mt19937_64 rng(seed);
  for (Index l = 0; l < spec.layer_count(); ++l) {
    const auto [in, out] = spec.layer_shape(l);
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    double* w = p.values.data() + spec.layer_offset(l);
    for (Index i = 0; i < in * out; ++i) w[i] = u(rng);
  }
  return p;
}

ForwardCache forward_cached(const ParameterSet& params, const SampleBatch& inputs) {
  check_inputs(params, inputs);
  const NetworkSpec& spec = params.spec;
  const Index rows = inputs.rows();
  const Index n_layers = spec.layer_count();

  ForwardCache cache;
  cache.layers.resize(static_cast<std::size_t>(n_layers));
  for (Index l = 0; l < n_layers; ++l) {
    cache.layers[static_cast<std::size_t>(l)].resize(rows, spec.layer_shape(l).second);
  }

  const Index blocks = block_count(rows);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index r0 = b * kRowBlock;
    const Index len = std::min(kRowBlock, rows - r0);
    for (Index l = 0; l < n_layers; ++l) {
      const auto [in, out] = spec.layer_shape(l);
      const double* base = params.values.data() + spec.layer_offset(l);
      ConstWeights w(base, out, in);
      Eigen::Map<const Eigen::RowVectorXd> bias(base + out * in, out);
      const Eigen::Ref<const Matrix> prev =
          l == 0 ? Eigen::Ref<const Matrix>(inputs.middleRows(r0, len))
                 : Eigen::Ref<const Matrix>(
                       cache.layers[static_cast<std::size_t>(l - 1)].middleRows(r0, len));
      auto cur = cache.layers[static_cast<std::size_t>(l)].middleRows(r0, len);
      cur.noalias() = prev * w.transpose();
      cur.rowwise() += bias;
      if (l + 1 < n_layers) activate(spec.activation, cur);
    }
  }
  return cache;
}

Matrix forward(const ParameterSet& params, const SampleBatch& inputs) {
  ForwardCache cache = forward_cached(params, inputs);
  return std::move(cache.layers.back());
}

Vector backward(const ParameterSet& params, const SampleBatch& inputs, const ForwardCache& cache,
                const Matrix& output_cotangent) {
  check_inputs(params, inputs);
  const NetworkSpec& spec = params.spec;
  const Index rows = inputs.rows();
  const Index n_layers = spec.layer_count();
  if (output_cotangent.rows() != rows || output_cotangent.cols() != spec.output_dim) {
    throw ContractViolation("cotangent shape does not match network output");
  }
  if (static_cast<Index>(cache.layers.size()) != n_layers ||
      cache.output().rows() != rows) {
    throw ContractViolation("forward cache does not match inputs");
  }

  const Index n_params = spec.parameter_count();
  const Index blocks = block_count(rows);
  Matrix partial = Matrix::Zero(std::max<Index>(blocks, 1), n_params);

#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index r0 = b * kRowBlock;
    const Index len = std::min(kRowBlock, rows - r0);
    double* grad = partial.row(b).data();
    Matrix g = output_cotangent.middleRows(r0, len);
    Matrix dz;
    for (Index l = n_layers - 1; l >= 0; --l) {
      const auto [in, out] = spec.layer_shape(l);
      const Index offset = spec.layer_offset(l);
      if (l + 1 < n_layers) {
        scale_by_derivative(spec.activation,
                            cache.layers[static_cast<std::size_t>(l)].middleRows(r0, len), g);
      }
      const Eigen::Ref<const Matrix> prev =
          l == 0 ? Eigen::Ref<const Matrix>(inputs.middleRows(r0, len))
                 : Eigen::Ref<const Matrix>(
                       cache.layers[static_cast<std::size_t>(l - 1)].middleRows(r0, len));
      WeightsView gw(grad + offset, out, in);
      gw.noalias() += g.transpose() * prev;
      Eigen::Map<Eigen::RowVectorXd> gb(grad + offset + out * in, out);
      gb += g.colwise().sum();
      if (l > 0) {
        ConstWeights w(params.values.data() + offset, out, in);
        dz.noalias() = g * w;
        g.swap(dz);
      }
    }
  }

  Vector total = Vector::Zero(n_params);
  for (Index b = 0; b < blocks; ++b) total += partial.row(b).transpose();
  return total;
}

Vector backward(const ParameterSet& params, const SampleBatch& inputs,
                const Matrix& output_cotangent) {
  return backward(params, inputs, forward_cached(params, inputs), output_cotangent);
}

void adam_update(ParameterSet& params, const Vector& grad, AdamState& state,
                 std::string_view run_label) {
  const Index n = params.values.size();
  if (grad.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ContractViolation("adam_step: gradient/state length does not match parameters");
  }
  if (!grad.allFinite()) {
    std::string msg = "non-finite gradient in Adam step " + std::to_string(state.step_count + 1);
    if (!run_label.empty()) msg += " of run '" + std::string(run_label) + "'";
    throw DivergenceError(msg, state.step_count + 1);
  }
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  params.values.array() -= state.learning_rate * (state.first_moment.array() / c1) /
                           ((state.second_moment.array() / c2).sqrt() + state.epsilon);
}

std::pair<ParameterSet, AdamState> adam_step(const ParameterSet& params, const Vector& grad,
                                             const AdamState& state,
                                             std::string_view run_label) {
  ParameterSet p = params;
  AdamState s = state;
  adam_update(p, grad, s, run_label);
  return {std::move(p), std::move(s)};
}

}  // namespace minee::nn
