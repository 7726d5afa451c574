#include "minee/nn_reference.hpp"

#include <cmath>
#include <vector>

#include "minee/errors.hpp"

namespace minee::nn::reference {
namespace {

double act(Activation a, double z) {
  switch (a) {
    case Activation::ELU:
      return z > 0.0 ? z : std::exp(z) - 1.0;
    case Activation::ReLU:
      return z > 0.0 ? z : 0.0;
    case Activation::Tanh:
      return std::tanh(z);
  }
  return z;
}

double act_grad(Activation a, double z) {
  switch (a) {
    case Activation::ELU:
      return z > 0.0 ? 1.0 : std::exp(z);
    case Activation::ReLU:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

void check(const ParameterSet& p, const SampleBatch& x) {
  if (x.cols() != p.spec.input_dim || p.values.size() != p.spec.parameter_count()) {
    throw ContractViolation("reference: shape mismatch");
  }
}

// Pre-activations of every layer for one input row.
std::vector<std::vector<double>> row_preactivations(const ParameterSet& p, const double* x) {
  const NetworkSpec& s = p.spec;
  std::vector<std::vector<double>> zs;
  std::vector<double> a(x, x + s.input_dim);
  for (Index l = 0; l < s.layer_count(); ++l) {
    const auto [in, out] = s.layer_shape(l);
    const double* w = p.values.data() + s.layer_offset(l);
    const double* b = w + in * out;
    std::vector<double> z(static_cast<std::size_t>(out));
    for (Index o = 0; o < out; ++o) {
      double acc = b[o];
      for (Index i = 0; i < in; ++i) acc += w[o * in + i] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = acc;
    }
    zs.push_back(z);
    if (l + 1 < s.layer_count()) {
      for (double& v : z) v = act(s.activation, v);
    }
    a = std::move(z);
  }
  return zs;
}

}  // namespace

Matrix forward(const ParameterSet& params, const SampleBatch& inputs) {
  check(params, inputs);
  Matrix out(inputs.rows(), params.spec.output_dim);
  for (Index r = 0; r < inputs.rows(); ++r) {
    const auto zs = row_preactivations(params, inputs.row(r).data());
    for (Index o = 0; o < params.spec.output_dim; ++o) out(r, o) = zs.back()[static_cast<std::size_t>(o)];
  }
  return out;
}

Vector backward(const ParameterSet& params, const SampleBatch& inputs,
                const Matrix& output_cotangent) {
  check(params, inputs);
  const NetworkSpec& s = params.spec;
  if (output_cotangent.rows() != inputs.rows() || output_cotangent.cols() != s.output_dim) {
    throw ContractViolation("reference: cotangent shape mismatch");
  }
  Vector grad = Vector::Zero(s.parameter_count());
  const Index n_layers = s.layer_count();
  for (Index r = 0; r < inputs.rows(); ++r) {
    const double* x = inputs.row(r).data();
    const auto zs = row_preactivations(params, x);
    std::vector<double> delta(static_cast<std::size_t>(s.output_dim));
    for (Index o = 0; o < s.output_dim; ++o) delta[static_cast<std::size_t>(o)] = output_cotangent(r, o);
    for (Index l = n_layers - 1; l >= 0; --l) {
      const auto [in, out] = s.layer_shape(l);
      const Index offset = s.layer_offset(l);
      const double* w = params.values.data() + offset;
      // Input to this layer.
      std::vector<double> a(static_cast<std::size_t>(in));
      for (Index i = 0; i < in; ++i) {
        a[static_cast<std::size_t>(i)] =
            l == 0 ? x[i] : act(s.activation, zs[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(i)]);
      }
      for (Index o = 0; o < out; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        for (Index i = 0; i < in; ++i) grad[offset + o * in + i] += d * a[static_cast<std::size_t>(i)];
        grad[offset + out * in + o] += d;
      }
      if (l > 0) {
        std::vector<double> prev(static_cast<std::size_t>(in), 0.0);
        for (Index i = 0; i < in; ++i) {
          double acc = 0.0;
          for (Index o = 0; o < out; ++o) acc += w[o * in + i] * delta[static_cast<std::size_t>(o)];
          prev[static_cast<std::size_t>(i)] =
              acc * act_grad(s.activation, zs[static_cast<std::size_t>(l - 1)][static_cast<std::size_t>(i)]);
        }
        delta = std::move(prev);
      }
    }
  }
  return grad;
}

}  // namespace minee::nn::reference
