#include "minee/estimators.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "minee/errors.hpp"

namespace minee {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

void require_non_empty(const Vector& v, const char* what) {
  if (v.size() == 0) throw ContractViolation(std::string(what) + " is empty");
}

Vector normalized(const Vector& w, const char* what) {
  if ((w.array() < 0.0).any()) throw ContractViolation(std::string(what) + " has negative weights");
  const double total = w.sum();
  if (!(total > 0.0)) throw ContractViolation(std::string(what) + " weights sum to zero");
  return w / total;
}

}  // namespace

double log_mean_exp(const Vector& v) {
  require_non_empty(v, "log_mean_exp input");
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().mean());
}

double log_weighted_mean_exp(const Vector& v, const Vector& w) {
  require_non_empty(v, "log_weighted_mean_exp input");
  if (v.size() != w.size()) throw ContractViolation("values and weights differ in length");
  const Vector p = normalized(w, "log_weighted_mean_exp");
  double m = kNegInf;
  for (Index i = 0; i < v.size(); ++i) {
    if (p[i] > 0.0) m = std::max(m, v[i]);
  }
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    if (p[i] > 0.0) acc += p[i] * std::exp(v[i] - m);
  }
  return m + std::log(acc);
}

DVEstimate dv_estimate(const Vector& f_data, const Vector& f_ref) {
  require_non_empty(f_data, "f_data");
  require_non_empty(f_ref, "f_ref");
  DVEstimate e;
  e.mean_f_data = f_data.mean();
  e.log_mean_exp_f_ref = log_mean_exp(f_ref);
  e.value = e.mean_f_data - e.log_mean_exp_f_ref;
  return e;
}

DVEstimate dv_estimate_weighted(const Vector& f_data, const Vector& w_data, const Vector& f_ref,
                                const Vector& w_ref) {
  require_non_empty(f_data, "f_data");
  if (f_data.size() != w_data.size()) throw ContractViolation("f_data and w_data differ in length");
  const Vector p = normalized(w_data, "w_data");
  DVEstimate e;
  for (Index i = 0; i < f_data.size(); ++i) {
    if (p[i] > 0.0) e.mean_f_data += p[i] * f_data[i];
  }
  e.log_mean_exp_f_ref = log_weighted_mean_exp(f_ref, w_ref);
  e.value = e.mean_f_data - e.log_mean_exp_f_ref;
  return e;
}

double cross_entropy_estimate(const UniformBoxReference& ref, const SampleBatch& data) {
  if (data.rows() == 0) throw ContractViolation("no data for cross entropy");
  const ReferenceLogDensity d = ref_log_density(ref, data);
  if (!d.all_in_support()) {
    const Index row = d.out_of_support.front();
    throw SupportViolation("data row " + std::to_string(row) + " lies outside the reference box (" +
                               std::to_string(d.out_of_support.size()) + " rows in total)",
                           static_cast<std::size_t>(row));
  }
  // Every in-support row has density 1/Vol.
  return ref.log_volume();
}

double entropy_estimate(const UniformBoxReference& ref, const SampleBatch& data,
                        const Vector& f_data, const Vector& f_ref) {
  return cross_entropy_estimate(ref, data) - dv_estimate(f_data, f_ref).value;
}

MIHeads evaluate_heads(const MIParams& params, const SampleBatch& rows) {
  MIHeads out;
  out.f0 = nn::forward(params.head(Head::Joint), head_inputs(rows, params.split, Head::Joint)).col(0);
  out.f1 = nn::forward(params.head(Head::X), head_inputs(rows, params.split, Head::X)).col(0);
  out.f2 = nn::forward(params.head(Head::Y), head_inputs(rows, params.split, Head::Y)).col(0);
  return out;
}

double mi_estimate(const MIHeads& data, const MIHeads& ref) {
  return dv_estimate(data.f0, ref.f0).value - dv_estimate(data.f1, ref.f1).value -
         dv_estimate(data.f2, ref.f2).value;
}

double mi_estimate(const MIHeads& data, const MIHeads& data_weights, const MIHeads& ref,
                   const MIHeads& ref_weights) {
  return dv_estimate_weighted(data.f0, data_weights.f0, ref.f0, ref_weights.f0).value -
         dv_estimate_weighted(data.f1, data_weights.f1, ref.f1, ref_weights.f1).value -
         dv_estimate_weighted(data.f2, data_weights.f2, ref.f2, ref_weights.f2).value;
}

DVLoss dv_loss_and_gradient(const nn::ParameterSet& params, Index output_column,
                            const SampleBatch& data_batch, const SampleBatch& ref_batch,
                            std::optional<GradientEma> ema) {
  if (data_batch.rows() == 0 || ref_batch.rows() == 0) {
    throw ContractViolation("dv_loss_and_gradient needs non-empty batches");
  }
  if (output_column < 0 || output_column >= params.spec.output_dim) {
    throw ContractViolation("output column out of range");
  }
  if (ema && !(ema->rate > 0.0 && ema->rate <= 1.0)) {
    throw ContractViolation("gradient EMA rate must lie in (0, 1]");
  }

  const nn::ForwardCache data_cache = nn::forward_cached(params, data_batch);
  const nn::ForwardCache ref_cache = nn::forward_cached(params, ref_batch);
  const Vector phi_data = data_cache.output().col(output_column);
  const Vector phi_ref = ref_cache.output().col(output_column);

  const double mean_data = phi_data.mean();
  const double lme_ref = log_mean_exp(phi_ref);
  DVLoss out;
  out.loss = -mean_data + lme_ref;
  if (!std::isfinite(out.loss)) throw DivergenceError("non-finite DV loss", -1);

  double log_denominator = lme_ref;
  if (ema) {
    if (ema->log_value) {
      ema->log_value = log_add_exp(std::log1p(-ema->rate) + *ema->log_value,
                                   std::log(ema->rate) + lme_ref);
    } else {
      ema->log_value = lme_ref;
    }
    log_denominator = *ema->log_value;
    out.ema = ema;
  }

  const auto n_data = static_cast<double>(data_batch.rows());
  const auto n_ref = static_cast<double>(ref_batch.rows());
  Matrix cot_data = Matrix::Zero(data_batch.rows(), params.spec.output_dim);
  cot_data.col(output_column).setConstant(-1.0 / n_data);
  Matrix cot_ref = Matrix::Zero(ref_batch.rows(), params.spec.output_dim);
  cot_ref.col(output_column) = ((phi_ref.array() - log_denominator).exp() / n_ref).matrix();

  out.grad = nn::backward(params, data_batch, data_cache, cot_data);
  out.grad += nn::backward(params, ref_batch, ref_cache, cot_ref);
  if (!out.grad.allFinite()) throw DivergenceError("non-finite DV gradient", -1);
  return out;
}

Vector MILoss::flat_grad() const {
  Index n = 0;
  for (const auto& g : grads) n += g.size();
  Vector flat(n);
  Index offset = 0;
  for (const auto& g : grads) {
    flat.segment(offset, g.size()) = g;
    offset += g.size();
  }
  return flat;
}

MILoss mi_loss_and_gradient(const MIParams& params, const SampleBatch& data_batch,
                            const SampleBatch& ref_batch, const MILossOptions& options) {
  MILoss out;
  for (Head h : kAllHeads) {
    const auto& head_params = params.head(h);
    auto& grad = out.grads[static_cast<std::size_t>(h)];
    if (h != Head::Joint && options.joint_only) {
      grad = Vector::Zero(head_params.values.size());
      continue;
    }
    DVLoss term = dv_loss_and_gradient(head_params, 0, head_inputs(data_batch, params.split, h),
                                       head_inputs(ref_batch, params.split, h),
                                       h == Head::Joint ? options.joint_ema : std::nullopt);
    out.loss += term.loss;
    grad = std::move(term.grad);
    if (h == Head::Joint) out.joint_ema = term.ema;
  }
  return out;
}

}  // namespace minee
