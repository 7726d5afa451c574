#pragma once

#include <array>
#include <optional>

#include "minee/distributions.hpp"
#include "minee/mi_network.hpp"
#include "minee/nn.hpp"

namespace minee {

/// ln((1/n) sum exp(v_i)), evaluated with max subtraction.
double log_mean_exp(const Vector& v);
/// ln(sum w_i exp(v_i) / sum w_i) for non-negative weights.
double log_weighted_mean_exp(const Vector& v, const Vector& w);

/// Sample version of E[f(Z)] - ln E[exp f(Z')].
struct DVEstimate {
  double mean_f_data = 0.0;
  double log_mean_exp_f_ref = 0.0;
  double value = 0.0;
};

DVEstimate dv_estimate(const Vector& f_data, const Vector& f_ref);
/// Weighted variant for quadrature and enumeration: expectations become
/// normalized weighted sums.
DVEstimate dv_estimate_weighted(const Vector& f_data, const Vector& w_data, const Vector& f_ref,
                                const Vector& w_ref);

/// (1/N) sum ln 1/p_ref(z_i). Throws SupportViolation naming the first data
/// row outside the box.
double cross_entropy_estimate(const UniformBoxReference& ref, const SampleBatch& data);

/// Cross entropy minus the DV term.
double entropy_estimate(const UniformBoxReference& ref, const SampleBatch& data,
                        const Vector& f_data, const Vector& f_ref);

/// Head outputs over a set of rows (f1 over x-blocks, f2 over y-blocks).
struct MIHeads {
  Vector f0;
  Vector f1;
  Vector f2;
};

MIHeads evaluate_heads(const MIParams& params, const SampleBatch& rows);

/// dv(f0) - dv(f1) - dv(f2).
double mi_estimate(const MIHeads& data, const MIHeads& ref);
/// Weighted form; each head carries its own weights.
double mi_estimate(const MIHeads& data, const MIHeads& data_weights, const MIHeads& ref,
                   const MIHeads& ref_weights);

/// Moving average of E[exp phi(Z')] used as the gradient denominator of the
/// reference term. Stored as a logarithm so large outputs cannot overflow.
struct GradientEma {
  double rate = 0.01;
  std::optional<double> log_value;  // empty until the first batch
};

struct DVLoss {
  double loss = 0.0;  // -mean(phi on data) + logmeanexp(phi on ref)
  Vector grad;
  std::optional<GradientEma> ema;
};

/// Loss and gradient of the DV objective for output column `output_column`.
/// With `ema` set, the reference-term denominator is the updated moving
/// average instead of the batch mean. Throws DivergenceError on a non-finite
/// loss or gradient.
DVLoss dv_loss_and_gradient(const nn::ParameterSet& params, Index output_column,
                            const SampleBatch& data_batch, const SampleBatch& ref_batch,
                            std::optional<GradientEma> ema = std::nullopt);

struct MILossOptions {
  /// Train head 0 only (the marginal-product reference case).
  bool joint_only = false;
  /// Gradient moving average for head 0.
  std::optional<GradientEma> joint_ema;
};

struct MILoss {
  double loss = 0.0;
  std::array<Vector, 3> grads;  // per head; zero for heads not trained
  std::optional<GradientEma> joint_ema;

  /// Gradients concatenated in MIParams::flatten order.
  Vector flat_grad() const;
};

MILoss mi_loss_and_gradient(const MIParams& params, const SampleBatch& data_batch,
                            const SampleBatch& ref_batch, const MILossOptions& options = {});

}  // namespace minee
