#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "minee/distributions.hpp"
#include "minee/estimators.hpp"
#include "minee/mi_network.hpp"
#include "minee/nn.hpp"

namespace minee {

enum class Mode {
  MineeUniform,  // three DV terms against the uniform bounding-box reference
  Mine,          // one DV term against resampled marginals, EMA-corrected gradient
};

std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

struct RunConfig {
  Mode mode = Mode::MineeUniform;
  Model model = MixedGaussianModel{0.9};
  Index n_samples = 400;
  Index batch_size = 100;
  double learning_rate = 1e-4;
  Index ref_factor = 10;  // N' = ref_factor * N; ignored in Mine mode
  bool ref_fresh_each_step = true;
  double grad_ema_rate = 0.01;      // Mine mode only
  double estimate_ema_rate = 0.01;  // per training step
  long iterations = 40000;
  long eval_every = 100;
  std::uint64_t seed = 1;
  std::vector<Index> hidden_widths = {100, 100, 100};
  nn::Activation activation = nn::Activation::ELU;

  /// Throws ContractViolation describing the first invalid field.
  void validate() const;
  MINetworkSpec network() const;
};

struct TraceRow {
  long iteration = 0;
  double raw_estimate = 0.0;
  double smoothed_estimate = 0.0;
  double loss = 0.0;  // minibatch loss of the step that produced the row
  bool operator==(const TraceRow&) const = default;
};

using Trace = std::vector<TraceRow>;

struct DivergenceInfo {
  long iteration = 0;
  std::string message;
};

struct RunResult {
  Trace trace;
  MIParams params;
  std::optional<DivergenceInfo> divergence;
};

using ProgressCallback = std::function<void(const TraceRow&)>;

/// Runs one estimation. A divergence stops the run and is reported in the
/// result; the trace up to that point is kept.
RunResult run_estimation(const RunConfig& config, const ProgressCallback& progress = {});

/// Entropy of a single sample set against its uniform bounding box.
struct EntropyRunConfig {
  Index batch_size = 100;
  double learning_rate = 1e-4;
  Index ref_factor = 10;
  bool ref_fresh_each_step = true;
  double estimate_ema_rate = 0.01;
  long iterations = 5000;
  long eval_every = 100;
  std::uint64_t seed = 1;
  std::vector<Index> hidden_widths = {100, 100, 100};
  nn::Activation activation = nn::Activation::ELU;
  double box_margin = 0.0;
};

struct EntropyRunResult {
  Trace trace;
  nn::ParameterSet params;
  std::optional<UniformBoxReference> box;
  std::optional<DivergenceInfo> divergence;
};

EntropyRunResult run_entropy_estimation(const SampleBatch& data, const EntropyRunConfig& config,
                                        const ProgressCallback& progress = {});

/// out[0] = values[0]; out[t] = (1 - rate) out[t-1] + rate values[t].
std::vector<double> smooth(const std::vector<double>& values, double rate);

/// Per-record rate equivalent to applying `per_step_rate` at every training
/// step while the raw estimate is held between records.
double record_smoothing_rate(double per_step_rate, long eval_every);

/// First recorded iteration after which the smoothed estimate never leaves
/// ground_truth * (1 +- tolerance_fraction).
std::optional<long> convergence_iteration(const Trace& trace, double ground_truth,
                                          double tolerance_fraction);

/// Shuffled minibatches without replacement; reshuffles after each pass.
class EpochSampler {
 public:
  EpochSampler(Index n, Index batch_size, std::mt19937_64& rng);
  std::vector<Index> next(std::mt19937_64& rng);

 private:
  std::vector<Index> order_;
  Index batch_size_;
  Index position_ = 0;
};

SampleBatch gather_rows(const SampleBatch& rows, const std::vector<Index>& indices);

/// Header iteration,raw_estimate,smoothed_estimate,loss.
void write_trace_csv(std::ostream& os, const Trace& trace);
Trace read_trace_csv(std::istream& is);

}  // namespace minee
