#include "minee/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "minee/csv.hpp"
#include "minee/errors.hpp"
#include "minee/rng.hpp"

namespace minee {
namespace {

constexpr std::uint64_t kTrainStream = 100;
constexpr std::uint64_t kEvalStream = 101;

// Raw estimates are folded into the smoothed value at record time.
class Smoother {
 public:
  explicit Smoother(double rate) : rate_(rate) {}
  double push(double raw) {
    value_ = first_ ? raw : (1.0 - rate_) * value_ + rate_ * raw;
    first_ = false;
    return value_;
  }

 private:
  double rate_;
  double value_ = 0.0;
  bool first_ = true;
};

void check_rate(double r, const char* name) {
  if (!(r > 0.0 && r <= 1.0)) throw ContractViolation(std::string(name) + " must lie in (0, 1]");
}

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::Mine ? "mine" : "minee"; }

Mode parse_mode(std::string_view name) {
  if (name == "minee") return Mode::MineeUniform;
  if (name == "mine") return Mode::Mine;
  throw ContractViolation("unknown mode '" + std::string(name) + "'");
}

void RunConfig::validate() const {
  std::visit([](const auto& m) { m.validate(); }, model);
  if (n_samples < 1) throw ContractViolation("n_samples must be positive");
  if (batch_size < 1 || batch_size > n_samples) {
    throw ContractViolation("batch_size must lie in [1, n_samples]");
  }
  if (!(learning_rate > 0.0)) throw ContractViolation("learning_rate must be positive");
  if (ref_factor < 1) throw ContractViolation("ref_factor must be positive");
  check_rate(grad_ema_rate, "grad_ema_rate");
  check_rate(estimate_ema_rate, "estimate_ema_rate");
  if (iterations < 0) throw ContractViolation("iterations must be non-negative");
  if (eval_every < 1) throw ContractViolation("eval_every must be positive");
  network().head_spec(Head::Joint).validate();
}

MINetworkSpec RunConfig::network() const {
  MINetworkSpec s;
  s.split = column_split(model);
  s.hidden_widths = hidden_widths;
  s.activation = activation;
  return s;
}

EpochSampler::EpochSampler(Index n, Index batch_size, std::mt19937_64& rng)
    : order_(static_cast<std::size_t>(n)), batch_size_(batch_size) {
  if (n < 1 || batch_size < 1) throw ContractViolation("EpochSampler needs n, batch_size >= 1");
  std::iota(order_.begin(), order_.end(), Index{0});
  std::shuffle(order_.begin(), order_.end(), rng);
}

std::vector<Index> EpochSampler::next(std::mt19937_64& rng) {
  const auto n = static_cast<Index>(order_.size());
  if (position_ >= n) {
    std::shuffle(order_.begin(), order_.end(), rng);
    position_ = 0;
  }
  const Index end = std::min(n, position_ + batch_size_);
  std::vector<Index> batch(order_.begin() + position_, order_.begin() + end);
  position_ = end;
  return batch;
}

SampleBatch gather_rows(const SampleBatch& rows, const std::vector<Index>& indices) {
  SampleBatch out(static_cast<Index>(indices.size()), rows.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(static_cast<Index>(i)) = rows.row(indices[i]);
  return out;
}

double record_smoothing_rate(double per_step_rate, long eval_every) {
  check_rate(per_step_rate, "smoothing rate");
  if (eval_every < 1) throw ContractViolation("eval_every must be positive");
  if (eval_every == 1) return per_step_rate;
  return -std::expm1(static_cast<double>(eval_every) * std::log1p(-per_step_rate));
}

RunResult run_estimation(const RunConfig& config, const ProgressCallback& progress) {
  config.validate();
  const MINetworkSpec net = config.network();
  const ColumnSplit split = net.split;
  const bool mine = config.mode == Mode::Mine;

  RunResult result;
  result.params = init_mi_params(net, config.seed);
  if (config.iterations == 0) return result;

  const SampleBatch data = sample_model(config.model, config.n_samples, config.seed);
  std::mt19937_64 train_rng(derive_seed(config.seed, kTrainStream));
  std::mt19937_64 eval_rng(derive_seed(config.seed, kEvalStream));
  EpochSampler data_batches(config.n_samples, config.batch_size, train_rng);

  const Index ref_batch_rows = config.batch_size * config.ref_factor;
  std::optional<UniformBoxReference> box;
  std::optional<ResampledMarginalReference> marginals;
  SampleBatch ref_pool;  // N' reference rows for evaluation (and fixed-pool training)
  std::optional<EpochSampler> pool_batches;
  if (mine) {
    marginals = ResampledMarginalReference::from_joint(data, split);
  } else {
    box = box_from_samples(data);
    ref_pool = ref_sample(*box, config.ref_factor * config.n_samples, eval_rng);
    if (!config.ref_fresh_each_step) {
      pool_batches.emplace(ref_pool.rows(), ref_batch_rows, train_rng);
    }
  }

  std::array<nn::AdamState, 3> adam;
  for (Head h : kAllHeads) {
    adam[static_cast<std::size_t>(h)] =
        nn::AdamState::fresh(result.params.head(h).values.size(), config.learning_rate);
  }
  MILossOptions options;
  options.joint_only = mine;
  if (mine) options.joint_ema = GradientEma{config.grad_ema_rate, std::nullopt};

  Smoother smoother(record_smoothing_rate(config.estimate_ema_rate, config.eval_every));
  const std::string label = describe(config.model) + "/" + std::string(to_string(config.mode)) +
                            "/seed=" + std::to_string(config.seed);

  for (long t = 1; t <= config.iterations; ++t) {
    const SampleBatch batch = gather_rows(data, data_batches.next(train_rng));
    SampleBatch ref_batch;
    if (mine) {
      ref_batch = ref_sample(*marginals, batch.rows(), train_rng);
    } else if (config.ref_fresh_each_step) {
      ref_batch = ref_sample(*box, ref_batch_rows, train_rng);
    } else {
      ref_batch = gather_rows(ref_pool, pool_batches->next(train_rng));
    }

    double loss = 0.0;
    try {
      MILoss step = mi_loss_and_gradient(result.params, batch, ref_batch, options);
      loss = step.loss;
      options.joint_ema = step.joint_ema;
      for (Head h : kAllHeads) {
        if (mine && h != Head::Joint) continue;
        nn::adam_update(result.params.head(h), step.grads[static_cast<std::size_t>(h)],
                        adam[static_cast<std::size_t>(h)], label);
      }
    } catch (const DivergenceError& e) {
      result.divergence = DivergenceInfo{t, std::string(e.what()) + " at iteration " +
                                                std::to_string(t) + " (" + label + ")"};
      return result;
    }

    if (t % config.eval_every != 0) continue;
    double raw = 0.0;
    if (mine) {
      const SampleBatch shuffled = ref_sample(*marginals, config.n_samples, eval_rng);
      const Vector f_data = nn::forward(result.params.head(Head::Joint), data).col(0);
      const Vector f_ref = nn::forward(result.params.head(Head::Joint), shuffled).col(0);
      raw = dv_estimate(f_data, f_ref).value;
    } else {
      raw = mi_estimate(evaluate_heads(result.params, data), evaluate_heads(result.params, ref_pool));
    }
    if (!std::isfinite(raw)) {
      result.divergence =
          DivergenceInfo{t, "non-finite estimate at iteration " + std::to_string(t) + " (" + label + ")"};
      return result;
    }
    TraceRow row{t, raw, smoother.push(raw), loss};
    result.trace.push_back(row);
    if (progress) progress(row);
  }
  return result;
}

EntropyRunResult run_entropy_estimation(const SampleBatch& data, const EntropyRunConfig& config,
                                        const ProgressCallback& progress) {
  if (data.rows() < 1) throw ContractViolation("no data for entropy estimation");
  if (config.batch_size < 1 || config.batch_size > data.rows()) {
    throw ContractViolation("batch_size must lie in [1, rows]");
  }
  if (config.ref_factor < 1 || config.eval_every < 1 || config.iterations < 0) {
    throw ContractViolation("invalid entropy run configuration");
  }
  nn::NetworkSpec spec;
  spec.input_dim = data.cols();
  spec.hidden_widths = config.hidden_widths;
  spec.activation = config.activation;

  EntropyRunResult result;
  result.params = nn::init_params(spec, config.seed);
  result.box = box_from_samples(data, config.box_margin);
  if (config.iterations == 0) return result;

  std::mt19937_64 train_rng(derive_seed(config.seed, kTrainStream));
  std::mt19937_64 eval_rng(derive_seed(config.seed, kEvalStream));
  EpochSampler data_batches(data.rows(), config.batch_size, train_rng);
  const Index ref_batch_rows = config.batch_size * config.ref_factor;
  const SampleBatch ref_pool = ref_sample(*result.box, config.ref_factor * data.rows(), eval_rng);
  std::optional<EpochSampler> pool_batches;
  if (!config.ref_fresh_each_step) pool_batches.emplace(ref_pool.rows(), ref_batch_rows, train_rng);

  nn::AdamState adam = nn::AdamState::fresh(result.params.values.size(), config.learning_rate);
  Smoother smoother(record_smoothing_rate(config.estimate_ema_rate, config.eval_every));
  const double cross_entropy = cross_entropy_estimate(*result.box, data);

  for (long t = 1; t <= config.iterations; ++t) {
    const SampleBatch batch = gather_rows(data, data_batches.next(train_rng));
    const SampleBatch ref_batch = config.ref_fresh_each_step
                                      ? ref_sample(*result.box, ref_batch_rows, train_rng)
                                      : gather_rows(ref_pool, pool_batches->next(train_rng));
    double loss = 0.0;
    try {
      DVLoss step = dv_loss_and_gradient(result.params, 0, batch, ref_batch);
      loss = step.loss;
      nn::adam_update(result.params, step.grad, adam, "entropy");
    } catch (const DivergenceError& e) {
      result.divergence = DivergenceInfo{t, std::string(e.what()) + " at iteration " + std::to_string(t)};
      return result;
    }
    if (t % config.eval_every != 0) continue;
    const Vector f_data = nn::forward(result.params, data).col(0);
    const Vector f_ref = nn::forward(result.params, ref_pool).col(0);
    const double raw = cross_entropy - dv_estimate(f_data, f_ref).value;
    TraceRow row{t, raw, smoother.push(raw), loss};
    result.trace.push_back(row);
    if (progress) progress(row);
  }
  return result;
}

std::vector<double> smooth(const std::vector<double>& values, double rate) {
  check_rate(rate, "smoothing rate");
  std::vector<double> out;
  out.reserve(values.size());
  Smoother s(rate);
  for (double v : values) out.push_back(s.push(v));
  return out;
}

std::optional<long> convergence_iteration(const Trace& trace, double ground_truth,
                                          double tolerance_fraction) {
  if (!(ground_truth > 0.0)) throw ContractViolation("ground truth must be positive");
  const double band = tolerance_fraction * ground_truth;
  std::optional<long> first;
  for (const TraceRow& row : trace) {
    const bool inside = std::abs(row.smoothed_estimate - ground_truth) <= band;
    if (!inside) {
      first.reset();
    } else if (!first) {
      first = row.iteration;
    }
  }
  return first;
}

void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << "iteration,raw_estimate,smoothed_estimate,loss\n";
  for (const TraceRow& r : trace) {
    os << r.iteration << ',' << csv::format_double(r.raw_estimate) << ','
       << csv::format_double(r.smoothed_estimate) << ',' << csv::format_double(r.loss) << '\n';
  }
}

Trace read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || csv::split_fields(line) != std::vector<std::string_view>{
                                     "iteration", "raw_estimate", "smoothed_estimate", "loss"}) {
    throw ContractViolation("trace CSV has an unexpected header");
  }
  Trace trace;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = csv::split_fields(line);
    if (f.size() != 4) throw ContractViolation("trace CSV row has " + std::to_string(f.size()) + " fields");
    TraceRow row{csv::parse_long(f[0]), csv::parse_double(f[1]), csv::parse_double(f[2]),
                 csv::parse_double(f[3])};
    if (!trace.empty() && row.iteration <= trace.back().iteration) {
      throw ContractViolation("trace iterations must be strictly increasing");
    }
    trace.push_back(row);
  }
  return trace;
}

}  // namespace minee
