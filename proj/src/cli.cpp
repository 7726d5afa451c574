#include "minee/cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "minee/csv.hpp"
#include "minee/errors.hpp"

namespace minee::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr double kConvergenceTolerance = 0.10;

RunConfig preset_config(Mode mode, Model model, double lr, Index ref_factor, long iterations) {
  RunConfig c;
  c.mode = mode;
  c.model = model;
  c.n_samples = 400;
  c.batch_size = 100;
  c.learning_rate = lr;
  c.ref_factor = ref_factor;
  c.ref_fresh_each_step = true;
  c.grad_ema_rate = 0.01;
  c.estimate_ema_rate = 0.01;
  c.iterations = iterations;
  c.eval_every = 100;
  c.seed = 1;
  return c;
}

std::string join_widths(const std::vector<Index>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) s += (i ? "," : "") + std::to_string(widths[i]);
  return s;
}

std::vector<Index> parse_widths(const std::string& text) {
  std::vector<Index> widths;
  if (text.empty() || text == "none") return widths;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const long w = csv::parse_long(item);
    if (w < 1) throw ContractViolation("hidden widths must be positive");
    widths.push_back(w);
  }
  return widths;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ContractViolation("expected true or false, got '" + text + "'");
}

template <class T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) throw ContractViolation(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ContractViolation(std::string("field '") + key + "' has the wrong type");
  }
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream os(path, std::ios::binary);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

struct RunFlags {
  std::string preset;
  std::string mode;
  std::string model;
  std::optional<double> rho;
  std::optional<int> d;
  std::optional<long> n;
  std::optional<long> batch_size;
  std::optional<double> lr;
  std::optional<long> ref_factor;
  std::string ref_fresh;
  std::optional<double> grad_ema_rate;
  std::optional<double> estimate_ema_rate;
  std::optional<long> iterations;
  std::optional<long> eval_every;
  std::optional<std::uint64_t> seed;
  std::string hidden;
  std::string activation;
  std::string out;
  bool progress = false;
};

RunConfig resolve(const RunFlags& f) {
  RunConfig c;
  if (!f.preset.empty()) {
    auto p = find_preset(f.preset);
    if (!p) throw ContractViolation("unknown preset '" + f.preset + "'");
    c = *p;
  }
  if (!f.mode.empty()) c.mode = parse_mode(f.mode);

  double rho = std::visit([](const auto& m) { return m.rho; }, c.model);
  int d = std::holds_alternative<CorrelatedGaussianModel>(c.model)
              ? std::get<CorrelatedGaussianModel>(c.model).d
              : 1;
  std::string type = std::holds_alternative<MixedGaussianModel>(c.model) ? "mg" : "hg";
  if (!f.model.empty()) type = f.model;
  if (f.rho) rho = *f.rho;
  if (f.d) d = *f.d;
  if (type == "mg") {
    if (f.d) throw ContractViolation("--d applies to the hg model only");
    c.model = MixedGaussianModel{rho};
  } else if (type == "hg") {
    c.model = CorrelatedGaussianModel{rho, d};
  } else {
    throw ContractViolation("unknown model '" + type + "'");
  }

  if (f.n) c.n_samples = *f.n;
  if (f.batch_size) c.batch_size = *f.batch_size;
  if (f.lr) c.learning_rate = *f.lr;
  if (f.ref_factor) c.ref_factor = *f.ref_factor;
  if (!f.ref_fresh.empty()) c.ref_fresh_each_step = parse_bool(f.ref_fresh);
  if (f.grad_ema_rate) c.grad_ema_rate = *f.grad_ema_rate;
  if (f.estimate_ema_rate) c.estimate_ema_rate = *f.estimate_ema_rate;
  if (f.iterations) c.iterations = *f.iterations;
  if (f.eval_every) c.eval_every = *f.eval_every;
  if (f.seed) c.seed = *f.seed;
  if (!f.hidden.empty()) c.hidden_widths = parse_widths(f.hidden);
  if (!f.activation.empty()) c.activation = nn::parse_activation(f.activation);
  c.validate();
  return c;
}

int do_run(const RunFlags& flags, std::ostream& out, std::ostream& err) {
  const RunConfig config = resolve(flags);
  const fs::path dir(flags.out);
  fs::create_directories(dir);

  const GroundTruth truth = ground_truth(config.model);
  const auto start = std::chrono::steady_clock::now();
  ProgressCallback progress;
  if (flags.progress) {
    progress = [&err](const TraceRow& r) {
      err << "iter " << r.iteration << "  raw " << r.raw_estimate << "  smoothed "
          << r.smoothed_estimate << "  loss " << r.loss << '\n';
    };
  }
  const RunResult result = run_estimation(config, progress);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  {
    std::ofstream trace_file(dir / "trace.csv", std::ios::binary);
    write_trace_csv(trace_file, result.trace);
    if (!trace_file) throw std::runtime_error("cannot write trace.csv");
  }

  ordered_json summary;
  summary["preset"] = flags.preset.empty() ? json(nullptr) : json(flags.preset);
  summary["model"] = describe(config.model);
  summary["config"] = config_to_json(config);
  summary["flags"] = config_to_flags(config);
  summary["ground_truth"] = {{"value", truth.value}, {"method", truth.method}, {"details", truth.details}};
  if (result.trace.empty()) {
    summary["final_raw_estimate"] = nullptr;
    summary["final_smoothed_estimate"] = nullptr;
  } else {
    summary["final_raw_estimate"] = result.trace.back().raw_estimate;
    summary["final_smoothed_estimate"] = result.trace.back().smoothed_estimate;
  }
  const auto conv = truth.value > 0.0
                        ? convergence_iteration(result.trace, truth.value, kConvergenceTolerance)
                        : std::nullopt;
  summary["convergence_iteration_10pct"] = conv ? json(*conv) : json(nullptr);
  summary["wall_clock_seconds"] = seconds;
  summary["diverged"] = result.divergence.has_value();
  if (result.divergence) {
    summary["divergence"] = {{"iteration", result.divergence->iteration},
                             {"message", result.divergence->message}};
  } else {
    summary["divergence"] = nullptr;
  }
  write_json(dir / "summary.json", summary);

  out << describe(config.model) << " " << to_string(config.mode) << " seed " << config.seed
      << ": " << result.trace.size() << " records, ground truth " << truth.value << " nats";
  if (!result.trace.empty()) out << ", final smoothed " << result.trace.back().smoothed_estimate;
  out << ", converged(10%) " << (conv ? std::to_string(*conv) : std::string("never")) << '\n';
  if (result.divergence) {
    err << "run diverged: " << result.divergence->message << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int do_ground_truth(const std::string& model_name, double rho, int d, int resolution,
                    std::ostream& out, std::ostream& err) {
  Model model;
  if (model_name == "mg") {
    model = MixedGaussianModel{rho};
  } else if (model_name == "hg") {
    model = CorrelatedGaussianModel{rho, d};
  } else {
    throw ContractViolation("unknown model '" + model_name + "'");
  }
  try {
    const GroundTruth truth = ground_truth(model, resolution);
    out << "model: " << describe(model) << '\n'
        << "ground_truth_nats: " << csv::format_double(truth.value) << '\n'
        << "method: " << truth.method << '\n'
        << "details: " << truth.details << '\n';
  } catch (const UnconvergedQuadrature& e) {
    err << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

int do_compare(const std::vector<std::string>& dirs, std::ostream& out, std::ostream& err) {
  struct Row {
    std::string name;
    std::optional<double> estimate;
    double truth;
    std::optional<long> conv;
    bool diverged;
  };
  std::vector<Row> rows;
  for (const auto& d : dirs) {
    const fs::path file = fs::path(d) / "summary.json";
    try {
      std::ifstream is(file);
      if (!is) throw ContractViolation("cannot open");
      const json j = json::parse(is);
      Row r;
      fs::path p(d);
      r.name = p.filename().empty() ? p.parent_path().filename().string() : p.filename().string();
      const json& est = j.at("final_smoothed_estimate");
      if (!est.is_null()) r.estimate = est.get<double>();
      r.truth = require<double>(j.at("ground_truth"), "value");
      const json& conv = j.at("convergence_iteration_10pct");
      if (!conv.is_null()) r.conv = conv.get<long>();
      r.diverged = require<bool>(j, "diverged");
      rows.push_back(r);
    } catch (const std::exception& e) {
      err << "malformed summary " << file.string() << ": " << e.what() << '\n';
      return kExitFailure;
    }
  }
  out << std::left << std::setw(24) << "run" << std::right << std::setw(14) << "estimate"
      << std::setw(14) << "truth" << std::setw(12) << "rel_error" << std::setw(14)
      << "conv_10pct" << std::setw(10) << "diverged" << '\n';
  for (const Row& r : rows) {
    out << std::left << std::setw(24) << r.name << std::right << std::fixed << std::setprecision(5);
    if (r.estimate) {
      out << std::setw(14) << *r.estimate << std::setw(14) << r.truth << std::setw(12)
          << (r.truth != 0.0 ? std::abs(*r.estimate - r.truth) / r.truth : std::nan(""));
    } else {
      out << std::setw(14) << "-" << std::setw(14) << r.truth << std::setw(12) << "-";
    }
    out << std::setw(14) << (r.conv ? std::to_string(*r.conv) : std::string("never"))
        << std::setw(10) << (r.diverged ? "yes" : "no") << '\n';
    out.unsetf(std::ios::floatfield);
  }
  return kExitOk;
}

}  // namespace

const std::vector<ExperimentPreset>& presets() {
  static const std::vector<ExperimentPreset> all = {
      {"mg09-minee", preset_config(Mode::MineeUniform, MixedGaussianModel{0.9}, 1e-4, 10, 40000)},
      {"mg09-mine", preset_config(Mode::Mine, MixedGaussianModel{0.9}, 1e-4, 10, 80000)},
      {"hg09d6-minee",
       preset_config(Mode::MineeUniform, CorrelatedGaussianModel{0.9, 6}, 5e-5, 300, 12000)},
      {"hg09d6-mine", preset_config(Mode::Mine, CorrelatedGaussianModel{0.9, 6}, 5e-5, 300, 30000)},
  };
  return all;
}

std::optional<RunConfig> find_preset(const std::string& name) {
  for (const auto& p : presets()) {
    if (p.name == name) return p.config;
  }
  return std::nullopt;
}

ordered_json config_to_json(const RunConfig& c) {
  ordered_json j;
  j["mode"] = std::string(to_string(c.mode));
  if (const auto* mg = std::get_if<MixedGaussianModel>(&c.model)) {
    j["model"] = {{"type", "mg"}, {"rho", mg->rho}};
  } else {
    const auto& hg = std::get<CorrelatedGaussianModel>(c.model);
    j["model"] = {{"type", "hg"}, {"rho", hg.rho}, {"d", hg.d}};
  }
  j["n_samples"] = c.n_samples;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["ref_factor"] = c.ref_factor;
  j["ref_fresh_each_step"] = c.ref_fresh_each_step;
  j["grad_ema_rate"] = c.grad_ema_rate;
  j["estimate_ema_rate"] = c.estimate_ema_rate;
  j["iterations"] = c.iterations;
  j["eval_every"] = c.eval_every;
  j["seed"] = c.seed;
  j["hidden_widths"] = c.hidden_widths;
  j["activation"] = std::string(nn::to_string(c.activation));
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.mode = parse_mode(require<std::string>(j, "mode"));
  if (!j.contains("model")) throw ContractViolation("missing field 'model'");
  const json& m = j.at("model");
  const auto type = require<std::string>(m, "type");
  if (type == "mg") {
    c.model = MixedGaussianModel{require<double>(m, "rho")};
  } else if (type == "hg") {
    c.model = CorrelatedGaussianModel{require<double>(m, "rho"), require<int>(m, "d")};
  } else {
    throw ContractViolation("unknown model type '" + type + "'");
  }
  c.n_samples = require<Index>(j, "n_samples");
  c.batch_size = require<Index>(j, "batch_size");
  c.learning_rate = require<double>(j, "learning_rate");
  c.ref_factor = require<Index>(j, "ref_factor");
  c.ref_fresh_each_step = require<bool>(j, "ref_fresh_each_step");
  c.grad_ema_rate = require<double>(j, "grad_ema_rate");
  c.estimate_ema_rate = require<double>(j, "estimate_ema_rate");
  c.iterations = require<long>(j, "iterations");
  c.eval_every = require<long>(j, "eval_every");
  c.seed = require<std::uint64_t>(j, "seed");
  c.hidden_widths = require<std::vector<Index>>(j, "hidden_widths");
  c.activation = nn::parse_activation(require<std::string>(j, "activation"));
  c.validate();
  return c;
}

std::vector<std::string> config_to_flags(const RunConfig& c) {
  std::vector<std::string> f = {"--mode", std::string(to_string(c.mode))};
  if (const auto* mg = std::get_if<MixedGaussianModel>(&c.model)) {
    f.insert(f.end(), {"--model", "mg", "--rho", csv::format_double(mg->rho)});
  } else {
    const auto& hg = std::get<CorrelatedGaussianModel>(c.model);
    f.insert(f.end(), {"--model", "hg", "--rho", csv::format_double(hg.rho), "--d", std::to_string(hg.d)});
  }
  f.insert(f.end(), {"--n", std::to_string(c.n_samples),
                     "--batch-size", std::to_string(c.batch_size),
                     "--lr", csv::format_double(c.learning_rate),
                     "--ref-factor", std::to_string(c.ref_factor),
                     "--ref-fresh", c.ref_fresh_each_step ? "true" : "false",
                     "--grad-ema-rate", csv::format_double(c.grad_ema_rate),
                     "--estimate-ema-rate", csv::format_double(c.estimate_ema_rate),
                     "--iterations", std::to_string(c.iterations),
                     "--eval-every", std::to_string(c.eval_every),
                     "--seed", std::to_string(c.seed),
                     "--hidden", c.hidden_widths.empty() ? "none" : join_widths(c.hidden_widths),
                     "--activation", std::string(nn::to_string(c.activation))});
  return f;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural entropy and mutual information estimation", "minee"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run = app.add_subcommand("run", "Train an estimator and write trace.csv + summary.json");
  run->add_option("--preset", rf.preset, "mg09-minee | mg09-mine | hg09d6-minee | hg09d6-mine");
  run->add_option("--mode", rf.mode)->check(CLI::IsMember({"minee", "mine"}));
  run->add_option("--model", rf.model)->check(CLI::IsMember({"mg", "hg"}));
  run->add_option("--rho", rf.rho);
  run->add_option("--d", rf.d);
  run->add_option("--n", rf.n, "Number of data samples N");
  run->add_option("--batch-size", rf.batch_size);
  run->add_option("--lr", rf.lr);
  run->add_option("--ref-factor", rf.ref_factor, "N' = ref_factor * N");
  run->add_option("--ref-fresh", rf.ref_fresh, "true: new reference batch every step")
      ->check(CLI::IsMember({"true", "false"}));
  run->add_option("--grad-ema-rate", rf.grad_ema_rate);
  run->add_option("--estimate-ema-rate", rf.estimate_ema_rate);
  run->add_option("--iterations", rf.iterations);
  run->add_option("--eval-every", rf.eval_every);
  run->add_option("--seed", rf.seed);
  run->add_option("--hidden", rf.hidden, "Comma-separated hidden widths, e.g. 100,100,100");
  run->add_option("--activation", rf.activation)->check(CLI::IsMember({"elu", "relu", "tanh"}));
  run->add_option("--out", rf.out, "Output directory")->required();
  run->add_flag("--progress", rf.progress, "Print each recorded estimate to stderr");

  std::string gt_model;
  double gt_rho = 0.9;
  int gt_d = 1;
  int gt_resolution = kDefaultQuadratureResolution;
  auto* gt = app.add_subcommand("ground-truth", "Print the ground-truth mutual information");
  gt->add_option("--model", gt_model)->required()->check(CLI::IsMember({"mg", "hg"}));
  gt->add_option("--rho", gt_rho);
  gt->add_option("--d", gt_d);
  gt->add_option("--resolution", gt_resolution, "Coarse quadrature intervals per axis (mg)");

  std::vector<std::string> compare_dirs;
  auto* cmp = app.add_subcommand("compare", "Tabulate summaries of finished runs");
  cmp->add_option("dirs", compare_dirs, "Run directories")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (run->parsed()) return do_run(rf, out, err);
    if (gt->parsed()) return do_ground_truth(gt_model, gt_rho, gt_d, gt_resolution, out, err);
    if (cmp->parsed()) return do_compare(compare_dirs, out, err);
  } catch (const ContractViolation& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace minee::cli
