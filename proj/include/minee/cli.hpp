#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "minee/trainer.hpp"

namespace minee::cli {

struct ExperimentPreset {
  std::string name;
  RunConfig config;
};

/// mg09-minee, mg09-mine, hg09d6-minee, hg09d6-mine.
const std::vector<ExperimentPreset>& presets();
std::optional<RunConfig> find_preset(const std::string& name);

nlohmann::ordered_json config_to_json(const RunConfig& config);
/// Throws ContractViolation on missing or mistyped fields.
RunConfig config_from_json(const nlohmann::json& j);
/// Flags that reproduce `config` with no preset.
std::vector<std::string> config_to_flags(const RunConfig& config);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // divergence, unconverged oracle, bad summary
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace minee::cli
