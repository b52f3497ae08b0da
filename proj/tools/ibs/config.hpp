#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ibs/optimizer.hpp"
#include "json.hpp"

namespace ibs::cli {

using nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

/// Invalid or inconsistent configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lapse rates below this are rejected unless "allow_small_gamma" is set.
inline constexpr double kGammaFloor = 0.01;

std::vector<std::string> preset_names();
/// Built-in configuration; throws ConfigError for an unknown name.
json preset(const std::string& name);

/// Preset (if any), then the config file merged over it, then the seed
/// override. The result is what gets hashed and echoed in every sidecar.
json resolve_config(const std::optional<std::string>& preset_name, const std::optional<std::string>& config_path,
                    const std::optional<std::uint64_t>& seed);

/// 16 hex digits of FNV-1a over the canonical dump of the config.
std::string config_hash(const json& cfg);

std::string model_name(const json& cfg);
std::uint64_t master_seed(const json& cfg);
int trial_count(const json& cfg);

/// Chance log-likelihood per trial: log of the number of possible responses.
double chance_loglik_per_trial(const std::string& model);

/// Parses {"type": "ibs" | "fixed" | "exact", ...}. An IBS "lower_bound" of
/// "chance" becomes -N * chance_loglik_per_trial(model).
EstimatorSpec parse_estimator(const json& j, const std::string& model, std::size_t n_trials);

OptimizerConfig parse_optimizer(const json& cfg);

/// Bounds check plus the lapse-rate floor.
void check_theta(const ParameterSpace& space, const std::vector<double>& theta, const json& cfg);

/// Explicit "theta_grid" list, or a "grid" block sweeping each parameter in
/// turn across its plausible range.
std::vector<std::vector<double>> theta_grid(const json& cfg, const ParameterSpace& space);

std::vector<double> parse_number_list_arg(const std::string& s);

/// Typed field access with ConfigError on mismatch.
template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

}  // namespace ibs::cli
