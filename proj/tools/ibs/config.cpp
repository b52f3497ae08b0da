#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ibs/analysis.hpp"
#include "ibs/text_format.hpp"

namespace ibs::cli {

namespace {

json ibs_spec(int repeats) { return {{"type", "ibs"}, {"repeats", repeats}, {"lower_bound", "chance"}}; }
json fixed_spec(int samples) { return {{"type", "fixed"}, {"samples", samples}}; }
json exact_spec() { return {{"type", "exact"}}; }

json common_analysis() {
  return {
      {"calibration", {{"datasets", 1000}, {"repeats", 1}}},
      {"curves",
       {{"p_min", 0.01},
        {"p_max", 1.0},
        {"points", 50},
        {"M", {1, 10, 100}},
        {"R", {1, 2, 4}},
        {"master_M", {100}},
        {"lambda_min", 0.1},
        {"lambda_max", 10.0},
        {"replications", 0}}},
      {"gain", {{"trials", 500}, {"draws", 1000}, {"budget_multiplier", 10.0}}},
      {"entropy", {{"p", {0.5, 0.25, 0.25}}, {"runs", 100000}}},
  };
}

}  // namespace

std::vector<std::string> preset_names() { return {"orientation-paper", "changeloc-paper", "fourinarow-paper"}; }

json preset(const std::string& name) {
  json j = common_analysis();
  if (name == "orientation-paper") {
    j.update({
        {"model", "orientation"},
        {"theta", {std::log(2.0), 0.1, 0.1}},
        {"trials", 600},
        {"datasets", 20},
        {"estimator", ibs_spec(1)},
        {"methods", {exact_spec(), ibs_spec(1), ibs_spec(2), fixed_spec(10)}},
        {"grid", {{"baseline", {std::log(2.0), 0.1, 0.1}}, {"increments", 10}}},
    });
  } else if (name == "changeloc-paper") {
    j.update({
        {"model", "changeloc"},
        {"theta", {std::log(0.3), 0.1}},
        {"trials", 400},
        {"datasets", 20},
        {"estimator", ibs_spec(1)},
        {"methods", {exact_spec(), ibs_spec(1), fixed_spec(20)}},
        // eta sweeps run at gamma = 0.03, gamma sweeps at eta = log 0.3
        {"grid",
         {{"baseline", {std::log(0.3), 0.03}},
          {"sweep_baselines", {{std::log(0.3), 0.03}, {std::log(0.3), 0.1}}},
          {"increments", 10}}},
    });
  } else if (name == "fourinarow-paper") {
    j.update({
        {"model", "fourinarow"},
        {"theta", {0.0, 5.0, 0.2}},
        {"trials", 100},
        {"datasets", 20},
        {"estimator", ibs_spec(1)},
        {"methods", {ibs_spec(1)}},
        {"grid", {{"baseline", {0.0, 5.0, 0.2}}, {"increments", 10}}},
    });
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  j["seed"] = 0;
  j["preset"] = name;
  return j;
}

json resolve_config(const std::optional<std::string>& preset_name, const std::optional<std::string>& config_path,
                    const std::optional<std::uint64_t>& seed) {
  json cfg = preset_name ? preset(*preset_name) : json::object();
  if (config_path) {
    std::ifstream in(*config_path);
    if (!in) throw ConfigError("cannot open config file '" + *config_path + "'");
    json file;
    try {
      file = json::parse(in, nullptr, true, true);
    } catch (const json::exception& e) {
      throw ConfigError("config file '" + *config_path + "': " + e.what());
    }
    if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
    cfg.merge_patch(file);
  }
  if (seed) cfg["seed"] = *seed;
  if (!cfg.contains("model")) throw ConfigError("config names no model (use --preset or a \"model\" field)");
  return cfg;
}

std::string config_hash(const json& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.dump())));
  return buf;
}

std::string model_name(const json& cfg) {
  const auto m = get_or<std::string>(cfg, "model", "");
  if (m != "orientation" && m != "changeloc" && m != "fourinarow" && m != "choice") {
    throw ConfigError("unknown model '" + m + "'");
  }
  return m;
}

std::uint64_t master_seed(const json& cfg) {
  if (!cfg.contains("seed")) return 0;
  const auto& s = cfg.at("seed");
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
    throw ConfigError("seed must be a non-negative integer");
  }
  return s.get<std::uint64_t>();
}

int trial_count(const json& cfg) {
  const std::string m = model_name(cfg);
  int fallback = 100;
  if (m == "orientation") fallback = 600;
  if (m == "changeloc") fallback = 400;
  const int n = get_or<int>(cfg, "trials", fallback);
  if (n < 1) throw ConfigError("trials must be >= 1");
  return n;
}

double chance_loglik_per_trial(const std::string& model) {
  if (model == "orientation") return std::log(2.0);
  if (model == "changeloc") return std::log(6.0);
  if (model == "fourinarow") return std::log(20.0);
  throw ConfigError("model '" + model + "' has no chance level; give lower_bound as a number");
}

EstimatorSpec parse_estimator(const json& j, const std::string& model, std::size_t n_trials) {
  if (!j.is_object()) throw ConfigError("estimator must be an object");
  const auto type = get_or<std::string>(j, "type", "");
  if (type == "ibs") {
    IbsEstimator e;
    e.repeats = get_or<int>(j, "repeats", 1);
    if (e.repeats < 1) throw ConfigError("ibs repeats must be >= 1");
    if (j.contains("lower_bound") && !j.at("lower_bound").is_null()) {
      const auto& lb = j.at("lower_bound");
      if (lb.is_string()) {
        const auto s = lb.get<std::string>();
        if (s == "chance") {
          e.early_stop_threshold = -static_cast<double>(n_trials) * chance_loglik_per_trial(model);
        } else if (s != "none") {
          throw ConfigError("lower_bound must be a number, \"chance\" or \"none\"");
        }
      } else if (lb.is_number()) {
        e.early_stop_threshold = lb.get<double>();
      } else {
        throw ConfigError("lower_bound must be a number, \"chance\" or \"none\"");
      }
    }
    if (j.contains("sample_cap") && !j.at("sample_cap").is_null()) {
      e.sample_cap = get_or<std::int64_t>(j, "sample_cap", 0);
      if (*e.sample_cap < 1) throw ConfigError("sample_cap must be >= 1");
    }
    return e;
  }
  if (type == "fixed") {
    FixedEstimator e;
    e.samples = get_or<std::int64_t>(j, "samples", 10);
    if (e.samples < 1) throw ConfigError("fixed samples must be >= 1");
    const auto variant = get_or<std::string>(j, "variant", "standard");
    if (variant == "standard") {
      e.variant = FixedVariant::Standard;
    } else if (variant == "naive") {
      e.variant = FixedVariant::Naive;
    } else if (variant == "bounded") {
      e.variant = FixedVariant::Bounded;
    } else {
      throw ConfigError("unknown fixed-sampling variant '" + variant + "'");
    }
    e.m_min = get_or<double>(j, "m_min", 0.5);
    if (!(e.m_min > 0.0 && e.m_min <= 1.0)) throw ConfigError("m_min must lie in (0, 1]");
    return e;
  }
  if (type == "exact") {
    if (model == "fourinarow") throw ConfigError("fourinarow has no exact likelihood");
    return ExactEstimator{};
  }
  throw ConfigError("estimator type must be \"ibs\", \"fixed\" or \"exact\"");
}

OptimizerConfig parse_optimizer(const json& cfg) {
  OptimizerConfig o;
  o.seed = master_seed(cfg);
  const json opt = cfg.contains("optimizer") ? cfg.at("optimizer") : json::object();
  if (!opt.is_object()) throw ConfigError("optimizer must be an object");
  o.max_evaluations = get_or<int>(opt, "max_evaluations", 0);
  if (o.max_evaluations < 0) throw ConfigError("optimizer.max_evaluations must be >= 0");
  o.incumbent_reestimates = get_or<int>(opt, "incumbent_reestimates", 1);
  if (o.incumbent_reestimates < 0) throw ConfigError("optimizer.incumbent_reestimates must be >= 0");
  o.final_precision_multiplier = get_or<int>(opt, "final_precision_multiplier", 10);
  if (o.final_precision_multiplier < 1) throw ConfigError("optimizer.final_precision_multiplier must be >= 1");
  o.starts = get_or<std::vector<std::vector<double>>>(opt, "starts", {});
  return o;
}

void check_theta(const ParameterSpace& space, const std::vector<double>& theta, const json& cfg) {
  if (theta.size() != space.dim()) {
    throw ConfigError("theta has " + std::to_string(theta.size()) + " values, model expects " +
                      std::to_string(space.dim()));
  }
  for (std::size_t j = 0; j < space.dim(); ++j) {
    if (space[j].name == "gamma" && theta[j] < kGammaFloor && !get_or<bool>(cfg, "allow_small_gamma", false)) {
      throw ConfigError("gamma = " + format_number(theta[j]) +
                        " is below the floor 0.01; near-zero lapse rates make the likelihood fragile "
                        "(set \"allow_small_gamma\": true to override)");
    }
  }
  try {
    space.validate(theta);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<std::vector<double>> theta_grid(const json& cfg, const ParameterSpace& space) {
  std::vector<std::vector<double>> grid;
  if (cfg.contains("theta_grid")) {
    grid = get_or<std::vector<std::vector<double>>>(cfg, "theta_grid", {});
  } else if (cfg.contains("grid")) {
    const auto& g = cfg.at("grid");
    const auto baseline = get_or<std::vector<double>>(g, "baseline", {});
    const auto sweeps = get_or<std::vector<std::vector<double>>>(g, "sweep_baselines", {});
    const int inc = get_or<int>(g, "increments", 10);
    if (inc < 2) throw ConfigError("grid.increments must be >= 2");
    if (!sweeps.empty() && sweeps.size() != space.dim()) {
      throw ConfigError("grid.sweep_baselines needs one baseline per parameter");
    }
    for (std::size_t j = 0; j < space.dim(); ++j) {
      const auto& base = sweeps.empty() ? baseline : sweeps[j];
      if (base.size() != space.dim()) throw ConfigError("grid baseline has the wrong length");
      for (int k = 0; k < inc; ++k) {
        auto theta = base;
        theta[j] = space[j].plb + (space[j].pub - space[j].plb) * k / (inc - 1);
        grid.push_back(theta);
      }
    }
  } else if (cfg.contains("theta")) {
    grid.push_back(get_or<std::vector<double>>(cfg, "theta", {}));
  }
  if (grid.empty()) throw ConfigError("recover needs theta_grid, grid or theta");
  for (const auto& t : grid) check_theta(space, t, cfg);
  return grid;
}

std::vector<double> parse_number_list_arg(const std::string& s) {
  try {
    return parse_number_list(s);
  } catch (const DataError& e) {
    throw ConfigError(std::string("--theta: ") + e.what());
  }
}

}  // namespace ibs::cli
