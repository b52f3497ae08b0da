#include "commands.hpp"

#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "ibs/analysis.hpp"
#include "ibs/dataset_io.hpp"
#include "ibs/models/changeloc.hpp"
#include "ibs/models/choice.hpp"
#include "ibs/models/fourinarow.hpp"
#include "ibs/models/orientation.hpp"

namespace ibs::cli {

namespace fs = std::filesystem;

namespace {

/// Shared state of one command run: where files go and what every file is
/// stamped with.
class Output {
 public:
  Output(std::string command, const json& cfg, const RunOptions& opts)
      : command_(std::move(command)), cfg_(cfg), dir_(opts.out_dir), hash_(config_hash(cfg)), seed_(master_seed(cfg)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw DataError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    sidecar_ = {{"command", command_}, {"config", cfg_}, {"config_hash", hash_}, {"seed", seed_}};
  }

  [[nodiscard]] std::string stamp() const {
    return "# ibs " + command_ + " config_hash=" + hash_ + " seed=" + std::to_string(seed_) + "\n";
  }

  void write(const std::string& name, const std::string& body, bool stamped = true) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    if (stamped) out << stamp();
    out << body;
    out.close();
    if (!out) throw DataError("failed writing '" + path.string() + "'");
    files_.push_back(name);
  }

  void table(const std::string& name, const CurveTable& t) { write(name, t.to_csv()); }

  json& sidecar() { return sidecar_; }

  void finish() {
    sidecar_["outputs"] = files_;
    write(command_ + ".json", sidecar_.dump(2) + "\n", false);
  }

 private:
  std::string command_;
  const json& cfg_;
  fs::path dir_;
  std::string hash_;
  std::uint64_t seed_;
  json sidecar_;
  std::vector<std::string> files_;
};

template <class F>
void with_model(const std::string& name, F&& f) {
  if (name == "orientation") {
    f(OrientationModel{});
  } else if (name == "changeloc") {
    f(ChangeLocModel{});
  } else if (name == "fourinarow") {
    f(FourInARowModel{});
  } else if (name == "choice") {
    f(ChoiceModel{});
  } else {
    throw ConfigError("unknown model '" + name + "'");
  }
}

template <class M>
constexpr bool kGenerative = requires(const M& m, std::span<const double> t) { m.generate(1, t, std::uint64_t{0}); };

std::vector<double> theta_from(const json& cfg, const RunOptions& opts, const ParameterSpace& space) {
  std::vector<double> theta;
  if (opts.theta) {
    theta = *opts.theta;
  } else if (cfg.contains("theta")) {
    theta = get_or<std::vector<double>>(cfg, "theta", {});
  } else {
    throw ConfigError("no theta given (use --theta or a \"theta\" field)");
  }
  check_theta(space, theta, cfg);
  return theta;
}

template <class M>
DatasetFor<M> load_dataset(const json& cfg, const RunOptions& opts) {
  std::optional<std::string> path = opts.data_path;
  if (!path && cfg.contains("dataset")) path = get_or<std::string>(cfg, "dataset", "");
  if (!path) throw ConfigError("no dataset given (use --data or a \"dataset\" field)");
  std::ifstream in(*path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + *path + "'");
  return read_dataset<M>(in);
}

json estimator_json(const EstimatorSpec& spec) {
  json j = {{"label", describe(spec)}};
  if (const auto* e = std::get_if<IbsEstimator>(&spec)) {
    j["repeats"] = e->repeats;
    j["lower_bound"] = e->early_stop_threshold ? json(*e->early_stop_threshold) : json(nullptr);
    j["sample_cap"] = e->sample_cap ? json(*e->sample_cap) : json(nullptr);
  } else if (const auto* f = std::get_if<FixedEstimator>(&spec)) {
    j["samples"] = f->samples;
  }
  return j;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---------------------------------------------------------------------------

void cmd_generate(const json& cfg, const RunOptions& opts) {
  Output out("generate", cfg, opts);
  const std::string name = model_name(cfg);
  with_model(name, [&](const auto& model) {
    using M = std::decay_t<decltype(model)>;
    if constexpr (!kGenerative<M>) {
      throw ConfigError("model '" + name + "' cannot generate datasets without extra settings");
    } else {
      const auto theta = theta_from(cfg, opts, model.parameter_space());
      const int n = trial_count(cfg);
      const int count = get_or<int>(cfg, "datasets", 1);
      if (count < 1) throw ConfigError("datasets must be >= 1");
      json sets = json::array();
      for (int k = 0; k < count; ++k) {
        const std::uint64_t seed = derive_seed(master_seed(cfg), static_cast<std::uint64_t>(k));
        const auto data = model.generate(n, theta, seed);
        std::ostringstream body;
        write_dataset<M>(body, data);
        const std::string file = name + "_dataset_" + std::to_string(k) + ".csv";
        out.write(file, body.str(), false);
        json entry = {{"file", file}, {"seed", seed}, {"trials", data.size()}};
        if constexpr (std::is_same_v<M, ChangeLocModel>) {
          // stored in radians; summarized in degrees for readability
          std::vector<double> deg;
          for (const auto& t : data.trials) deg.push_back(ChangeLocModel::change_magnitude(t.stimulus) * 180.0 / std::numbers::pi);
          const auto s = quantile_summary(deg);
          entry["change_magnitude_deg"] = {{"median", s.median}, {"min", s.min}, {"max", s.max}};
        }
        sets.push_back(entry);
      }
      out.sidecar()["theta"] = theta;
      out.sidecar()["datasets"] = sets;
    }
  });
  out.finish();
}

template <class M>
EstimateReport run_estimate(const M& model, const DatasetFor<M>& data, std::span<const double> theta,
                            const EstimatorSpec& spec, std::uint64_t seed, int threads) {
  if (const auto* e = std::get_if<IbsEstimator>(&spec)) {
    EngineConfig cfg;
    cfg.repeats = e->repeats;
    cfg.early_stop_threshold = e->early_stop_threshold;
    cfg.per_trial_sample_cap = e->sample_cap;
    cfg.master_seed = seed;
    cfg.threads = threads;
    return estimate_parallel(model, data, theta, cfg);
  }
  if (const auto* f = std::get_if<FixedEstimator>(&spec)) {
    FixedConfig cfg;
    cfg.samples = f->samples;
    cfg.variant = f->variant;
    cfg.m_min = f->m_min;
    cfg.master_seed = seed;
    cfg.threads = threads;
    return estimate_fixed(model, data, theta, cfg);
  }
  if constexpr (ExactLikelihoodModel<M>) {
    EstimateReport rep;
    const auto params = model.prepare(theta);
    for (const auto& t : data.trials) {
      const double l = model.exact_trial_loglik(t.stimulus, t.response, params);
      rep.loglik += l;
      rep.per_trial.push_back(TrialRecord{{}, l, 0.0, false});
    }
    return rep;
  } else {
    throw ConfigError("model has no exact likelihood");
  }
}

void cmd_estimate(const json& cfg, const RunOptions& opts) {
  Output out("estimate", cfg, opts);
  with_model(model_name(cfg), [&](const auto& model) {
    using M = std::decay_t<decltype(model)>;
    const auto data = load_dataset<M>(cfg, opts);
    const auto theta = theta_from(cfg, opts, model.parameter_space());
    if (!cfg.contains("estimator")) throw ConfigError("no estimator configured");
    const auto spec = parse_estimator(cfg.at("estimator"), model_name(cfg), data.size());
    const auto rep = run_estimate(model, data, theta, spec, master_seed(cfg), opts.threads);

    CurveTable trials({"k"}, {"trial", "loglik", "variance", "truncated"});
    for (std::size_t i = 0; i < rep.per_trial.size(); ++i) {
      const auto& t = rep.per_trial[i];
      std::string ks;
      for (std::size_t r = 0; r < t.k.size(); ++r) {
        if (r) ks.push_back(';');
        ks += std::to_string(t.k[r]);
      }
      trials.add_row({ks}, {static_cast<double>(i), t.loglik, t.variance, t.truncated ? 1.0 : 0.0},
                     static_cast<std::int64_t>(t.k.size()), master_seed(cfg));
    }
    if (!rep.stopped_early) out.table("estimate_trials.csv", trials);
    auto& s = out.sidecar();
    s["estimator"] = estimator_json(spec);
    s["theta"] = theta;
    s["trials"] = data.size();
    s["loglik"] = rep.loglik;
    s["variance"] = finite_or_null(rep.variance);
    s["se"] = finite_or_null(std::sqrt(rep.variance));
    s["total_samples"] = rep.total_samples;
    s["stopped_early"] = rep.stopped_early;
    s["truncated"] = rep.truncated;
    s["truncated_trials"] = rep.truncated_trials;
  });
  out.finish();
}

void cmd_fit(const json& cfg, const RunOptions& opts) {
  Output out("fit", cfg, opts);
  with_model(model_name(cfg), [&](const auto& model) {
    using M = std::decay_t<decltype(model)>;
    const auto data = load_dataset<M>(cfg, opts);
    if (!cfg.contains("estimator")) throw ConfigError("no estimator configured");
    const auto spec = parse_estimator(cfg.at("estimator"), model_name(cfg), data.size());
    auto opt = parse_optimizer(cfg);
    const auto space = model.parameter_space();
    for (const auto& s : opt.starts) check_theta(space, s, cfg);
    const auto fit = fit_mle(model, data, spec, opt, opts.threads);

    std::vector<std::string> cols = {"start"};
    for (const auto& p : space.params()) cols.push_back(p.name + "_start");
    for (const auto& p : space.params()) cols.push_back(p.name + "_candidate");
    cols.insert(cols.end(), {"search_value", "reestimated", "reestimated_se", "evaluations", "samples", "noise_sd",
                             "budget_exhausted"});
    CurveTable starts({}, cols);
    for (std::size_t i = 0; i < fit.starts.size(); ++i) {
      const auto& s = fit.starts[i];
      std::vector<double> row = {static_cast<double>(i)};
      row.insert(row.end(), s.start.begin(), s.start.end());
      row.insert(row.end(), s.candidate.begin(), s.candidate.end());
      row.insert(row.end(), {s.search_value, s.reestimated, s.reestimated_se, static_cast<double>(s.evaluations),
                             static_cast<double>(s.samples), s.noise_sd, s.budget_exhausted ? 1.0 : 0.0});
      starts.add_row({}, std::move(row), s.evaluations, opt.seed);
    }
    out.table("fit_starts.csv", starts);
    auto& s = out.sidecar();
    s["estimator"] = estimator_json(spec);
    s["trials"] = data.size();
    s["theta_hat"] = fit.theta_hat;
    s["parameters"] = json::array();
    for (const auto& p : space.params()) s["parameters"].push_back(p.name);
    s["loglik"] = fit.loglik;
    s["loglik_se"] = finite_or_null(fit.loglik_se);
    s["evaluations"] = fit.evaluations_used;
    s["samples"] = fit.samples_used;
    s["budget_exhausted"] = fit.budget_exhausted;
    s["best_start"] = fit.best_start;
    s["starts"] = fit.starts.size();
    if constexpr (ExactLikelihoodModel<M>) s["exact_loglik_at_theta_hat"] = exact_loglik(model, data, fit.theta_hat);
  });
  out.finish();
}

void cmd_recover(const json& cfg, const RunOptions& opts) {
  Output out("recover", cfg, opts);
  const std::string name = model_name(cfg);
  with_model(name, [&](const auto& model) {
    using M = std::decay_t<decltype(model)>;
    if constexpr (!kGenerative<M>) {
      throw ConfigError("model '" + name + "' cannot generate datasets for recovery");
    } else {
      const auto grid = theta_grid(cfg, model.parameter_space());
      const int n = trial_count(cfg);
      const int datasets = get_or<int>(cfg, "datasets", 20);
      if (datasets < 1) throw ConfigError("datasets must be >= 1");
      std::vector<EstimatorSpec> variants;
      const json methods = cfg.contains("methods") ? cfg.at("methods") : json::array({cfg.value("estimator", json())});
      if (!methods.is_array() || methods.empty()) throw ConfigError("methods must be a non-empty list");
      for (const auto& m : methods) variants.push_back(parse_estimator(m, name, static_cast<std::size_t>(n)));
      const auto study = rmse_sweep(model, grid, variants, datasets, n, parse_optimizer(cfg), master_seed(cfg),
                                    opts.threads);
      out.table("recover_fits.csv", study.fits_table());
      out.table("recover_summary.csv", study.summary_table());
      std::size_t failed = 0;
      for (const auto& f : study.fits) failed += f.status != "ok";
      auto& s = out.sidecar();
      s["methods"] = study.methods;
      s["parameter_settings"] = grid.size();
      s["datasets_per_setting"] = datasets;
      s["fits"] = study.fits.size();
      s["failed_fits"] = failed;
    }
  });
  out.finish();
}

void cmd_calibrate(const json& cfg, const RunOptions& opts) {
  Output out("calibrate", cfg, opts);
  const std::string name = model_name(cfg);
  with_model(name, [&](const auto& model) {
    using M = std::decay_t<decltype(model)>;
    if constexpr (!ExactLikelihoodModel<M> || !kGenerative<M>) {
      throw ConfigError("calibration needs a model with an exact likelihood");
    } else {
      const json c = cfg.value("calibration", json::object());
      const auto theta = theta_from(cfg, opts, model.parameter_space());
      EngineConfig engine;
      engine.repeats = get_or<int>(c, "repeats", 1);
      if (engine.repeats < 1) throw ConfigError("calibration.repeats must be >= 1");
      engine.threads = opts.threads;
      const int datasets = get_or<int>(c, "datasets", 1000);
      if (datasets < 2) throw ConfigError("calibration.datasets must be >= 2");
      const auto rep = calibration_experiment(model, theta, trial_count(cfg), datasets, engine, master_seed(cfg));
      out.table("calibration_coverage.csv", rep.coverage_table());
      out.table("calibration_datasets.csv", rep.dataset_table());
      auto side = [](const CalibrationSide& cs) {
        json betas = json::object();
        for (std::size_t i = 0; i < std::size(kCoverageBetas); ++i) {
          betas[format_number(kCoverageBetas[i])] = cs.coverage[i];
        }
        return json{{"coverage", betas},
                    {"mean_z", cs.summary.mean},
                    {"sd_z", cs.summary.sd},
                    {"skew", cs.summary.skew},
                    {"excess_kurtosis", cs.summary.excess_kurtosis}};
      };
      auto& s = out.sidecar();
      s["theta"] = theta;
      s["datasets"] = datasets;
      s["exact_variance"] = side(rep.exact_variance);
      s["estimated_variance"] = side(rep.estimated_variance);
      s["total_samples_skew"] = rep.total_samples.skew;
    }
  });
  out.finish();
}

void cmd_curves(const json& cfg, const RunOptions& opts) {
  Output out("curves", cfg, opts);
  const json c = cfg.value("curves", json::object());
  std::vector<double> grid = get_or<std::vector<double>>(c, "p_grid", {});
  if (grid.empty()) {
    const int points = get_or<int>(c, "points", 50);
    if (points < 1) throw ConfigError("curves.points must be >= 1");
    grid = log_grid(get_or<double>(c, "p_min", 0.01), get_or<double>(c, "p_max", 1.0), static_cast<std::size_t>(points));
  }
  for (double p : grid) {
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("curves p values must lie in (0, 1]");
  }
  const auto m_list = get_or<std::vector<std::int64_t>>(c, "M", {1, 10, 100});
  const auto r_list = get_or<std::vector<int>>(c, "R", {1});
  const auto master_m = get_or<std::vector<std::int64_t>>(c, "master_M", {100});
  for (auto m : m_list) {
    if (m < 1) throw ConfigError("curves.M values must be >= 1");
  }
  for (auto r : r_list) {
    if (r < 1) throw ConfigError("curves.R values must be >= 1");
  }
  const double lmin = get_or<double>(c, "lambda_min", 0.1);
  const double lmax = get_or<double>(c, "lambda_max", 10.0);
  for (auto m : master_m) {
    if (m < 1 || lmax > static_cast<double>(m)) throw ConfigError("curves.master_M values must be >= lambda_max");
  }
  if (!(lmin > 0.0 && lmax >= lmin)) throw ConfigError("curves lambda range must satisfy 0 < min <= max");
  out.table("curves.csv", bias_variance_curves(grid, m_list, r_list));
  out.table("curves_master.csv", master_curve_table(log_grid(lmin, lmax, 41), master_m));
  std::vector<double> info;
  for (int i = 1; i < 1000; ++i) info.push_back(i / 1000.0);
  out.table("curves_info_bound.csv", info_bound_table(info));
  const auto reps = get_or<std::int64_t>(c, "replications", 0);
  if (reps < 0 || reps == 1) throw ConfigError("curves.replications must be 0 (off) or >= 2");
  if (reps > 0) {
    out.table("curves_monte_carlo.csv", bias_variance_monte_carlo(grid, m_list, r_list, reps, master_seed(cfg)));
  }
  out.sidecar()["p_grid"] = grid;
  out.finish();
}

void cmd_gain(const json& cfg, const RunOptions& opts) {
  Output out("gain", cfg, opts);
  const json g = cfg.value("gain", json::object());
  const int trials = get_or<int>(g, "trials", 500);
  const int draws = get_or<int>(g, "draws", 1000);
  const double mult = get_or<double>(g, "budget_multiplier", 10.0);
  const double p_min = get_or<double>(g, "p_min", 0.0);
  if (trials < 1 || draws < 1) throw ConfigError("gain.trials and gain.draws must be >= 1");
  if (!(mult >= 1.0)) throw ConfigError("gain.budget_multiplier must be >= 1");
  if (!(p_min >= 0.0 && p_min < 1.0)) throw ConfigError("gain.p_min must lie in [0, 1)");
  const auto study = allocation_gain_study(trials, draws, master_seed(cfg), mult, p_min);
  out.table("gain_draws.csv", study.table());
  auto summary = [](const QuantileSummary& q) {
    return json{{"median", q.median}, {"q25", q.q25}, {"q75", q.q75}, {"min", q.min}, {"max", q.max}};
  };
  out.sidecar()["continuous_gain"] = summary(study.continuous_summary);
  out.sidecar()["rounded_gain"] = summary(study.rounded_summary);
  out.finish();
}

void cmd_entropy(const json& cfg, const RunOptions& opts) {
  Output out("entropy", cfg, opts);
  const json e = cfg.value("entropy", json::object());
  std::optional<DiscreteSampler> p, q;
  try {
    p.emplace(get_or<std::vector<double>>(e, "p", {}));
    if (e.contains("q")) q.emplace(get_or<std::vector<double>>(e, "q", {}));
  } catch (const std::logic_error& err) {
    throw ConfigError(std::string("entropy: ") + err.what());
  }
  const auto runs = get_or<std::int64_t>(e, "runs", 100000);
  if (runs < 2) throw ConfigError("entropy.runs must be >= 2");
  std::optional<std::int64_t> cap;
  if (e.contains("sample_cap")) cap = get_or<std::int64_t>(e, "sample_cap", 0);
  const auto seed = master_seed(cfg);
  CurveTable table({"quantity"}, {"estimate", "se", "exact"});
  auto& s = out.sidecar();
  if (q) {
    if (!std::isfinite(p->cross_entropy(*q)) && !cap) {
      throw std::runtime_error("q gives zero probability to an outcome of p; IBS would never stop (set "
                               "entropy.sample_cap)");
    }
    const auto d = kl_and_cross_entropy(*p, *q, runs, seed, cap);
    table.add_row({"cross_entropy"}, {d.cross_entropy.estimate, std::sqrt(d.cross_entropy.variance), p->cross_entropy(*q)},
                  runs, derive_seed(seed, 0));
    table.add_row({"entropy"}, {d.entropy.estimate, std::sqrt(d.entropy.variance), p->entropy()}, runs,
                  derive_seed(seed, 1));
    table.add_row({"kl"}, {d.kl, std::sqrt(d.kl_variance), p->cross_entropy(*q) - p->entropy()}, runs, seed);
    s["truncated"] = d.cross_entropy.truncated || d.entropy.truncated;
  } else {
    const auto h = estimate_entropy(*p, runs, seed, cap);
    table.add_row({"entropy"}, {h.estimate, std::sqrt(h.variance), p->entropy()}, runs, seed);
    s["truncated"] = h.truncated;
  }
  out.table("entropy.csv", table);
  for (std::size_t r = 0; r < table.rows(); ++r) {
    s[table.labels(r)[0]] = {{"estimate", table.values(r)[0]}, {"se", table.values(r)[1]},
                             {"exact", finite_or_null(table.values(r)[2])}};
  }
  out.finish();
}

}  // namespace

std::vector<std::string> command_names() {
  return {"generate", "estimate", "fit", "recover", "calibrate", "curves", "gain", "entropy"};
}

void run_command(const std::string& command, const json& cfg, const RunOptions& opts) {
  if (opts.threads < 0) throw ConfigError("--threads must be >= 0");
  if (opts.threads > 0) omp_set_num_threads(opts.threads);
  if (command == "generate") return cmd_generate(cfg, opts);
  if (command == "estimate") return cmd_estimate(cfg, opts);
  if (command == "fit") return cmd_fit(cfg, opts);
  if (command == "recover") return cmd_recover(cfg, opts);
  if (command == "calibrate") return cmd_calibrate(cfg, opts);
  if (command == "curves") return cmd_curves(cfg, opts);
  if (command == "gain") return cmd_gain(cfg, opts);
  if (command == "entropy") return cmd_entropy(cfg, opts);
  throw ConfigError("unknown command '" + command + "'");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Inverse binomial sampling: log-likelihood estimation, fitting and analysis"};
  app.require_subcommand(1);
  std::optional<std::string> config_path;
  std::optional<std::string> preset_name;
  std::optional<std::uint64_t> seed;
  RunOptions opts;
  std::optional<std::string> theta_arg;
  app.add_option("--config", config_path, "JSON config file, merged over the preset");
  app.add_option("--preset", preset_name, "Built-in config")
      ->check(CLI::IsMember(preset_names()));
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", opts.threads, "Worker threads; 0 uses every core. Never changes results")
      ->check(CLI::NonNegativeNumber);
  for (const auto& name : command_names()) {
    auto* sub = app.add_subcommand(name);
    if (name == "estimate" || name == "fit") sub->add_option("--data", opts.data_path, "Dataset file");
    if (name == "generate" || name == "estimate" || name == "calibrate") {
      sub->add_option("--theta", theta_arg, "Comma-separated parameter vector");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (theta_arg) opts.theta = parse_number_list_arg(*theta_arg);
    const json cfg = resolve_config(preset_name, config_path, seed);
    run_command(command, cfg, opts);
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "ibs: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const json::exception& e) {
    std::cerr << "ibs: config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DataError& e) {
    std::cerr << "ibs: data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "ibs: estimation error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace ibs::cli
