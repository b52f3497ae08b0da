#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ibs/engine.hpp"
#include "ibs/models/model.hpp"
#include "ibs/parameter_space.hpp"

namespace ibs {

/// One noisy (or exact) evaluation of the log-likelihood.
struct Evaluation {
  double value = 0.0;
  /// Variance of `value`; NaN when the estimator does not report one.
  double variance = 0.0;
  std::int64_t samples = 0;
  bool stopped_early = false;
};

/// Objective to maximize. The seed selects the random streams of the
/// evaluation so that whole runs are reproducible.
using Objective = std::function<Evaluation(std::span<const double> theta, std::uint64_t seed)>;

struct IbsEstimator {
  int repeats = 1;
  std::optional<double> early_stop_threshold;
  std::optional<std::int64_t> sample_cap;
};

struct FixedEstimator {
  std::int64_t samples = 10;
  FixedVariant variant = FixedVariant::Standard;
  double m_min = 0.5;
};

struct ExactEstimator {};

using EstimatorSpec = std::variant<IbsEstimator, FixedEstimator, ExactEstimator>;

/// Short label such as "ibs(R=2)", "fixed(M=10)" or "exact".
std::string describe(const EstimatorSpec& spec);

/// Same estimator with `multiplier` times the repeats (IBS) or samples (fixed).
EstimatorSpec scale_precision(const EstimatorSpec& spec, int multiplier);

struct OptimizerConfig {
  /// Objective evaluations per start; 0 means 500 * D.
  int max_evaluations = 0;
  /// Empty means default_starts(space).
  std::vector<std::vector<double>> starts;
  /// Extra evaluations of the incumbent after every unsuccessful poll.
  int incumbent_reestimates = 1;
  int final_precision_multiplier = 10;
  std::uint64_t seed = 0;
  /// Parameters searched in log-odds. Empty means every parameter named
  /// "gamma" whose plausible range lies strictly inside (0, 1).
  std::optional<std::vector<std::size_t>> logit_params;
  /// Mesh size, in plausible-range units, at which a noiseless search stops.
  double min_mesh = 1e-7;
};

struct StartReport {
  std::vector<double> start;
  std::vector<double> candidate;
  /// Running mean of the incumbent's evaluations when the search ended.
  double search_value = 0.0;
  double reestimated = 0.0;
  double reestimated_se = 0.0;
  int evaluations = 0;
  std::int64_t samples = 0;
  /// Per-evaluation noise standard deviation used by the search.
  double noise_sd = 0.0;
  bool budget_exhausted = false;
};

struct FitResult {
  std::vector<double> theta_hat;
  /// From a fresh re-estimation at theta_hat, never the search's incumbent.
  double loglik = 0.0;
  /// NaN when the estimator has no calibrated variance.
  double loglik_se = 0.0;
  int evaluations_used = 0;
  std::int64_t samples_used = 0;
  bool budget_exhausted = false;
  std::size_t best_start = 0;
  std::vector<StartReport> starts;
};

/// All 2^D combinations of the points one third and two thirds of the way
/// across each plausible range.
std::vector<std::vector<double>> default_starts(const ParameterSpace& space);

/// Multi-start noise-aware maximization. `search` drives the search; each
/// start's candidate is then scored once with `final_estimate`.
FitResult maximize(const Objective& search, const Objective& final_estimate, const ParameterSpace& space,
                   const OptimizerConfig& cfg);

/// Plain compass search on a deterministic function, used as a reference.
/// Steps are in plausible-range units.
std::vector<double> compass_search(const std::function<double(std::span<const double>)>& f,
                                   const ParameterSpace& space, std::span<const double> x0, double initial_step = 0.25,
                                   double tolerance = 1e-7, int max_evaluations = 100000);

template <SimulatorModel M>
Evaluation evaluate_loglik(const M& model, const DatasetFor<M>& data, std::span<const double> theta,
                           const EstimatorSpec& spec, std::uint64_t seed, int threads = 0) {
  if (const auto* ibs = std::get_if<IbsEstimator>(&spec)) {
    EngineConfig cfg;
    cfg.repeats = ibs->repeats;
    cfg.early_stop_threshold = ibs->early_stop_threshold;
    cfg.per_trial_sample_cap = ibs->sample_cap;
    cfg.master_seed = seed;
    cfg.threads = threads;
    cfg.record_trials = false;
    const auto rep = estimate_parallel(model, data, theta, cfg);
    return {rep.loglik, rep.variance, rep.total_samples, rep.stopped_early};
  }
  if (const auto* fixed = std::get_if<FixedEstimator>(&spec)) {
    FixedConfig cfg;
    cfg.samples = fixed->samples;
    cfg.variant = fixed->variant;
    cfg.m_min = fixed->m_min;
    cfg.master_seed = seed;
    cfg.threads = threads;
    const auto rep = estimate_fixed(model, data, theta, cfg);
    return {rep.loglik, std::numeric_limits<double>::quiet_NaN(), rep.total_samples, false};
  }
  if constexpr (ExactLikelihoodModel<M>) {
    return {exact_loglik(model, data, theta), 0.0, 0, false};
  } else {
    throw std::invalid_argument("model '" + data.model + "' has no exact likelihood");
  }
}

template <SimulatorModel M>
Objective make_objective(const M& model, const DatasetFor<M>& data, EstimatorSpec spec, int threads = 0) {
  return [&model, &data, spec, threads](std::span<const double> theta, std::uint64_t seed) {
    return evaluate_loglik(model, data, theta, spec, seed, threads);
  };
}

template <SimulatorModel M>
FitResult fit_mle(const M& model, const DatasetFor<M>& data, const EstimatorSpec& spec, const OptimizerConfig& cfg,
                  int threads = 0) {
  if (cfg.final_precision_multiplier < 1) throw std::invalid_argument("fit_mle: precision multiplier must be >= 1");
  return maximize(make_objective(model, data, spec, threads),
                  make_objective(model, data, scale_precision(spec, cfg.final_precision_multiplier), threads),
                  model.parameter_space(), cfg);
}

struct Reestimate {
  double loglik = 0.0;
  /// NaN for fixed sampling, 0 for the exact likelihood.
  double se = 0.0;
  std::int64_t samples = 0;
};

template <SimulatorModel M>
Reestimate reestimate_at(const M& model, const DatasetFor<M>& data, std::span<const double> theta,
                         const EstimatorSpec& spec, int multiplier, std::uint64_t seed, int threads = 0) {
  if (multiplier < 1) throw std::invalid_argument("reestimate_at: multiplier must be >= 1");
  const auto e = evaluate_loglik(model, data, theta, scale_precision(spec, multiplier), seed, threads);
  return {e.value, std::sqrt(e.variance), e.samples};
}

/// Exact log-likelihood lost by stopping at fit.theta_hat instead of the
/// exact maximum-likelihood point.
template <ExactLikelihoodModel M>
double loglik_loss(const M& model, const DatasetFor<M>& data, const FitResult& fit, double exact_mle_loglik) {
  return exact_mle_loglik - exact_loglik(model, data, fit.theta_hat);
}

}  // namespace ibs
