#pragma once

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ibs/estimator.hpp"
#include "ibs/models/model.hpp"
#include "ibs/random.hpp"
#include "ibs/special_functions.hpp"

namespace ibs {

struct EngineConfig {
  int repeats = 1;
  /// When non-empty, overrides `repeats` trial by trial; length must equal N.
  std::vector<int> per_trial_repeats;
  std::optional<double> early_stop_threshold;
  std::optional<std::int64_t> per_trial_sample_cap;
  std::uint64_t master_seed = 0;
  /// 0 means the OpenMP default.
  int threads = 0;
  /// Keep per-repeat K values in the report.
  bool record_trials = true;
  /// Keep the running upper bound after every row (parallel engine only).
  bool record_bound_trace = false;
};

struct TrialRecord {
  std::vector<std::int64_t> k;
  double loglik = 0.0;
  double variance = 0.0;
  bool truncated = false;
};

struct EstimateReport {
  double loglik = 0.0;
  /// NaN when the estimator has no calibrated variance (fixed sampling).
  double variance = 0.0;
  std::vector<TrialRecord> per_trial;
  std::int64_t total_samples = 0;
  bool stopped_early = false;
  /// Some trial hit the sample cap; the estimate is then biased.
  bool truncated = false;
  std::vector<std::size_t> truncated_trials;
  std::vector<double> bound_trace;
};

enum class FixedVariant { Standard, Naive, Bounded };

struct FixedConfig {
  std::int64_t samples = 10;
  FixedVariant variant = FixedVariant::Standard;
  double m_min = 0.5;
  std::uint64_t master_seed = 0;
  int threads = 0;
};

namespace detail {

inline int thread_count(int requested) { return requested > 0 ? requested : omp_get_max_threads(); }

inline std::vector<int> resolve_repeats(std::size_t n, const EngineConfig& cfg) {
  if (!cfg.per_trial_repeats.empty()) {
    if (cfg.per_trial_repeats.size() != n) {
      throw std::invalid_argument("EngineConfig: per_trial_repeats has " + std::to_string(cfg.per_trial_repeats.size()) +
                                  " entries for " + std::to_string(n) + " trials");
    }
    for (int r : cfg.per_trial_repeats) {
      if (r < 1) throw std::invalid_argument("EngineConfig: per-trial repeats must be >= 1");
    }
    return cfg.per_trial_repeats;
  }
  if (cfg.repeats < 1) throw std::invalid_argument("EngineConfig: repeats must be >= 1");
  return std::vector<int>(n, cfg.repeats);
}

// Per-trial totals from the recorded K values, summed in trial order so the
// result does not depend on how the samples were scheduled.
inline void finalize_report(EstimateReport& rep, const std::vector<int>& repeats,
                            const std::vector<std::vector<std::int64_t>>& ks, const std::vector<char>& truncated,
                            bool keep_trials) {
  const std::size_t n = repeats.size();
  rep.loglik = 0.0;
  rep.variance = 0.0;
  rep.total_samples = 0;
  if (keep_trials) rep.per_trial.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<double>(repeats[i]);
    double l = 0.0;
    double v = 0.0;
    for (std::int64_t k : ks[i]) {
      l += ibs_value_from_k(k);
      v += ibs_variance_from_k(k);
      rep.total_samples += k;
    }
    l /= r;
    v /= r * r;
    rep.loglik += l;
    rep.variance += v;
    if (truncated[i]) {
      rep.truncated = true;
      rep.truncated_trials.push_back(i);
    }
    if (keep_trials) rep.per_trial[i] = TrialRecord{ks[i], l, v, truncated[i] != 0};
  }
}

}  // namespace detail

/// Sequential reference: each trial and repeat in turn, sampling until the
/// first match. Every (trial, repeat) pair owns the stream
/// derive_seed(master_seed, trial, repeat). The early-stop threshold is ignored.
template <class HitFn>
EstimateReport estimate_sequential_hits(std::size_t n, HitFn&& hit, const EngineConfig& cfg) {
  if (n == 0) throw std::invalid_argument("estimate_sequential: empty dataset");
  const auto repeats = detail::resolve_repeats(n, cfg);
  std::vector<std::vector<std::int64_t>> ks(n);
  std::vector<char> truncated(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    ks[i].resize(static_cast<std::size_t>(repeats[i]));
    for (int r = 0; r < repeats[i]; ++r) {
      Rng rng(derive_seed(cfg.master_seed, i, static_cast<std::uint64_t>(r)));
      auto outcome = ibs_trial([&] { return static_cast<bool>(hit(i, rng)); }, cfg.per_trial_sample_cap);
      if (const auto* est = std::get_if<TrialEstimate>(&outcome)) {
        ks[i][r] = est->samples_used;
      } else {
        ks[i][r] = std::get<Truncation>(outcome).samples_drawn;
        truncated[i] = 1;
      }
    }
  }
  EstimateReport rep;
  detail::finalize_report(rep, repeats, ks, truncated, cfg.record_trials);
  return rep;
}

/// Rows-first scheme: every unfinished (trial, repeat) unit draws one sample
/// per row, concurrently across units. After row k the estimate is bounded
/// above by the finished units' values plus -H_k for each unfinished unit; if
/// that bound falls below the early-stop threshold the report returns the
/// threshold itself. Without early stopping the result is bit-identical to
/// estimate_sequential_hits.
template <class HitFn>
EstimateReport estimate_parallel_hits(std::size_t n, HitFn&& hit, const EngineConfig& cfg, bool concurrent = true) {
  if (n == 0) throw std::invalid_argument("estimate_parallel: empty dataset");
  const auto repeats = detail::resolve_repeats(n, cfg);

  std::vector<std::uint32_t> unit_trial;
  std::vector<Rng> unit_rng;
  std::vector<std::size_t> unit_slot;
  std::vector<std::vector<std::int64_t>> ks(n);
  for (std::size_t i = 0; i < n; ++i) {
    ks[i].assign(static_cast<std::size_t>(repeats[i]), 0);
    for (int r = 0; r < repeats[i]; ++r) {
      unit_trial.push_back(static_cast<std::uint32_t>(i));
      unit_rng.emplace_back(derive_seed(cfg.master_seed, i, static_cast<std::uint64_t>(r)));
      unit_slot.push_back(static_cast<std::size_t>(r));
    }
  }
  const std::size_t units = unit_trial.size();
  std::vector<std::uint32_t> active(units);
  for (std::size_t u = 0; u < units; ++u) active[u] = static_cast<std::uint32_t>(u);
  std::vector<char> matched(units, 0);
  std::vector<char> truncated(n, 0);

  double active_weight = 0.0;  // sum of 1/R_i over unfinished units
  for (std::size_t u = 0; u < units; ++u) active_weight += 1.0 / repeats[unit_trial[u]];
  double finished_sum = 0.0;
  std::int64_t samples_so_far = 0;
  double variance_so_far = 0.0;

  EstimateReport rep;
  const int threads = concurrent ? detail::thread_count(cfg.threads) : 1;
  for (std::int64_t row = 1; !active.empty(); ++row) {
    const auto count = static_cast<std::int64_t>(active.size());
#pragma omp parallel for num_threads(threads) schedule(static) if (count > 64)
    for (std::int64_t a = 0; a < count; ++a) {
      const std::uint32_t u = active[static_cast<std::size_t>(a)];
      matched[u] = hit(static_cast<std::size_t>(unit_trial[u]), unit_rng[u]) ? 1 : 0;
    }
    samples_so_far += count;

    std::size_t keep = 0;
    for (std::size_t a = 0; a < active.size(); ++a) {
      const std::uint32_t u = active[a];
      if (matched[u]) {
        const std::size_t i = unit_trial[u];
        const double w = 1.0 / repeats[i];
        ks[i][unit_slot[u]] = row;
        finished_sum += w * ibs_value_from_k(row);
        variance_so_far += w * w * ibs_variance_from_k(row);
        active_weight -= w;
      } else {
        active[keep++] = u;
      }
    }
    active.resize(keep);
    if (active.empty()) active_weight = 0.0;

    const double bound = finished_sum - active_weight * harmonic(row);
    if (cfg.record_bound_trace) rep.bound_trace.push_back(bound);
    if (cfg.early_stop_threshold && bound < *cfg.early_stop_threshold) {
      rep.loglik = *cfg.early_stop_threshold;
      // variance of the finished units only; the unfinished ones are unknown
      rep.variance = variance_so_far;
      rep.total_samples = samples_so_far;
      rep.stopped_early = true;
      if (cfg.record_trials) {
        rep.per_trial.resize(n);
        for (std::size_t i = 0; i < n; ++i) rep.per_trial[i].k = ks[i];
      }
      return rep;
    }
    if (cfg.per_trial_sample_cap && row >= *cfg.per_trial_sample_cap && !active.empty()) {
      for (std::uint32_t u : active) {
        ks[unit_trial[u]][unit_slot[u]] = row;
        truncated[unit_trial[u]] = 1;
      }
      active.clear();
    }
  }
  detail::finalize_report(rep, repeats, ks, truncated, cfg.record_trials);
  return rep;
}

/// Fixed sampling: M draws per trial, estimate from the hit count. Trial i
/// uses the stream derive_seed(master_seed, i, 0).
template <class HitFn>
EstimateReport estimate_fixed_hits(std::size_t n, HitFn&& hit, const FixedConfig& cfg, bool concurrent = true) {
  if (n == 0) throw std::invalid_argument("estimate_fixed: empty dataset");
  if (cfg.samples < 1) throw std::invalid_argument("estimate_fixed: samples must be >= 1");
  std::vector<std::int64_t> hits(n, 0);
  const int threads = concurrent ? detail::thread_count(cfg.threads) : 1;
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for num_threads(threads) schedule(static) if (count > 16)
  for (std::int64_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(cfg.master_seed, static_cast<std::uint64_t>(i), 0));
    std::int64_t m = 0;
    for (std::int64_t s = 0; s < cfg.samples; ++s) m += hit(static_cast<std::size_t>(i), rng) ? 1 : 0;
    hits[static_cast<std::size_t>(i)] = m;
  }
  EstimateReport rep;
  rep.variance = std::numeric_limits<double>::quiet_NaN();
  rep.per_trial.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double l = 0.0;
    switch (cfg.variant) {
      case FixedVariant::Standard: l = fixed_estimate(hits[i], cfg.samples); break;
      case FixedVariant::Naive: l = fixed_estimate_naive(hits[i], cfg.samples); break;
      case FixedVariant::Bounded: l = fixed_estimate_bounded(hits[i], cfg.samples, cfg.m_min); break;
    }
    rep.loglik += l;
    rep.per_trial[i] = TrialRecord{{hits[i]}, l, std::numeric_limits<double>::quiet_NaN(), false};
  }
  rep.total_samples = cfg.samples * count;
  return rep;
}

template <SimulatorModel M>
auto make_hit_function(const M& model, const DatasetFor<M>& data, const typename M::Params& params) {
  return [&model, &data, &params](std::size_t i, Rng& rng) {
    const auto& t = data.trials[i];
    return model.simulate(t.stimulus, params, rng) == t.response;
  };
}

template <SimulatorModel M>
EstimateReport estimate_sequential(const M& model, const DatasetFor<M>& data, std::span<const double> theta,
                                   const EngineConfig& cfg) {
  const auto params = model.prepare(theta);
  return estimate_sequential_hits(data.size(), make_hit_function(model, data, params), cfg);
}

template <SimulatorModel M>
EstimateReport estimate_parallel(const M& model, const DatasetFor<M>& data, std::span<const double> theta,
                                 const EngineConfig& cfg) {
  const auto params = model.prepare(theta);
  return estimate_parallel_hits(data.size(), make_hit_function(model, data, params), cfg, M::kConcurrentSafe);
}

template <SimulatorModel M>
EstimateReport estimate_fixed(const M& model, const DatasetFor<M>& data, std::span<const double> theta,
                              const FixedConfig& cfg) {
  const auto params = model.prepare(theta);
  return estimate_fixed_hits(data.size(), make_hit_function(model, data, params), cfg, M::kConcurrentSafe);
}

/// Continuous-budget optimal repeats scaled to expected cost S, rounded up to
/// integers >= 1. Throws std::invalid_argument when S < sum 1/p.
std::vector<int> allocate_repeats(std::span<const double> p_hat, double budget);

/// Precision gain of the optimal allocation over uniform repeats at equal
/// expected cost: sum Li2(1-p) * sum 1/p / (sum sqrt(Li2(1-p)/p))^2.
double allocation_gain(std::span<const double> p);

/// Precision gain of an integer allocation over uniform repeats spending the
/// same expected number of samples.
double realized_allocation_gain(std::span<const double> p, std::span<const int> repeats);

/// p-hat = R / sum_r K_r per trial, from a pilot run.
std::vector<double> pilot_probabilities(const EstimateReport& pilot);

template <SimulatorModel M>
std::vector<int> pilot_then_allocate(const M& model, const DatasetFor<M>& data, std::span<const double> theta0,
                                     int pilot_repeats, double budget, std::uint64_t seed = 0) {
  if (pilot_repeats < 1) throw std::invalid_argument("pilot_then_allocate: pilot_repeats must be >= 1");
  EngineConfig cfg;
  cfg.repeats = pilot_repeats;
  cfg.master_seed = seed;
  const auto pilot = estimate_parallel(model, data, theta0, cfg);
  auto p_hat = pilot_probabilities(pilot);
  const double floor = 1.0 / (10.0 * budget);
  for (double& p : p_hat) p = std::clamp(p, floor, 1.0);
  return allocate_repeats(p_hat, budget);
}

/// Approximate IBS for continuous responses: a sample matches when
/// metric(sample, response) <= epsilon; the trial estimate is
/// -H_{K-1} - log volume(response, epsilon).
template <SimulatorModel M, class Metric, class Volume>
EstimateReport aibs_estimate(const M& model, const DatasetFor<M>& data, std::span<const double> theta,
                             Metric&& metric, double epsilon, Volume&& volume, const EngineConfig& cfg) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("aibs_estimate: epsilon must be positive");
  const auto params = model.prepare(theta);
  auto hit = [&](std::size_t i, Rng& rng) {
    const auto& t = data.trials[i];
    return metric(model.simulate(t.stimulus, params, rng), t.response) <= epsilon;
  };
  EngineConfig plain = cfg;
  plain.early_stop_threshold.reset();
  auto rep = estimate_sequential_hits(data.size(), hit, plain);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double vol = volume(data.trials[i].response, epsilon);
    if (!(vol > 0.0)) throw std::domain_error("aibs_estimate: volume must be positive");
    rep.loglik -= std::log(vol);
    if (!rep.per_trial.empty()) rep.per_trial[i].loglik -= std::log(vol);
  }
  return rep;
}

/// Monte Carlo summary of repeated scalar estimates.
struct EntropyEstimate {
  double estimate = 0.0;
  /// Variance of `estimate` (the mean), from the empirical spread of runs.
  double variance = 0.0;
  std::int64_t runs = 0;
  std::int64_t total_samples = 0;
  bool truncated = false;
};

/// Cross-entropy -E_{x~P}[log Q(x)]: each run draws x from `sample_p`, then
/// counts draws from `sample_q` until one equals x. Run j uses streams
/// derive_seed(seed, j, 0) for x and derive_seed(seed, j, 1) for the IBS draws.
template <class SampleP, class SampleQ>
EntropyEstimate estimate_cross_entropy(SampleP&& sample_p, SampleQ&& sample_q, std::int64_t runs, std::uint64_t seed,
                                       std::optional<std::int64_t> cap = std::nullopt) {
  if (runs < 2) throw std::invalid_argument("estimate_cross_entropy: need at least two runs");
  EntropyEstimate out;
  out.runs = runs;
  double mean = 0.0;
  double m2 = 0.0;
  for (std::int64_t j = 0; j < runs; ++j) {
    Rng rx(derive_seed(seed, static_cast<std::uint64_t>(j), 0));
    const auto x = sample_p(rx);
    Rng rq(derive_seed(seed, static_cast<std::uint64_t>(j), 1));
    auto outcome = ibs_trial([&] { return sample_q(rq) == x; }, cap);
    std::int64_t k = 0;
    if (const auto* est = std::get_if<TrialEstimate>(&outcome)) {
      k = est->samples_used;
    } else {
      k = std::get<Truncation>(outcome).samples_drawn;
      out.truncated = true;
    }
    out.total_samples += k;
    const double h = -ibs_value_from_k(k);
    const double delta = h - mean;
    mean += delta / static_cast<double>(j + 1);
    m2 += delta * (h - mean);
  }
  out.estimate = mean;
  out.variance = m2 / static_cast<double>(runs - 1) / static_cast<double>(runs);
  return out;
}

/// Shannon entropy of the distribution behind `sample`, by IBS on log P(x)
/// with x drawn from the same distribution.
template <class Sample>
EntropyEstimate estimate_entropy(Sample&& sample, std::int64_t runs, std::uint64_t seed,
                                 std::optional<std::int64_t> cap = std::nullopt) {
  return estimate_cross_entropy(sample, sample, runs, seed, cap);
}

}  // namespace ibs
