#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>

#include "ibs/random.hpp"

namespace ibs {

/// One log-likelihood estimate for a single trial.
struct TrialEstimate {
  double loglik = 0.0;
  double variance = 0.0;
  std::int64_t samples_used = 1;
};

/// Average of R independent estimates of the same quantity.
struct RepeatedEstimate {
  double loglik = 0.0;
  double variance = 0.0;
  std::int64_t repeats = 0;
};

/// Returned instead of an estimate when a sample cap is hit before the first
/// match. Carries how many samples were drawn.
struct Truncation {
  std::int64_t samples_drawn = 0;
};

using TrialOutcome = std::variant<TrialEstimate, Truncation>;

/// Source of i.i.d. Bernoulli(p) draws. p is hidden from the estimators; only
/// the test code and the analysis harness look at it.
class BernoulliOracle {
 public:
  BernoulliOracle(double p, Rng& rng) : p_(p), rng_(&rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("BernoulliOracle: p must lie in [0, 1]");
  }
  bool draw() { return rng_->uniform() < p_; }
  bool operator()() { return draw(); }
  [[nodiscard]] double p() const noexcept { return p_; }

 private:
  double p_;
  Rng* rng_;
};

/// -H_{K-1}: 0 for K = 1, else -sum_{k=1..K-1} 1/k.
double ibs_value_from_k(std::int64_t k);

/// psi_1(1) - psi_1(K) = sum_{k=1..K-1} 1/k^2.
double ibs_variance_from_k(std::int64_t k);

/// Exact variance of the single-repeat estimator: Li_2(1 - p).
double exact_ibs_variance(double p);

/// Draws from `draw` until the first success. With a cap, reaching it without
/// a success yields a Truncation rather than an estimate.
template <class Draw>
TrialOutcome ibs_trial(Draw&& draw, std::optional<std::int64_t> max_samples = std::nullopt) {
  if (max_samples && *max_samples < 1) throw std::invalid_argument("ibs_trial: max_samples must be >= 1");
  std::int64_t k = 1;
  while (!draw()) {
    if (max_samples && k >= *max_samples) return Truncation{k};
    ++k;
  }
  return TrialEstimate{ibs_value_from_k(k), ibs_variance_from_k(k), k};
}

/// log((m + 1) / (M + 1)).
double fixed_estimate(std::int64_t m, std::int64_t M);

/// log(m / M); negative infinity when m = 0.
double fixed_estimate_naive(std::int64_t m, std::int64_t M);

/// log(max(m, m_min) / M) with 0 < m_min < 1.
double fixed_estimate_bounded(std::int64_t m, std::int64_t M, double m_min);

/// Exact bias E[fixed_estimate] - log p under Binomial(M, p) hit counts.
double fixed_bias_exact(double p, std::int64_t M);

/// Exact variance of fixed_estimate under Binomial(M, p) hit counts.
double fixed_variance_exact(double p, std::int64_t M);

/// Limit of the fixed-sampling bias as M grows with lambda = p M held fixed:
/// e^{-lambda} sum_m lambda^m / m! log(m + 1) - log(lambda).
double bias_master_curve(double lambda);

RepeatedEstimate combine_repeats(std::span<const TrialEstimate> estimates);

/// Folds one more estimate into a running average of R repeats.
RepeatedEstimate update_repeats(const RepeatedEstimate& current, const TrialEstimate& next);

/// exp(loglik + variance / 2): the mean of exp(X) for X ~ Normal(loglik, variance).
double convexity_corrected_likelihood(double loglik, double variance);

/// exp(loglik - variance / 2): unbiased for exp(L) when the log-likelihood
/// estimate is Normal(L, variance). Close to unbiased for IBS once enough
/// repeats are averaged for the estimate to look Gaussian.
double lognormal_likelihood_estimate(double loglik, double variance);

}  // namespace ibs
