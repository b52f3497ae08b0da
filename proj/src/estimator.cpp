#include "ibs/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ibs/special_functions.hpp"

namespace ibs {

namespace {

void require_counts(std::int64_t m, std::int64_t M, const char* name) {
  if (M < 1 || m < 0 || m > M) {
    throw std::invalid_argument(std::string(name) + ": need 0 <= m <= M and M >= 1");
  }
}

// log of the Binomial(M, p) pmf at m, stable for large M.
double log_binom_pmf(std::int64_t m, std::int64_t M, double p) {
  if (p == 1.0) return m == M ? 0.0 : -std::numeric_limits<double>::infinity();
  const auto md = static_cast<double>(m);
  const auto Md = static_cast<double>(M);
  return std::lgamma(Md + 1.0) - std::lgamma(md + 1.0) - std::lgamma(Md - md + 1.0) +
         md * std::log(p) + (Md - md) * std::log1p(-p);
}

void require_probability(double p, const char* name) {
  if (!(p > 0.0 && p <= 1.0)) throw std::domain_error(std::string(name) + ": p must lie in (0, 1]");
}

}  // namespace

double ibs_value_from_k(std::int64_t k) {
  if (k < 1) throw std::invalid_argument("ibs_value_from_k: K must be >= 1");
  return -harmonic(k - 1);
}

double ibs_variance_from_k(std::int64_t k) {
  if (k < 1) throw std::invalid_argument("ibs_variance_from_k: K must be >= 1");
  return harmonic2(k - 1);
}

double exact_ibs_variance(double p) {
  require_probability(p, "exact_ibs_variance");
  return dilog_one_minus(p);
}

double fixed_estimate(std::int64_t m, std::int64_t M) {
  require_counts(m, M, "fixed_estimate");
  return std::log(static_cast<double>(m + 1) / static_cast<double>(M + 1));
}

double fixed_estimate_naive(std::int64_t m, std::int64_t M) {
  require_counts(m, M, "fixed_estimate_naive");
  if (m == 0) return -std::numeric_limits<double>::infinity();
  return std::log(static_cast<double>(m) / static_cast<double>(M));
}

double fixed_estimate_bounded(std::int64_t m, std::int64_t M, double m_min) {
  require_counts(m, M, "fixed_estimate_bounded");
  if (!(m_min > 0.0 && m_min < 1.0)) throw std::invalid_argument("fixed_estimate_bounded: m_min must lie in (0, 1)");
  return std::log(std::max(static_cast<double>(m), m_min) / static_cast<double>(M));
}

double fixed_bias_exact(double p, std::int64_t M) {
  require_probability(p, "fixed_bias_exact");
  if (M < 1) throw std::invalid_argument("fixed_bias_exact: M must be >= 1");
  double mean = 0.0;
  for (std::int64_t m = 0; m <= M; ++m) {
    const double w = std::exp(log_binom_pmf(m, M, p));
    if (w > 0.0) mean += w * fixed_estimate(m, M);
  }
  return mean - std::log(p);
}

double fixed_variance_exact(double p, std::int64_t M) {
  require_probability(p, "fixed_variance_exact");
  if (M < 1) throw std::invalid_argument("fixed_variance_exact: M must be >= 1");
  double mean = 0.0;
  double second = 0.0;
  for (std::int64_t m = 0; m <= M; ++m) {
    const double w = std::exp(log_binom_pmf(m, M, p));
    if (w <= 0.0) continue;
    const double v = fixed_estimate(m, M);
    mean += w * v;
    second += w * v * v;
  }
  return std::max(0.0, second - mean * mean);
}

double bias_master_curve(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::domain_error("bias_master_curve: lambda must be positive");
  // Poisson weights are summed outward from the mode so large lambda stays stable.
  const auto mode = static_cast<std::int64_t>(std::floor(lambda));
  const double log_w_mode = -lambda + static_cast<double>(mode) * std::log(lambda) -
                            std::lgamma(static_cast<double>(mode) + 1.0);
  const double w_mode = std::exp(log_w_mode);
  double sum = w_mode * std::log(static_cast<double>(mode) + 1.0);
  double w = w_mode;
  for (std::int64_t m = mode + 1;; ++m) {
    w *= lambda / static_cast<double>(m);
    const double term = w * std::log(static_cast<double>(m) + 1.0);
    sum += term;
    if (term < 1e-16 && w < 1e-16) break;
  }
  w = w_mode;
  for (std::int64_t m = mode; m > 0; --m) {
    w *= static_cast<double>(m) / lambda;
    sum += w * std::log(static_cast<double>(m));
    if (w < 1e-18) break;
  }
  return sum - std::log(lambda);
}

RepeatedEstimate combine_repeats(std::span<const TrialEstimate> estimates) {
  if (estimates.empty()) throw std::invalid_argument("combine_repeats: need at least one estimate");
  double l = 0.0;
  double v = 0.0;
  for (const auto& e : estimates) {
    l += e.loglik;
    v += e.variance;
  }
  const auto r = static_cast<double>(estimates.size());
  return {l / r, v / (r * r), static_cast<std::int64_t>(estimates.size())};
}

RepeatedEstimate update_repeats(const RepeatedEstimate& current, const TrialEstimate& next) {
  if (current.repeats < 1) throw std::invalid_argument("update_repeats: current must hold at least one repeat");
  const auto r = static_cast<double>(current.repeats);
  const double r1 = r + 1.0;
  return {(r * current.loglik + next.loglik) / r1,
          (r * r * current.variance + next.variance) / (r1 * r1), current.repeats + 1};
}

double convexity_corrected_likelihood(double loglik, double variance) {
  if (!(variance >= 0.0)) throw std::domain_error("convexity_corrected_likelihood: variance must be non-negative");
  return std::exp(loglik + 0.5 * variance);
}

double lognormal_likelihood_estimate(double loglik, double variance) {
  if (!(variance >= 0.0)) throw std::domain_error("lognormal_likelihood_estimate: variance must be non-negative");
  return std::exp(loglik - 0.5 * variance);
}

}  // namespace ibs
