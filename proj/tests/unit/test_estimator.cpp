#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "ibs/estimator.hpp"
#include "ibs/special_functions.hpp"
#include "oracle_values.hpp"

using namespace ibs;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double se() const { return std::sqrt(var / n); }
  double n = 0.0;
};

template <class F>
Moments monte_carlo(int runs, F&& f) {
  Moments m;
  double m2 = 0.0;
  for (int i = 0; i < runs; ++i) {
    const double x = f(i);
    const double d = x - m.mean;
    m.mean += d / (i + 1);
    m2 += d * (x - m.mean);
  }
  m.var = m2 / (runs - 1);
  m.n = runs;
  return m;
}

TrialEstimate run_ibs(double p, Rng& rng) {
  BernoulliOracle oracle(p, rng);
  return std::get<TrialEstimate>(ibs_trial(oracle));
}

// sum_k p (1 - p)^(k - 1) f(k), truncated once the tail mass is below 1e-12
template <class F>
double geometric_expectation(double p, F&& f) {
  double total = 0.0;
  double mass = p;
  double tail = 1.0;
  for (std::int64_t k = 1; tail > 1e-12 && mass > 0.0; ++k) {
    total += mass * f(k);
    tail -= mass;
    mass *= 1.0 - p;
  }
  return total;
}

}  // namespace

TEST_CASE("ibs value and variance from K") {
  CHECK(ibs_value_from_k(1) == 0.0);
  CHECK(ibs_value_from_k(2) == -1.0);
  CHECK(ibs_value_from_k(4) == doctest::Approx(-11.0 / 6.0).epsilon(1e-15));
  CHECK(ibs_variance_from_k(1) == 0.0);
  CHECK(ibs_variance_from_k(2) == 1.0);
  CHECK(ibs_variance_from_k(3) == 1.25);
  CHECK_THROWS_AS(ibs_value_from_k(0), std::invalid_argument);
  CHECK_THROWS_AS(ibs_variance_from_k(0), std::invalid_argument);

  double prev = -1.0;
  for (std::int64_t k = 1; k <= 2000; ++k) {
    const double v = ibs_variance_from_k(k);
    CHECK(v > prev);
    CHECK(v < kPiSquaredOverSix);
    prev = v;
  }
  for (std::int64_t k : {1, 2, 7, 100, 256, 257, 9999, 10000, 123456, 1000000}) {
    const auto kd = static_cast<double>(k);
    CHECK(std::abs(ibs_value_from_k(k) - (digamma(1.0) - digamma(kd))) < 1e-12);
    CHECK(std::abs(ibs_variance_from_k(k) - (trigamma(1.0) - trigamma(kd))) < 1e-12);
  }
}

TEST_CASE("ibs trial sampling") {
  Rng rng(1);
  SUBCASE("certain hit") {
    for (int i = 0; i < 100; ++i) {
      const auto est = run_ibs(1.0, rng);
      CHECK(est.samples_used == 1);
      CHECK(est.loglik == 0.0);
      CHECK(est.variance == 0.0);
    }
  }
  SUBCASE("mean sample count is 1/p") {
    const auto m = monte_carlo(100000, [&](int) { return static_cast<double>(run_ibs(0.2, rng).samples_used); });
    CHECK(std::abs(m.mean - 5.0) < 3.0 * m.se());
  }
  SUBCASE("unbiased at p = 0.5") {
    const auto m = monte_carlo(100000, [&](int) { return run_ibs(0.5, rng).loglik; });
    CHECK(std::abs(m.mean - std::log(0.5)) < 3.0 * m.se());
  }
  SUBCASE("cap yields an explicit truncation") {
    BernoulliOracle never(0.0, rng);
    const auto out = ibs_trial(never, 25);
    REQUIRE(std::holds_alternative<Truncation>(out));
    CHECK(std::get<Truncation>(out).samples_drawn == 25);
    BernoulliOracle always(1.0, rng);
    CHECK(std::holds_alternative<TrialEstimate>(ibs_trial(always, 1)));
  }
  SUBCASE("variance zero exactly when K = 1") {
    for (int i = 0; i < 1000; ++i) {
      const auto est = run_ibs(0.6, rng);
      CHECK((est.variance == 0.0) == (est.samples_used == 1));
      CHECK(est.loglik <= 0.0);
    }
  }
}

TEST_CASE("exact unbiasedness by direct summation") {
  for (double p : {0.02, 0.05, 0.1, 0.3, 0.5, 0.8, 1.0}) {
    const double e = geometric_expectation(p, [](std::int64_t k) { return ibs_value_from_k(k); });
    CHECK(std::abs(e - std::log(p)) < 1e-9);
  }
}

TEST_CASE("exact variance of the estimator") {
  CHECK(exact_ibs_variance(1.0) == 0.0);
  CHECK(exact_ibs_variance(1e-15) == doctest::Approx(kPiSquaredOverSix).epsilon(1e-12));
  CHECK(exact_ibs_variance(0.5) == doctest::Approx(oracle::kDilogHalf).epsilon(1e-13));
  CHECK_THROWS_AS(exact_ibs_variance(0.0), std::domain_error);
  CHECK_THROWS_AS(exact_ibs_variance(1.5), std::domain_error);

  for (double p : {0.02, 0.1, 0.5, 0.9}) {
    // second moment by summation minus the squared mean
    const double second = geometric_expectation(p, [](std::int64_t k) {
      const double v = ibs_value_from_k(k);
      return v * v;
    });
    const double lp = std::log(p);
    CHECK(std::abs(second - lp * lp - exact_ibs_variance(p)) < 1e-8);
  }
}

TEST_CASE("Monte Carlo variance matches the exact variance") {
  Rng rng(7);
  for (double p : {0.02, 0.05, 0.1, 0.3, 0.5, 0.8}) {
    const auto m = monte_carlo(100000, [&](int) { return run_ibs(p, rng).loglik; });
    CHECK(std::abs(m.mean - std::log(p)) < 4.0 * m.se());
    CHECK(std::abs(m.var / exact_ibs_variance(p) - 1.0) < 0.05);
  }
}

TEST_CASE("estimated variance is unbiased for the exact variance") {
  for (double p : {0.05, 0.3, 0.8}) {
    const double e = geometric_expectation(p, [](std::int64_t k) { return ibs_variance_from_k(k); });
    CHECK(std::abs(e - exact_ibs_variance(p)) < 1e-9);
  }
}

TEST_CASE("information inequality") {
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    const double ratio = std::sqrt(exact_ibs_variance(p)) / std::sqrt(1.0 - p);
    CHECK(ratio >= 1.0);
    CHECK(ratio <= 1.3);
  }
}

TEST_CASE("fixed-sampling estimators") {
  CHECK(fixed_estimate(10, 10) == 0.0);
  CHECK(fixed_estimate(0, 10) == doctest::Approx(std::log(1.0 / 11.0)));
  CHECK(fixed_estimate(0, 10) == doctest::Approx(-2.3979).epsilon(1e-4));
  CHECK(fixed_estimate(5, 10) == doctest::Approx(std::log(6.0 / 11.0)));
  CHECK_THROWS_AS(fixed_estimate(11, 10), std::invalid_argument);
  CHECK_THROWS_AS(fixed_estimate(0, 0), std::invalid_argument);

  CHECK(fixed_estimate_naive(0, 5) == -std::numeric_limits<double>::infinity());
  CHECK(fixed_estimate_naive(5, 5) == 0.0);
  CHECK(fixed_estimate_naive(1, 2) == doctest::Approx(std::log(0.5)));

  CHECK(fixed_estimate_bounded(0, 10, 0.5) == doctest::Approx(std::log(0.05)));
  CHECK(fixed_estimate_bounded(0, 10, 0.5) == doctest::Approx(-2.9957).epsilon(1e-4));
  CHECK(fixed_estimate_bounded(10, 10, 0.5) == 0.0);
  CHECK(fixed_estimate_bounded(0, 10, 1e-3) == doctest::Approx(std::log(1e-4)));
  CHECK_THROWS_AS(fixed_estimate_bounded(0, 10, 1.0), std::invalid_argument);
}

TEST_CASE("exact fixed-sampling bias") {
  CHECK(fixed_bias_exact(1.0, 1) == doctest::Approx(0.0));
  CHECK(fixed_bias_exact(1.0, 57) == doctest::Approx(0.0));
  CHECK(fixed_bias_exact(0.5, 1) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(fixed_bias_exact(0.01, 10) == doctest::Approx(oracle::kFixedBias_p0_01_M10).epsilon(1e-12));
  CHECK(fixed_bias_exact(0.3, 20) == doctest::Approx(oracle::kFixedBias_p0_3_M20).epsilon(1e-12));
  // small M sits about 0.095 nats below the limiting curve at lambda = 0.1
  CHECK(fixed_bias_exact(0.01, 10) - bias_master_curve(0.1) ==
        doctest::Approx(oracle::kFixedBias_p0_01_M10 - oracle::kMasterCurve0_1).epsilon(1e-10));

  // exact sums agree with simulated hit counts
  Rng rng(3);
  for (double p : {0.05, 0.4}) {
    constexpr std::int64_t M = 10;
    const auto m = monte_carlo(200000, [&](int) {
      std::int64_t hits = 0;
      for (std::int64_t s = 0; s < M; ++s) hits += rng.uniform() < p;
      return fixed_estimate(hits, M);
    });
    CHECK(std::abs(m.mean - std::log(p) - fixed_bias_exact(p, M)) < 4.0 * m.se());
    CHECK(std::abs(m.var / fixed_variance_exact(p, M) - 1.0) < 0.03);
  }
}

TEST_CASE("bias master curve") {
  CHECK(std::abs(bias_master_curve(100.0)) < 0.01);
  CHECK(bias_master_curve(1.0) == doctest::Approx(oracle::kMasterCurve1).epsilon(1e-13));
  CHECK(bias_master_curve(0.1) == doctest::Approx(oracle::kMasterCurve0_1).epsilon(1e-13));
  CHECK(bias_master_curve(10.0) == doctest::Approx(oracle::kMasterCurve10).epsilon(1e-12));
  CHECK(bias_master_curve(1e-4) == doctest::Approx(-std::log(1e-4)).epsilon(1e-3));
  CHECK(bias_master_curve(1e-4) > 9.2);
  CHECK(std::isfinite(bias_master_curve(5000.0)));
  CHECK_THROWS_AS(bias_master_curve(0.0), std::domain_error);

  for (std::int64_t M : {10, 100}) {
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double lambda = 0.1 * std::pow(100.0, i / 100.0);
      worst = std::max(worst, std::abs(fixed_bias_exact(lambda / M, M) - bias_master_curve(lambda)));
    }
    if (M == 100) CHECK(worst < 0.1);
  }
}

TEST_CASE("combining repeats") {
  const std::vector<TrialEstimate> one{{-2.0, 0.7, 3}};
  const auto r1 = combine_repeats(one);
  CHECK(r1.loglik == -2.0);
  CHECK(r1.variance == 0.7);
  CHECK(r1.repeats == 1);

  const std::vector<TrialEstimate> two{{-1.0, 1.0, 2}, {-2.0, 1.0, 4}};
  const auto r2 = combine_repeats(two);
  CHECK(r2.loglik == -1.5);
  CHECK(r2.variance == 0.5);
  CHECK_THROWS_AS(combine_repeats(std::span<const TrialEstimate>{}), std::invalid_argument);

  const auto u = update_repeats({-1.3, 0.4, 1}, {-1.3, 0.4, 1});
  CHECK(u.loglik == doctest::Approx(-1.3));
  CHECK(u.variance == doctest::Approx(0.2));
  CHECK(u.repeats == 2);

  const std::vector<TrialEstimate> five{{0.0, 0.0, 1}, {-1.0, 1.0, 2}, {-2.5, 1.49, 5}, {-1.5, 1.25, 3}, {-0.0, 0.0, 1}};
  RepeatedEstimate running = combine_repeats(std::span(five).first(1));
  for (std::size_t i = 1; i < five.size(); ++i) running = update_repeats(running, five[i]);
  const auto batch = combine_repeats(five);
  CHECK(std::abs(running.loglik - batch.loglik) < 1e-12);
  CHECK(std::abs(running.variance - batch.variance) < 1e-12);
  CHECK(running.repeats == 5);

  // worst-case trials: every repeat reports a variance below pi^2/6
  for (int R : {1, 2, 5, 20}) {
    std::vector<TrialEstimate> worst(static_cast<std::size_t>(R), TrialEstimate{-10.0, ibs_variance_from_k(1000000), 1000000});
    CHECK(combine_repeats(worst).variance <= kPiSquaredOverSix / R);
  }
}

TEST_CASE("repeats shrink the variance as 1/R") {
  Rng rng(5);
  constexpr int R = 10;
  const auto m = monte_carlo(10000, [&](int) {
    RepeatedEstimate acc;
    for (int r = 0; r < R; ++r) {
      const auto e = run_ibs(0.5, rng);
      acc = r == 0 ? RepeatedEstimate{e.loglik, e.variance, 1} : update_repeats(acc, e);
    }
    return acc.loglik;
  });
  CHECK(std::abs(m.var / (exact_ibs_variance(0.5) / R) - 1.0) < 0.1);
}

TEST_CASE("convexity-corrected likelihood") {
  CHECK(convexity_corrected_likelihood(0.0, 0.0) == 1.0);
  CHECK(convexity_corrected_likelihood(-1.0, 2.0) == 1.0);
  CHECK_THROWS_AS(convexity_corrected_likelihood(0.0, -1.0), std::domain_error);

  // the mean of exp(X) for Gaussian X
  Rng rng(9);
  const double mu = std::log(0.3);
  const double var = 0.4;
  const auto m = monte_carlo(100000, [&](int) { return std::exp(mu + std::sqrt(var) * rng.normal()); });
  CHECK(std::abs(m.mean - convexity_corrected_likelihood(mu, var)) < 3.0 * m.se());
}

TEST_CASE("log-normal likelihood estimate from averaged repeats") {
  CHECK(lognormal_likelihood_estimate(-1.0, 2.0) == doctest::Approx(std::exp(-2.0)));
  Rng rng(10);
  constexpr int R = 50;
  const auto m = monte_carlo(100000, [&](int) {
    RepeatedEstimate acc;
    for (int r = 0; r < R; ++r) {
      const auto e = run_ibs(0.3, rng);
      acc = r == 0 ? RepeatedEstimate{e.loglik, e.variance, 1} : update_repeats(acc, e);
    }
    return lognormal_likelihood_estimate(acc.loglik, acc.variance);
  });
  CHECK(std::abs(m.mean - 0.3) < 3.0 * m.se());
}
