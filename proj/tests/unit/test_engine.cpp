#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ibs/engine.hpp"
#include "ibs/models/choice.hpp"
#include "ibs/models/orientation.hpp"
#include "oracle_values.hpp"

using namespace ibs;

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double n = 0.0;
  double se() const { return std::sqrt(var / n); }
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.n = static_cast<double>(xs.size());
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / m.n;
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= m.n - 1.0;
  return m;
}

std::vector<double> ranks(const std::vector<double>& xs) {
  std::vector<std::size_t> idx(xs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const auto ma = moments(ra);
  const auto mb = moments(rb);
  double c = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) c += (ra[i] - ma.mean) * (rb[i] - mb.mean);
  return c / (static_cast<double>(a.size()) - 1.0) / std::sqrt(ma.var * mb.var);
}

// Two-sample Kolmogorov-Smirnov p-value, asymptotic form. Conservative for
// discrete data, which is the direction we want for an equivalence check.
double ks_p_value(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double lambda = (std::sqrt(na * nb / (na + nb)) + 0.12 + 0.11 / std::sqrt(na * nb / (na + nb))) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

std::vector<double> all_k(const EstimateReport& rep) {
  std::vector<double> out;
  for (const auto& t : rep.per_trial) {
    for (auto k : t.k) out.push_back(static_cast<double>(k));
  }
  return out;
}

const std::vector<double> kThetaTrue = {std::log(2.0), 0.1, 0.1};

// Continuous-response test models for approximate IBS.
struct UniformUnitModel {
  using Stimulus = int;
  using Response = double;
  struct Params {};
  static constexpr bool kConcurrentSafe = true;
  ParameterSpace parameter_space() const { return ParameterSpace({{"unused", 0.0, 1.0, 0.2, 0.8}}); }
  Params prepare(std::span<const double>) const { return {}; }
  Response simulate(Stimulus, const Params&, Rng& rng) const { return rng.uniform(); }
};

struct StandardNormalModel {
  using Stimulus = int;
  using Response = double;
  struct Params {};
  static constexpr bool kConcurrentSafe = true;
  ParameterSpace parameter_space() const { return ParameterSpace({{"unused", 0.0, 1.0, 0.2, 0.8}}); }
  Params prepare(std::span<const double>) const { return {}; }
  Response simulate(Stimulus, const Params&, Rng& rng) const { return rng.normal(); }
};

template <class M>
DatasetFor<M> constant_response_data(int n, double r) {
  DatasetFor<M> d;
  d.model = "test";
  for (int i = 0; i < n; ++i) d.trials.push_back({0, r});
  return d;
}

}  // namespace

TEST_CASE("deterministic responder gives zero log-likelihood") {
  const ChoiceModel model;
  const std::vector<double> theta = {1.0};
  const auto data = model.generate(50, 4, theta, 1);
  EngineConfig cfg;
  cfg.repeats = 3;
  for (const auto& rep : {estimate_sequential(model, data, theta, cfg), estimate_parallel(model, data, theta, cfg)}) {
    CHECK(rep.loglik == 0.0);
    CHECK(rep.variance == 0.0);
    CHECK(rep.total_samples == 150);
    for (const auto& t : rep.per_trial) {
      for (auto k : t.k) CHECK(k == 1);
    }
  }
}

TEST_CASE("uniform guesser over six options costs six samples per trial") {
  const ChoiceModel model;
  const std::vector<double> theta = {1.0 / 6.0};
  const auto data = model.generate(100, 6, theta, 2);
  std::vector<double> totals;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    EngineConfig cfg;
    cfg.master_seed = seed;
    totals.push_back(static_cast<double>(estimate_sequential(model, data, theta, cfg).total_samples));
  }
  const auto m = moments(totals);
  CHECK(std::abs(m.mean - 600.0) < 3.0 * m.se());
}

TEST_CASE("report totals equal per-trial sums") {
  const OrientationModel model;
  const auto data = model.generate(300, kThetaTrue, 3);
  EngineConfig cfg;
  cfg.repeats = 2;
  cfg.master_seed = 17;
  const auto rep = estimate_parallel(model, data, kThetaTrue, cfg);
  double l = 0.0;
  double v = 0.0;
  std::int64_t s = 0;
  for (const auto& t : rep.per_trial) {
    l += t.loglik;
    v += t.variance;
    for (auto k : t.k) s += k;
    CHECK(t.k.size() == 2);
  }
  CHECK(rep.loglik == l);
  CHECK(rep.variance == v);
  CHECK(rep.total_samples == s);
  CHECK_FALSE(rep.stopped_early);
}

TEST_CASE("sequential and parallel engines are bit-identical for any thread count") {
  const OrientationModel model;
  const auto data = model.generate(600, kThetaTrue, 4);
  EngineConfig cfg;
  cfg.repeats = 3;
  cfg.master_seed = 99;
  const auto ref = estimate_sequential(model, data, kThetaTrue, cfg);
  for (int threads : {1, 2, 4, 7}) {
    cfg.threads = threads;
    const auto par = estimate_parallel(model, data, kThetaTrue, cfg);
    CHECK(par.loglik == ref.loglik);
    CHECK(par.variance == ref.variance);
    CHECK(par.total_samples == ref.total_samples);
    bool same = par.per_trial.size() == ref.per_trial.size();
    for (std::size_t i = 0; same && i < ref.per_trial.size(); ++i) same = par.per_trial[i].k == ref.per_trial[i].k;
    CHECK(same);
  }
  cfg.per_trial_repeats.assign(600, 1);
  for (std::size_t i = 0; i < 600; i += 3) cfg.per_trial_repeats[i] = 4;
  cfg.threads = 3;
  const auto a = estimate_sequential(model, data, kThetaTrue, cfg);
  const auto b = estimate_parallel(model, data, kThetaTrue, cfg);
  CHECK(a.loglik == b.loglik);
  CHECK(a.variance == b.variance);
}

TEST_CASE("parallel K distribution matches the sequential one") {
  const OrientationModel model;
  const auto data = model.generate(10000, kThetaTrue, 5);
  EngineConfig seq_cfg;
  seq_cfg.master_seed = 1;
  EngineConfig par_cfg;
  par_cfg.master_seed = 2;
  const auto seq = estimate_sequential(model, data, kThetaTrue, seq_cfg);
  const auto par = estimate_parallel(model, data, kThetaTrue, par_cfg);
  CHECK(ks_p_value(all_k(seq), all_k(par)) > 0.01);
}

TEST_CASE("early stopping returns the threshold exactly") {
  const ChoiceModel model;
  const auto data = model.generate(50, 2, std::vector<double>{0.95}, 6);
  const std::vector<double> hopeless = {1e-7};
  const double lower = -50.0 * std::log(2.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EngineConfig cfg;
    cfg.master_seed = seed;
    cfg.early_stop_threshold = lower;
    const auto rep = estimate_parallel(model, data, hopeless, cfg);
    CHECK(rep.stopped_early);
    CHECK(rep.loglik == lower);
  }
}

TEST_CASE("early-stop bound trace is non-increasing and the estimate respects the floor") {
  const OrientationModel model;
  const auto data = model.generate(200, kThetaTrue, 7);
  const std::vector<std::vector<double>> thetas = {kThetaTrue, {std::log(0.2), 1.5, 0.01}, {std::log(5.0), -1.0, 0.5}};
  const double lower = -200.0 * std::log(2.0);
  for (const auto& theta : thetas) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      EngineConfig cfg;
      cfg.master_seed = seed;
      cfg.early_stop_threshold = lower;
      cfg.record_bound_trace = true;
      const auto rep = estimate_parallel(model, data, theta, cfg);
      REQUIRE_FALSE(rep.bound_trace.empty());
      // exact in real arithmetic; allow for rounding in the running sums
      bool monotone = true;
      for (std::size_t k = 1; k < rep.bound_trace.size(); ++k) {
        monotone &= rep.bound_trace[k] <= rep.bound_trace[k - 1] + 1e-12 * std::abs(rep.bound_trace[k - 1]);
      }
      CHECK(monotone);
      CHECK(rep.loglik >= lower);
      if (!rep.stopped_early) CHECK(rep.bound_trace.back() == doctest::Approx(rep.loglik).epsilon(1e-12));
    }
  }
}

TEST_CASE("sample cap marks truncated trials") {
  const ChoiceModel model;
  auto data = model.generate(20, 3, std::vector<double>{1.0}, 8);
  data.trials[4].response = 2;
  data.trials[11].response = 1;
  const std::vector<double> theta = {1.0};
  EngineConfig cfg;
  cfg.per_trial_sample_cap = 40;
  for (const auto& rep : {estimate_sequential(model, data, theta, cfg), estimate_parallel(model, data, theta, cfg)}) {
    CHECK(rep.truncated);
    CHECK(rep.truncated_trials == std::vector<std::size_t>{4, 11});
    CHECK(rep.per_trial[4].truncated);
    CHECK(rep.per_trial[4].k[0] == 40);
    CHECK_FALSE(rep.per_trial[0].truncated);
  }
}

TEST_CASE("engine rejects bad configurations") {
  const ChoiceModel model;
  const std::vector<double> theta = {0.5};
  const auto data = model.generate(5, 2, theta, 9);
  EngineConfig cfg;
  cfg.per_trial_repeats = {1, 2};
  CHECK_THROWS_AS(estimate_sequential(model, data, theta, cfg), std::invalid_argument);
  cfg.per_trial_repeats.clear();
  cfg.repeats = 0;
  CHECK_THROWS_AS(estimate_parallel(model, data, theta, cfg), std::invalid_argument);
  DatasetFor<ChoiceModel> empty;
  CHECK_THROWS_AS(estimate_parallel(model, empty, theta, EngineConfig{}), std::invalid_argument);
}

TEST_CASE("fixed sampling engine") {
  const ChoiceModel model;
  const std::vector<double> theta = {1.0};
  const auto data = model.generate(10, 3, theta, 10);
  FixedConfig cfg;
  cfg.samples = 10;
  const auto rep = estimate_fixed(model, data, theta, cfg);
  CHECK(rep.loglik == 0.0);
  CHECK(std::isnan(rep.variance));
  CHECK(rep.total_samples == 100);
  cfg.variant = FixedVariant::Naive;
  CHECK(estimate_fixed(model, data, std::vector<double>{0.0}, cfg).loglik == -INFINITY);
  cfg.variant = FixedVariant::Bounded;
  CHECK(estimate_fixed(model, data, std::vector<double>{0.0}, cfg).loglik == doctest::Approx(10.0 * std::log(0.05)));

  const OrientationModel orient;
  const auto od = orient.generate(400, kThetaTrue, 11);
  FixedConfig fc;
  fc.master_seed = 5;
  fc.threads = 1;
  const double one = estimate_fixed(orient, od, kThetaTrue, fc).loglik;
  fc.threads = 4;
  CHECK(estimate_fixed(orient, od, kThetaTrue, fc).loglik == one);
}

TEST_CASE("orientation estimates are unbiased and calibrated") {
  const OrientationModel model;
  const std::vector<std::vector<double>> thetas = {
      kThetaTrue, {std::log(0.5), -0.5, 0.02}, {std::log(4.0), 0.8, 0.15}, {std::log(1.0), 0.0, 0.05},
      {std::log(8.0), -1.5, 0.3}};
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    const auto data = model.generate(600, thetas[t], 100 + t);
    const double exact = exact_loglik(model, data, thetas[t]);
    std::vector<double> est;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      EngineConfig cfg;
      cfg.master_seed = derive_seed(seed, t);
      est.push_back(estimate_parallel(model, data, thetas[t], cfg).loglik);
    }
    const auto m = moments(est);
    CHECK(std::abs(m.mean - exact) < 4.0 * m.se());
  }

  // 2000 runs put the relative standard error of the sample variance near 3%
  const auto data = model.generate(600, kThetaTrue, 12);
  std::vector<double> est;
  double reported = 0.0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    EngineConfig cfg;
    cfg.master_seed = seed;
    const auto rep = estimate_parallel(model, data, kThetaTrue, cfg);
    est.push_back(rep.loglik);
    reported += rep.variance;
  }
  reported /= 2000.0;
  CHECK(std::abs(moments(est).var / reported - 1.0) < 0.1);
}

TEST_CASE("repeat allocation") {
  SUBCASE("constant p gives equal repeats") {
    const std::vector<double> p(10, 0.3);
    const auto r = allocate_repeats(p, 200.0);
    CHECK(std::all_of(r.begin(), r.end(), [&](int v) { return v == r[0]; }));
  }
  SUBCASE("trials near one half get more repeats") {
    const std::vector<double> p = {0.5, 0.99};
    const auto r = allocate_repeats(p, 100.0);
    CHECK(r[0] > r[1]);
  }
  SUBCASE("allocation weight") {
    CHECK(std::sqrt(0.5 * dilog_one_minus(0.5)) == doctest::Approx(0.5395).epsilon(1e-4));
    CHECK(std::sqrt(0.5 * dilog_one_minus(0.5)) == doctest::Approx(std::sqrt(0.5 * oracle::kDilogHalf)));
  }
  SUBCASE("budget infeasible") {
    const std::vector<double> p = {0.1, 0.5};
    CHECK_THROWS_AS(allocate_repeats(p, 11.9), std::invalid_argument);
    CHECK_NOTHROW(allocate_repeats(p, 12.0));
    const std::vector<double> bad = {0.0, 0.5};
    CHECK_THROWS_AS(allocate_repeats(bad, 100.0), std::domain_error);
  }
  SUBCASE("expected cost meets the budget within rounding slack") {
    Rng rng(13);
    std::vector<double> p(200);
    for (double& v : p) v = 0.02 + 0.97 * rng.uniform();
    const double budget = 5000.0;
    const auto r = allocate_repeats(p, budget);
    double cost = 0.0;
    double slack = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      cost += r[i] / p[i];
      slack += 1.0 / p[i];
    }
    CHECK(cost >= budget * (1.0 - 1e-12));
    CHECK(cost <= budget + slack);
  }
}

TEST_CASE("allocation gain") {
  const std::vector<double> constant(7, 0.42);
  CHECK(allocation_gain(constant) == doctest::Approx(1.0).epsilon(1e-14));
  const std::vector<double> ones(3, 1.0);
  CHECK(allocation_gain(ones) == 1.0);

  const std::vector<double> two = {0.1, 0.9};
  const double l1 = dilog_one_minus(0.1);
  const double l9 = dilog_one_minus(0.9);
  const double cross = std::sqrt(l1 / 0.1) + std::sqrt(l9 / 0.9);
  CHECK(allocation_gain(two) == doctest::Approx((l1 + l9) * (10.0 + 1.0 / 0.9) / (cross * cross)).epsilon(1e-14));
  CHECK(allocation_gain(two) > 1.0);

  Rng rng(14);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> p(30);
    for (double& v : p) v = 1e-3 + (1.0 - 1e-3) * rng.uniform();
    CHECK(allocation_gain(p) >= 1.0 - 1e-12);
    const auto r = allocate_repeats(p, 100.0 * 30);
    const double realized = realized_allocation_gain(p, r);
    CHECK(realized <= allocation_gain(p) + 1e-9);
    CHECK(realized > 1.0);
  }
  std::vector<int> uniform(30, 3);
  std::vector<double> p(30);
  for (double& v : p) v = 0.05 + 0.9 * rng.uniform();
  CHECK(realized_allocation_gain(p, uniform) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pilot then allocate") {
  SUBCASE("deterministic model") {
    const ChoiceModel model;
    const std::vector<double> theta = {1.0};
    const auto data = model.generate(20, 3, theta, 15);
    const auto r = pilot_then_allocate(model, data, theta, 10, 20.0);
    CHECK(r == std::vector<int>(20, 1));
  }
  SUBCASE("orientation repeats anticorrelate with the trial likelihood") {
    const OrientationModel model;
    const auto data = model.generate(600, kThetaTrue, 16);
    const auto r = pilot_then_allocate(model, data, kThetaTrue, 100, 600.0 * 20.0, 3);
    const auto params = model.prepare(kThetaTrue);
    std::vector<double> p;
    std::vector<double> rd;
    for (std::size_t i = 0; i < data.size(); ++i) {
      p.push_back(std::exp(model.exact_trial_loglik(data.trials[i].stimulus, data.trials[i].response, params)));
      rd.push_back(r[i]);
    }
    CHECK(spearman(rd, p) < -0.5);
  }
  SUBCASE("pilot estimates") {
    EstimateReport rep;
    rep.per_trial = {TrialRecord{{1, 3}, 0, 0, false}, TrialRecord{{4}, 0, 0, false}};
    const auto p = pilot_probabilities(rep);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.25);
    rep.stopped_early = true;
    CHECK_THROWS_AS(pilot_probabilities(rep), std::invalid_argument);
  }
}

TEST_CASE("approximate IBS") {
  const std::vector<double> none = {0.5};
  auto metric = [](double a, double b) { return std::abs(a - b); };
  SUBCASE("uniform model with an interior response") {
    const UniformUnitModel model;
    const auto data = constant_response_data<UniformUnitModel>(1000, 0.5);
    EngineConfig cfg;
    cfg.repeats = 100;
    const auto rep = aibs_estimate(model, data, none, metric, 0.1, [](double, double e) { return 2.0 * e; }, cfg);
    // 10^5 independent trial estimates averaged
    const double se = std::sqrt(rep.variance) / 1000.0;
    CHECK(std::abs(rep.loglik / 1000.0) < 3.0 * se);
  }
  SUBCASE("ball covering the whole space") {
    const UniformUnitModel model;
    const auto data = constant_response_data<UniformUnitModel>(50, 0.3);
    const auto rep = aibs_estimate(model, data, none, metric, 2.0, [](double, double) { return 1.0; }, EngineConfig{});
    CHECK(rep.total_samples == 50);
    CHECK(rep.loglik == 0.0);
    const auto scaled = aibs_estimate(model, data, none, metric, 2.0, [](double, double) { return 4.0; }, EngineConfig{});
    CHECK(scaled.loglik == doctest::Approx(-50.0 * std::log(4.0)));
  }
  SUBCASE("gaussian model converges to the density as epsilon shrinks") {
    const StandardNormalModel model;
    constexpr double r = 2.0;
    const auto data = constant_response_data<StandardNormalModel>(1000, r);
    const double log_density = -0.5 * r * r - 0.5 * std::log(2.0 * kPi);
    double prev_error = INFINITY;
    for (double eps : {0.5, 0.2, 0.1}) {
      EngineConfig cfg;
      cfg.repeats = 1000;
      cfg.record_trials = false;
      cfg.master_seed = static_cast<std::uint64_t>(eps * 100);
      const auto rep = aibs_estimate(model, data, none, metric, eps, [](double, double e) { return 2.0 * e; }, cfg);
      const double mean = rep.loglik / 1000.0;
      // the ball probability by quadrature gives the expected estimate exactly
      const double ball = normal_cdf(r + eps) - normal_cdf(r - eps);
      const double binned = std::log(ball / (2.0 * eps));
      const double se = std::sqrt(rep.variance) / 1000.0;
      CHECK(std::abs(mean - binned) < 3.0 * se);
      const double error = std::abs(mean - log_density);
      CHECK(error < prev_error);
      prev_error = error;
    }
  }
  CHECK_THROWS_AS(aibs_estimate(UniformUnitModel{}, constant_response_data<UniformUnitModel>(1, 0.5), none, metric,
                                0.0, [](double, double) { return 1.0; }, EngineConfig{}),
                  std::invalid_argument);
}

TEST_CASE("entropy estimation") {
  SUBCASE("point mass") {
    const auto e = estimate_entropy([](Rng&) { return 3; }, 1000, 1);
    CHECK(e.estimate == 0.0);
    CHECK(e.variance == 0.0);
    CHECK(e.total_samples == 1000);
  }
  SUBCASE("fair coin") {
    const auto e = estimate_entropy([](Rng& rng) { return rng.below(2); }, 100000, 2);
    CHECK(std::abs(e.estimate - std::log(2.0)) < 3.0 * std::sqrt(e.variance));
  }
  SUBCASE("one half, one quarter, one quarter") {
    auto sample = [](Rng& rng) {
      const double u = rng.uniform();
      return u < 0.5 ? 0 : (u < 0.75 ? 1 : 2);
    };
    const auto e = estimate_entropy(sample, 100000, 3);
    CHECK(std::abs(e.estimate - 1.5 * std::log(2.0)) < 3.0 * std::sqrt(e.variance));
  }
  SUBCASE("cross-entropy of a coin against a biased coin") {
    auto p = [](Rng& rng) { return rng.below(2); };
    auto q = [](Rng& rng) { return rng.uniform() < 0.2 ? 1u : 0u; };
    const auto e = estimate_cross_entropy(p, q, 100000, 4);
    const double exact = -0.5 * std::log(0.2) - 0.5 * std::log(0.8);
    CHECK(std::abs(e.estimate - exact) < 3.0 * std::sqrt(e.variance));
  }
}
