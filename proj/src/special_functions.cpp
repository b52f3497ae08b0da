#include "ibs/special_functions.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

namespace ibs {
namespace {

constexpr int kTableSize = 256;
constexpr std::int64_t kDirectSumLimit = 10000;

// Below this the recurrence shifts the argument up; above it the asymptotic
// series is accurate to ~1e-16.
constexpr double kAsymptoticThreshold = 10.0;

struct HarmonicTables {
  std::array<double, kTableSize + 1> h1{};
  std::array<double, kTableSize + 1> h2{};
  HarmonicTables() {
    for (int n = 1; n <= kTableSize; ++n) {
      // reverse summation keeps the rounding error at a few ulps
      double s1 = 0.0;
      double s2 = 0.0;
      for (int k = n; k >= 1; --k) {
        s1 += 1.0 / k;
        s2 += 1.0 / (static_cast<double>(k) * k);
      }
      h1[n] = s1;
      h2[n] = s2;
    }
  }
};

const HarmonicTables& tables() {
  static const HarmonicTables t;
  return t;
}

void require_positive(double x, const char* name) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::domain_error(std::string(name) + ": argument must be positive and finite, got " +
                            std::to_string(x));
  }
}

// Li_2(z) by its power series; only used for 0 <= z <= 0.5.
double dilog_series(double z) {
  if (z == 0.0) return 0.0;
  double term = z;
  double sum = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double add = term / (static_cast<double>(k) * k);
    sum += add;
    if (add < 1e-18 * sum) break;
    term *= z;
  }
  return sum;
}

constexpr double kBesselSeriesLimit = 20.0;

double bessel_i0_series(double ax) {
  const double q = 0.25 * ax * ax;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

// sqrt(2 pi x) e^{-x} I0(x) for large x.
double bessel_i0e_asymptotic_sum(double ax) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 100; ++k) {
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * ax);
    if (std::abs(next) > std::abs(term)) break;  // series is asymptotic
    term = next;
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace

double harmonic(std::int64_t n) {
  if (n < 0) throw std::domain_error("harmonic: n must be non-negative");
  if (n <= kTableSize) return tables().h1[static_cast<std::size_t>(n)];
  if (n < kDirectSumLimit) {
    double s = 0.0;
    for (std::int64_t k = n; k > kTableSize; --k) s += 1.0 / static_cast<double>(k);
    return s + tables().h1[kTableSize];
  }
  return digamma(static_cast<double>(n) + 1.0) + kEulerGamma;
}

double harmonic2(std::int64_t n) {
  if (n < 0) throw std::domain_error("harmonic2: n must be non-negative");
  if (n <= kTableSize) return tables().h2[static_cast<std::size_t>(n)];
  if (n < kDirectSumLimit) {
    double s = 0.0;
    for (std::int64_t k = n; k > kTableSize; --k) {
      const auto kd = static_cast<double>(k);
      s += 1.0 / (kd * kd);
    }
    return s + tables().h2[kTableSize];
  }
  return kPiSquaredOverSix - trigamma(static_cast<double>(n) + 1.0);
}

double digamma(double x) {
  require_positive(x, "digamma");
  double result = 0.0;
  while (x < kAsymptoticThreshold) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number tail: B_{2n} / (2n x^{2n})
  const double tail =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12))))));
  return result + std::log(x) - 0.5 * inv - tail;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double result = 0.0;
  while (x < kAsymptoticThreshold) {
    result += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double tail =
      inv * inv2 *
      (1.0 / 6 -
       inv2 * (1.0 / 30 -
               inv2 * (1.0 / 42 -
                       inv2 * (1.0 / 30 - inv2 * (5.0 / 66 - inv2 * (691.0 / 2730 - inv2 * 7.0 / 6))))));
  return result + inv + 0.5 * inv2 + tail;
}

double dilog(double z) {
  if (!(z >= 0.0 && z <= 1.0)) {
    throw std::domain_error("dilog: argument must lie in [0, 1], got " + std::to_string(z));
  }
  if (z <= 0.5) return dilog_series(z);
  if (z == 1.0) return kPiSquaredOverSix;
  const double w = 1.0 - z;
  return kPiSquaredOverSix - std::log(z) * std::log(w) - dilog_series(w);
}

double dilog_one_minus(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error("dilog_one_minus: argument must lie in [0, 1], got " + std::to_string(p));
  }
  if (p >= 0.5) return dilog_series(1.0 - p);
  if (p == 0.0) return kPiSquaredOverSix;
  return kPiSquaredOverSix - std::log1p(-p) * std::log(p) - dilog_series(p);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double bessel_i0(double x) {
  const double ax = std::abs(x);
  if (ax <= kBesselSeriesLimit) return bessel_i0_series(ax);
  return std::exp(ax) * bessel_i0e_asymptotic_sum(ax) / std::sqrt(2.0 * kPi * ax);
}

double bessel_i0e(double x) {
  const double ax = std::abs(x);
  if (ax <= kBesselSeriesLimit) return bessel_i0_series(ax) * std::exp(-ax);
  return bessel_i0e_asymptotic_sum(ax) / std::sqrt(2.0 * kPi * ax);
}

double circ_dist_pdf(double delta, double kappa, double center_offset) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw std::domain_error("circ_dist_pdf: kappa must be positive");
  }
  if (!(delta >= 0.0 && delta <= kPi)) {
    throw std::domain_error("circ_dist_pdf: delta must lie in [0, pi]");
  }
  // The signed difference d = x2 - x1 has density
  //   I0(2 kappa |cos((d - offset) / 2)|) / (2 pi I0(kappa)^2),
  // evaluated here in exponentially scaled form.
  const double norm = 2.0 * kPi * bessel_i0e(kappa) * bessel_i0e(kappa);
  auto signed_density = [&](double d) {
    const double a = 2.0 * kappa * std::abs(std::cos(0.5 * (d - center_offset)));
    return bessel_i0e(a) * std::exp(a - 2.0 * kappa) / norm;
  };
  return signed_density(delta) + signed_density(-delta);
}

CircDistTable::CircDistTable(double kappa, int grid_points)
    : kappa_(kappa), step_(kPi / (grid_points - 1)) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw std::domain_error("CircDistTable: kappa must be positive");
  }
  if (grid_points < 2) throw std::invalid_argument("CircDistTable: need at least two grid points");
  grid_.resize(static_cast<std::size_t>(grid_points));
  pdf_.resize(grid_.size());
  cdf_.resize(grid_.size());
  for (int i = 0; i < grid_points; ++i) {
    grid_[i] = i == grid_points - 1 ? kPi : i * step_;
    pdf_[i] = circ_dist_pdf(grid_[i], kappa_);
  }
  cdf_[0] = 0.0;
  for (int i = 1; i < grid_points; ++i) {
    cdf_[i] = cdf_[i - 1] + 0.5 * step_ * (pdf_[i - 1] + pdf_[i]);
  }
  const double total = cdf_.back();
  for (double& c : cdf_) c /= total;
  cdf_.back() = 1.0;
}

double CircDistTable::cdf(double delta) const {
  if (!(delta >= 0.0 && delta <= kPi)) {
    throw std::domain_error("CircDistTable::cdf: delta must lie in [0, pi]");
  }
  const double pos = delta / step_;
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= cdf_.size()) return 1.0;
  const double frac = pos - static_cast<double>(i);
  return cdf_[i] + frac * (cdf_[i + 1] - cdf_[i]);
}

double CircDistTable::pdf(double delta) const { return circ_dist_pdf(delta, kappa_); }

CircDistValue circ_dist_pdf_cdf(double delta, double kappa) {
  thread_local std::unique_ptr<CircDistTable> cached;
  if (!cached || cached->kappa() != kappa) cached = std::make_unique<CircDistTable>(kappa);
  return {cached->pdf(delta), cached->cdf(delta)};
}

}  // namespace ibs
