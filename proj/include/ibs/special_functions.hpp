#pragma once

#include <cstdint>
#include <vector>

namespace ibs {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kEulerGamma = 0.577215664901532860606512090082402431;
inline constexpr double kPiSquaredOverSix = kPi * kPi / 6.0;

/// H_n = sum_{k=1..n} 1/k, with H_0 = 0.
double harmonic(std::int64_t n);

/// Partial sum sum_{k=1..n} 1/k^2 (the generalized harmonic number of order 2).
double harmonic2(std::int64_t n);

/// Digamma function psi(x) for x > 0. Throws std::domain_error otherwise.
double digamma(double x);

/// Trigamma function psi_1(x) for x > 0. Throws std::domain_error otherwise.
double trigamma(double x);

/// Dilogarithm Li_2(z) = sum_{k>=1} z^k / k^2, restricted to 0 <= z <= 1.
double dilog(double z);

/// Li_2(1 - p) for 0 <= p <= 1, evaluated without forming 1 - p when p is small.
double dilog_one_minus(double p);

/// Standard normal cumulative distribution function.
double normal_cdf(double x);

/// Modified Bessel function of the first kind, order zero.
double bessel_i0(double x);

/// Exponentially scaled I0: exp(-|x|) * I0(x). Finite for all x.
double bessel_i0e(double x);

/// Density of the absolute circular difference |x2 - x1| in [0, pi] where
/// x1 ~ VonMises(0, kappa) and x2 ~ VonMises(center_offset, kappa).
double circ_dist_pdf(double delta, double kappa, double center_offset = 0.0);

struct CircDistValue {
  double density;
  double cumulative;
};

/// Density and cumulative distribution of the absolute circular difference
/// between two independent von Mises variables with common mean and
/// concentration kappa. The cumulative is a trapezoid integral on a fixed grid.
CircDistValue circ_dist_pdf_cdf(double delta, double kappa);

/// Tabulated density and cumulative of the zero-offset circular distance on
/// a uniform grid over [0, pi]. Reused by the change-localization likelihood.
class CircDistTable {
 public:
  static constexpr int kGridPoints = 2000;

  explicit CircDistTable(double kappa, int grid_points = kGridPoints);

  [[nodiscard]] double kappa() const noexcept { return kappa_; }
  [[nodiscard]] double step() const noexcept { return step_; }
  [[nodiscard]] int size() const noexcept { return static_cast<int>(grid_.size()); }
  [[nodiscard]] double grid(int i) const { return grid_[i]; }
  [[nodiscard]] double pdf_at(int i) const { return pdf_[i]; }
  [[nodiscard]] double cdf_at(int i) const { return cdf_[i]; }

  /// Linear interpolation of the tabulated cumulative.
  [[nodiscard]] double cdf(double delta) const;
  [[nodiscard]] double pdf(double delta) const;

 private:
  double kappa_;
  double step_;
  std::vector<double> grid_;
  std::vector<double> pdf_;
  std::vector<double> cdf_;
};

}  // namespace ibs
