#include "ibs/random.hpp"

#include <cmath>

#include "ibs/special_functions.hpp"

namespace ibs {

namespace {

double wrap_angle(double x) {
  x = std::fmod(x + kPi, 2.0 * kPi);
  if (x <= 0.0) x += 2.0 * kPi;
  return x - kPi;
}

}  // namespace

double Rng::von_mises(double mu, double kappa) {
  if (kappa < 1e-8) return wrap_angle(mu + kPi * (2.0 * uniform() - 1.0));
  // Beyond this the wrapped normal with variance 1/kappa is exact to double precision.
  if (kappa > 1e6) return wrap_angle(mu + normal() / std::sqrt(kappa));

  // Best & Fisher (1979)
  const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
  const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
  const double r = (1.0 + rho * rho) / (2.0 * rho);
  double f = 0.0;
  for (;;) {
    const double u1 = uniform();
    const double u2 = uniform();
    const double z = std::cos(kPi * u1);
    f = (1.0 + r * z) / (r + z);
    const double c = kappa * (r - f);
    if (c * (2.0 - c) - u2 > 0.0) break;
    if (u2 > 0.0 && std::log(c / u2) + 1.0 - c >= 0.0) break;
  }
  const double theta = std::acos(std::fmax(-1.0, std::fmin(1.0, f)));
  return wrap_angle(uniform() < 0.5 ? mu - theta : mu + theta);
}

}  // namespace ibs
