#include "ibs/models/orientation.hpp"

#include <cmath>

#include "ibs/special_functions.hpp"
#include "ibs/text_format.hpp"

namespace ibs {

double psychometric_prob_rightward(double s, double sigma, double mu, double gamma) {
  return 0.5 * gamma + (1.0 - gamma) * normal_cdf((s - mu) / sigma);
}

ParameterSpace OrientationModel::parameter_space() const {
  return ParameterSpace({
      {"eta", std::log(0.1), std::log(10.0), std::log(0.1), std::log(5.0)},
      {"mu", -2.0, 2.0, -1.0, 1.0},
      {"gamma", 0.01, 1.0, 0.01, 0.2},
  });
}

OrientationModel::Params OrientationModel::prepare(std::span<const double> theta) const {
  if (theta.size() != 3) throw std::invalid_argument("orientation model expects (eta, mu, gamma)");
  if (!(theta[2] >= 0.0 && theta[2] <= 1.0)) throw std::invalid_argument("orientation model: gamma outside [0, 1]");
  return {std::exp(theta[0]), theta[1], theta[2]};
}

OrientationModel::Response OrientationModel::simulate(Stimulus s, const Params& p, Rng& rng) const {
  if (rng.uniform() < p.gamma) return rng.uniform() < 0.5 ? 1 : 0;
  return s + p.sigma * rng.normal() > p.mu ? 1 : 0;
}

double OrientationModel::exact_trial_loglik(Stimulus s, Response r, const Params& p) const {
  // complement through the symmetric tail instead of 1 - q to keep precision
  const double z = (s - p.mu) / p.sigma;
  const double tail = normal_cdf(r == 1 ? z : -z);
  return std::log(0.5 * p.gamma + (1.0 - p.gamma) * tail);
}

DatasetFor<OrientationModel> OrientationModel::generate(int n, std::span<const double> theta,
                                                        std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("generate: need at least one trial");
  const auto params = prepare(theta);
  DatasetFor<OrientationModel> data;
  data.model = std::string(kName);
  data.theta.assign(theta.begin(), theta.end());
  data.seed = seed;
  data.trials.reserve(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const double s = kStimulusSd * rng.normal();
    data.trials.push_back({s, simulate(s, params, rng)});
  }
  return data;
}

double OrientationModel::chance_loglik_per_trial() { return -std::log(2.0); }

void OrientationModel::format_trial(std::string& out, const Trial<Stimulus, Response>& t) {
  append_number(out, t.stimulus);
  out.push_back(',');
  append_number(out, static_cast<std::int64_t>(t.response));
}

Trial<OrientationModel::Stimulus, OrientationModel::Response> OrientationModel::parse_trial(std::string_view line) {
  const auto f = split(line, ',');
  if (f.size() != 2) throw DataError("orientation trial needs 2 fields");
  const auto r = parse_integer<int>(f[1]);
  if (r != 0 && r != 1) throw DataError("orientation response must be 0 or 1");
  return {parse_double(f[0]), r};
}

}  // namespace ibs
