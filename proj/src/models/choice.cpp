#include "ibs/models/choice.hpp"

#include <cmath>

#include "ibs/text_format.hpp"

namespace ibs {

ParameterSpace ChoiceModel::parameter_space() const {
  return ParameterSpace({{"p", 0.0, 1.0, 0.05, 0.95}});
}

ChoiceModel::Params ChoiceModel::prepare(std::span<const double> theta) const {
  if (theta.size() != 1) throw std::invalid_argument("choice model expects (p)");
  if (!(theta[0] >= 0.0 && theta[0] <= 1.0)) throw std::invalid_argument("choice model: p outside [0, 1]");
  return {theta[0]};
}

ChoiceModel::Response ChoiceModel::simulate(Stimulus options, const Params& p, Rng& rng) const {
  if (rng.uniform() < p.p) return 0;
  return 1 + static_cast<int>(rng.below(static_cast<std::uint32_t>(options - 1)));
}

double ChoiceModel::exact_trial_loglik(Stimulus options, Response r, const Params& p) const {
  if (r == 0) return std::log(p.p);
  return std::log1p(-p.p) - std::log(static_cast<double>(options - 1));
}

DatasetFor<ChoiceModel> ChoiceModel::generate(int n, int options, std::span<const double> theta,
                                              std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("generate: need at least one trial");
  if (options < 2) throw std::invalid_argument("choice model needs at least two options");
  const auto params = prepare(theta);
  DatasetFor<ChoiceModel> data;
  data.model = std::string(kName);
  data.theta.assign(theta.begin(), theta.end());
  data.seed = seed;
  Rng rng(seed);
  for (int i = 0; i < n; ++i) data.trials.push_back({options, simulate(options, params, rng)});
  return data;
}

void ChoiceModel::format_trial(std::string& out, const Trial<Stimulus, Response>& t) {
  append_number(out, static_cast<std::int64_t>(t.stimulus));
  out.push_back(',');
  append_number(out, static_cast<std::int64_t>(t.response));
}

Trial<ChoiceModel::Stimulus, ChoiceModel::Response> ChoiceModel::parse_trial(std::string_view line) {
  const auto f = split(line, ',');
  if (f.size() != 2) throw DataError("choice trial needs 2 fields");
  const auto options = parse_integer<int>(f[0]);
  const auto r = parse_integer<int>(f[1]);
  if (options < 2 || r < 0 || r >= options) throw DataError("choice trial out of range");
  return {options, r};
}

}  // namespace ibs
