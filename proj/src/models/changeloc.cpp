#include "ibs/models/changeloc.hpp"

#include <cmath>

#include "ibs/text_format.hpp"

namespace ibs {

namespace {

double wrap_pm_pi(double x) {
  x = std::remainder(x, 2.0 * kPi);
  return x;
}

double wrap_0_2pi(double x) {
  x = std::fmod(x, 2.0 * kPi);
  return x < 0.0 ? x + 2.0 * kPi : x;
}

}  // namespace

double changeloc_p_correct(double delta_s, double gamma, const CircDistTable& table) {
  if (!(delta_s >= 0.0 && delta_s <= kPi)) throw std::domain_error("changeloc_p_correct: delta_s must lie in [0, pi]");
  const int n = table.size();
  double integral = 0.0;
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    const double c = table.cdf_at(i);
    const double c5 = c * c * c * c * c;
    const double f = circ_dist_pdf(table.grid(i), table.kappa(), delta_s) * c5;
    if (i > 0) integral += 0.5 * (table.grid(i) - table.grid(i - 1)) * (prev + f);
    prev = f;
  }
  integral = std::fmin(1.0, integral);
  return gamma / ChangeLocModel::kPatches + (1.0 - gamma) * integral;
}

double changeloc_p_correct(double delta_s, double eta, double gamma) {
  const CircDistTable table(std::exp(-2.0 * eta));
  return changeloc_p_correct(delta_s, gamma, table);
}

ParameterSpace ChangeLocModel::parameter_space() const {
  return ParameterSpace({
      {"eta", std::log(0.05), std::log(2.0), std::log(0.1), std::log(1.0)},
      {"gamma", 0.01, 1.0, 0.01, 0.5},
  });
}

ChangeLocModel::Params ChangeLocModel::prepare(std::span<const double> theta) const {
  if (theta.size() != 2) throw std::invalid_argument("changeloc model expects (eta, gamma)");
  if (!(theta[1] >= 0.0 && theta[1] <= 1.0)) throw std::invalid_argument("changeloc model: gamma outside [0, 1]");
  const double kappa = std::exp(-2.0 * theta[0]);
  return {kappa, theta[1], std::make_shared<const CircDistTable>(kappa)};
}

ChangeLocModel::Response ChangeLocModel::simulate(const Stimulus& s, const Params& p, Rng& rng) const {
  if (rng.uniform() < p.gamma) return 1 + static_cast<int>(rng.below(kPatches));
  int best = 0;
  double best_d = -1.0;
  for (int j = 0; j < kPatches; ++j) {
    const double x1 = rng.von_mises(s.first[j], p.kappa);
    const double x2 = rng.von_mises(s.second[j], p.kappa);
    const double d = std::abs(wrap_pm_pi(x2 - x1));
    if (d > best_d) {
      best_d = d;
      best = j;
    }
  }
  return best + 1;
}

double ChangeLocModel::change_magnitude(const Stimulus& s) {
  const int c = s.changed - 1;
  return std::fmin(kPi, std::abs(wrap_pm_pi(s.second[c] - s.first[c])));
}

double ChangeLocModel::exact_trial_loglik(const Stimulus& s, Response r, const Params& p) const {
  const double pc = changeloc_p_correct(change_magnitude(s), p.gamma, *p.table);
  if (r == s.changed) return std::log(pc);
  return std::log((1.0 - pc) / (kPatches - 1));
}

DatasetFor<ChangeLocModel> ChangeLocModel::generate(int n, std::span<const double> theta, std::uint64_t seed) const {
  if (n < 1) throw std::invalid_argument("generate: need at least one trial");
  const auto params = prepare(theta);
  DatasetFor<ChangeLocModel> data;
  data.model = std::string(kName);
  data.theta.assign(theta.begin(), theta.end());
  data.seed = seed;
  data.trials.reserve(static_cast<std::size_t>(n));
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    Stimulus s;
    for (int j = 0; j < kPatches; ++j) s.first[j] = 2.0 * kPi * rng.uniform();
    s.second = s.first;
    s.changed = 1 + static_cast<int>(rng.below(kPatches));
    const double change = rng.von_mises(0.0, kChangeKappa);
    s.second[s.changed - 1] = wrap_0_2pi(s.first[s.changed - 1] + change);
    data.trials.push_back({s, simulate(s, params, rng)});
  }
  return data;
}

std::string_view ChangeLocModel::fields() {
  return "first1_rad,first2_rad,first3_rad,first4_rad,first5_rad,first6_rad,"
         "second1_rad,second2_rad,second3_rad,second4_rad,second5_rad,second6_rad,changed,response";
}

void ChangeLocModel::format_trial(std::string& out, const Trial<Stimulus, Response>& t) {
  for (double v : t.stimulus.first) {
    append_number(out, v);
    out.push_back(',');
  }
  for (double v : t.stimulus.second) {
    append_number(out, v);
    out.push_back(',');
  }
  append_number(out, static_cast<std::int64_t>(t.stimulus.changed));
  out.push_back(',');
  append_number(out, static_cast<std::int64_t>(t.response));
}

Trial<ChangeLocModel::Stimulus, ChangeLocModel::Response> ChangeLocModel::parse_trial(std::string_view line) {
  const auto f = split(line, ',');
  if (f.size() != 2 * kPatches + 2) throw DataError("changeloc trial needs 14 fields");
  Trial<Stimulus, Response> t;
  for (int j = 0; j < kPatches; ++j) {
    t.stimulus.first[j] = parse_double(f[j]);
    t.stimulus.second[j] = parse_double(f[kPatches + j]);
  }
  t.stimulus.changed = parse_integer<int>(f[2 * kPatches]);
  t.response = parse_integer<int>(f[2 * kPatches + 1]);
  if (t.stimulus.changed < 1 || t.stimulus.changed > kPatches || t.response < 1 || t.response > kPatches) {
    throw DataError("changeloc patch index out of range");
  }
  return t;
}

}  // namespace ibs
