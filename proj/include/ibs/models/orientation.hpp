#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "ibs/models/model.hpp"

namespace ibs {

/// Orientation discrimination: a lapsing observer reports whether a grating
/// (orientation s, degrees) is tilted right of the reference.
/// theta = (eta = log sigma [log deg], mu [deg], gamma).
/// Response 1 = rightwards, 0 = leftwards.
class OrientationModel {
 public:
  using Stimulus = double;
  using Response = int;
  struct Params {
    double sigma;
    double mu;
    double gamma;
  };
  static constexpr bool kConcurrentSafe = true;
  static constexpr std::string_view kName = "orientation";
  static constexpr int kDefaultTrials = 600;
  static constexpr double kStimulusSd = 3.0;

  [[nodiscard]] ParameterSpace parameter_space() const;
  [[nodiscard]] Params prepare(std::span<const double> theta) const;
  Response simulate(Stimulus s, const Params& p, Rng& rng) const;
  [[nodiscard]] double exact_trial_loglik(Stimulus s, Response r, const Params& p) const;

  /// Stimuli from N(0, 3 deg); trials drawn sequentially from Rng(seed).
  [[nodiscard]] DatasetFor<OrientationModel> generate(int n, std::span<const double> theta, std::uint64_t seed) const;

  /// log 2 per trial: the chance model.
  [[nodiscard]] static double chance_loglik_per_trial();

  static std::string_view fields() { return "stimulus_deg,response"; }
  static void format_trial(std::string& out, const Trial<Stimulus, Response>& t);
  static Trial<Stimulus, Response> parse_trial(std::string_view line);
};

/// gamma/2 + (1 - gamma) * Phi((s - mu) / sigma).
double psychometric_prob_rightward(double s, double sigma, double mu, double gamma);

}  // namespace ibs
