#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "ibs/models/model.hpp"

namespace ibs {

/// Minimal categorical reference model. The stimulus is the number of
/// response options n >= 2; option 0 is chosen with probability p and each
/// other option with probability (1 - p) / (n - 1). theta = (p).
/// p = 1/n is a uniform guesser, p = 1 a deterministic responder.
class ChoiceModel {
 public:
  using Stimulus = int;
  using Response = int;
  struct Params {
    double p;
  };
  static constexpr bool kConcurrentSafe = true;
  static constexpr std::string_view kName = "choice";

  [[nodiscard]] ParameterSpace parameter_space() const;
  [[nodiscard]] Params prepare(std::span<const double> theta) const;
  Response simulate(Stimulus options, const Params& p, Rng& rng) const;
  [[nodiscard]] double exact_trial_loglik(Stimulus options, Response r, const Params& p) const;

  /// n trials with `options` choices each, responses drawn from the model.
  [[nodiscard]] DatasetFor<ChoiceModel> generate(int n, int options, std::span<const double> theta,
                                                 std::uint64_t seed) const;

  static std::string_view fields() { return "options,response"; }
  static void format_trial(std::string& out, const Trial<Stimulus, Response>& t);
  static Trial<Stimulus, Response> parse_trial(std::string_view line);
};

}  // namespace ibs
