#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "ibs/models/model.hpp"
#include "ibs/special_functions.hpp"

namespace ibs {

/// Change localization: six oriented patches are shown twice, one of them
/// rotated in between; the observer reports which patch changed.
/// Orientations live on the full circle in radians. Patches and responses
/// are numbered 1..6. theta = (eta = log sigma = -log(kappa)/2, gamma).
class ChangeLocModel {
 public:
  static constexpr int kPatches = 6;
  struct Stimulus {
    std::array<double, kPatches> first{};
    std::array<double, kPatches> second{};
    int changed = 1;
  };
  using Response = int;
  struct Params {
    double kappa;
    double gamma;
    /// Zero-offset circular distance table, shared by all trials.
    std::shared_ptr<const CircDistTable> table;
  };
  static constexpr bool kConcurrentSafe = true;
  static constexpr std::string_view kName = "changeloc";
  static constexpr int kDefaultTrials = 400;
  /// Concentration of the change-magnitude distribution.
  static constexpr double kChangeKappa = 1.0;

  [[nodiscard]] ParameterSpace parameter_space() const;
  [[nodiscard]] Params prepare(std::span<const double> theta) const;
  Response simulate(const Stimulus& s, const Params& p, Rng& rng) const;
  [[nodiscard]] double exact_trial_loglik(const Stimulus& s, Response r, const Params& p) const;

  [[nodiscard]] DatasetFor<ChangeLocModel> generate(int n, std::span<const double> theta, std::uint64_t seed) const;

  /// Absolute circular size of the change, in [0, pi].
  [[nodiscard]] static double change_magnitude(const Stimulus& s);

  static std::string_view fields();
  static void format_trial(std::string& out, const Trial<Stimulus, Response>& t);
  static Trial<Stimulus, Response> parse_trial(std::string_view line);
};

/// Probability of reporting the changed patch for a change of absolute size
/// delta_s (radians), by trapezoid integration on the table's grid:
/// gamma/6 + (1 - gamma) * int_0^pi pdf(d | delta_s) cdf_0(d)^5 dd.
double changeloc_p_correct(double delta_s, double gamma, const CircDistTable& table);

/// Convenience overload building the table for kappa = exp(-2 eta).
double changeloc_p_correct(double delta_s, double eta, double gamma);

}  // namespace ibs
