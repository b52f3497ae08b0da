#pragma once

#include <concepts>
#include <span>

#include "ibs/dataset.hpp"
#include "ibs/parameter_space.hpp"
#include "ibs/random.hpp"

namespace ibs {

/// A stochastic response generator. `prepare` turns a raw parameter vector
/// into whatever the model wants to reuse across trials; `simulate` must be
/// callable concurrently with independent streams when
/// `M::kConcurrentSafe` is true.
template <class M>
concept SimulatorModel = requires(const M& m, std::span<const double> theta, const typename M::Params& params,
                                  const typename M::Stimulus& s, Rng& rng) {
  typename M::Response;
  { m.prepare(theta) } -> std::same_as<typename M::Params>;
  { m.simulate(s, params, rng) } -> std::convertible_to<typename M::Response>;
  { m.parameter_space() } -> std::convertible_to<ParameterSpace>;
  { M::kConcurrentSafe } -> std::convertible_to<bool>;
};

template <class M>
concept ExactLikelihoodModel = SimulatorModel<M> && requires(const M& m, const typename M::Params& params,
                                                             const typename M::Stimulus& s,
                                                             const typename M::Response& r) {
  { m.exact_trial_loglik(s, r, params) } -> std::convertible_to<double>;
};

template <class M>
using DatasetFor = Dataset<typename M::Stimulus, typename M::Response>;

/// Sum of exact per-trial log-likelihoods.
template <ExactLikelihoodModel M>
double exact_loglik(const M& model, const DatasetFor<M>& data, std::span<const double> theta) {
  const auto params = model.prepare(theta);
  double total = 0.0;
  for (const auto& t : data.trials) total += model.exact_trial_loglik(t.stimulus, t.response, params);
  return total;
}

}  // namespace ibs
