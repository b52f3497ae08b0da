#include "ibs/engine.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace ibs {

namespace {

void require_probabilities(std::span<const double> p, const char* name) {
  if (p.empty()) throw std::invalid_argument(std::string(name) + ": empty probability vector");
  for (double v : p) {
    if (!(v > 0.0 && v <= 1.0)) throw std::domain_error(std::string(name) + ": probabilities must lie in (0, 1]");
  }
}

}  // namespace

std::vector<int> allocate_repeats(std::span<const double> p_hat, double budget) {
  require_probabilities(p_hat, "allocate_repeats");
  double min_cost = 0.0;
  double denom = 0.0;
  for (double p : p_hat) {
    min_cost += 1.0 / p;
    denom += std::sqrt(dilog_one_minus(p) / p);
  }
  // a little slack so that budget == sum 1/p survives rounding in the sum
  if (!(budget >= min_cost * (1.0 - 1e-12))) {
    throw std::invalid_argument("allocate_repeats: budget " + std::to_string(budget) +
                                " is below the minimum expected cost " + std::to_string(min_cost));
  }
  std::vector<int> out(p_hat.size(), 1);
  if (denom == 0.0) return out;  // every p is 1: one repeat each is already exact
  for (std::size_t i = 0; i < p_hat.size(); ++i) {
    const double r = budget * std::sqrt(p_hat[i] * dilog_one_minus(p_hat[i])) / denom;
    const double rounded = std::ceil(r - 1e-9);
    if (rounded > std::numeric_limits<int>::max()) throw std::overflow_error("allocate_repeats: repeat count overflows");
    out[i] = std::max(1, static_cast<int>(rounded));
  }
  return out;
}

double allocation_gain(std::span<const double> p) {
  require_probabilities(p, "allocation_gain");
  double var_sum = 0.0;
  double cost_sum = 0.0;
  double cross = 0.0;
  for (double v : p) {
    const double li = dilog_one_minus(v);
    var_sum += li;
    cost_sum += 1.0 / v;
    cross += std::sqrt(li / v);
  }
  if (cross == 0.0) return 1.0;
  return var_sum * cost_sum / (cross * cross);
}

double realized_allocation_gain(std::span<const double> p, std::span<const int> repeats) {
  require_probabilities(p, "realized_allocation_gain");
  if (repeats.size() != p.size()) throw std::invalid_argument("realized_allocation_gain: size mismatch");
  double var_alloc = 0.0;
  double cost = 0.0;
  double var_sum = 0.0;
  double inv_sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (repeats[i] < 1) throw std::invalid_argument("realized_allocation_gain: repeats must be >= 1");
    const double li = dilog_one_minus(p[i]);
    var_alloc += li / repeats[i];
    cost += repeats[i] / p[i];
    var_sum += li;
    inv_sum += 1.0 / p[i];
  }
  if (var_alloc == 0.0) return 1.0;
  // uniform repeats R = cost / inv_sum reach variance var_sum / R
  const double var_uniform = var_sum * inv_sum / cost;
  return var_uniform / var_alloc;
}

std::vector<double> pilot_probabilities(const EstimateReport& pilot) {
  if (pilot.per_trial.empty()) throw std::invalid_argument("pilot_probabilities: pilot report has no trial records");
  if (pilot.stopped_early) throw std::invalid_argument("pilot_probabilities: pilot run stopped early");
  std::vector<double> out;
  out.reserve(pilot.per_trial.size());
  for (const auto& t : pilot.per_trial) {
    const std::int64_t total = std::accumulate(t.k.begin(), t.k.end(), std::int64_t{0});
    out.push_back(static_cast<double>(t.k.size()) / static_cast<double>(total));
  }
  return out;
}

}  // namespace ibs
