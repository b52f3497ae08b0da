#include "ibs/parameter_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ibs {

ParameterSpace::ParameterSpace(std::vector<ParameterBounds> params) : params_(std::move(params)) {
  for (const auto& p : params_) {
    const bool finite = std::isfinite(p.lb) && std::isfinite(p.ub) && std::isfinite(p.plb) && std::isfinite(p.pub);
    if (!finite || !(p.lb <= p.plb && p.plb < p.pub && p.pub <= p.ub)) {
      throw std::invalid_argument("ParameterSpace: inconsistent bounds for '" + p.name + "'");
    }
  }
}

bool ParameterSpace::contains(std::span<const double> theta) const {
  if (theta.size() != params_.size()) return false;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!(theta[i] >= params_[i].lb && theta[i] <= params_[i].ub)) return false;
  }
  return true;
}

std::vector<double> ParameterSpace::clamp(std::span<const double> theta) const {
  if (theta.size() != params_.size()) throw std::invalid_argument("ParameterSpace::clamp: dimension mismatch");
  std::vector<double> out(theta.begin(), theta.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], params_[i].lb, params_[i].ub);
  return out;
}

std::size_t ParameterSpace::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw std::out_of_range("ParameterSpace: no parameter named '" + name + "'");
}

void ParameterSpace::validate(std::span<const double> theta) const {
  if (theta.size() != params_.size()) {
    throw std::invalid_argument("expected " + std::to_string(params_.size()) + " parameters, got " +
                                std::to_string(theta.size()));
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const auto& p = params_[i];
    if (!(theta[i] >= p.lb && theta[i] <= p.ub)) {
      throw std::invalid_argument("parameter '" + p.name + "' = " + std::to_string(theta[i]) +
                                  " outside [" + std::to_string(p.lb) + ", " + std::to_string(p.ub) + "]");
    }
  }
}

}  // namespace ibs
