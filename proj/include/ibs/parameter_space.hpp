#pragma once

#include <span>
#include <string>
#include <vector>

namespace ibs {

/// Hard bounds [lb, ub] and plausible bounds [plb, pub] for one parameter.
struct ParameterBounds {
  std::string name;
  double lb = 0.0;
  double ub = 0.0;
  double plb = 0.0;
  double pub = 0.0;
};

class ParameterSpace {
 public:
  ParameterSpace() = default;
  /// Throws std::invalid_argument unless lb <= plb < pub <= ub and all are finite.
  explicit ParameterSpace(std::vector<ParameterBounds> params);

  [[nodiscard]] std::size_t dim() const noexcept { return params_.size(); }
  [[nodiscard]] const ParameterBounds& operator[](std::size_t i) const { return params_[i]; }
  [[nodiscard]] const std::vector<ParameterBounds>& params() const noexcept { return params_; }

  [[nodiscard]] bool contains(std::span<const double> theta) const;
  [[nodiscard]] std::vector<double> clamp(std::span<const double> theta) const;
  /// Index of the parameter called `name`; throws std::out_of_range if absent.
  [[nodiscard]] std::size_t index_of(const std::string& name) const;

  /// Throws std::invalid_argument naming the first out-of-bounds parameter.
  void validate(std::span<const double> theta) const;

 private:
  std::vector<ParameterBounds> params_;
};

}  // namespace ibs
