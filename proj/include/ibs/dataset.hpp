#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ibs {

template <class Stimulus, class Response>
struct Trial {
  Stimulus stimulus{};
  Response response{};
};

/// Ordered trials plus the provenance needed to regenerate them.
template <class Stimulus, class Response>
struct Dataset {
  std::string model;
  std::vector<double> theta;  // generating parameters, empty when unknown
  std::uint64_t seed = 0;
  std::vector<Trial<Stimulus, Response>> trials;

  [[nodiscard]] std::size_t size() const noexcept { return trials.size(); }
  [[nodiscard]] bool empty() const noexcept { return trials.empty(); }
};

}  // namespace ibs
