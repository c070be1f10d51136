#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "lle/error.hpp"

namespace lle {

/// A fixed-dimension descriptor tagged with the representation that produced
/// it ("good9", "esf", "vfh", "ext:<name>").
struct FeatureVector {
  std::string rep_id;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  std::span<const double> span() const { return values; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

inline void require_finite(const FeatureVector& f) {
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (!std::isfinite(f.values[i])) {
      throw Error(Errc::NonFiniteValue, f.rep_id + " value " + std::to_string(i) + " is not finite");
    }
  }
}

namespace detail {

/// Normalizes `block` in place to unit sum; an empty block becomes uniform.
inline void normalize_block(std::span<double> block) {
  double sum = 0.0;
  for (double v : block) sum += v;
  if (sum > 0.0) {
    for (double& v : block) v /= sum;
  } else {
    for (double& v : block) v = 1.0 / static_cast<double>(block.size());
  }
}

inline std::size_t bin_of(double unit_value, std::size_t bins) {
  if (!(unit_value > 0.0)) return 0;
  const auto b = static_cast<std::size_t>(unit_value * static_cast<double>(bins));
  return b >= bins ? bins - 1 : b;
}

}  // namespace detail

}  // namespace lle
