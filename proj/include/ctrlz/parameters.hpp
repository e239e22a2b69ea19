#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ctrlz/errors.hpp"

namespace ctrlz {

/// Flat snapshot of every learnable scalar of a learner, optionally with the
/// optimizer's accumulators.
struct ParameterVector {
  std::vector<double> values;
  std::optional<std::vector<double>> optimizer_state;

  bool all_finite() const noexcept {
    for (double v : values) {
      if (!std::isfinite(v)) return false;
    }
    if (optimizer_state) {
      for (double v : *optimizer_state) {
        if (!std::isfinite(v)) return false;
      }
    }
    return true;
  }

  ParameterVector without_optimizer_state() const { return {values, std::nullopt}; }
};

inline bool bit_equal(std::span<const double> a, std::span<const double> b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

/// Bitwise equality, including signed zeros. Optimizer state must match in
/// presence and content.
inline bool bit_equal(const ParameterVector& a, const ParameterVector& b) noexcept {
  if (!bit_equal(a.values, b.values)) return false;
  if (a.optimizer_state.has_value() != b.optimizer_state.has_value()) return false;
  return !a.optimizer_state || bit_equal(*a.optimizer_state, *b.optimizer_state);
}

}  // namespace ctrlz
