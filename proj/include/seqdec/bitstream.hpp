#pragma once

#include <cstdint>
#include <vector>

#include "seqdec/rng.hpp"

namespace seqdec {

// Ordered bit sequence; each element is 0 or 1.
using BitStream = std::vector<std::uint8_t>;

inline BitStream random_bits(std::size_t n, double p_one, Rng& rng) {
  BitStream bits(n);
  for (auto& b : bits) b = rng.bernoulli(p_one) ? 1 : 0;
  return bits;
}

inline std::size_t count_bit_errors(const BitStream& a, const BitStream& b) {
  std::size_t errors = 0;
  for (std::size_t i = 0; i < a.size(); ++i) errors += (a[i] != b[i]);
  return errors;
}

}  // namespace seqdec
