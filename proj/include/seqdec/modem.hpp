#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "seqdec/bitstream.hpp"
#include "seqdec/rng.hpp"

namespace seqdec {

struct Iq {
  double i = 0.0, q = 0.0;
};

using SymbolStream = std::vector<Iq>;

enum class Modulation { bpsk, qpsk };

inline int bits_per_symbol(Modulation m) { return m == Modulation::bpsk ? 1 : 2; }

inline Modulation modulation_from_string(std::string_view s) {
  if (s == "bpsk") return Modulation::bpsk;
  if (s == "qpsk") return Modulation::qpsk;
  throw std::invalid_argument("unknown modulation \"" + std::string(s) + "\"");
}

enum class LabelingKind { gray, anti_gray };

inline LabelingKind labeling_from_string(std::string_view s) {
  if (s == "gray") return LabelingKind::gray;
  if (s == "anti-gray") return LabelingKind::anti_gray;
  throw std::invalid_argument("unknown labeling \"" + std::string(s) + "\"");
}

inline const char* to_string(Modulation m) { return m == Modulation::bpsk ? "bpsk" : "qpsk"; }
inline const char* to_string(LabelingKind l) { return l == LabelingKind::gray ? "gray" : "anti-gray"; }

// Unit-energy QPSK constellation. points[] is indexed by (first_bit << 1) | second_bit
// for each consecutive bit pair.
struct Labeling {
  LabelingKind kind = LabelingKind::gray;
  std::array<Iq, 4> points{};
};

inline Labeling make_labeling(LabelingKind kind) {
  constexpr double a = 0.7071067811865476;  // 1/sqrt(2)
  Labeling lab;
  lab.kind = kind;
  if (kind == LabelingKind::gray) {
    lab.points = {Iq{+a, +a}, Iq{-a, +a}, Iq{+a, -a}, Iq{-a, -a}};
  } else {
    lab.points = {Iq{+a, +a}, Iq{-a, -a}, Iq{+a, -a}, Iq{-a, +a}};
  }
  return lab;
}

struct NoiseSpec {
  double ebno_db = 0.0;
  double sigma2 = 0.0;  // per-dimension noise variance
};

// Eb/N0 -> per-dimension sigma^2 for unit-energy symbols:
// sigma^2 = 1 / (2 * rate * bits_per_symbol * 10^(EbN0/10)).
inline double ebno_to_sigma2(double ebno_db, double rate, int bits_per_symbol) {
  return 1.0 / (2.0 * rate * bits_per_symbol * std::pow(10.0, ebno_db / 10.0));
}

inline NoiseSpec make_noise(double ebno_db, double rate, Modulation mod) {
  return NoiseSpec{ebno_db, ebno_to_sigma2(ebno_db, rate, bits_per_symbol(mod))};
}

inline SymbolStream map_bpsk(const BitStream& bits) {
  SymbolStream s(bits.size());
  for (std::size_t k = 0; k < bits.size(); ++k) s[k] = {bits[k] ? 1.0 : -1.0, 0.0};
  return s;
}

inline SymbolStream map_qpsk(const BitStream& bits, const Labeling& lab) {
  if (bits.size() % 2 != 0) throw std::invalid_argument("map_qpsk: odd number of bits");
  SymbolStream s(bits.size() / 2);
  for (std::size_t k = 0; k < s.size(); ++k)
    s[k] = lab.points[(bits[2 * k] << 1) | bits[2 * k + 1]];
  return s;
}

// BPSK carries information on I only; QPSK on both dimensions.
inline SymbolStream add_awgn(SymbolStream s, const NoiseSpec& noise, Modulation mod, Rng& rng) {
  const double sigma = std::sqrt(noise.sigma2);
  for (Iq& y : s) {
    y.i += sigma * rng.gaussian();
    if (mod == Modulation::qpsk) y.q += sigma * rng.gaussian();
  }
  return s;
}

namespace detail {
// Noise-free channels would give infinite LLRs; saturate instead so downstream
// arithmetic stays finite. Sign is what decoders consume.
constexpr double kLlrSaturation = 1e6;

inline double clamp_llr(double l) {
  return std::clamp(l, -kLlrSaturation, kLlrSaturation);
}
}  // namespace detail

// Positive LLR favors bit 1 (mapped to +1).
inline std::vector<double> llr_bpsk(const SymbolStream& s, double sigma2) {
  std::vector<double> llrs(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (sigma2 <= 0.0) {
      llrs[k] = s[k].i > 0 ? detail::kLlrSaturation : (s[k].i < 0 ? -detail::kLlrSaturation : 0.0);
    } else {
      llrs[k] = detail::clamp_llr(2.0 * s[k].i / sigma2);
    }
  }
  return llrs;
}

// Max-log per-bit LLRs: (min_{x: bit=0} d^2 - min_{x: bit=1} d^2) / sigma2,
// emitted in transmit bit order (two per symbol).
inline std::vector<double> llr_qpsk_maxlog(const SymbolStream& s, double sigma2, const Labeling& lab) {
  std::vector<double> llrs;
  llrs.reserve(2 * s.size());
  for (const Iq& y : s) {
    std::array<double, 4> d2;
    for (int idx = 0; idx < 4; ++idx) {
      const double di = y.i - lab.points[idx].i;
      const double dq = y.q - lab.points[idx].q;
      d2[idx] = di * di + dq * dq;
    }
    for (int bit_pos = 0; bit_pos < 2; ++bit_pos) {
      double best0 = 1e300, best1 = 1e300;
      for (int idx = 0; idx < 4; ++idx) {
        const int bit = (idx >> (1 - bit_pos)) & 1;
        (bit ? best1 : best0) = std::min(bit ? best1 : best0, d2[idx]);
      }
      const double delta = best0 - best1;
      if (sigma2 <= 0.0) {
        llrs.push_back(delta > 0 ? detail::kLlrSaturation
                                 : (delta < 0 ? -detail::kLlrSaturation : 0.0));
      } else {
        llrs.push_back(detail::clamp_llr(delta / sigma2));
      }
    }
  }
  return llrs;
}

namespace detail {
inline std::vector<std::size_t> block_permutation(std::size_t n, std::uint64_t seed,
                                                  std::size_t block_index) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed_lane(seed, block_index));
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    std::swap(perm[i], perm[j]);
  }
  return perm;
}
}  // namespace detail

// Seeded block interleaver. The stream length must be a multiple of block_len;
// each block gets its own Fisher-Yates permutation derived from (seed, block index).
template <typename T>
std::vector<T> interleave(const std::vector<T>& x, std::uint64_t seed, std::size_t block_len) {
  if (block_len == 0 || x.size() % block_len != 0)
    throw std::invalid_argument("interleave: length not a multiple of block_len");
  std::vector<T> out(x.size());
  for (std::size_t b = 0; b * block_len < x.size(); ++b) {
    const auto perm = detail::block_permutation(block_len, seed, b);
    const std::size_t base = b * block_len;
    for (std::size_t j = 0; j < block_len; ++j) out[base + j] = x[base + perm[j]];
  }
  return out;
}

template <typename T>
std::vector<T> deinterleave(const std::vector<T>& x, std::uint64_t seed, std::size_t block_len) {
  if (block_len == 0 || x.size() % block_len != 0)
    throw std::invalid_argument("deinterleave: length not a multiple of block_len");
  std::vector<T> out(x.size());
  for (std::size_t b = 0; b * block_len < x.size(); ++b) {
    const auto perm = detail::block_permutation(block_len, seed, b);
    const std::size_t base = b * block_len;
    for (std::size_t j = 0; j < block_len; ++j) out[base + perm[j]] = x[base + j];
  }
  return out;
}

}  // namespace seqdec
