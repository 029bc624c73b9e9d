#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "seqdec/conv_code.hpp"

namespace seqdec {

// Path-metric start: zero_state pins the encoder start (metric 0 only at state 0),
// uniform gives every state metric 0 (used when a window starts mid-stream).
enum class ViterbiInit { zero_state, uniform };

// Correlation metric sum_j L_j * (2 x_j - 1) for a candidate information word.
inline double codeword_metric(std::span<const double> llrs, const BitStream& u, const CodeSpec& code) {
  const BitStream coded = encode(u, code);
  if (coded.size() != llrs.size()) throw std::invalid_argument("codeword_metric: length mismatch");
  double metric = 0.0;
  for (std::size_t j = 0; j < coded.size(); ++j) metric += llrs[j] * (coded[j] ? 1.0 : -1.0);
  return metric;
}

namespace detail {

// Forward Viterbi lattice with survivor memory. Ties prefer the smaller
// predecessor state (and input bit 0 for the memoryless code) so decode output
// is the lexicographically smallest ML word.
class TrellisLattice {
 public:
  TrellisLattice(const Trellis& trellis, ViterbiInit init) : trellis_(trellis) {
    metric_.assign(trellis.num_states, init == ViterbiInit::uniform ? 0.0 : kNegInf);
    if (init == ViterbiInit::zero_state) metric_[0] = 0.0;
    next_metric_.resize(trellis.num_states);
  }

  void step(double l0, double l1) {
    const std::uint32_t S = trellis_.num_states;
    const int nu = trellis_.memory;
    survivors_.resize(survivors_.size() + S);
    std::uint8_t* surv = survivors_.data() + steps_ * S;

    if (nu == 0) {
      // Single state, two parallel branches; pick the better input bit.
      double best = kNegInf;
      std::uint8_t best_bit = 0;
      for (std::uint32_t bit = 0; bit < 2; ++bit) {
        const auto& br = trellis_.branch(0, static_cast<int>(bit));
        const double m = metric_[0] + l0 * (br.out0 ? 1.0 : -1.0) + l1 * (br.out1 ? 1.0 : -1.0);
        if (m > best) {
          best = m;
          best_bit = static_cast<std::uint8_t>(bit);
        }
      }
      next_metric_[0] = best;
      surv[0] = static_cast<std::uint8_t>(best_bit << 1);
    } else {
      const std::uint32_t high_bit = 1u << (nu - 1);
      for (std::uint32_t s = 0; s < S; ++s) {
        const std::uint32_t bit = s & 1u;
        const std::uint32_t p0 = s >> 1;
        const std::uint32_t p1 = p0 | high_bit;
        const auto& br0 = trellis_.branch(p0, static_cast<int>(bit));
        const auto& br1 = trellis_.branch(p1, static_cast<int>(bit));
        const double bm0 = l0 * (br0.out0 ? 1.0 : -1.0) + l1 * (br0.out1 ? 1.0 : -1.0);
        const double bm1 = l0 * (br1.out0 ? 1.0 : -1.0) + l1 * (br1.out1 ? 1.0 : -1.0);
        const double m0 = metric_[p0] + bm0;
        const double m1 = metric_[p1] + bm1;
        const bool take1 = m1 > m0;
        next_metric_[s] = take1 ? m1 : m0;
        surv[s] = static_cast<std::uint8_t>((bit << 1) | (take1 ? 1u : 0u));
      }
    }

    // Renormalize so long streams cannot overflow the metric range.
    double best = kNegInf;
    for (double m : next_metric_)
      if (m > best) best = m;
    for (std::uint32_t s = 0; s < S; ++s) metric_[s] = next_metric_[s] - best;
    ++steps_;
  }

  std::size_t steps() const { return steps_; }

  std::uint32_t best_state() const {
    std::uint32_t best = 0;
    for (std::uint32_t s = 1; s < trellis_.num_states; ++s)
      if (metric_[s] > metric_[best]) best = s;
    return best;
  }

  // Input bit decided `depth` transitions before the current time, on the
  // survivor path ending in `state` now. depth = 1 is the latest transition.
  std::uint8_t traceback_bit(std::uint32_t state, std::size_t depth) const {
    std::uint32_t s = state;
    std::size_t t = steps_;
    for (std::size_t j = 0; j + 1 < depth; ++j) {
      s = predecessor(s, survivors_[(t - 1) * trellis_.num_states + s]);
      --t;
    }
    return static_cast<std::uint8_t>(survivors_[(t - 1) * trellis_.num_states + s] >> 1);
  }

  // Full decision path ending at `state`.
  BitStream traceback_all(std::uint32_t state) const {
    BitStream bits(steps_);
    std::uint32_t s = state;
    for (std::size_t t = steps_; t > 0; --t) {
      const std::uint8_t code = survivors_[(t - 1) * trellis_.num_states + s];
      bits[t - 1] = static_cast<std::uint8_t>(code >> 1);
      s = predecessor(s, code);
    }
    return bits;
  }

 private:
  static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  std::uint32_t predecessor(std::uint32_t s, std::uint8_t surv_code) const {
    if (trellis_.memory == 0) return 0;
    const std::uint32_t p0 = s >> 1;
    return (surv_code & 1u) ? (p0 | (1u << (trellis_.memory - 1))) : p0;
  }

  const Trellis& trellis_;
  std::vector<double> metric_, next_metric_;
  std::vector<std::uint8_t> survivors_;  // steps x states, (input_bit << 1) | pred_choice
  std::size_t steps_ = 0;
};

inline std::size_t checked_num_steps(std::span<const double> llrs) {
  if (llrs.empty()) throw std::invalid_argument("viterbi: empty llr stream");
  if (llrs.size() % 2 != 0) throw std::invalid_argument("viterbi: llr count must be even");
  return llrs.size() / 2;
}

}  // namespace detail

// Exact block ML decode (full traceback from the best end state).
inline BitStream decode_block(std::span<const double> llrs, const Trellis& trellis,
                              ViterbiInit init = ViterbiInit::zero_state) {
  const std::size_t n = detail::checked_num_steps(llrs);
  detail::TrellisLattice lattice(trellis, init);
  for (std::size_t t = 0; t < n; ++t) lattice.step(llrs[2 * t], llrs[2 * t + 1]);
  return lattice.traceback_all(lattice.best_state());
}

// Streaming decode: at step t >= traceback_len, commit the bit traceback_len
// steps back on the currently best path; remaining bits are flushed from the
// final best path. traceback_len >= stream length degenerates to decode_block.
inline BitStream decode_windowed(std::span<const double> llrs, const Trellis& trellis,
                                 int traceback_len, ViterbiInit init = ViterbiInit::zero_state) {
  if (traceback_len <= 0) throw std::invalid_argument("decode_windowed: traceback_len must be positive");
  const std::size_t n = detail::checked_num_steps(llrs);
  const std::size_t tb = static_cast<std::size_t>(traceback_len);

  detail::TrellisLattice lattice(trellis, init);
  BitStream out(n);
  for (std::size_t t = 0; t < n; ++t) {
    lattice.step(llrs[2 * t], llrs[2 * t + 1]);
    if (t >= tb) out[t - tb] = lattice.traceback_bit(lattice.best_state(), tb + 1);
  }
  const std::size_t flush_from = n > tb ? n - tb : 0;
  const BitStream tail = lattice.traceback_all(lattice.best_state());
  for (std::size_t k = flush_from; k < n; ++k) out[k] = tail[k];
  return out;
}

// Exhaustive ML reference: scores every candidate word, first (lexicographically
// smallest) maximizer wins. Oracle for the lattice decoders; k is capped.
inline BitStream brute_force_ml(std::span<const double> llrs, const CodeSpec& code, int k) {
  if (k <= 0 || k > 20) throw std::invalid_argument("brute_force_ml: k out of range");
  if (llrs.size() != static_cast<std::size_t>(2 * k))
    throw std::invalid_argument("brute_force_ml: llr count must be 2k");

  BitStream best_u;
  double best_metric = -std::numeric_limits<double>::infinity();
  BitStream u(static_cast<std::size_t>(k));
  for (std::uint64_t word = 0; word < (1ull << k); ++word) {
    for (int i = 0; i < k; ++i) u[i] = static_cast<std::uint8_t>((word >> (k - 1 - i)) & 1u);
    const double metric = codeword_metric(llrs, u, code);
    if (metric > best_metric) {
      best_metric = metric;
      best_u = u;
    }
  }
  return best_u;
}

}  // namespace seqdec
