#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seqdec/bitstream.hpp"
#include "seqdec/modem.hpp"
#include "seqdec/nn.hpp"
#include "seqdec/tensor.hpp"

namespace seqdec {

// Sliding-window bidirectional recurrent decoder. Each window spans
// 2*ramp_len + loss_depth trellis steps of 2 raw channel observations; both
// directions run over the full window, the ramp steps are discarded after the
// recurrent stage, and only the central loss_depth steps produce bit estimates.
struct DecoderConfig {
  int ramp_len = 0;      // warm-up steps on each side of the decision region
  int loss_depth = 1;    // decisions per window; windows advance by this many steps
  int gru_layers = 3;
  int gru_width = 256;
  int combiner_width = 16;
  int input_width = 2;   // observations per trellis step

  int window_len() const { return 2 * ramp_len + loss_depth; }

  void validate() const {
    if (ramp_len < 0) throw std::invalid_argument("decoder: ramp_len must be >= 0");
    if (loss_depth < 1) throw std::invalid_argument("decoder: loss_depth must be >= 1");
    if (gru_layers < 1 || gru_width < 1 || combiner_width < 1 || input_width < 1)
      throw std::invalid_argument("decoder: widths and layer count must be positive");
  }

  friend bool operator==(const DecoderConfig&, const DecoderConfig&) = default;
};

template <typename T>
struct DecoderParams {
  DecoderConfig config;
  std::vector<nn::GruParams<T>> fwd, bwd;
  nn::DenseParams<T> combiner;  // [2H x combiner_width], elu
  nn::DenseParams<T> head;      // [combiner_width x 1], sigmoid

  // Fixed registry order: fwd stack, bwd stack, combiner, head.
  std::vector<Tensor<T>*> tensors() {
    std::vector<Tensor<T>*> out;
    for (auto& g : fwd) {
      out.push_back(&g.w);
      out.push_back(&g.u);
      out.push_back(&g.b);
    }
    for (auto& g : bwd) {
      out.push_back(&g.w);
      out.push_back(&g.u);
      out.push_back(&g.b);
    }
    out.push_back(&combiner.w);
    out.push_back(&combiner.b);
    out.push_back(&head.w);
    out.push_back(&head.b);
    return out;
  }

  std::vector<std::pair<std::string, Tensor<T>*>> named_tensors() {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    auto add_gru = [&](const std::string& prefix, std::vector<nn::GruParams<T>>& stack) {
      for (std::size_t l = 0; l < stack.size(); ++l) {
        const std::string base = prefix + "." + std::to_string(l) + ".";
        out.emplace_back(base + "w", &stack[l].w);
        out.emplace_back(base + "u", &stack[l].u);
        out.emplace_back(base + "b", &stack[l].b);
      }
    };
    add_gru("fwd", fwd);
    add_gru("bwd", bwd);
    out.emplace_back("combiner.w", &combiner.w);
    out.emplace_back("combiner.b", &combiner.b);
    out.emplace_back("head.w", &head.w);
    out.emplace_back("head.b", &head.b);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (Tensor<T>* t : tensors()) n += t->size();
    return n;
  }
};

template <typename T>
DecoderParams<T> init_decoder(const DecoderConfig& config, Rng& rng) {
  config.validate();
  DecoderParams<T> p;
  p.config = config;
  const auto H = static_cast<std::size_t>(config.gru_width);
  for (int l = 0; l < config.gru_layers; ++l)
    p.fwd.push_back(nn::init_gru<T>(l == 0 ? config.input_width : H, H, rng));
  for (int l = 0; l < config.gru_layers; ++l)
    p.bwd.push_back(nn::init_gru<T>(l == 0 ? config.input_width : H, H, rng));
  p.combiner = nn::init_dense<T>(2 * H, config.combiner_width, nn::Activation::elu, rng);
  p.head = nn::init_dense<T>(config.combiner_width, 1, nn::Activation::sigmoid, rng);
  return p;
}

template <typename T>
struct DecoderGrads {
  std::vector<nn::GruGrads<T>> fwd, bwd;
  nn::DenseGrads<T> combiner, head;

  explicit DecoderGrads(DecoderParams<T>& p) : combiner(p.combiner), head(p.head) {
    for (auto& g : p.fwd) fwd.emplace_back(g);
    for (auto& g : p.bwd) bwd.emplace_back(g);
  }

  void zero() {
    for (auto& g : fwd) g.zero();
    for (auto& g : bwd) g.zero();
    combiner.zero();
    head.zero();
  }

  std::vector<const Tensor<T>*> tensors() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& g : fwd) {
      out.push_back(&g.w);
      out.push_back(&g.u);
      out.push_back(&g.b);
    }
    for (const auto& g : bwd) {
      out.push_back(&g.w);
      out.push_back(&g.u);
      out.push_back(&g.b);
    }
    out.push_back(&combiner.w);
    out.push_back(&combiner.b);
    out.push_back(&head.w);
    out.push_back(&head.b);
    return out;
  }

  // Sums another gradient set into this one (sub-batch accumulation).
  void add(const DecoderGrads<T>& other) {
    const auto mine = tensors();
    const auto theirs = other.tensors();
    for (std::size_t i = 0; i < mine.size(); ++i) {
      Tensor<T>* dst = const_cast<Tensor<T>*>(mine[i]);
      for (std::size_t j = 0; j < dst->size(); ++j) (*dst)[j] += (*theirs[i])[j];
    }
  }
};

template <typename T>
struct DecoderCache {
  std::vector<nn::GruCache<T>> fwd, bwd;
  nn::DenseCache<T> combiner, head;
  std::size_t window_len = 0, batch = 0;
};

namespace detail {
// Reverses the time axis of a [T x N x D] tensor.
template <typename T>
Tensor<T> reverse_time(const Tensor<T>& x) {
  const std::size_t steps = x.dim(0), block = x.dim(1) * x.dim(2);
  Tensor<T> out(x.shape());
  for (std::size_t t = 0; t < steps; ++t)
    std::copy(x.data() + t * block, x.data() + (t + 1) * block,
              out.data() + (steps - 1 - t) * block);
  return out;
}
}  // namespace detail

// windows: [window_len x N x input_width], time-major. Returns soft bit
// estimates [N x loss_depth] in (0, 1).
template <typename T>
Tensor<T> decoder_forward(const Tensor<T>& windows, DecoderParams<T>& p,
                          DecoderCache<T>* cache = nullptr) {
  const DecoderConfig& cfg = p.config;
  const auto win = static_cast<std::size_t>(cfg.window_len());
  const auto H = static_cast<std::size_t>(cfg.gru_width);
  const auto ld = static_cast<std::size_t>(cfg.loss_depth);
  const auto ramp = static_cast<std::size_t>(cfg.ramp_len);
  if (windows.rank() != 3 || windows.dim(0) != win ||
      windows.dim(2) != static_cast<std::size_t>(cfg.input_width))
    throw std::invalid_argument("decoder_forward: window tensor shape mismatch");
  const std::size_t batch = windows.dim(1);

  if (cache) {
    cache->fwd.assign(p.fwd.size(), {});
    cache->bwd.assign(p.bwd.size(), {});
    cache->window_len = win;
    cache->batch = batch;
  }

  const Tensor<T> h0({batch, H});  // both directions start from a zero state
  Tensor<T> f = windows;
  for (std::size_t l = 0; l < p.fwd.size(); ++l)
    f = nn::gru_forward(f, h0, p.fwd[l], cache ? &cache->fwd[l] : nullptr);

  Tensor<T> b = detail::reverse_time(windows);
  for (std::size_t l = 0; l < p.bwd.size(); ++l)
    b = nn::gru_forward(b, h0, p.bwd[l], cache ? &cache->bwd[l] : nullptr);
  b = detail::reverse_time(b);  // align with forward time

  // Keep only the central loss_depth steps; concatenate both directions.
  Tensor<T> concat({ld * batch, 2 * H});
  for (std::size_t t = 0; t < ld; ++t) {
    const std::size_t src = (ramp + t) * batch * H;
    for (std::size_t n = 0; n < batch; ++n) {
      T* dst = concat.data() + (t * batch + n) * 2 * H;
      std::copy(f.data() + src + n * H, f.data() + src + (n + 1) * H, dst);
      std::copy(b.data() + src + n * H, b.data() + src + (n + 1) * H, dst + H);
    }
  }

  Tensor<T> mid = nn::dense_forward(concat, p.combiner, cache ? &cache->combiner : nullptr);
  Tensor<T> soft = nn::dense_forward(mid, p.head, cache ? &cache->head : nullptr);

  Tensor<T> out({batch, ld});
  for (std::size_t t = 0; t < ld; ++t)
    for (std::size_t n = 0; n < batch; ++n) out[n * ld + t] = soft[t * batch + n];
  return out;
}

// grad_soft: [N x loss_depth]. Parameter gradients accumulate into `grads`;
// pass grad_windows to also get d loss / d observations.
template <typename T>
void decoder_backward(const Tensor<T>& grad_soft, DecoderParams<T>& p, const DecoderCache<T>& cache,
                      DecoderGrads<T>& grads, Tensor<T>* grad_windows = nullptr) {
  const DecoderConfig& cfg = p.config;
  const auto win = cache.window_len;
  const auto H = static_cast<std::size_t>(cfg.gru_width);
  const auto ld = static_cast<std::size_t>(cfg.loss_depth);
  const auto ramp = static_cast<std::size_t>(cfg.ramp_len);
  const std::size_t batch = cache.batch;

  Tensor<T> d_soft({ld * batch, 1});
  for (std::size_t t = 0; t < ld; ++t)
    for (std::size_t n = 0; n < batch; ++n) d_soft[t * batch + n] = grad_soft[n * ld + t];

  Tensor<T> d_mid = nn::dense_backward(d_soft, p.head, cache.head, grads.head);
  Tensor<T> d_concat = nn::dense_backward(d_mid, p.combiner, cache.combiner, grads.combiner);

  // Scatter back to full-length sequences; ramp steps get zero gradient here
  // but still receive gradient through the recurrent state.
  Tensor<T> d_f({win, batch, H}), d_b({win, batch, H});
  for (std::size_t t = 0; t < ld; ++t) {
    const std::size_t dst = (ramp + t) * batch * H;
    for (std::size_t n = 0; n < batch; ++n) {
      const T* src = d_concat.data() + (t * batch + n) * 2 * H;
      std::copy(src, src + H, d_f.data() + dst + n * H);
      std::copy(src + H, src + 2 * H, d_b.data() + dst + n * H);
    }
  }

  for (std::size_t l = p.fwd.size(); l-- > 0;)
    d_f = nn::gru_backward(d_f, p.fwd[l], cache.fwd[l], grads.fwd[l]);

  d_b = detail::reverse_time(d_b);
  for (std::size_t l = p.bwd.size(); l-- > 0;)
    d_b = nn::gru_backward(d_b, p.bwd[l], cache.bwd[l], grads.bwd[l]);
  d_b = detail::reverse_time(d_b);

  if (grad_windows) {
    *grad_windows = std::move(d_f);
    for (std::size_t i = 0; i < grad_windows->size(); ++i) (*grad_windows)[i] += d_b[i];
  }
}

inline BitStream hard_decide(const std::vector<double>& soft) {
  BitStream bits(soft.size());
  for (std::size_t i = 0; i < soft.size(); ++i) bits[i] = soft[i] > 0.5 ? 1 : 0;
  return bits;
}

template <typename T>
BitStream hard_decide(const Tensor<T>& soft) {
  BitStream bits(soft.size());
  for (std::size_t i = 0; i < soft.size(); ++i) bits[i] = soft[i] > T(0.5) ? 1 : 0;
  return bits;
}

// Packs a symbol stream into per-trellis-step observation pairs: BPSK uses two
// consecutive real samples per step, QPSK one complex sample per step.
inline std::vector<std::array<double, 2>> pack_step_observations(const SymbolStream& y,
                                                                 Modulation mod) {
  std::vector<std::array<double, 2>> steps;
  if (mod == Modulation::bpsk) {
    if (y.size() % 2 != 0) throw std::invalid_argument("pack_step_observations: odd sample count");
    steps.resize(y.size() / 2);
    for (std::size_t s = 0; s < steps.size(); ++s) steps[s] = {y[2 * s].i, y[2 * s + 1].i};
  } else {
    steps.resize(y.size());
    for (std::size_t s = 0; s < steps.size(); ++s) steps[s] = {y[s].i, y[s].q};
  }
  return steps;
}

// Decodes a whole stream by sliding the window loss_depth steps at a time.
// The stream edge is zero-padded with ramp_len steps on each side; the step
// count must be a multiple of loss_depth.
template <typename T>
BitStream predict_stream(const std::vector<std::array<double, 2>>& steps, DecoderParams<T>& p,
                         std::size_t max_batch = 256) {
  const DecoderConfig& cfg = p.config;
  const auto ld = static_cast<std::size_t>(cfg.loss_depth);
  const auto ramp = static_cast<std::size_t>(cfg.ramp_len);
  const auto win = static_cast<std::size_t>(cfg.window_len());
  if (steps.empty() || steps.size() % ld != 0)
    throw std::invalid_argument("predict_stream: step count must be a positive multiple of loss_depth");

  const std::size_t num_windows = steps.size() / ld;
  BitStream out(steps.size());
  for (std::size_t w0 = 0; w0 < num_windows; w0 += max_batch) {
    const std::size_t nb = std::min(max_batch, num_windows - w0);
    Tensor<T> x({win, nb, 2});
    for (std::size_t t = 0; t < win; ++t)
      for (std::size_t n = 0; n < nb; ++n) {
        // Window w covers padded steps [w*ld, w*ld + win); padded index i maps
        // to stream index i - ramp.
        const std::ptrdiff_t idx =
            static_cast<std::ptrdiff_t>((w0 + n) * ld + t) - static_cast<std::ptrdiff_t>(ramp);
        T* dst = x.data() + (t * nb + n) * 2;
        if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(steps.size())) {
          dst[0] = dst[1] = T(0);
        } else {
          dst[0] = static_cast<T>(steps[static_cast<std::size_t>(idx)][0]);
          dst[1] = static_cast<T>(steps[static_cast<std::size_t>(idx)][1]);
        }
      }
    const Tensor<T> soft = decoder_forward(x, p);
    for (std::size_t n = 0; n < nb; ++n)
      for (std::size_t k = 0; k < ld; ++k)
        out[(w0 + n) * ld + k] = soft[n * ld + k] > T(0.5) ? 1 : 0;
  }
  return out;
}

}  // namespace seqdec
