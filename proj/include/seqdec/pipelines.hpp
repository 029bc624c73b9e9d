#pragma once

#include <cstdint>
#include <memory>
#include <utility>

#include "seqdec/conv_code.hpp"
#include "seqdec/decoder_model.hpp"
#include "seqdec/metrics.hpp"
#include "seqdec/modem.hpp"
#include "seqdec/viterbi.hpp"

namespace seqdec {

// Uncoded BPSK with hard decisions; the analytic reference is Q(sqrt(2 Eb/N0)).
inline ChunkSystem make_uncoded_bpsk_system() {
  return [](double snr_db, std::uint64_t info_bits, std::uint64_t seed) {
    Rng rng(seed);
    const NoiseSpec noise{snr_db, ebno_to_sigma2(snr_db, 1.0, 1)};
    const BitStream u = random_bits(info_bits, 0.5, rng);
    const SymbolStream y = add_awgn(map_bpsk(u), noise, Modulation::bpsk, rng);
    std::uint64_t errors = 0;
    for (std::size_t k = 0; k < u.size(); ++k) errors += (y[k].i > 0.0 ? 1 : 0) != u[k];
    return std::pair<std::uint64_t, std::uint64_t>{errors, info_bits};
  };
}

struct BaselineChain {
  CodeSpec code;
  Modulation modulation = Modulation::bpsk;
  LabelingKind labeling = LabelingKind::gray;
  bool interleave = false;
  std::size_t interleave_block = 4096;
  int traceback_len = 0;  // 0 = use the code's 5*(nu+1) hint
};

// encode -> (interleave) -> map -> AWGN -> LLR demap -> (deinterleave) ->
// windowed Viterbi. Chunk sizes are rounded so interleaver blocks divide the
// coded stream.
inline ChunkSystem make_viterbi_system(const BaselineChain& chain) {
  auto trellis = std::make_shared<Trellis>(build_trellis(chain.code));
  return [chain, trellis](double snr_db, std::uint64_t info_bits, std::uint64_t seed) {
    const int tb = chain.traceback_len > 0 ? chain.traceback_len : chain.code.traceback_hint;
    std::uint64_t n = info_bits;
    if (chain.interleave) {
      // The coded stream (2n bits) must be a whole number of interleaver blocks.
      const std::uint64_t step =
          chain.interleave_block % 2 == 0 ? chain.interleave_block : 2 * chain.interleave_block;
      n = std::max<std::uint64_t>(1, 2 * n / step) * (step / 2);
    }

    Rng rng(seed);
    const NoiseSpec noise = make_noise(snr_db, CodeSpec::rate(), chain.modulation);
    const Labeling lab = make_labeling(chain.labeling);
    const BitStream u = random_bits(n, 0.5, rng);
    BitStream coded = encode(u, chain.code);
    if (chain.interleave) coded = interleave(coded, seed_lane(seed, 0x696cu), chain.interleave_block);

    SymbolStream y = chain.modulation == Modulation::bpsk ? map_bpsk(coded) : map_qpsk(coded, lab);
    y = add_awgn(std::move(y), noise, chain.modulation, rng);

    std::vector<double> llrs = chain.modulation == Modulation::bpsk
                                   ? llr_bpsk(y, noise.sigma2)
                                   : llr_qpsk_maxlog(y, noise.sigma2, lab);
    if (chain.interleave) llrs = deinterleave(llrs, seed_lane(seed, 0x696cu), chain.interleave_block);

    const BitStream decided = decode_windowed(llrs, *trellis, tb);
    return std::pair<std::uint64_t, std::uint64_t>{count_bit_errors(u, decided), n};
  };
}

struct NnChain {
  CodeSpec code;
  Modulation modulation = Modulation::bpsk;
  LabelingKind labeling = LabelingKind::gray;
};

// encode -> map -> AWGN -> sliding-window neural decode on raw observations.
// Chunk sizes are rounded up to a multiple of loss_depth.
template <typename T>
ChunkSystem make_nn_system(const NnChain& chain, std::shared_ptr<DecoderParams<T>> params) {
  return [chain, params](double snr_db, std::uint64_t info_bits, std::uint64_t seed) {
    const auto ld = static_cast<std::uint64_t>(params->config.loss_depth);
    const std::uint64_t n = (std::max<std::uint64_t>(info_bits, ld) + ld - 1) / ld * ld;

    Rng rng(seed);
    const NoiseSpec noise = make_noise(snr_db, CodeSpec::rate(), chain.modulation);
    const Labeling lab = make_labeling(chain.labeling);
    const BitStream u = random_bits(n, 0.5, rng);
    const BitStream coded = encode(u, chain.code);

    SymbolStream y = chain.modulation == Modulation::bpsk ? map_bpsk(coded) : map_qpsk(coded, lab);
    y = add_awgn(std::move(y), noise, chain.modulation, rng);

    const BitStream decided = predict_stream(pack_step_observations(y, chain.modulation), *params);
    return std::pair<std::uint64_t, std::uint64_t>{count_bit_errors(u, decided), n};
  };
}

}  // namespace seqdec
