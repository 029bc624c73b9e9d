#pragma once

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "seqdec/checkpoint.hpp"
#include "seqdec/conv_code.hpp"
#include "seqdec/decoder_model.hpp"
#include "seqdec/metrics.hpp"
#include "seqdec/modem.hpp"
#include "seqdec/nn.hpp"
#include "seqdec/pipelines.hpp"

namespace seqdec {

// ---------------------------------------------------------------------------
// A-priori ramp-up curriculum

enum class Schedule { none, linear, stepwise, abrupt };

inline Schedule schedule_from_string(std::string_view s) {
  if (s == "none") return Schedule::none;
  if (s == "linear") return Schedule::linear;
  if (s == "stepwise") return Schedule::stepwise;
  if (s == "abrupt") return Schedule::abrupt;
  throw std::invalid_argument("unknown schedule \"" + std::string(s) + "\"");
}

inline const char* to_string(Schedule s) {
  switch (s) {
    case Schedule::none: return "none";
    case Schedule::linear: return "linear";
    case Schedule::stepwise: return "stepwise";
    default: return "abrupt";
  }
}

struct CurriculumConfig {
  Schedule schedule = Schedule::none;
  double p_start = 0.1;
  double step_delta = 0.05;
  int max_level_iters = 2000;  // stepwise/abrupt stall bound

  void validate() const {
    if (schedule != Schedule::none && (p_start <= 0.0 || p_start > 0.5))
      throw std::invalid_argument("curriculum: p_start must be in (0, 0.5]");
    if (step_delta <= 0.0) throw std::invalid_argument("curriculum: step_delta must be positive");
    if (max_level_iters < 1) throw std::invalid_argument("curriculum: max_level_iters must be >= 1");
  }
};

// The source bias P_ap(u_k = 1) only ever moves toward 0.5 (entropy ramps up).
struct CurriculumState {
  Schedule schedule = Schedule::none;
  double p_ap = 0.5;
  double p_start = 0.5;
  double step_delta = 0.05;
  long total_iterations = 1;
  int level = 0;  // stepwise advances taken; p_ap derives from this, not from
                  // repeated addition, so 0.1 + 8 * 0.05 lands exactly on 0.5
  int iterations_at_level = 0;
  int max_level_iters = 2000;
  double smoothed_ber = 0.5;  // exponential average, decay 0.99
};

inline CurriculumState make_curriculum(const CurriculumConfig& cfg, long total_iterations) {
  cfg.validate();
  CurriculumState st;
  st.schedule = cfg.schedule;
  st.p_start = cfg.schedule == Schedule::none ? 0.5 : cfg.p_start;
  st.p_ap = st.p_start;
  st.step_delta = cfg.step_delta;
  st.total_iterations = std::max(1L, total_iterations);
  st.max_level_iters = cfg.max_level_iters;
  return st;
}

// One curriculum update after a training iteration. linear: fixed increment
// per step; stepwise/abrupt: advance when the smoothed batch BER drops below
// 0.8 * p_ap or after max_level_iters at one level. p_ap clamps at 0.5.
inline CurriculumState curriculum_next(CurriculumState st, double latest_ber) {
  st.smoothed_ber = 0.99 * st.smoothed_ber + 0.01 * latest_ber;
  st.iterations_at_level += 1;
  switch (st.schedule) {
    case Schedule::none:
      break;
    case Schedule::linear:
      st.p_ap += (0.5 - st.p_start) / static_cast<double>(st.total_iterations);
      break;
    case Schedule::stepwise:
    case Schedule::abrupt: {
      const bool advance = st.smoothed_ber < 0.8 * st.p_ap ||
                           st.iterations_at_level >= st.max_level_iters;
      if (advance && st.p_ap < 0.5) {
        st.level += 1;
        st.p_ap = st.schedule == Schedule::abrupt
                      ? 0.5
                      : st.p_start + static_cast<double>(st.level) * st.step_delta;
        st.iterations_at_level = 0;
      }
      break;
    }
  }
  st.p_ap = std::min(st.p_ap, 0.5);
  return st;
}

// ---------------------------------------------------------------------------
// Batch generation

template <typename T>
struct TrainBatch {
  Tensor<T> windows;        // [window_len x N x 2], noisy observations
  Tensor<T> clean_windows;  // same, before noise (data-pipeline oracle)
  Tensor<T> labels;         // [N x loss_depth]
};

// Each window comes from a fresh encoder run: nu warm-up bits randomize the
// state the window starts in, then 2*ramp_len + loss_depth coded steps form the
// window. Labels are the central loss_depth bits.
template <typename T>
TrainBatch<T> gen_batch(double p_ap, const CodeSpec& code, const DecoderConfig& decoder,
                        Modulation mod, LabelingKind labeling, double sigma2, std::size_t batch,
                        Rng& rng) {
  if (p_ap <= 0.0 || p_ap > 0.5) throw std::invalid_argument("gen_batch: p_ap must be in (0, 0.5]");
  const auto win = static_cast<std::size_t>(decoder.window_len());
  const auto ld = static_cast<std::size_t>(decoder.loss_depth);
  const auto ramp = static_cast<std::size_t>(decoder.ramp_len);
  const auto nu = static_cast<std::size_t>(code.memory);
  const Labeling lab = make_labeling(labeling);
  const double sigma = std::sqrt(sigma2);

  TrainBatch<T> out;
  out.windows = Tensor<T>({win, batch, 2});
  out.clean_windows = Tensor<T>({win, batch, 2});
  out.labels = Tensor<T>({batch, ld});

  for (std::size_t n = 0; n < batch; ++n) {
    const BitStream u = random_bits(nu + win, p_ap, rng);
    const BitStream coded = encode(u, code);
    const SymbolStream clean = mod == Modulation::bpsk ? map_bpsk(coded) : map_qpsk(coded, lab);
    const auto steps = pack_step_observations(clean, mod);
    for (std::size_t t = 0; t < win; ++t) {
      const auto& obs = steps[nu + t];
      T* cw = out.clean_windows.data() + (t * batch + n) * 2;
      T* w = out.windows.data() + (t * batch + n) * 2;
      cw[0] = static_cast<T>(obs[0]);
      cw[1] = static_cast<T>(obs[1]);
      w[0] = static_cast<T>(obs[0] + sigma * rng.gaussian());
      w[1] = static_cast<T>(obs[1] + sigma * rng.gaussian());
    }
    for (std::size_t k = 0; k < ld; ++k) out.labels[n * ld + k] = static_cast<T>(u[nu + ramp + k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

enum class LossKind { bce, mse };

inline LossKind loss_from_string(std::string_view s) {
  if (s == "bce") return LossKind::bce;
  if (s == "mse") return LossKind::mse;
  throw std::invalid_argument("unknown loss \"" + std::string(s) + "\"");
}

inline const char* to_string(LossKind l) { return l == LossKind::bce ? "bce" : "mse"; }
inline const char* to_string(nn::OptKind o) { return o == nn::OptKind::rmsprop ? "rmsprop" : "adam"; }

struct TrainConfig {
  CodeSpec code;
  DecoderConfig decoder;
  Modulation modulation = Modulation::bpsk;
  LabelingKind labeling = LabelingKind::gray;
  std::size_t batch_size = 256;
  long iterations = 1;
  double train_ebno_db = 1.25;
  LossKind loss = LossKind::bce;
  nn::OptKind optimizer = nn::OptKind::rmsprop;
  double learning_rate = 1e-4;
  CurriculumConfig curriculum;
  std::uint64_t seed = 1;
  long checkpoint_every = 5000;
  long log_every = 50;
  double probe_ebno_db = 1.5;
  std::uint64_t probe_bits = 100'000;
  long probe_every = 250;
  int threads = 1;

  void validate() const {
    decoder.validate();
    curriculum.validate();
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (iterations < 1) throw std::invalid_argument("train: iterations must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("train: learning_rate must be positive");
    if (log_every < 1 || probe_every < 1 || checkpoint_every < 1)
      throw std::invalid_argument("train: cadences must be >= 1");
    if (threads < 1) throw std::invalid_argument("train: threads must be >= 1");
  }
};

struct TrainLogRow {
  long iteration = 0;
  double p_ap = 0.5;
  double loss = 0.0;
  double batch_ber = 0.0;
  double probe_ber = std::numeric_limits<double>::quiet_NaN();  // NaN = no probe this row
  double wallclock_s = 0.0;
};

// wallclock_s is written as 0.000 when suppress_time is set (single-threaded
// determinism contract: logs must be byte-identical across reruns).
inline void write_train_log_csv(std::ostream& os, const std::vector<TrainLogRow>& rows,
                                bool suppress_time) {
  os << "# seqdec-csv-v1 train-log\n";
  os << "iteration,p_ap,loss,batch_ber,probe_ber,wallclock_s\n";
  char line[200];
  for (const TrainLogRow& r : rows) {
    char probe[32] = "nan";
    if (std::isfinite(r.probe_ber)) std::snprintf(probe, sizeof(probe), "%.10g", r.probe_ber);
    std::snprintf(line, sizeof(line), "%ld,%.10g,%.10g,%.10g,%s,%.3f\n", r.iteration, r.p_ap, r.loss,
                  r.batch_ber, probe, suppress_time ? 0.0 : r.wallclock_s);
    os << line;
  }
}

inline void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& rows,
                                bool suppress_time) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_train_log_csv(os, rows, suppress_time);
}

struct TrainResult {
  DecoderParams<float> params;
  std::vector<TrainLogRow> log;
  long iterations_run = 0;
};

// Optional per-iteration observer; return false to stop training early.
using TrainHook = std::function<bool(long iteration, DecoderParams<float>&, const TrainLogRow&)>;

namespace detail {

template <typename T>
double batch_ber_of(const Tensor<T>& soft, const Tensor<T>& labels) {
  std::size_t errors = 0;
  for (std::size_t i = 0; i < soft.size(); ++i)
    errors += (soft[i] > T(0.5) ? 1 : 0) != (labels[i] > T(0.5) ? 1 : 0);
  return static_cast<double>(errors) / static_cast<double>(soft.size());
}

// Single-slot producer/consumer: generates the batch for iteration t+1 while
// iteration t computes. Only used when threads > 1; the single-threaded path
// stays strictly sequential (determinism contract).
template <typename T>
class BatchPipeline {
 public:
  using Maker = std::function<TrainBatch<T>(long)>;

  BatchPipeline(Maker maker, long total, bool async) : maker_(std::move(maker)), total_(total) {
    if (async && total_ > 0) {
      worker_ = std::thread([this] { run(); });
      async_ = true;
    }
  }

  ~BatchPipeline() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
  }

  TrainBatch<T> next(long iteration) {
    if (!async_) return maker_(iteration);
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [this] { return slot_.has_value() || error_; });
    if (!slot_.has_value()) std::rethrow_exception(error_);
    TrainBatch<T> batch = std::move(*slot_);
    slot_.reset();
    cv_.notify_all();
    return batch;
  }

 private:
  // The worker begins generating batch i only after batch i-1 has been taken,
  // i.e. while the consumer computes iteration i-1. This single-batch
  // lookahead is what the consumer's p_ap plan (written two iterations ahead)
  // guarantees to cover; generating further ahead would race past the plan.
  void run() {
    for (long it = 1; it <= total_; ++it) {
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return !slot_.has_value() || stop_; });
        if (stop_) return;
      }
      try {
        TrainBatch<T> batch = maker_(it);
        std::lock_guard<std::mutex> lock(mu_);
        // Single producer: the slot observed empty above stays empty.
        slot_ = std::move(batch);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu_);
        error_ = std::current_exception();
        cv_.notify_all();
        return;
      }
      cv_.notify_all();
    }
  }

  Maker maker_;
  long total_;
  bool async_ = false;
  std::thread worker_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::optional<TrainBatch<T>> slot_;
  std::exception_ptr error_;
  bool stop_ = false;
};

}  // namespace detail

// Runs the full loop: gen_batch -> forward -> loss -> backward -> optimizer ->
// curriculum. Writes checkpoints/logs under out_dir when non-empty. A
// non-finite loss aborts with a diagnostic snapshot (ckpt-abort) after saving.
inline TrainResult train(const TrainConfig& cfg, const std::string& out_dir = "",
                         const TrainHook& hook = {}) {
  cfg.validate();
  namespace fs = std::filesystem;
  if (!out_dir.empty()) fs::create_directories(out_dir);

  const double sigma2 = ebno_to_sigma2(cfg.train_ebno_db, CodeSpec::rate(),
                                       bits_per_symbol(cfg.modulation));
  Rng init_rng(seed_lane(cfg.seed, 0));

  TrainResult result;
  result.params = init_decoder<float>(cfg.decoder, init_rng);
  auto param_ptrs = result.params.tensors();

  nn::Optimizer<float> opt;
  opt.kind = cfg.optimizer;
  opt.learning_rate = static_cast<float>(cfg.learning_rate);
  opt.init(param_ptrs);

  DecoderGrads<float> grads(result.params);
  CurriculumState curriculum = make_curriculum(cfg.curriculum, cfg.iterations);

  // Batch randomness is keyed by (seed, iteration), so batches are identical
  // whether or not generation runs ahead of compute. The curriculum p_ap for
  // each iteration is pinned in advance: with async generation, iteration i's
  // batch may be built while iteration i-1 still computes, so its p_ap comes
  // from the curriculum state after iteration i-2 (one-iteration lag).
  const int p_ap_lag = cfg.threads > 1 ? 2 : 1;
  std::mutex p_ap_mu;
  std::map<long, double> p_ap_plan;
  for (int i = 1; i <= p_ap_lag; ++i) p_ap_plan[i] = curriculum.p_ap;

  auto make_batch = [&](long iteration) {
    double p_ap;
    {
      std::lock_guard<std::mutex> lock(p_ap_mu);
      const auto it = p_ap_plan.find(iteration);
      if (it == p_ap_plan.end()) throw std::logic_error("train: batch scheduled before its p_ap");
      p_ap = it->second;
    }
    Rng rng(seed_lane(cfg.seed, 2, static_cast<std::uint64_t>(iteration)));
    return gen_batch<float>(p_ap, cfg.code, cfg.decoder, cfg.modulation, cfg.labeling, sigma2,
                            cfg.batch_size, rng);
  };
  detail::BatchPipeline<float> pipeline(make_batch, cfg.iterations, cfg.threads > 1);

  const NnChain probe_chain{cfg.code, cfg.modulation, cfg.labeling};
  auto shared_params = std::shared_ptr<DecoderParams<float>>(&result.params, [](auto*) {});
  const ChunkSystem probe_system = make_nn_system(probe_chain, shared_params);

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed_s = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  auto save = [&](const std::string& name) {
    if (!out_dir.empty()) save_checkpoint(out_dir + "/" + name, result.params);
  };

  double last_probe = std::numeric_limits<double>::quiet_NaN();
  for (long it = 1; it <= cfg.iterations; ++it) {
    TrainBatch<float> batch = pipeline.next(it);

    DecoderCache<float> cache;
    const Tensor<float> soft = decoder_forward(batch.windows, result.params, &cache);
    const nn::LossResult<float> loss = cfg.loss == LossKind::bce
                                           ? nn::bce_loss(soft, batch.labels)
                                           : nn::mse_loss(soft, batch.labels);
    if (!std::isfinite(loss.value)) {
      save("ckpt-abort");
      if (!out_dir.empty()) write_train_log_csv(out_dir + "/train_log.csv", result.log, cfg.threads == 1);
      throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(it) +
                               (out_dir.empty() ? "" : "; diagnostic snapshot written to " + out_dir));
    }

    grads.zero();
    decoder_backward(loss.grad, result.params, cache, grads);
    opt.step(param_ptrs, grads.tensors());

    const double bber = detail::batch_ber_of(soft, batch.labels);
    curriculum = curriculum_next(curriculum, bber);
    {
      std::lock_guard<std::mutex> lock(p_ap_mu);
      p_ap_plan[it + p_ap_lag] = curriculum.p_ap;
      p_ap_plan.erase(p_ap_plan.begin(), p_ap_plan.lower_bound(it + 1));
    }

    const bool probe_now = cfg.probe_every > 0 && it % cfg.probe_every == 0;
    if (probe_now) {
      const McStopRule probe_stop{/*min_errors=*/std::numeric_limits<std::uint64_t>::max(),
                                  /*max_bits=*/cfg.probe_bits, /*chunk_bits=*/cfg.probe_bits};
      const double grid[1] = {cfg.probe_ebno_db};
      const BerTable t = monte_carlo_ber(probe_system, grid, probe_stop,
                                         seed_lane(cfg.seed, 3, static_cast<std::uint64_t>(it)), 1);
      last_probe = t.points[0].ber;
    }

    if (it % cfg.log_every == 0 || it == cfg.iterations || probe_now) {
      TrainLogRow row;
      row.iteration = it;
      row.p_ap = curriculum.p_ap;
      row.loss = loss.value;
      row.batch_ber = bber;
      row.probe_ber = probe_now ? last_probe : std::numeric_limits<double>::quiet_NaN();
      row.wallclock_s = elapsed_s();
      result.log.push_back(row);
      if (hook && !hook(it, result.params, row)) {
        result.iterations_run = it;
        break;
      }
    }
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0)
      save("ckpt-" + std::to_string(it));
    result.iterations_run = it;
  }

  save("ckpt-final");
  if (!out_dir.empty())
    write_train_log_csv(out_dir + "/train_log.csv", result.log, cfg.threads == 1);
  return result;
}

}  // namespace seqdec
