#include "seqdec/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "seqdec/viterbi.hpp"

using namespace seqdec;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

DecoderConfig tiny_decoder() {
  DecoderConfig d;
  d.ramp_len = 2;
  d.loss_depth = 2;
  d.gru_layers = 1;
  d.gru_width = 8;
  d.combiner_width = 4;
  return d;
}

TrainConfig tiny_train() {
  TrainConfig cfg;
  cfg.code = parse_octal_generators("1,3");
  cfg.decoder = tiny_decoder();
  cfg.batch_size = 8;
  cfg.iterations = 6;
  cfg.learning_rate = 1e-3;
  cfg.log_every = 2;
  cfg.probe_every = 3;
  cfg.probe_bits = 1000;
  cfg.checkpoint_every = 3;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

// ---------------------------------------------------------------------------
// Curriculum

TEST(Curriculum, NoneStaysAtMaxEntropy) {
  CurriculumConfig cfg;
  cfg.schedule = Schedule::none;
  CurriculumState st = make_curriculum(cfg, 100);
  EXPECT_DOUBLE_EQ(st.p_ap, 0.5);
  for (int i = 0; i < 50; ++i) {
    st = curriculum_next(st, 0.0);
    EXPECT_DOUBLE_EQ(st.p_ap, 0.5);
  }
}

TEST(Curriculum, LinearRampHitsHalfAtTheEnd) {
  CurriculumConfig cfg;
  cfg.schedule = Schedule::linear;
  cfg.p_start = 0.1;
  CurriculumState st = make_curriculum(cfg, 100);
  for (int k = 1; k <= 100; ++k) {
    st = curriculum_next(st, 0.3);
    EXPECT_NEAR(st.p_ap, std::min(0.5, 0.1 + 0.004 * k), 1e-12) << "step " << k;
  }
  EXPECT_NEAR(st.p_ap, 0.5, 1e-12);
  st = curriculum_next(st, 0.3);  // clamp afterwards
  EXPECT_DOUBLE_EQ(st.p_ap, 0.5);
}

TEST(Curriculum, StepwiseAdvancesOnLowSmoothedBer) {
  CurriculumConfig cfg;
  cfg.schedule = Schedule::stepwise;
  cfg.p_start = 0.1;
  cfg.step_delta = 0.05;
  CurriculumState st = make_curriculum(cfg, 10000);
  int increases = 0;
  double prev = st.p_ap;
  for (int k = 0; k < 400; ++k) {
    st = curriculum_next(st, 0.0);  // perfect batches; only smoothing delays advance
    if (st.p_ap > prev) ++increases;
    EXPECT_GE(st.p_ap, prev);
    prev = st.p_ap;
  }
  EXPECT_DOUBLE_EQ(st.p_ap, 0.5);
  EXPECT_EQ(increases, 8);  // 0.10 -> 0.15 -> ... -> 0.50
}

TEST(Curriculum, StepwiseStallBoundForcesAdvance) {
  CurriculumConfig cfg;
  cfg.schedule = Schedule::stepwise;
  cfg.p_start = 0.1;
  cfg.step_delta = 0.05;
  cfg.max_level_iters = 10;
  CurriculumState st = make_curriculum(cfg, 10000);
  for (int k = 1; k <= 79; ++k) st = curriculum_next(st, 0.5);  // never learns
  EXPECT_NEAR(st.p_ap, 0.45, 1e-12);
  st = curriculum_next(st, 0.5);
  EXPECT_DOUBLE_EQ(st.p_ap, 0.5);
}

TEST(Curriculum, AbruptJumpsStraightToHalf) {
  CurriculumConfig cfg;
  cfg.schedule = Schedule::abrupt;
  cfg.p_start = 0.1;
  CurriculumState st = make_curriculum(cfg, 10000);
  int increases = 0;
  double prev = st.p_ap;
  for (int k = 0; k < 400; ++k) {
    st = curriculum_next(st, 0.0);
    if (st.p_ap > prev) {
      ++increases;
      EXPECT_DOUBLE_EQ(st.p_ap, 0.5);  // single jump, no intermediate levels
    }
    prev = st.p_ap;
  }
  EXPECT_EQ(increases, 1);
  EXPECT_DOUBLE_EQ(st.p_ap, 0.5);
}

TEST(Curriculum, SourceEntropyNeverDecreases) {
  Rng rng(1);
  for (Schedule s : {Schedule::none, Schedule::linear, Schedule::stepwise, Schedule::abrupt}) {
    CurriculumConfig cfg;
    cfg.schedule = s;
    cfg.p_start = 0.2;
    cfg.max_level_iters = 7;
    CurriculumState st = make_curriculum(cfg, 200);
    double prev = st.p_ap;
    for (int k = 0; k < 300; ++k) {
      st = curriculum_next(st, 0.5 * rng.uniform());
      EXPECT_GE(st.p_ap, prev - 1e-15);
      EXPECT_LE(st.p_ap, 0.5 + 1e-15);
      prev = st.p_ap;
    }
  }
}

TEST(Curriculum, Validation) {
  CurriculumConfig cfg;
  cfg.schedule = Schedule::stepwise;
  cfg.p_start = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.p_start = 0.6;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.p_start = 0.1;
  cfg.step_delta = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.step_delta = 0.05;
  cfg.max_level_iters = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Curriculum, ScheduleStringRoundTrip) {
  for (Schedule s : {Schedule::none, Schedule::linear, Schedule::stepwise, Schedule::abrupt})
    EXPECT_EQ(schedule_from_string(to_string(s)), s);
  EXPECT_THROW(schedule_from_string("bogus"), std::invalid_argument);
  EXPECT_THROW(loss_from_string("bogus"), std::invalid_argument);
  EXPECT_EQ(loss_from_string("bce"), LossKind::bce);
  EXPECT_EQ(loss_from_string("mse"), LossKind::mse);
}

// ---------------------------------------------------------------------------
// Batch generation

TEST(GenBatch, LabelBiasMatchesPap) {
  const CodeSpec code = parse_octal_generators("5,7");
  DecoderConfig dec = tiny_decoder();
  dec.loss_depth = 4;
  Rng rng(3);
  const double p_ap = 0.25;
  const std::size_t batch = 25000;
  const auto b = gen_batch<float>(p_ap, code, dec, Modulation::bpsk, LabelingKind::gray, 0.0,
                                  batch, rng);
  double ones = 0;
  for (std::size_t i = 0; i < b.labels.size(); ++i) ones += b.labels[i];
  const double frac = ones / static_cast<double>(b.labels.size());
  const double se = std::sqrt(p_ap * (1 - p_ap) / static_cast<double>(b.labels.size()));
  EXPECT_NEAR(frac, p_ap, 4.0 * se);
}

TEST(GenBatch, CleanWindowsAreExactConstellationPoints) {
  const CodeSpec code = parse_octal_generators("5,7");
  Rng rng(4);
  const auto b = gen_batch<double>(0.5, code, tiny_decoder(), Modulation::bpsk,
                                   LabelingKind::gray, 0.5, 64, rng);
  bool any_noise_delta = false;
  for (std::size_t i = 0; i < b.clean_windows.size(); ++i) {
    EXPECT_DOUBLE_EQ(std::abs(b.clean_windows[i]), 1.0);  // BPSK is exactly +/-1
    any_noise_delta |= b.windows[i] != b.clean_windows[i];
  }
  EXPECT_TRUE(any_noise_delta);

  Rng rng2(5);
  const double a = 1.0 / std::sqrt(2.0);
  const auto q = gen_batch<double>(0.5, code, tiny_decoder(), Modulation::qpsk,
                                   LabelingKind::anti_gray, 0.0, 16, rng2);
  for (std::size_t i = 0; i < q.clean_windows.size(); ++i) {
    EXPECT_NEAR(std::abs(q.clean_windows[i]), a, 1e-12);
    EXPECT_DOUBLE_EQ(q.windows[i], q.clean_windows[i]);  // sigma2 = 0
  }
}

TEST(GenBatch, NearDegenerateSourceGivesAllZeroLabels) {
  const CodeSpec code = parse_octal_generators("5,7");
  Rng rng(6);
  const auto b = gen_batch<double>(1e-9, code, tiny_decoder(), Modulation::bpsk,
                                   LabelingKind::gray, 0.0, 32, rng);
  for (std::size_t i = 0; i < b.labels.size(); ++i) EXPECT_DOUBLE_EQ(b.labels[i], 0.0);
  // All-zero input through a linear code maps every BPSK sample to -1.
  for (std::size_t i = 0; i < b.clean_windows.size(); ++i)
    EXPECT_DOUBLE_EQ(b.clean_windows[i], -1.0);
}

TEST(GenBatch, Validation) {
  const CodeSpec code = parse_octal_generators("5,7");
  Rng rng(7);
  EXPECT_THROW(gen_batch<double>(0.0, code, tiny_decoder(), Modulation::bpsk, LabelingKind::gray,
                                 0.1, 4, rng),
               std::invalid_argument);
  EXPECT_THROW(gen_batch<double>(0.6, code, tiny_decoder(), Modulation::bpsk, LabelingKind::gray,
                                 0.1, 4, rng),
               std::invalid_argument);
}

TEST(GenBatch, SeedDeterminism) {
  const CodeSpec code = parse_octal_generators("23,35");
  Rng r1(8), r2(8), r3(9);
  const auto a = gen_batch<float>(0.4, code, tiny_decoder(), Modulation::qpsk, LabelingKind::gray,
                                  0.7, 16, r1);
  const auto b = gen_batch<float>(0.4, code, tiny_decoder(), Modulation::qpsk, LabelingKind::gray,
                                  0.7, 16, r2);
  const auto c = gen_batch<float>(0.4, code, tiny_decoder(), Modulation::qpsk, LabelingKind::gray,
                                  0.7, 16, r3);
  ASSERT_EQ(a.windows.size(), b.windows.size());
  bool diff = false;
  for (std::size_t i = 0; i < a.windows.size(); ++i) {
    EXPECT_EQ(a.windows[i], b.windows[i]);
    diff |= a.windows[i] != c.windows[i];
  }
  for (std::size_t i = 0; i < a.labels.size(); ++i) EXPECT_EQ(a.labels[i], b.labels[i]);
  EXPECT_TRUE(diff);
}

// Data-pipeline oracle: on noiseless windows an exact sequence decoder started
// from an unknown state must reproduce the label bits in the decision region.
TEST(GenBatch, LabelsAlignWithWindowsUnderExactDecoding) {
  struct Case {
    const char* gens;
    Modulation mod;
    LabelingKind lab;
  };
  const Case cases[] = {
      {"1,3", Modulation::bpsk, LabelingKind::gray},
      {"5,7", Modulation::bpsk, LabelingKind::gray},
      {"23,35", Modulation::bpsk, LabelingKind::gray},
      {"5,7", Modulation::qpsk, LabelingKind::gray},
      {"5,7", Modulation::qpsk, LabelingKind::anti_gray},
  };
  for (const Case& c : cases) {
    const CodeSpec code = parse_octal_generators(c.gens);
    const Trellis trellis = build_trellis(code);
    DecoderConfig dec;
    dec.ramp_len = code.traceback_hint;
    dec.loss_depth = 6;
    const std::size_t win = dec.window_len(), ld = dec.loss_depth, ramp = dec.ramp_len;

    Rng rng(10);
    const std::size_t batch = 32;
    const auto b = gen_batch<double>(0.5, code, dec, c.mod, c.lab, 0.0, batch, rng);
    const Labeling lab = make_labeling(c.lab);

    for (std::size_t n = 0; n < batch; ++n) {
      SymbolStream y;
      for (std::size_t t = 0; t < win; ++t) {
        const double* obs = b.clean_windows.data() + (t * batch + n) * 2;
        if (c.mod == Modulation::bpsk) {
          y.push_back({obs[0], 0.0});
          y.push_back({obs[1], 0.0});
        } else {
          y.push_back({obs[0], obs[1]});
        }
      }
      const std::vector<double> llrs =
          c.mod == Modulation::bpsk ? llr_bpsk(y, 1.0) : llr_qpsk_maxlog(y, 1.0, lab);
      const BitStream decoded = decode_block(llrs, trellis, ViterbiInit::uniform);
      for (std::size_t k = 0; k < ld; ++k)
        EXPECT_EQ(static_cast<double>(decoded[ramp + k]), b.labels[n * ld + k])
            << c.gens << " window " << n << " position " << k;
    }
  }
}

// ---------------------------------------------------------------------------
// train() loop

TEST(Train, RerunsAreByteIdentical) {
  const fs::path dir_a = fresh_dir("seqdec_train_a");
  const fs::path dir_b = fresh_dir("seqdec_train_b");
  TrainConfig cfg = tiny_train();

  const TrainResult ra = train(cfg, dir_a.string());
  const TrainResult rb = train(cfg, dir_b.string());

  ASSERT_EQ(ra.log.size(), rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    EXPECT_EQ(ra.log[i].iteration, rb.log[i].iteration);
    EXPECT_EQ(ra.log[i].loss, rb.log[i].loss);
    EXPECT_EQ(ra.log[i].batch_ber, rb.log[i].batch_ber);
    EXPECT_EQ(ra.log[i].p_ap, rb.log[i].p_ap);
  }
  EXPECT_EQ(slurp(dir_a / "train_log.csv"), slurp(dir_b / "train_log.csv"));
  EXPECT_EQ(slurp(dir_a / "ckpt-final.bin"), slurp(dir_b / "ckpt-final.bin"));

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST(Train, AsyncPipelineIsSelfConsistent) {
  TrainConfig cfg = tiny_train();
  cfg.threads = 2;
  const TrainResult ra = train(cfg);
  const TrainResult rb = train(cfg);
  ASSERT_EQ(ra.log.size(), rb.log.size());
  for (std::size_t i = 0; i < ra.log.size(); ++i) {
    EXPECT_EQ(ra.log[i].loss, rb.log[i].loss);
    EXPECT_EQ(ra.log[i].batch_ber, rb.log[i].batch_ber);
  }
}

TEST(Train, ArtifactsAndWallclockSuppression) {
  const fs::path dir = fresh_dir("seqdec_train_artifacts");
  TrainConfig cfg = tiny_train();
  const TrainResult r = train(cfg, dir.string());
  EXPECT_EQ(r.iterations_run, cfg.iterations);

  EXPECT_TRUE(fs::exists(dir / "ckpt-3.manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "ckpt-3.bin"));
  EXPECT_TRUE(fs::exists(dir / "ckpt-6.manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "ckpt-final.manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "train_log.csv"));

  // Single-threaded logs pin the wallclock column to 0.000.
  std::ifstream is(dir / "train_log.csv");
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "# seqdec-csv-v1 train-log");
  std::getline(is, line);
  EXPECT_EQ(line, "iteration,p_ap,loss,batch_ber,probe_ber,wallclock_s");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "0.000");
  }
  EXPECT_EQ(rows, static_cast<int>(r.log.size()));

  // The final checkpoint reloads to the exact trained parameters.
  DecoderParams<float> reloaded = load_checkpoint<float>((dir / "ckpt-final").string());
  DecoderParams<float> trained = r.params;  // copy to use the non-const registry
  auto got = reloaded.named_tensors();
  auto want = trained.named_tensors();
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    ASSERT_EQ(got[i].second->shape(), want[i].second->shape());
    for (std::size_t j = 0; j < got[i].second->size(); ++j)
      EXPECT_EQ((*got[i].second)[j], (*want[i].second)[j]);
  }
  fs::remove_all(dir);
}

TEST(Train, ProbeRowsCarryMeasuredBer) {
  TrainConfig cfg = tiny_train();
  const TrainResult r = train(cfg);
  bool saw_probe = false, saw_nan = false;
  for (const TrainLogRow& row : r.log) {
    if (row.iteration % cfg.probe_every == 0) {
      saw_probe = true;
      EXPECT_TRUE(std::isfinite(row.probe_ber));
      EXPECT_GE(row.probe_ber, 0.0);
      EXPECT_LE(row.probe_ber, 1.0);
    } else if (!std::isfinite(row.probe_ber)) {
      saw_nan = true;
    }
  }
  EXPECT_TRUE(saw_probe);
  EXPECT_TRUE(saw_nan);  // non-probe rows leave the column as nan
}

TEST(Train, HookCanStopEarly) {
  TrainConfig cfg = tiny_train();
  cfg.iterations = 100;
  cfg.log_every = 5;
  cfg.probe_every = 1000;
  int calls = 0;
  const TrainResult r = train(cfg, "", [&](long, DecoderParams<float>&, const TrainLogRow&) {
    ++calls;
    return false;  // stop at the first logged row
  });
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.iterations_run, 5);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].iteration, 5);
}

TEST(Train, NonFiniteLossAbortsWithSnapshot) {
  const fs::path dir = fresh_dir("seqdec_train_abort");
  TrainConfig cfg = tiny_train();
  cfg.iterations = 10;
  cfg.log_every = 1;
  cfg.probe_every = 1000;
  cfg.checkpoint_every = 1000;
  // Fault injection through the public hook: corrupt the parameters mid-run
  // and let the next forward pass produce a non-finite loss.
  auto hook = [](long it, DecoderParams<float>& params, const TrainLogRow&) {
    if (it == 2) params.head.b[0] = std::numeric_limits<float>::quiet_NaN();
    return true;
  };
  EXPECT_THROW(train(cfg, dir.string(), hook), std::runtime_error);
  EXPECT_TRUE(fs::exists(dir / "ckpt-abort.manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "ckpt-abort.bin"));
  EXPECT_TRUE(fs::exists(dir / "train_log.csv"));
  fs::remove_all(dir);
}

TEST(Train, LearnsAnEasyCodeQuickly) {
  TrainConfig cfg;
  cfg.code = parse_octal_generators("1,3");
  cfg.decoder.ramp_len = 4;
  cfg.decoder.loss_depth = 2;
  cfg.decoder.gru_layers = 1;
  cfg.decoder.gru_width = 12;
  cfg.decoder.combiner_width = 8;
  cfg.batch_size = 32;
  cfg.iterations = 400;
  cfg.train_ebno_db = 6.0;
  cfg.probe_ebno_db = 6.0;
  cfg.probe_bits = 2000;
  cfg.probe_every = 200;
  cfg.learning_rate = 1e-3;
  cfg.log_every = 50;
  cfg.checkpoint_every = 100000;
  cfg.seed = 5;

  const TrainResult r = train(cfg);
  ASSERT_GE(r.log.size(), 2u);
  const TrainLogRow& first = r.log.front();
  const TrainLogRow& last = r.log.back();
  EXPECT_LT(last.loss, 0.7 * first.loss);
  EXPECT_LE(last.batch_ber, 0.1);
}

TEST(Train, ConfigValidation) {
  TrainConfig cfg = tiny_train();
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_train();
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_train();
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_train();
  cfg.log_every = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = tiny_train();
  cfg.threads = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
