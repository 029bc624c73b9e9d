// seqdec: train and evaluate a recurrent neural decoder for rate-1/2
// convolutional codes against a windowed Viterbi ML baseline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "seqdec/checkpoint.hpp"
#include "seqdec/config.hpp"
#include "seqdec/conv_code.hpp"
#include "seqdec/metrics.hpp"
#include "seqdec/pipelines.hpp"
#include "seqdec/training.hpp"

namespace {

namespace fs = std::filesystem;
using namespace seqdec;

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> modulation;
  std::optional<std::string> labeling;
  bool interleave = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool config_required) {
  auto* opt = cmd->add_option("--config", flags.config_path, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", flags.out_dir, "output directory (default: out)");
  cmd->add_option("--seed", flags.seed, "override config seed");
  cmd->add_option("--threads", flags.threads, "parallelism degree; 1 guarantees determinism");
  cmd->add_option("--modulation", flags.modulation, "override: bpsk or qpsk")
      ->check(CLI::IsMember({"bpsk", "qpsk"}));
  cmd->add_option("--labeling", flags.labeling, "override: gray or anti-gray")
      ->check(CLI::IsMember({"gray", "anti-gray"}));
  cmd->add_flag("--interleave", flags.interleave, "enable the coded-bit block interleaver");
}

ExperimentConfig load_and_resolve(const CommonFlags& flags) {
  ExperimentConfig cfg = load_experiment_config(flags.config_path);
  if (flags.seed) cfg.train.seed = *flags.seed;
  if (flags.threads) cfg.train.threads = *flags.threads;
  if (flags.modulation) cfg.train.modulation = modulation_from_string(*flags.modulation);
  if (flags.labeling) cfg.train.labeling = labeling_from_string(*flags.labeling);
  if (flags.interleave) cfg.interleave = true;
  cfg.train.validate();
  return cfg;
}

void print_table(const BerTable& table, const std::string& name) {
  std::printf("%s:\n", name.c_str());
  for (const BerPoint& p : table.points)
    std::printf("  %5.2f dB  ber %.6g  (%llu errors / %llu bits)%s\n", p.snr_db, p.ber,
                static_cast<unsigned long long>(p.errors), static_cast<unsigned long long>(p.bits),
                p.censored ? "  [censored]" : "");
}

int cmd_train(const CommonFlags& flags) {
  ExperimentConfig cfg = load_and_resolve(flags);
  fs::create_directories(flags.out_dir);
  write_config_snapshot(flags.out_dir + "/config_snapshot.json", cfg);

  std::printf("training %s, %s/%s, %ld iterations, schedule %s\n",
              cfg.train.code.octal_string().c_str(), to_string(cfg.train.modulation),
              to_string(cfg.train.labeling), cfg.train.iterations,
              to_string(cfg.train.curriculum.schedule));
  const TrainResult result = train(cfg.train, flags.out_dir);
  const TrainLogRow& last = result.log.back();
  std::printf("done: %ld iterations, final loss %.6g, batch ber %.6g\n", result.iterations_run,
              last.loss, last.batch_ber);
  std::printf("artifacts in %s (train_log.csv, ckpt-final.manifest.json)\n", flags.out_dir.c_str());
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& checkpoint_path) {
  ExperimentConfig cfg = load_and_resolve(flags);
  auto params = std::make_shared<DecoderParams<float>>(load_checkpoint<float>(checkpoint_path));
  if (cfg.decoder_given && !(params->config == cfg.train.decoder))
    throw ConfigError("decoder", "geometry differs from checkpoint " + checkpoint_path);
  cfg.train.decoder = params->config;

  fs::create_directories(flags.out_dir);
  write_config_snapshot(flags.out_dir + "/config_snapshot.json", cfg);

  const NnChain chain{cfg.train.code, cfg.train.modulation, cfg.train.labeling};
  const McStopRule stop{cfg.eval.min_errors, cfg.eval.max_bits, cfg.eval.chunk_bits};
  const auto grid = cfg.eval.grid();
  const BerTable table = monte_carlo_ber(make_nn_system(chain, params), grid, stop,
                                         seed_lane(cfg.train.seed, 0x6e6eu), cfg.train.threads);
  write_ber_csv(flags.out_dir + "/nn_ber.csv", table);
  print_table(table, "nn decoder " + cfg.train.code.octal_string());
  std::printf("wrote %s/nn_ber.csv\n", flags.out_dir.c_str());
  return 0;
}

int cmd_baseline(const CommonFlags& flags) {
  ExperimentConfig cfg = load_and_resolve(flags);
  fs::create_directories(flags.out_dir);
  write_config_snapshot(flags.out_dir + "/config_snapshot.json", cfg);

  const McStopRule stop{cfg.eval.min_errors, cfg.eval.max_bits, cfg.eval.chunk_bits};
  const auto grid = cfg.eval.grid();

  BaselineChain chain;
  chain.code = cfg.train.code;
  chain.modulation = cfg.train.modulation;
  chain.labeling = cfg.train.labeling;
  chain.interleave = cfg.interleave;
  chain.interleave_block = cfg.interleave_block;
  const BerTable viterbi = monte_carlo_ber(make_viterbi_system(chain), grid, stop,
                                           seed_lane(cfg.train.seed, 0x7662u), cfg.train.threads);
  write_ber_csv(flags.out_dir + "/baseline_viterbi.csv", viterbi);
  print_table(viterbi, "viterbi baseline " + cfg.train.code.octal_string());

  const BerTable uncoded = monte_carlo_ber(make_uncoded_bpsk_system(), grid, stop,
                                           seed_lane(cfg.train.seed, 0x7563u), cfg.train.threads);
  write_ber_csv(flags.out_dir + "/baseline_uncoded.csv", uncoded);
  print_table(uncoded, "uncoded bpsk");
  std::printf("wrote %s/baseline_viterbi.csv and %s/baseline_uncoded.csv\n", flags.out_dir.c_str(),
              flags.out_dir.c_str());
  return 0;
}

int cmd_compare(const std::string& nn_path, const std::string& ref_path, const std::string& out_dir) {
  const BerTable nn_table = read_ber_csv(nn_path);
  const BerTable ref_table = read_ber_csv(ref_path);
  NveReport report;
  try {
    report = nve(nn_table, ref_table);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("compare", e.what());
  }

  fs::create_directories(out_dir);
  const std::string merged_path = out_dir + "/compare.csv";
  std::ofstream os(merged_path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + merged_path);
  os << "# seqdec-csv-v1 compare\n";
  os << "snr_db,ber_candidate,ber_reference,ratio\n";
  char line[160];
  for (std::size_t i = 0; i < nn_table.points.size(); ++i) {
    const auto& c = nn_table.points[i];
    const auto& r = ref_table.points[i];
    const double ratio = r.ber > 0 ? c.ber / r.ber : std::numeric_limits<double>::quiet_NaN();
    std::snprintf(line, sizeof(line), "%.6g,%.10g,%.10g,%.10g\n", c.snr_db, c.ber, r.ber, ratio);
    os << line;
  }

  nlohmann::json meta = {{"candidate", nn_path},
                         {"reference", ref_path},
                         {"nve", report.nve},
                         {"points_used", report.points_used},
                         {"skipped", report.skipped}};
  std::ofstream meta_os(out_dir + "/compare_meta.json", std::ios::trunc);
  meta_os << meta.dump(2) << "\n";

  std::printf("NVE = %.6g over %d points", report.nve, report.points_used);
  if (!report.skipped.empty()) {
    std::printf(" (skipped zero-reference points:");
    for (int i : report.skipped) std::printf(" %d", i);
    std::printf(")");
  }
  std::printf("\nwrote %s\n", merged_path.c_str());
  return 0;
}

int cmd_codes() {
  std::printf("%-12s %-5s %-7s %-18s %-10s\n", "generators", "rate", "memory", "constraint_length",
              "traceback");
  for (const CodeSpec& code : reference_codes())
    std::printf("%-12s %-5s %-7d %-18d %-10d\n", code.octal_string().c_str(), "1/2", code.memory,
                code.constraint_length(), code.traceback_hint);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent neural decoding of convolutional codes with a Viterbi ML baseline"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, baseline_flags;
  std::string checkpoint_path, nn_path, ref_path, compare_out = "out";

  CLI::App* train_cmd = app.add_subcommand("train", "train the neural decoder");
  add_common_flags(train_cmd, train_flags, true);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Monte-Carlo BER of a trained decoder");
  add_common_flags(eval_cmd, eval_flags, true);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint manifest or prefix")->required();

  CLI::App* baseline_cmd = app.add_subcommand("baseline", "Viterbi and uncoded reference curves");
  add_common_flags(baseline_cmd, baseline_flags, true);

  CLI::App* compare_cmd = app.add_subcommand("compare", "NVE between two BER tables");
  compare_cmd->add_option("--nn", nn_path, "candidate BER table CSV")->required();
  compare_cmd->add_option("--ref", ref_path, "reference BER table CSV")->required();
  compare_cmd->add_option("--out", compare_out, "output directory (default: out)");

  CLI::App* codes_cmd = app.add_subcommand("codes", "print the benchmark code family");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage problems are configuration errors
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_flags);
    if (eval_cmd->parsed()) return cmd_eval(eval_flags, checkpoint_path);
    if (baseline_cmd->parsed()) return cmd_baseline(baseline_flags);
    if (compare_cmd->parsed()) return cmd_compare(nn_path, ref_path, compare_out);
    if (codes_cmd->parsed()) return cmd_codes();
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
