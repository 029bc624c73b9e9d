#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "seqdec/metrics.hpp"
#include "seqdec/training.hpp"

namespace seqdec {

// Configuration/validation failure; `field` names the offending key.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_, const std::string& message)
      : std::runtime_error("config field \"" + field_ + "\": " + message), field(std::move(field_)) {}
};

struct EvalConfig {
  double snr_min_db = 0.0;
  double snr_max_db = 3.5;
  int num_points = 8;
  std::uint64_t min_errors = 100;
  std::uint64_t max_bits = 2'000'000;
  std::uint64_t chunk_bits = 16'384;

  std::vector<double> grid() const { return snr_grid(snr_min_db, snr_max_db, num_points); }
};

struct ExperimentConfig {
  TrainConfig train;  // code, decoder, loop parameters, seed, threads
  EvalConfig eval;
  bool interleave = false;
  std::size_t interleave_block = 4096;
  bool decoder_given = false;  // whether the config file pinned decoder geometry
};

namespace detail {

inline void check_keys(const nlohmann::json& obj, const std::string& scope,
                       const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key))
      throw ConfigError(scope.empty() ? key : scope + "." + key, "unknown key");
}

template <typename T>
T get_or(const nlohmann::json& obj, const std::string& scope, const std::string& key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(scope.empty() ? key : scope + "." + key, "wrong type");
  }
}

}  // namespace detail

// Parses the experiment config. Unknown keys are errors; the only required
// field is code.generators. decoder.ramp_len defaults to the code's traceback
// hint 5*(nu+1).
inline ExperimentConfig parse_experiment_config(const nlohmann::json& root) {
  using detail::check_keys;
  using detail::get_or;

  if (!root.is_object()) throw ConfigError("", "top level must be an object");
  check_keys(root, "",
             {"code", "modulation", "labeling", "interleave", "interleave_block", "decoder",
              "train", "eval", "seed", "threads"});

  ExperimentConfig cfg;

  if (!root.contains("code") || !root["code"].is_object())
    throw ConfigError("code", "required object missing");
  check_keys(root["code"], "code", {"generators"});
  if (!root["code"].contains("generators"))
    throw ConfigError("code.generators", "required field missing");
  try {
    cfg.train.code = parse_octal_generators(root["code"]["generators"].get<std::string>());
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("code.generators", "must be a string like \"133,171\"");
  } catch (const std::invalid_argument& e) {
    throw ConfigError("code.generators", e.what());
  }

  try {
    cfg.train.modulation = modulation_from_string(get_or<std::string>(root, "", "modulation", "bpsk"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("modulation", e.what());
  }
  try {
    cfg.train.labeling = labeling_from_string(get_or<std::string>(root, "", "labeling", "gray"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("labeling", e.what());
  }
  cfg.interleave = get_or<bool>(root, "", "interleave", false);
  cfg.interleave_block = get_or<std::size_t>(root, "", "interleave_block", 4096);
  if (cfg.interleave_block == 0) throw ConfigError("interleave_block", "must be positive");
  cfg.train.seed = get_or<std::uint64_t>(root, "", "seed", 1);
  cfg.train.threads = get_or<int>(root, "", "threads", 1);

  DecoderConfig dec;
  dec.ramp_len = cfg.train.code.traceback_hint;
  dec.loss_depth = 16;
  if (root.contains("decoder")) {
    cfg.decoder_given = true;
    const auto& d = root["decoder"];
    if (!d.is_object()) throw ConfigError("decoder", "must be an object");
    check_keys(d, "decoder", {"ramp_len", "loss_depth", "gru_layers", "gru_width", "combiner_width"});
    dec.ramp_len = get_or<int>(d, "decoder", "ramp_len", dec.ramp_len);
    dec.loss_depth = get_or<int>(d, "decoder", "loss_depth", dec.loss_depth);
    dec.gru_layers = get_or<int>(d, "decoder", "gru_layers", dec.gru_layers);
    dec.gru_width = get_or<int>(d, "decoder", "gru_width", dec.gru_width);
    dec.combiner_width = get_or<int>(d, "decoder", "combiner_width", dec.combiner_width);
  }
  try {
    dec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("decoder", e.what());
  }
  cfg.train.decoder = dec;

  if (root.contains("train")) {
    const auto& t = root["train"];
    if (!t.is_object()) throw ConfigError("train", "must be an object");
    check_keys(t, "train",
               {"batch_size", "iterations", "ebno_db", "loss", "optimizer", "learning_rate",
                "checkpoint_every", "log_every", "probe_ebno_db", "probe_bits", "probe_every",
                "curriculum"});
    cfg.train.batch_size = get_or<std::size_t>(t, "train", "batch_size", cfg.train.batch_size);
    cfg.train.iterations = get_or<long>(t, "train", "iterations", cfg.train.iterations);
    cfg.train.train_ebno_db = get_or<double>(t, "train", "ebno_db", cfg.train.train_ebno_db);
    try {
      cfg.train.loss = loss_from_string(get_or<std::string>(t, "train", "loss", "bce"));
      cfg.train.optimizer =
          nn::optimizer_from_string(get_or<std::string>(t, "train", "optimizer", "rmsprop"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("train", e.what());
    }
    cfg.train.learning_rate = get_or<double>(t, "train", "learning_rate", cfg.train.learning_rate);
    cfg.train.checkpoint_every = get_or<long>(t, "train", "checkpoint_every", cfg.train.checkpoint_every);
    cfg.train.log_every = get_or<long>(t, "train", "log_every", cfg.train.log_every);
    cfg.train.probe_ebno_db = get_or<double>(t, "train", "probe_ebno_db", cfg.train.probe_ebno_db);
    cfg.train.probe_bits = get_or<std::uint64_t>(t, "train", "probe_bits", cfg.train.probe_bits);
    cfg.train.probe_every = get_or<long>(t, "train", "probe_every", cfg.train.probe_every);
    if (t.contains("curriculum")) {
      const auto& c = t["curriculum"];
      if (!c.is_object()) throw ConfigError("train.curriculum", "must be an object");
      check_keys(c, "train.curriculum", {"schedule", "p_start", "step_delta", "max_level_iters"});
      try {
        cfg.train.curriculum.schedule =
            schedule_from_string(get_or<std::string>(c, "train.curriculum", "schedule", "none"));
      } catch (const std::invalid_argument& e) {
        throw ConfigError("train.curriculum.schedule", e.what());
      }
      cfg.train.curriculum.p_start = get_or<double>(c, "train.curriculum", "p_start", 0.1);
      cfg.train.curriculum.step_delta = get_or<double>(c, "train.curriculum", "step_delta", 0.05);
      cfg.train.curriculum.max_level_iters =
          get_or<int>(c, "train.curriculum", "max_level_iters", 2000);
    }
  }

  if (root.contains("eval")) {
    const auto& e = root["eval"];
    if (!e.is_object()) throw ConfigError("eval", "must be an object");
    check_keys(e, "eval",
               {"snr_min_db", "snr_max_db", "num_points", "min_errors", "max_bits", "chunk_bits"});
    cfg.eval.snr_min_db = get_or<double>(e, "eval", "snr_min_db", cfg.eval.snr_min_db);
    cfg.eval.snr_max_db = get_or<double>(e, "eval", "snr_max_db", cfg.eval.snr_max_db);
    cfg.eval.num_points = get_or<int>(e, "eval", "num_points", cfg.eval.num_points);
    cfg.eval.min_errors = get_or<std::uint64_t>(e, "eval", "min_errors", cfg.eval.min_errors);
    cfg.eval.max_bits = get_or<std::uint64_t>(e, "eval", "max_bits", cfg.eval.max_bits);
    cfg.eval.chunk_bits = get_or<std::uint64_t>(e, "eval", "chunk_bits", cfg.eval.chunk_bits);
  }

  if (cfg.eval.num_points < 1) throw ConfigError("eval.num_points", "must be >= 1");
  if (cfg.eval.num_points > 1 && !(cfg.eval.snr_min_db < cfg.eval.snr_max_db))
    throw ConfigError("eval.snr_min_db", "must be < eval.snr_max_db");
  if (cfg.eval.chunk_bits == 0) throw ConfigError("eval.chunk_bits", "must be positive");
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("train", e.what());
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("", "cannot open config file " + path);
  nlohmann::json root;
  try {
    is >> root;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("", "malformed JSON: " + std::string(e.what()));
  }
  return parse_experiment_config(root);
}

// Fully resolved snapshot; reloading it reproduces the run.
inline nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json root;
  root["code"] = {{"generators", cfg.train.code.octal_string()}};
  root["modulation"] = to_string(cfg.train.modulation);
  root["labeling"] = to_string(cfg.train.labeling);
  root["interleave"] = cfg.interleave;
  root["interleave_block"] = cfg.interleave_block;
  root["seed"] = cfg.train.seed;
  root["threads"] = cfg.train.threads;
  root["decoder"] = {{"ramp_len", cfg.train.decoder.ramp_len},
                     {"loss_depth", cfg.train.decoder.loss_depth},
                     {"gru_layers", cfg.train.decoder.gru_layers},
                     {"gru_width", cfg.train.decoder.gru_width},
                     {"combiner_width", cfg.train.decoder.combiner_width}};
  root["train"] = {{"batch_size", cfg.train.batch_size},
                   {"iterations", cfg.train.iterations},
                   {"ebno_db", cfg.train.train_ebno_db},
                   {"loss", to_string(cfg.train.loss)},
                   {"optimizer", to_string(cfg.train.optimizer)},
                   {"learning_rate", cfg.train.learning_rate},
                   {"checkpoint_every", cfg.train.checkpoint_every},
                   {"log_every", cfg.train.log_every},
                   {"probe_ebno_db", cfg.train.probe_ebno_db},
                   {"probe_bits", cfg.train.probe_bits},
                   {"probe_every", cfg.train.probe_every},
                   {"curriculum",
                    {{"schedule", to_string(cfg.train.curriculum.schedule)},
                     {"p_start", cfg.train.curriculum.p_start},
                     {"step_delta", cfg.train.curriculum.step_delta},
                     {"max_level_iters", cfg.train.curriculum.max_level_iters}}}};
  root["eval"] = {{"snr_min_db", cfg.eval.snr_min_db},
                  {"snr_max_db", cfg.eval.snr_max_db},
                  {"num_points", cfg.eval.num_points},
                  {"min_errors", cfg.eval.min_errors},
                  {"max_bits", cfg.eval.max_bits},
                  {"chunk_bits", cfg.eval.chunk_bits}};
  return root;
}

inline void write_config_snapshot(const std::string& path, const ExperimentConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << experiment_config_to_json(cfg).dump(2) << "\n";
}

}  // namespace seqdec
