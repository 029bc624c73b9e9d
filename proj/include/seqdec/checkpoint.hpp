#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqdec/decoder_model.hpp"
#include "seqdec/tensor.hpp"

namespace seqdec {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is little-endian float32; big-endian hosts are unsupported");

inline constexpr const char* kCheckpointFormat = "seqdec-ckpt-v1";

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {
inline nlohmann::json decoder_config_to_json(const DecoderConfig& c) {
  return {{"ramp_len", c.ramp_len},     {"loss_depth", c.loss_depth},
          {"gru_layers", c.gru_layers}, {"gru_width", c.gru_width},
          {"combiner_width", c.combiner_width}, {"input_width", c.input_width}};
}

inline DecoderConfig decoder_config_from_json(const nlohmann::json& j) {
  DecoderConfig c;
  c.ramp_len = j.at("ramp_len").get<int>();
  c.loss_depth = j.at("loss_depth").get<int>();
  c.gru_layers = j.at("gru_layers").get<int>();
  c.gru_width = j.at("gru_width").get<int>();
  c.combiner_width = j.at("combiner_width").get<int>();
  c.input_width = j.at("input_width").get<int>();
  c.validate();
  return c;
}
}  // namespace detail

// Writes <prefix>.manifest.json + <prefix>.bin. The manifest records the format
// tag, decoder geometry and per-tensor name/shape/byte-offset; the payload is
// the concatenated tensors as little-endian float32.
template <typename T>
void save_checkpoint(const std::string& prefix, DecoderParams<T>& params) {
  namespace fs = std::filesystem;
  const fs::path bin_path = prefix + ".bin";
  const fs::path man_path = prefix + ".manifest.json";

  nlohmann::json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["payload"] = bin_path.filename().string();
  manifest["decoder"] = detail::decoder_config_to_json(params.config);

  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  if (!bin) throw CheckpointError("cannot write " + bin_path.string());

  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (auto& [name, tensor] : params.named_tensors()) {
    nlohmann::json entry;
    entry["name"] = name;
    entry["shape"] = tensor->shape();
    entry["offset"] = offset;
    entry["count"] = tensor->size();
    tensors.push_back(entry);
    for (std::size_t i = 0; i < tensor->size(); ++i) {
      const float v = static_cast<float>((*tensor)[i]);
      bin.write(reinterpret_cast<const char*>(&v), sizeof(float));
    }
    offset += tensor->size() * sizeof(float);
  }
  manifest["tensors"] = tensors;
  bin.close();
  if (!bin) throw CheckpointError("short write to " + bin_path.string());

  std::ofstream man(man_path, std::ios::trunc);
  if (!man) throw CheckpointError("cannot write " + man_path.string());
  man << manifest.dump(2) << "\n";
}

// Loads from a manifest path (either ".manifest.json" or the prefix).
template <typename T>
DecoderParams<T> load_checkpoint(const std::string& path) {
  namespace fs = std::filesystem;
  fs::path man_path = path;
  if (!fs::exists(man_path) && fs::exists(path + ".manifest.json"))
    man_path = path + ".manifest.json";

  std::ifstream man(man_path);
  if (!man) throw CheckpointError("cannot open checkpoint manifest " + man_path.string());
  nlohmann::json manifest;
  try {
    man >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint manifest: " + std::string(e.what()));
  }

  if (!manifest.contains("format") || manifest["format"] != kCheckpointFormat)
    throw CheckpointError("checkpoint format tag mismatch (want " + std::string(kCheckpointFormat) + ")");

  DecoderConfig config;
  try {
    config = detail::decoder_config_from_json(manifest.at("decoder"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint manifest missing decoder geometry: " + std::string(e.what()));
  }

  Rng dummy(0);
  DecoderParams<T> params = init_decoder<T>(config, dummy);

  const fs::path bin_path = man_path.parent_path() / manifest.at("payload").get<std::string>();
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw CheckpointError("cannot open checkpoint payload " + bin_path.string());
  bin.seekg(0, std::ios::end);
  const std::uint64_t file_size = static_cast<std::uint64_t>(bin.tellg());

  auto named = params.named_tensors();
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != named.size())
    throw CheckpointError("checkpoint tensor count mismatch");

  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& entry = tensors.at(i);
    auto& [name, tensor] = named[i];
    if (entry.at("name").get<std::string>() != name)
      throw CheckpointError("checkpoint tensor name mismatch at index " + std::to_string(i));
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != tensor->shape())
      throw CheckpointError("checkpoint tensor shape mismatch for " + name);
    const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
    const std::uint64_t count = entry.at("count").get<std::uint64_t>();
    if (count != tensor->size() || offset + count * sizeof(float) > file_size)
      throw CheckpointError("checkpoint payload out of bounds for " + name);
    bin.seekg(static_cast<std::streamoff>(offset));
    std::vector<float> buf(count);
    bin.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!bin) throw CheckpointError("short read in checkpoint payload for " + name);
    for (std::size_t j = 0; j < count; ++j) (*tensor)[j] = static_cast<T>(buf[j]);
  }
  return params;
}

}  // namespace seqdec
