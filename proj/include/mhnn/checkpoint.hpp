#pragma once

// Checkpoint file: 8-byte magic, u32 version, u32 header length, JSON header
// (model config, standardization stats, names, parameter registry with
// name/shape/byte offset), then raw little-endian 32-bit floats in registry
// order. Round-trips bit exactly for 32-bit models.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mhnn/common.hpp"
#include "mhnn/datasets.hpp"
#include "mhnn/model.hpp"

namespace mhnn {

inline constexpr char kCheckpointMagic[8] = {'M', 'H', 'N', 'N',
                                             'C', 'K', 'P', 'T'};

template <typename T>
void save_checkpoint(Model<T>& model, const data::ChannelStats& stats,
                     const std::vector<std::string>& channel_names,
                     const std::vector<std::string>& class_names,
                     const std::string& path) {
  auto registry = model.registry();
  nlohmann::json params = nlohmann::json::array();
  std::size_t offset = 0;
  for (auto& e : registry) {
    params.push_back({{"name", e.name},
                      {"shape", e.tensor->shape},
                      {"offset", offset},
                      {"trainable", e.trainable}});
    offset += e.tensor->numel() * sizeof(float);
  }
  const nlohmann::json header = {{"format", "mhnn-checkpoint"},
                                 {"version", 1},
                                 {"config", config_to_json(model.config)},
                                 {"channel_mean", stats.mean},
                                 {"channel_std", stats.stdev},
                                 {"channel_names", channel_names},
                                 {"class_names", class_names},
                                 {"params", params}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, 8);
  const std::uint32_t version = 1;
  const std::uint32_t header_len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&header_len), 4);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<float> buf;
  for (auto& e : registry) {
    buf.resize(e.tensor->numel());
    for (std::size_t i = 0; i < buf.size(); ++i)
      buf[i] = static_cast<float>(e.tensor->data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  require(out.good(), "write failed for '" + path + "'");
}

template <typename T>
struct LoadedCheckpoint {
  Model<T> model;
  data::ChannelStats stats;
  std::vector<std::string> channel_names, class_names;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  require(in.good() && std::memcmp(magic, kCheckpointMagic, 8) == 0,
          "'" + path + "' is not a checkpoint file");
  std::uint32_t version = 0, header_len = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&header_len), 4);
  require(in.good() && version == 1, "unsupported checkpoint version");
  std::string text(header_len, '\0');
  in.read(text.data(), header_len);
  require(in.good(), "'" + path + "' is truncated");
  const nlohmann::json header = nlohmann::json::parse(text);

  const MHNNConfig config = config_from_json(header.at("config"));
  LoadedCheckpoint<T> loaded{Model<T>(config, 0), {}, {}, {}};
  loaded.stats.mean = header.at("channel_mean").get<std::vector<double>>();
  loaded.stats.stdev = header.at("channel_std").get<std::vector<double>>();
  loaded.channel_names =
      header.at("channel_names").get<std::vector<std::string>>();
  loaded.class_names = header.at("class_names").get<std::vector<std::string>>();

  auto registry = loaded.model.registry();
  const auto& params = header.at("params");
  require(params.size() == registry.size(), "checkpoint registry mismatch");
  std::vector<float> buf;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const auto& entry = params.at(i);
    require(entry.at("name").get<std::string>() == registry[i].name,
            "checkpoint registry mismatch");
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    require(shape == registry[i].tensor->shape, "checkpoint shape mismatch");
    buf.resize(registry[i].tensor->numel());
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    require(in.good(), "'" + path + "' is truncated");
    for (std::size_t j = 0; j < buf.size(); ++j)
      registry[i].tensor->data[j] = static_cast<T>(buf[j]);
  }
  return loaded;
}

}  // namespace mhnn
