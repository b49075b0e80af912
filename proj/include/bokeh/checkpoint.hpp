#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"

#include "bokeh/net.hpp"

namespace bokeh {

// Checkpoint layout (all integers little-endian):
//
//   offset 0   8 bytes  magic "BKFCKPT\0"
//   offset 8   u32      format version (1)
//   offset 12  u64      manifest length N
//   offset 20  N bytes  UTF-8 JSON manifest
//   offset 20+N         payload
//
// Manifest: {"config": {...NetConfig...}, "meta": {...},
//            "tensors": [{"name", "shape": [rows, cols], "dtype": "f64",
//                         "offset", "nbytes"}, ...]}
// Tensor offsets are relative to the payload start; values are row-major
// IEEE-754 doubles.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetConfig config;
  ParamSet params;
  nlohmann::json meta;

  VectorFieldNet network() const { return VectorFieldNet::from_params(config, params); }
};

nlohmann::json config_to_json(const NetConfig& config);
NetConfig config_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> encode_checkpoint(const VectorFieldNet& net,
                                            const nlohmann::json& meta = nlohmann::json::object());
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const VectorFieldNet& net,
                     const nlohmann::json& meta = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bokeh
