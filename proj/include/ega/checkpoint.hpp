#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "ega/parameters.hpp"

namespace ega::io {

// EGAC v1 layout:
//   "EGAC" | u32 LE manifest length | JSON manifest | f64 LE parameter buffers
// Manifest: {format, version, config, params: [{name, shape, trainable,
// offset}], rng_state}. Offsets are byte positions after the manifest.

struct Checkpoint {
  nlohmann::json config;
  ParameterSet params;
  std::string rng_state;
};

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config, const ParameterSet& params,
                     const std::string& rng_state = "");
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ega::io
