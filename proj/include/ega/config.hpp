#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "ega/adapter.hpp"
#include "ega/encoder.hpp"
#include "ega/montage.hpp"
#include "ega/synth.hpp"

namespace ega {

/// Variants: "baseline" trains backbone + head, "frozen" trains the head on
/// the frozen backbone, "gcn" / "sage" / "gat" add the graph adapter in front
/// of the frozen backbone.
enum class RunVariant { baseline, frozen, gcn, sage, gat };

std::string to_string(RunVariant v);
RunVariant parse_run_variant(const std::string& s);
bool uses_adapter(RunVariant v);
model::Variant adapter_variant(RunVariant v);

struct ExperimentConfig {
  std::string task = "synthetic";  // synthetic | eegb-dir
  std::string data_dir;
  RunVariant variant = RunVariant::gcn;
  std::size_t k_folds = 5;
  std::size_t epochs = 7;
  double lr = 1e-5;
  std::size_t batch_size = 4;
  /// Circularly shift every training segment by a random offset each time it
  /// is drawn. Evaluation inputs are never shifted.
  bool augment_shift = false;
  std::uint64_t seed = 0;
  std::uint64_t data_seed = 0;      // synthetic data generation
  std::uint64_t pretrain_seed = 0;  // synthetic pre-training data and init
  std::size_t segment_length = 1024;

  model::AdapterConfig adapter;  // input_len / length follow segment_length and the encoder
  model::EncoderConfig encoder{.d_enc = 192};
  std::size_t encoder_input_length = 1024;
  model::PretrainConfig pretrain;
  signal::SynthSpec synth;
  montage::GraphOptions graph;
  std::string positions_file;

  /// Fills derived fields and checks invariants.
  void finalize();
};

/// Parses a JSON object; unknown keys at any level are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

nlohmann::json encoder_to_json(const model::EncoderConfig& e);
model::EncoderConfig encoder_from_json(const nlohmann::json& j);

}  // namespace ega
