#include "ega/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "ega/errors.hpp"
#include "ega/parameters.hpp"

namespace ega {

using nlohmann::json;

namespace {

// Reads known keys from one JSON object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items())
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + prefix() + key + "'");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + prefix() + key + "': " + e.what());
    }
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string child(const char* key) const { return prefix() + key; }

 private:
  std::string prefix() const { return where_.empty() ? "" : where_ + "."; }
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

std::string to_string(RunVariant v) {
  switch (v) {
    case RunVariant::baseline: return "baseline";
    case RunVariant::frozen: return "frozen";
    case RunVariant::gcn: return "gcn";
    case RunVariant::sage: return "sage";
    case RunVariant::gat: return "gat";
  }
  return "?";
}

RunVariant parse_run_variant(const std::string& s) {
  if (s == "baseline" || s == "baseline-bendr") return RunVariant::baseline;
  if (s == "frozen") return RunVariant::frozen;
  if (s == "gcn" || s == "ega-gcn") return RunVariant::gcn;
  if (s == "sage" || s == "ega-sage") return RunVariant::sage;
  if (s == "gat" || s == "ega-gat") return RunVariant::gat;
  throw ConfigError("unknown variant '" + s + "' (expected baseline, frozen, gcn, sage or gat)");
}

bool uses_adapter(RunVariant v) { return v == RunVariant::gcn || v == RunVariant::sage || v == RunVariant::gat; }

model::Variant adapter_variant(RunVariant v) {
  switch (v) {
    case RunVariant::sage: return model::Variant::sage;
    case RunVariant::gat: return model::Variant::gat;
    default: return model::Variant::gcn;
  }
}

void ExperimentConfig::finalize() {
  if (task != "synthetic" && task != "eegb-dir") throw ConfigError("task must be 'synthetic' or 'eegb-dir'");
  if (task == "eegb-dir" && data_dir.empty()) throw ConfigError("task eegb-dir needs data_dir");
  if (k_folds < 2) throw ConfigError("k_folds must be >= 2");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (task == "synthetic") {
    synth.length = segment_length;
    encoder.n_channels = synth.n_channels;
  }
  adapter.variant = adapter_variant(variant);
  adapter.input_len = segment_length;
  adapter.length = encoder_input_length;
  adapter.validate();
  encoder.validate();
  pretrain.validate();
  if (!uses_adapter(variant) && segment_length != encoder_input_length)
    throw ConfigError("variant " + to_string(variant) + " has no length adapter; segment_length (" +
                      std::to_string(segment_length) + ") must equal encoder_input_length (" +
                      std::to_string(encoder_input_length) + ")");
  if (encoder.output_length(encoder_input_length) < 4)
    throw ConfigError("encoder_input_length " + std::to_string(encoder_input_length) +
                      " yields fewer than 4 encoded steps");
}

json encoder_to_json(const model::EncoderConfig& e) {
  return {{"n_channels", e.n_channels}, {"d_enc", e.d_enc}, {"kernels", e.kernels}, {"norm_eps", e.norm_eps}};
}

model::EncoderConfig encoder_from_json(const json& j) {
  model::EncoderConfig e;
  Reader r(j, "encoder");
  r.get("n_channels", e.n_channels);
  r.get("d_enc", e.d_enc);
  r.get("kernels", e.kernels);
  r.get("norm_eps", e.norm_eps);
  return e;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  {
    Reader r(j, "");
    r.get("task", c.task);
    r.get("data_dir", c.data_dir);
    std::string variant = to_string(c.variant);
    r.get("variant", variant);
    c.variant = parse_run_variant(variant);
    r.get("k_folds", c.k_folds);
    r.get("epochs", c.epochs);
    r.get("lr", c.lr);
    r.get("batch_size", c.batch_size);
    r.get("augment_shift", c.augment_shift);
    r.get("seed", c.seed);
    r.get("data_seed", c.data_seed);
    r.get("pretrain_seed", c.pretrain_seed);
    r.get("segment_length", c.segment_length);
    r.get("encoder_input_length", c.encoder_input_length);
    r.get("positions_file", c.positions_file);
    if (const json* a = r.sub("adapter")) {
      Reader ra(*a, "adapter");
      ra.get("hidden", c.adapter.hidden);
      ra.get("n_layers", c.adapter.n_layers);
      ra.get("gat_heads", c.adapter.gat_heads);
      ra.get("residual", c.adapter.residual);
      ra.get("hidden_relu", c.adapter.hidden_relu);
      std::size_t k = c.adapter.sage_sample_k.value_or(0);
      ra.get("sage_sample_k", k);
      c.adapter.sage_sample_k = k ? std::optional<std::size_t>(k) : std::nullopt;
      ra.get("sage_weighted_mean", c.adapter.sage_weighted_mean);
    }
    if (const json* e = r.sub("encoder")) c.encoder = encoder_from_json(*e);
    if (const json* p = r.sub("pretrain")) {
      Reader rp(*p, "pretrain");
      rp.get("mask_rate", c.pretrain.mask_rate);
      rp.get("mask_span", c.pretrain.mask_span);
      rp.get("max_len", c.pretrain.max_len);
      rp.get("steps", c.pretrain.steps);
      rp.get("batch_size", c.pretrain.batch_size);
      rp.get("lr", c.pretrain.lr);
      rp.get("bypass_attention", c.pretrain.bypass_attention);
    }
    if (const json* s = r.sub("synth")) {
      Reader rs(*s, "synth");
      rs.get("n_subjects_per_class", c.synth.n_subjects_per_class);
      rs.get("segments_per_subject", c.synth.segments_per_subject);
      rs.get("n_channels", c.synth.n_channels);
      rs.get("sample_rate_hz", c.synth.sample_rate_hz);
      rs.get("band_lo_hz", c.synth.band_lo_hz);
      rs.get("band_hi_hz", c.synth.band_hi_hz);
      rs.get("coupling", c.synth.coupling);
      rs.get("sigma_rad", c.synth.sigma_rad);
    }
    if (const json* g = r.sub("graph")) {
      Reader rg(*g, "graph");
      rg.get("no_self_loop", c.graph.no_self_loop);
      rg.get("raw_distance", c.graph.raw_distance);
    }
  }
  c.finalize();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  return {
      {"task", c.task},
      {"data_dir", c.data_dir},
      {"variant", to_string(c.variant)},
      {"k_folds", c.k_folds},
      {"epochs", c.epochs},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"augment_shift", c.augment_shift},
      {"seed", c.seed},
      {"data_seed", c.data_seed},
      {"pretrain_seed", c.pretrain_seed},
      {"segment_length", c.segment_length},
      {"encoder_input_length", c.encoder_input_length},
      {"positions_file", c.positions_file},
      {"adapter",
       {{"hidden", c.adapter.hidden},
        {"n_layers", c.adapter.n_layers},
        {"gat_heads", c.adapter.gat_heads},
        {"residual", c.adapter.residual},
        {"hidden_relu", c.adapter.hidden_relu},
        {"sage_sample_k", c.adapter.sage_sample_k.value_or(0)},
        {"sage_weighted_mean", c.adapter.sage_weighted_mean}}},
      {"encoder", encoder_to_json(c.encoder)},
      {"pretrain",
       {{"mask_rate", c.pretrain.mask_rate},
        {"mask_span", c.pretrain.mask_span},
        {"max_len", c.pretrain.max_len},
        {"steps", c.pretrain.steps},
        {"batch_size", c.pretrain.batch_size},
        {"lr", c.pretrain.lr},
        {"bypass_attention", c.pretrain.bypass_attention}}},
      {"synth",
       {{"n_subjects_per_class", c.synth.n_subjects_per_class},
        {"segments_per_subject", c.synth.segments_per_subject},
        {"n_channels", c.synth.n_channels},
        {"sample_rate_hz", c.synth.sample_rate_hz},
        {"band_lo_hz", c.synth.band_lo_hz},
        {"band_hi_hz", c.synth.band_hi_hz},
        {"coupling", c.synth.coupling},
        {"sigma_rad", c.synth.sigma_rad}}},
      {"graph", {{"no_self_loop", c.graph.no_self_loop}, {"raw_distance", c.graph.raw_distance}}},
  };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = config_to_json(cfg).dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
  return buf;
}

}  // namespace ega
