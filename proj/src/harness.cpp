#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <sstream>

#include "ega/adam.hpp"
#include "ega/adapter.hpp"
#include "ega/eegb.hpp"
#include "ega/encoder.hpp"
#include "ega/errors.hpp"
#include "ega/harness.hpp"
#include "ega/head.hpp"
#include "ega/montage.hpp"
#include "ega/ops.hpp"
#include "ega/synth.hpp"

namespace ega::harness {

using ad::Tensor;
using nlohmann::json;

namespace {

constexpr std::size_t kClasses = 2;

enum Stream : std::uint32_t { kInit = 0, kAdapter = 1, kHead = 2, kShuffle = 3, kAugment = 4 };

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(sseq);
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Tensor circular_shift(const Tensor& x, std::size_t by) {
  const std::size_t rows = x.dim(0), len = x.dim(1);
  std::vector<double> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < len; ++t) out[r * len + (t + by) % len] = x[r * len + t];
  return Tensor({rows, len}, std::move(out));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

montage::MontageGraph make_graph(const ExperimentConfig& cfg, std::size_t n_channels) {
  const auto positions =
      cfg.positions_file.empty() ? montage::standard_positions() : montage::load_positions(cfg.positions_file);
  auto full = montage::build_graph(positions, cfg.graph);
  if (n_channels == full.n) return full;
  if (n_channels > full.n || n_channels == 0)
    throw ConfigError("graph: " + std::to_string(n_channels) + " channels, montage has " + std::to_string(full.n));
  // Fewer channels: the leading electrodes of the canonical order.
  std::vector<double> w(n_channels * n_channels);
  for (std::size_t i = 0; i < n_channels; ++i)
    for (std::size_t j = 0; j < n_channels; ++j) w[i * n_channels + j] = full.w(i, j);
  std::vector<std::string> names(full.node_order.begin(), full.node_order.begin() + static_cast<std::ptrdiff_t>(n_channels));
  return montage::graph_from_weights(std::move(w), n_channels, cfg.graph, std::move(names));
}

struct PretrainedInfo {
  model::EncoderConfig encoder;
  std::size_t input_length = 0;
};

PretrainedInfo read_info(const json& config) {
  if (!config.is_object() || !config.contains("encoder") || !config.contains("encoder_input_length"))
    throw FormatError("checkpoint config lacks encoder / encoder_input_length");
  PretrainedInfo info;
  info.encoder = encoder_from_json(config.at("encoder"));
  info.input_length = config.at("encoder_input_length").get<std::size_t>();
  info.encoder.validate();
  return info;
}

// Everything one forward pass needs.
struct Model {
  ExperimentConfig cfg;
  model::EncoderConfig encoder;
  ParameterSet params;
  bool adapter = false;
  const model::GraphTensors* graph = nullptr;

  Tensor features(const Tensor& x, std::uint64_t step_seed) const {
    const Tensor in = adapter ? model::adapter_forward(x, *graph, params, cfg.adapter, step_seed) : x;
    return model::aggregate(model::encode(in, params, encoder));
  }
};

struct Predictions {
  std::vector<double> scores;
  std::vector<int> preds;
};

Predictions predict(const Model& m, const std::vector<Tensor>& feats) {
  ad::NoGradGuard ng;
  Predictions out;
  for (const auto& f : feats) {
    const Tensor p = model::classify(f, m.params);
    out.scores.push_back(p[1]);
    out.preds.push_back(p[1] > p[0] ? 1 : 0);
  }
  return out;
}

std::vector<Tensor> compute_features(const Model& m, const Dataset& data, const std::vector<std::size_t>& idx) {
  ad::NoGradGuard ng;
  std::vector<Tensor> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(m.features(data.x[i], 0));
  return out;
}

void check_compatible(const ExperimentConfig& cfg, const Dataset& data, const PretrainedInfo& info,
                      const ParameterSet& params) {
  std::vector<std::string> bad;
  auto dim = [&](const std::string& what, std::size_t ckpt, std::size_t other, const std::string& other_name) {
    if (ckpt != other)
      bad.push_back(what + ": checkpoint " + std::to_string(ckpt) + " vs " + other_name + " " + std::to_string(other));
  };
  dim("n_channels", info.encoder.n_channels, data.n_channels, "dataset");
  dim("encoder_input_length", info.input_length, cfg.encoder_input_length, "config");
  if (data.length != cfg.segment_length)
    bad.push_back("segment_length: dataset " + std::to_string(data.length) + " vs config " +
                  std::to_string(cfg.segment_length));
  if (!uses_adapter(cfg.variant)) dim("input length", info.input_length, data.length, "dataset");
  if (!bad.empty()) {
    std::string msg = "incompatible checkpoint:";
    for (const auto& b : bad) msg += "\n  " + b;
    throw ConfigError(msg);
  }
  ParameterSet probe;
  std::mt19937_64 rng(0);
  model::init_encoder(probe, info.encoder, rng);
  for (const auto& p : probe.items()) {
    if (!params.contains(p.name)) throw FormatError("checkpoint lacks parameter " + p.name);
    if (params.get(p.name).shape() != p.value.shape())
      throw FormatError("checkpoint parameter " + p.name + " has shape " + ad::shape_str(params.get(p.name).shape()) +
                        ", expected " + ad::shape_str(p.value.shape()));
  }
}

json model_config(const ExperimentConfig& cfg, const PretrainedInfo& info, std::size_t fold) {
  return {{"kind", "finetuned"},
          {"experiment", config_to_json(cfg)},
          {"encoder", encoder_to_json(info.encoder)},
          {"encoder_input_length", info.input_length},
          {"fold", fold}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Data

Dataset dataset_from_segments(const std::vector<signal::Segment>& segs) {
  Dataset d;
  for (const auto& s : segs) {
    if (d.x.empty()) {
      d.n_channels = s.n_channels;
      d.length = s.length;
    } else if (s.n_channels != d.n_channels || s.length != d.length) {
      throw ShapeError("dataset: segment " + s.subject_id + " is " + std::to_string(s.n_channels) + " x " +
                       std::to_string(s.length) + ", expected " + std::to_string(d.n_channels) + " x " +
                       std::to_string(d.length));
    }
    d.x.emplace_back(ad::Shape{s.n_channels, s.length}, s.samples);
    d.y.push_back(s.label);
    d.subject.push_back(s.subject_id);
  }
  return d;
}

Dataset load_eegb_dir(const std::filesystem::path& dir, std::size_t segment_length, bool require_labels) {
  if (segment_length == 0) throw ConfigError("segment_length must be positive");
  const auto files = io::list_eegb(dir);
  if (files.empty()) throw ConfigError("no .eegb files in " + dir.string());
  std::vector<signal::Segment> segs;
  for (const auto& f : files) {
    const auto rec = io::read_eegb(f);
    if (require_labels && !rec.label) throw FormatError(f.string() + ": recording has no label");
    for (std::size_t off = 0; off + segment_length <= rec.n_samples; off += segment_length) {
      signal::Segment s;
      s.n_channels = rec.n_channels();
      s.length = segment_length;
      s.label = rec.label.value_or(0);
      s.subject_id = rec.subject_id;
      s.offset = off;
      for (std::size_t c = 0; c < rec.n_channels(); ++c) {
        const auto ch = rec.channel(c).subspan(off, segment_length);
        s.samples.insert(s.samples.end(), ch.begin(), ch.end());
      }
      segs.push_back(std::move(s));
    }
  }
  if (segs.empty()) throw ConfigError("no recording in " + dir.string() + " holds a full segment");
  return dataset_from_segments(segs);
}

Dataset load_dataset(const ExperimentConfig& cfg) {
  if (cfg.task == "synthetic") return dataset_from_segments(signal::synthesize_dataset(cfg.synth, cfg.data_seed));
  return load_eegb_dir(cfg.data_dir, cfg.segment_length);
}

Dataset load_pretrain_dataset(const ExperimentConfig& cfg) {
  if (cfg.task == "synthetic") {
    auto spec = cfg.synth;
    spec.length = cfg.encoder_input_length;
    return dataset_from_segments(signal::synthesize_dataset(spec, cfg.pretrain_seed));
  }
  return load_eegb_dir(cfg.data_dir, cfg.encoder_input_length, false);
}

// ---------------------------------------------------------------------------
// Pre-training

io::Checkpoint pretrain(const ExperimentConfig& cfg, const Dataset& data,
                        const std::function<void(const std::string&)>& log) {
  if (data.size() == 0) throw ConfigError("pretrain: empty dataset");
  if (data.n_channels != cfg.encoder.n_channels)
    throw ConfigError("pretrain: dataset has " + std::to_string(data.n_channels) + " channels, encoder expects " +
                      std::to_string(cfg.encoder.n_channels));
  if (data.length != cfg.encoder_input_length)
    throw ConfigError("pretrain: dataset length " + std::to_string(data.length) + " != encoder_input_length " +
                      std::to_string(cfg.encoder_input_length));

  io::Checkpoint ck;
  auto init = stream_rng(cfg.pretrain_seed, kInit);
  model::init_encoder(ck.params, cfg.encoder, init);
  const std::size_t steps_t = cfg.encoder.output_length(cfg.encoder_input_length);
  const std::size_t max_len = cfg.pretrain.max_len ? cfg.pretrain.max_len : steps_t;
  if (max_len < steps_t)
    throw ConfigError("pretrain.max_len " + std::to_string(max_len) + " is below the encoded length " +
                      std::to_string(steps_t));
  model::init_pretrain_head(ck.params, cfg.encoder.d_enc, max_len, init);

  Adam adam(AdamOptions{.lr = cfg.pretrain.lr});
  auto shuffle = stream_rng(cfg.pretrain_seed, kShuffle);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  for (std::size_t step = 0; step < cfg.pretrain.steps; ++step) {
    std::vector<Tensor> batch;
    while (batch.size() < std::min(cfg.pretrain.batch_size, data.size())) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), shuffle);
        cursor = 0;
      }
      batch.push_back(data.x[order[cursor++]]);
    }
    const double loss =
        model::pretrain_step(batch, ck.params, adam, cfg.encoder, cfg.pretrain, mix(cfg.pretrain_seed, step));
    if (log && (step % 10 == 0 || step + 1 == cfg.pretrain.steps))
      log("pretrain step " + std::to_string(step) + " loss " + std::to_string(loss));
  }
  ck.config = {{"kind", "pretrained"},
               {"experiment", config_to_json(cfg)},
               {"encoder", encoder_to_json(cfg.encoder)},
               {"encoder_input_length", cfg.encoder_input_length}};
  ck.rng_state = rng_state(shuffle);
  return ck;
}

// ---------------------------------------------------------------------------
// Fine-tuning

FinetuneResult finetune(const ExperimentConfig& cfg, const Dataset& data, const io::Checkpoint& pretrained,
                        const FinetuneOptions& opts) {
  const auto info = read_info(pretrained.config);
  check_compatible(cfg, data, info, pretrained.params);
  for (int y : data.y)
    if (y != 0 && y != 1) throw ConfigError("finetune: labels must be 0 or 1, got " + std::to_string(y));

  const bool adapter = uses_adapter(cfg.variant);
  const bool backbone_trainable = cfg.variant == RunVariant::baseline;
  const auto graph = make_graph(cfg, data.n_channels);
  const auto gt = model::graph_tensors(graph, cfg.adapter.sage_weighted_mean);
  if (!opts.save_models_dir.empty()) std::filesystem::create_directories(opts.save_models_dir);

  const auto folds = kfold_split(data.y, cfg.k_folds, cfg.seed);

  // Backbone features of every sample, reused by the head-only variant.
  std::vector<Tensor> cached;
  if (cfg.variant == RunVariant::frozen) {
    Model m{cfg, info.encoder, {}, false, nullptr};
    for (const auto& p : pretrained.params.items())
      if (p.name.rfind("encoder.", 0) == 0) m.params.add(p.name, p.value.clone(), false);
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    cached = compute_features(m, data, all);
  }

  FinetuneResult result;
  auto& tape = ad::Tape::active();
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& fold = folds[f];
    const std::uint64_t fold_seed = cfg.seed ^ f;

    Model m{cfg, info.encoder, {}, adapter, &gt};
    for (const auto& p : pretrained.params.items())
      if (p.name.rfind("encoder.", 0) == 0) m.params.add(p.name, p.value.clone(), backbone_trainable);
    if (adapter) {
      auto rng = stream_rng(fold_seed, kAdapter);
      model::init_adapter(m.params, cfg.adapter, rng);
    }
    {
      auto rng = stream_rng(fold_seed, kHead);
      model::init_head(m.params, info.encoder.d_enc, kClasses, rng);
    }

    FoldReport rep;
    rep.fold = f;
    rep.n_train = fold.train.size();
    rep.n_eval = fold.eval.size();
    rep.trainable_params = m.params.count(true);
    rep.backbone_digest_before = m.params.digest("encoder.");
    for (std::size_t i : fold.eval) rep.eval_labels.push_back(data.y[i]);

    auto feats_of = [&](const std::vector<std::size_t>& idx) {
      if (!cached.empty()) {
        std::vector<Tensor> out;
        for (std::size_t i : idx) out.push_back(cached[i]);
        return out;
      }
      return compute_features(m, data, idx);
    };
    auto evaluate = [&](std::size_t epoch, std::optional<double> train_loss) {
      const auto p = predict(m, feats_of(fold.eval));
      EpochMetrics em;
      em.epoch = epoch;
      em.train_loss = train_loss;
      em.f1 = f1_score(p.preds, rep.eval_labels);
      try {
        em.auroc = auroc(p.scores, rep.eval_labels);
        rep.auroc_error.clear();
      } catch (const std::invalid_argument& e) {
        rep.auroc_error = e.what();
      }
      rep.epochs.push_back(em);
      rep.eval_scores = p.scores;
      if (opts.log) {
        std::ostringstream os;
        os << "fold " << f << " epoch " << epoch;
        if (train_loss) os << " loss " << *train_loss;
        os << " f1 " << em.f1;
        if (em.auroc) os << " auroc " << *em.auroc;
        opts.log(os.str());
      }
    };

    evaluate(0, std::nullopt);
    Adam adam(AdamOptions{.lr = cfg.lr});
    auto shuffle = stream_rng(fold_seed, kShuffle);
    auto augment = stream_rng(fold_seed, kAugment);
    std::uniform_int_distribution<std::size_t> offset(0, data.length - 1);
    const bool use_cache = !cached.empty() && !cfg.augment_shift;
    std::vector<std::size_t> order = fold.train;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle);
      double total = 0.0;
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        const double inv = 1.0 / static_cast<double>(end - start);
        for (std::size_t b = start; b < end; ++b) {
          const std::size_t i = order[b];
          tape.reset();
          Tensor feat;
          if (use_cache) {
            feat = cached[i];
          } else {
            const Tensor x = cfg.augment_shift ? circular_shift(data.x[i], offset(augment)) : data.x[i];
            feat = m.features(x, mix(fold_seed, step, b));
          }
          const Tensor loss = model::ce_loss(model::head_logits(feat, m.params), static_cast<std::size_t>(data.y[i]));
          total += loss.item();
          ad::backward(ad::scale(loss, inv));
        }
        tape.reset();
        adam.step(m.params);
        ++step;
      }
      evaluate(epoch, total / static_cast<double>(order.size()));
    }

    const auto& last = rep.epochs.back();
    rep.f1 = last.f1;
    rep.auroc = last.auroc;
    rep.backbone_digest_after = m.params.digest("encoder.");
    if (!backbone_trainable && rep.backbone_digest_after != rep.backbone_digest_before)
      throw std::logic_error("freeze audit: backbone changed during fold " + std::to_string(f));
    if (!opts.save_models_dir.empty())
      io::save_checkpoint(opts.save_models_dir / ("fold" + std::to_string(f) + ".egac"), model_config(cfg, info, f),
                          m.params, rng_state(shuffle));
    rep.wall_clock_s = seconds_since(t0);
    result.folds.push_back(std::move(rep));
  }
  result.counts = count_variant_params(cfg, cfg.variant);
  return result;
}

// ---------------------------------------------------------------------------
// Parameter counts

ParamCounts count_variant_params(const ExperimentConfig& cfg, RunVariant v) {
  ParameterSet params;
  std::mt19937_64 rng(0);
  model::init_encoder(params, cfg.encoder, rng);
  if (v != RunVariant::baseline) freeze(params, "encoder.");
  if (uses_adapter(v)) {
    auto acfg = cfg.adapter;
    acfg.variant = adapter_variant(v);
    model::init_adapter(params, acfg, rng);
  }
  model::init_head(params, cfg.encoder.d_enc, kClasses, rng);
  ParamCounts c;
  c.trainable = params.count(true);
  c.adapter = params.count_prefix("adapter.");
  c.encoder = params.count_prefix("encoder.");
  c.head = params.count_prefix("head.");
  return c;
}

ParamCounts closed_form_params(const ExperimentConfig& cfg, RunVariant v) {
  ParamCounts c;
  if (v == RunVariant::baseline) c.encoder = model::encoder_param_count(cfg.encoder);
  if (uses_adapter(v)) {
    auto acfg = cfg.adapter;
    acfg.variant = adapter_variant(v);
    c.adapter = model::adapter_param_count(acfg).total();
  }
  c.head = model::kChunks * cfg.encoder.d_enc * kClasses + kClasses;
  c.trainable = c.encoder + c.adapter + c.head;
  return c;
}

// ---------------------------------------------------------------------------
// Saved models

json evaluate_model(const io::Checkpoint& ckpt, const Dataset& data) {
  if (!ckpt.config.contains("kind") || ckpt.config.at("kind") != "finetuned")
    throw FormatError("evaluate: checkpoint is not a fine-tuned model");
  const auto info = read_info(ckpt.config);
  auto cfg = config_from_json(ckpt.config.at("experiment"));
  check_compatible(cfg, data, info, ckpt.params);
  const auto graph = make_graph(cfg, data.n_channels);
  const auto gt = model::graph_tensors(graph, cfg.adapter.sage_weighted_mean);

  Model m{cfg, info.encoder, {}, uses_adapter(cfg.variant), &gt};
  for (const auto& p : ckpt.params.items()) m.params.add(p.name, p.value.clone(), false);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  const auto p = predict(m, compute_features(m, data, all));

  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += p.preds[i] == data.y[i];
  json out = {{"variant", to_string(cfg.variant)},
              {"n", data.size()},
              {"f1", f1_score(p.preds, data.y)},
              {"accuracy", static_cast<double>(correct) / static_cast<double>(data.size())}};
  try {
    out["auroc"] = auroc(p.scores, data.y);
  } catch (const std::invalid_argument& e) {
    out["auroc"] = nullptr;
    out["auroc_error"] = e.what();
  }
  return out;
}

}  // namespace ega::harness
