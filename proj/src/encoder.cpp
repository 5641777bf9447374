#include "ega/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "ega/errors.hpp"
#include "ega/ops.hpp"

namespace ega::model {

using ad::Tensor;

namespace {

Tensor uniform(ad::Shape shape, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-limit, limit);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

std::string block(std::size_t i) { return "encoder.b" + std::to_string(i); }

}  // namespace

void EncoderConfig::validate() const {
  if (n_channels == 0 || d_enc == 0) throw ConfigError("encoder: n_channels and d_enc must be positive");
  if (kernels.empty()) throw ConfigError("encoder: need at least one block");
  for (auto k : kernels)
    if (k == 0) throw ConfigError("encoder: kernel widths must be positive");
}

std::size_t EncoderConfig::downsample() const {
  std::size_t p = 1;
  for (auto k : kernels) p *= k;
  return p;
}

std::size_t EncoderConfig::output_length(std::size_t length) const {
  for (auto k : kernels) {
    if (length < k) return 0;
    length = (length - k) / k + 1;
  }
  return length;
}

std::size_t EncoderConfig::min_length() const {
  std::size_t m = 1;
  for (auto it = kernels.rbegin(); it != kernels.rend(); ++it) m = (m - 1) * *it + *it;
  return m;
}

void init_encoder(ParameterSet& params, const EncoderConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  std::size_t in = cfg.n_channels;
  for (std::size_t i = 0; i < cfg.kernels.size(); ++i) {
    const std::size_t k = cfg.kernels[i];
    const double limit = 1.0 / std::sqrt(static_cast<double>(in * k));
    params.add(block(i) + ".W", uniform({cfg.d_enc, in, k}, std::sqrt(3.0) * limit, rng));
    params.add(block(i) + ".b", uniform({cfg.d_enc}, limit, rng));
    params.add(block(i) + ".gamma", Tensor({cfg.d_enc}, 1.0));
    params.add(block(i) + ".beta", Tensor({cfg.d_enc}));
    in = cfg.d_enc;
  }
}

Tensor encode(const Tensor& x, const ParameterSet& params, const EncoderConfig& cfg) {
  if (x.rank() != 2 || x.dim(0) != cfg.n_channels)
    throw ShapeError("encode: expected [" + std::to_string(cfg.n_channels) + ", L], got " + ad::shape_str(x.shape()));
  if (cfg.output_length(x.dim(1)) == 0)
    throw ShapeError("encode: input length " + std::to_string(x.dim(1)) + " is too short; minimum is " +
                     std::to_string(cfg.min_length()));
  Tensor h = x;
  for (std::size_t i = 0; i < cfg.kernels.size(); ++i) {
    h = ad::conv1d(h, params.get(block(i) + ".W"), params.get(block(i) + ".b"), cfg.kernels[i]);
    h = ad::group_norm(h, 1, params.get(block(i) + ".gamma"), params.get(block(i) + ".beta"), cfg.norm_eps);
    h = ad::gelu(h);
  }
  return h;
}

std::size_t encoder_param_count(const EncoderConfig& cfg) {
  std::size_t total = 0, in = cfg.n_channels;
  for (auto k : cfg.kernels) {
    total += cfg.d_enc * in * k + 3 * cfg.d_enc;
    in = cfg.d_enc;
  }
  return total;
}

void PretrainConfig::validate() const {
  if (!(mask_rate >= 0.0 && mask_rate < 1.0)) throw ConfigError("pretrain.mask_rate must be in [0, 1)");
  if (mask_span == 0) throw ConfigError("pretrain.mask_span must be >= 1");
  if (batch_size == 0) throw ConfigError("pretrain.batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("pretrain.lr must be positive");
}

std::vector<bool> mask_spans(std::size_t steps, double p, std::size_t span, std::uint64_t seed) {
  std::vector<bool> mask(steps, false);
  if (steps == 0 || p <= 0.0) return mask;
  span = std::min(std::max<std::size_t>(span, 1), steps);
  std::vector<std::size_t> starts(steps - span + 1);
  for (std::size_t i = 0; i < starts.size(); ++i) starts[i] = i;
  std::mt19937_64 rng(seed);
  std::size_t masked = 0;
  for (std::size_t drawn = 0; drawn < starts.size(); ++drawn) {
    if (static_cast<double>(masked) >= p * static_cast<double>(steps)) break;
    std::uniform_int_distribution<std::size_t> pick(drawn, starts.size() - 1);
    std::swap(starts[drawn], starts[pick(rng)]);
    for (std::size_t t = starts[drawn]; t < starts[drawn] + span; ++t)
      if (!mask[t]) {
        mask[t] = true;
        ++masked;
      }
  }
  return mask;
}

void init_pretrain_head(ParameterSet& params, std::size_t d, std::size_t max_len, std::mt19937_64& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  params.add("pretrain.mask", uniform({1, d}, 1.0, rng));
  params.add("pretrain.pos", uniform({max_len, d}, 0.1, rng));
  for (const char* name : {"Wq", "Wk", "Wv", "Wo"}) params.add(std::string("pretrain.attn.") + name, uniform({d, d}, s, rng));
  params.add("pretrain.ff1.W", uniform({d, 4 * d}, s, rng));
  params.add("pretrain.ff1.b", Tensor({4 * d}));
  params.add("pretrain.ff2.W", uniform({4 * d, d}, 0.5 * s, rng));
  params.add("pretrain.ff2.b", Tensor({d}));
}

Tensor contextualize(const Tensor& z, const ParameterSet& params, bool bypass_attention) {
  const std::size_t steps = z.dim(0), d = z.dim(1);
  const Tensor& pos = params.get("pretrain.pos");
  if (steps > pos.dim(0))
    throw ShapeError("pretrain: sequence of " + std::to_string(steps) + " steps exceeds positional table of " +
                     std::to_string(pos.dim(0)));
  const Tensor x = ad::add(z, ad::slice(pos, 0, 0, steps));
  const Tensor v = ad::matmul(x, params.get("pretrain.attn.Wv"));
  Tensor mixed = v;
  if (!bypass_attention) {
    const Tensor q = ad::matmul(x, params.get("pretrain.attn.Wq"));
    const Tensor k = ad::matmul(x, params.get("pretrain.attn.Wk"));
    const Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
    mixed = ad::matmul(ad::softmax(scores, 1), v);
  }
  const Tensor h = ad::add(x, ad::matmul(mixed, params.get("pretrain.attn.Wo")));
  const Tensor ff = ad::add(
      ad::matmul(ad::gelu(ad::add(ad::matmul(h, params.get("pretrain.ff1.W")), params.get("pretrain.ff1.b"))),
                 params.get("pretrain.ff2.W")),
      params.get("pretrain.ff2.b"));
  return ad::add(h, ff);
}

Tensor reconstruction_loss(const Tensor& pred, const Tensor& target, const std::vector<bool>& mask) {
  if (pred.shape() != target.shape() || pred.dim(0) != mask.size())
    throw ShapeError("reconstruction_loss: shapes " + ad::shape_str(pred.shape()) + " and " +
                     ad::shape_str(target.shape()) + " with mask of " + std::to_string(mask.size()));
  std::vector<std::size_t> rows;
  for (std::size_t t = 0; t < mask.size(); ++t)
    if (mask[t]) rows.push_back(t);
  if (rows.empty()) throw ConfigError("pretrain: no masked steps; mask_rate must be > 0");
  const Tensor cos = ad::cosine_similarity_rows(ad::gather_rows(pred, rows), ad::gather_rows(target, rows));
  return ad::add_scalar(ad::scale(ad::mean_all(cos), -1.0), 1.0);
}

Tensor masked_loss(const Tensor& encoded, const std::vector<bool>& mask, const ParameterSet& params,
                   bool bypass_attention) {
  const Tensor z = ad::transpose(encoded);  // T x d
  const std::size_t steps = z.dim(0), d = z.dim(1);
  if (mask.size() != steps) throw ShapeError("masked_loss: mask length differs from sequence length");
  Tensor keep({steps, d}, 1.0), picked({steps, 1});
  for (std::size_t t = 0; t < steps; ++t)
    if (mask[t]) {
      picked[t] = 1.0;
      std::fill_n(keep.data().begin() + t * d, d, 0.0);
    }
  const Tensor input = ad::add(ad::mul(z, keep), ad::matmul(picked, params.get("pretrain.mask")));
  return reconstruction_loss(contextualize(input, params, bypass_attention), z.detach(), mask);
}

double pretrain_step(const std::vector<Tensor>& batch, ParameterSet& params, Adam& adam, const EncoderConfig& enc,
                     const PretrainConfig& cfg, std::uint64_t step_seed) {
  cfg.validate();
  if (batch.empty()) throw ConfigError("pretrain: empty batch");
  if (cfg.mask_rate <= 0.0) throw ConfigError("pretrain: mask_rate 0 leaves every step unmasked");
  auto& tape = ad::Tape::active();
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    tape.reset();
    const Tensor e = encode(batch[i], params, enc);
    const auto mask = mask_spans(e.dim(1), cfg.mask_rate, cfg.mask_span, step_seed * 1000003 + i);
    const Tensor loss = ad::scale(masked_loss(e, mask, params, cfg.bypass_attention),
                                  1.0 / static_cast<double>(batch.size()));
    total += loss.item();
    ad::backward(loss);
  }
  tape.reset();
  // Rows of the positional table beyond T never receive gradient.
  for (auto& p : params.items())
    if (p.trainable()) p.value.grad_buffer();
  adam.step(params);
  return total;
}

}  // namespace ega::model
