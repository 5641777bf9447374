#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "ega/adam.hpp"
#include "ega/parameters.hpp"
#include "ega/tensor.hpp"

namespace ega::model {

/// Stacked conv1d -> group_norm(1 group) -> gelu blocks; stride equals
/// kernel width in every block.
struct EncoderConfig {
  std::size_t n_channels = 19;
  std::size_t d_enc = 64;
  std::vector<std::size_t> kernels = {3, 2, 2, 2, 2, 2};
  double norm_eps = 1e-5;

  void validate() const;
  /// Product of the strides.
  std::size_t downsample() const;
  /// Encoded steps T for an input of length L (0 when L is too short).
  std::size_t output_length(std::size_t length) const;
  /// Smallest L giving T >= 1.
  std::size_t min_length() const;
};

void init_encoder(ParameterSet& params, const EncoderConfig& cfg, std::mt19937_64& rng);

/// x: n_channels x L -> d_enc x T. All channels enter the first block jointly.
ad::Tensor encode(const ad::Tensor& x, const ParameterSet& params, const EncoderConfig& cfg);

std::size_t encoder_param_count(const EncoderConfig& cfg);

// ---------------------------------------------------------------------------
// Masked self-supervised pre-training

struct PretrainConfig {
  double mask_rate = 0.15;
  std::size_t mask_span = 2;
  std::size_t max_len = 0;  // positional table size; 0 = derive from the data length
  std::size_t steps = 50;
  std::size_t batch_size = 8;
  double lr = 1e-4;
  /// Diagnostic: replace self-attention by the identity so no step sees
  /// another step.
  bool bypass_attention = false;

  void validate() const;
};

/// Mask start positions drawn uniformly without replacement from
/// [0, T - span] until the masked fraction reaches p.
std::vector<bool> mask_spans(std::size_t steps, double p, std::size_t span, std::uint64_t seed);

/// Registers "pretrain.*": mask vector, positional table, and a 1-layer,
/// 1-head transformer block with a 4 * d_enc feed-forward.
void init_pretrain_head(ParameterSet& params, std::size_t d_enc, std::size_t max_len, std::mt19937_64& rng);

/// z: T x d_enc -> T x d_enc.
ad::Tensor contextualize(const ad::Tensor& z, const ParameterSet& params, bool bypass_attention = false);

/// Mean over masked steps of 1 - cos(pred_t, target_t). Both T x d.
ad::Tensor reconstruction_loss(const ad::Tensor& pred, const ad::Tensor& target, const std::vector<bool>& mask);

/// Loss for one encoded sequence (d_enc x T). Targets are detached.
ad::Tensor masked_loss(const ad::Tensor& encoded, const std::vector<bool>& mask, const ParameterSet& params,
                       bool bypass_attention = false);

/// One optimizer step over a batch of raw segments (each n_channels x L).
/// Returns the mean loss.
double pretrain_step(const std::vector<ad::Tensor>& batch, ParameterSet& params, Adam& adam,
                     const EncoderConfig& enc, const PretrainConfig& cfg, std::uint64_t step_seed);

}  // namespace ega::model
