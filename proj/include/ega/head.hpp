#pragma once

#include <random>
#include <vector>

#include "ega/parameters.hpp"
#include "ega/tensor.hpp"

namespace ega::model {

inline constexpr std::size_t kChunks = 4;

/// Sizes of the four contiguous chunks of T steps; earlier chunks take the
/// remainder.
std::vector<std::size_t> chunk_sizes(std::size_t steps);

/// d x T -> 1 x 4d: per-chunk time means, concatenated in chunk order.
ad::Tensor aggregate(const ad::Tensor& encoded);

/// "head.W" (4 d_enc x n_classes) and "head.b".
void init_head(ParameterSet& params, std::size_t d_enc, std::size_t n_classes, std::mt19937_64& rng);

/// 1 x 4d -> 1 x n_classes
ad::Tensor head_logits(const ad::Tensor& features, const ParameterSet& params);
ad::Tensor classify(const ad::Tensor& features, const ParameterSet& params);

/// -log softmax(logits)[label] from 1 x C logits.
ad::Tensor ce_loss(const ad::Tensor& logits, std::size_t label);

}  // namespace ega::model
