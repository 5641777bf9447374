#include "ega/head.hpp"

#include <cmath>

#include "ega/errors.hpp"
#include "ega/ops.hpp"

namespace ega::model {

using ad::Tensor;

std::vector<std::size_t> chunk_sizes(std::size_t steps) {
  if (steps < kChunks)
    throw ShapeError("aggregate: need at least " + std::to_string(kChunks) + " encoded steps, got " +
                     std::to_string(steps));
  std::vector<std::size_t> sizes(kChunks, steps / kChunks);
  for (std::size_t i = 0; i < steps % kChunks; ++i) ++sizes[i];
  return sizes;
}

Tensor aggregate(const Tensor& encoded) {
  if (encoded.rank() != 2) throw ShapeError("aggregate: expected [d, T], got " + ad::shape_str(encoded.shape()));
  const auto sizes = chunk_sizes(encoded.dim(1));
  std::vector<Tensor> pooled;
  std::size_t begin = 0;
  for (auto s : sizes) {
    pooled.push_back(ad::mean(ad::slice(encoded, 1, begin, begin + s), 1));
    begin += s;
  }
  const Tensor flat = ad::concat(pooled, 0);
  return ad::reshape(flat, {1, flat.numel()});
}

void init_head(ParameterSet& params, std::size_t d_enc, std::size_t n_classes, std::mt19937_64& rng) {
  const std::size_t in = kChunks * d_enc;
  const double limit = std::sqrt(6.0 / static_cast<double>(in + n_classes));
  std::uniform_real_distribution<double> d(-limit, limit);
  Tensor w({in, n_classes});
  for (auto& v : w.data()) v = d(rng);
  params.add("head.W", w);
  params.add("head.b", Tensor({n_classes}));
}

Tensor head_logits(const Tensor& features, const ParameterSet& params) {
  return ad::add(ad::matmul(features, params.get("head.W")), params.get("head.b"));
}

Tensor classify(const Tensor& features, const ParameterSet& params) {
  return ad::softmax(head_logits(features, params), 1);
}

Tensor ce_loss(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 2 || logits.dim(0) != 1 || label >= logits.dim(1))
    throw ShapeError("ce_loss: label " + std::to_string(label) + " for logits " + ad::shape_str(logits.shape()));
  return ad::scale(ad::reshape(ad::slice(ad::log_softmax(logits, 1), 1, label, label + 1), {1}), -1.0);
}

}  // namespace ega::model
