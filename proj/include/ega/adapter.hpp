#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "ega/montage.hpp"
#include "ega/parameters.hpp"
#include "ega/tensor.hpp"

namespace ega::model {

enum class Variant { gcn, sage, gat };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct AdapterConfig {
  Variant variant = Variant::gcn;
  std::size_t hidden = 64;
  std::size_t n_layers = 2;
  std::size_t gat_heads = 1;
  std::size_t input_len = 1024;  // raw segment length L_in
  std::size_t length = 1024;     // backbone input length L
  bool residual = true;
  bool hidden_relu = true;
  std::optional<std::size_t> sage_sample_k;
  bool sage_weighted_mean = false;

  void validate() const;
};

/// Constant graph operators shared by every forward pass.
struct GraphTensors {
  std::size_t n = 0;
  ad::Tensor s_gcn;          // n x n
  ad::Tensor neighbor_mean;  // n x n, row-stochastic over neighbors
  ad::Tensor attend_mask;    // n x n, 0 on neighbors and the diagonal, -1e30 elsewhere
  const montage::MontageGraph* graph = nullptr;
};

GraphTensors graph_tensors(const montage::MontageGraph& g, bool weighted_mean = false);

// ---------------------------------------------------------------------------
// Layers. H is n x d_in; every weight matrix is d_in x d_out.

ad::Tensor gcn_layer(const ad::Tensor& h, const ad::Tensor& s, const ad::Tensor& w, const ad::Tensor& b,
                     bool activate = true);

/// `mean` is the n x n neighbor averaging operator (see sage_mean_matrix).
ad::Tensor sage_layer(const ad::Tensor& h, const ad::Tensor& mean, const ad::Tensor& w_self,
                      const ad::Tensor& w_neigh, const ad::Tensor& b, bool activate = true);

/// Neighbor averaging over all neighbors, or over k of them drawn uniformly
/// without replacement (deterministic per seed).
ad::Tensor sage_mean_matrix(const montage::MontageGraph& g, std::optional<std::size_t> k, std::uint64_t seed,
                            bool weighted);

/// Attention coefficients alpha (n x n), rows softmax-normalized over the
/// neighbors of i plus i itself.
ad::Tensor gat_attention(const ad::Tensor& z, const ad::Tensor& mask, const ad::Tensor& a_src,
                         const ad::Tensor& a_dst, double slope = 0.2);

ad::Tensor gat_layer(const ad::Tensor& h, const ad::Tensor& mask, const ad::Tensor& w, const ad::Tensor& a_src,
                     const ad::Tensor& a_dst, const ad::Tensor& b, bool activate = true);

// ---------------------------------------------------------------------------
// Adapter

/// Registers adapter parameters under "adapter.". Hidden layers use Glorot
/// uniform weights; the output layer is all zeros so the residual adapter
/// starts as an exact identity.
void init_adapter(ParameterSet& params, const AdapterConfig& cfg, std::mt19937_64& rng);

/// x: n x L_in -> n x L. Identity (the same tensor) when L_in == L.
ad::Tensor length_adapt(const ad::Tensor& x, const ParameterSet& params, const AdapterConfig& cfg);

/// X' = length_adapt(x) + out(layers(length_adapt(x))). `step_seed` drives
/// SAGE neighbor sampling when enabled.
ad::Tensor adapter_forward(const ad::Tensor& x, const GraphTensors& graph, const ParameterSet& params,
                           const AdapterConfig& cfg, std::uint64_t step_seed = 0);

struct AdapterCount {
  std::size_t length_adapter = 0;
  std::size_t hidden_layers = 0;
  std::size_t output_layer = 0;
  std::size_t total() const { return length_adapter + hidden_layers + output_layer; }
};

/// Closed-form parameter counts for a config.
AdapterCount adapter_param_count(const AdapterConfig& cfg);

/// Scalar count of all trainable entries.
std::size_t count_params(const ParameterSet& params);

}  // namespace ega::model
