#include "ega/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ega/errors.hpp"
#include "ega/ops.hpp"

namespace ega::model {

using ad::Tensor;

namespace {

constexpr double kMasked = -1e30;

std::size_t layer_in(const AdapterConfig& cfg, std::size_t i) { return i == 0 ? cfg.length : cfg.hidden; }

// Parameter entries of one graph layer.
std::size_t layer_count(Variant v, std::size_t in, std::size_t out) {
  switch (v) {
    case Variant::gcn: return in * out + out;
    case Variant::sage: return 2 * in * out + out;
    case Variant::gat: return in * out + 3 * out;
  }
  return 0;
}

Tensor glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> d(-limit, limit);
  Tensor t({in, out});
  for (auto& v : t.data()) v = d(rng);
  return t;
}

void add_layer(ParameterSet& params, const std::string& prefix, Variant v, std::size_t in, std::size_t out,
               bool zero, std::mt19937_64& rng) {
  auto weight = [&] { return zero ? Tensor({in, out}) : glorot(in, out, rng); };
  if (v == Variant::sage) {
    params.add(prefix + ".W_self", weight());
    params.add(prefix + ".W_neigh", weight());
  } else {
    params.add(prefix + ".W", weight());
  }
  if (v == Variant::gat) {
    params.add(prefix + ".a_src", glorot(out, 1, rng));
    params.add(prefix + ".a_dst", glorot(out, 1, rng));
  }
  params.add(prefix + ".b", Tensor({out}));
}

Tensor apply_layer(const Tensor& h, const GraphTensors& g, const ParameterSet& params, const std::string& prefix,
                   const AdapterConfig& cfg, bool activate, std::uint64_t seed) {
  switch (cfg.variant) {
    case Variant::gcn:
      return gcn_layer(h, g.s_gcn, params.get(prefix + ".W"), params.get(prefix + ".b"), activate);
    case Variant::sage: {
      const Tensor mean = cfg.sage_sample_k
                              ? sage_mean_matrix(*g.graph, cfg.sage_sample_k, seed, cfg.sage_weighted_mean)
                              : g.neighbor_mean;
      return sage_layer(h, mean, params.get(prefix + ".W_self"), params.get(prefix + ".W_neigh"),
                        params.get(prefix + ".b"), activate);
    }
    case Variant::gat:
      return gat_layer(h, g.attend_mask, params.get(prefix + ".W"), params.get(prefix + ".a_src"),
                       params.get(prefix + ".a_dst"), params.get(prefix + ".b"), activate);
  }
  throw std::logic_error("unknown variant");
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::gcn: return "gcn";
    case Variant::sage: return "sage";
    case Variant::gat: return "gat";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "gcn" || s == "ega-gcn") return Variant::gcn;
  if (s == "sage" || s == "ega-sage") return Variant::sage;
  if (s == "gat" || s == "ega-gat") return Variant::gat;
  throw ConfigError("unknown adapter variant '" + s + "' (expected gcn, sage or gat)");
}

void AdapterConfig::validate() const {
  if (hidden == 0) throw ConfigError("adapter.hidden must be > 0");
  if (n_layers > 2) throw ConfigError("adapter.n_layers must be 0, 1 or 2");
  if (gat_heads != 1) throw ConfigError("adapter.gat_heads must be 1");
  if (input_len == 0 || length == 0) throw ConfigError("adapter lengths must be positive");
  if (sage_sample_k && *sage_sample_k == 0) throw ConfigError("adapter.sage_sample_k must be >= 1");
}

GraphTensors graph_tensors(const montage::MontageGraph& g, bool weighted_mean) {
  GraphTensors t;
  t.n = g.n;
  t.graph = &g;
  t.s_gcn = Tensor({g.n, g.n}, g.s_gcn);
  t.neighbor_mean = Tensor({g.n, g.n}, g.neighbor_mean(weighted_mean));
  std::vector<double> mask(g.n * g.n, kMasked);
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      if (i == j || g.is_neighbor(i, j)) mask[i * g.n + j] = 0.0;
  t.attend_mask = Tensor({g.n, g.n}, std::move(mask));
  return t;
}

Tensor gcn_layer(const Tensor& h, const Tensor& s, const Tensor& w, const Tensor& b, bool activate) {
  // Contract the cheaper side first.
  const Tensor z = w.dim(1) <= w.dim(0) ? ad::matmul(s, ad::matmul(h, w)) : ad::matmul(ad::matmul(s, h), w);
  const Tensor out = ad::add(z, b);
  return activate ? ad::relu(out) : out;
}

Tensor sage_layer(const Tensor& h, const Tensor& mean, const Tensor& w_self, const Tensor& w_neigh,
                  const Tensor& b, bool activate) {
  const Tensor neigh = w_neigh.dim(1) <= w_neigh.dim(0) ? ad::matmul(mean, ad::matmul(h, w_neigh))
                                                        : ad::matmul(ad::matmul(mean, h), w_neigh);
  const Tensor out = ad::add(ad::add(ad::matmul(h, w_self), neigh), b);
  return activate ? ad::relu(out) : out;
}

Tensor sage_mean_matrix(const montage::MontageGraph& g, std::optional<std::size_t> k, std::uint64_t seed,
                        bool weighted) {
  if (!k) return Tensor({g.n, g.n}, g.neighbor_mean(weighted));
  std::mt19937_64 rng(seed);
  std::vector<double> m(g.n * g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    std::vector<std::size_t> nb;
    for (std::size_t j = 0; j < g.n; ++j)
      if (g.is_neighbor(i, j)) nb.push_back(j);
    if (*k > g.n - 1) throw ConfigError("sage_sample_k exceeds n - 1");
    // Partial Fisher-Yates: the first k entries are a uniform sample.
    const std::size_t take = std::min(*k, nb.size());
    for (std::size_t t = 0; t < take; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, nb.size() - 1);
      std::swap(nb[t], nb[pick(rng)]);
    }
    double total = 0.0;
    for (std::size_t t = 0; t < take; ++t) total += weighted ? g.w(i, nb[t]) : 1.0;
    for (std::size_t t = 0; t < take; ++t) m[i * g.n + nb[t]] = (weighted ? g.w(i, nb[t]) : 1.0) / total;
  }
  return Tensor({g.n, g.n}, std::move(m));
}

Tensor gat_attention(const Tensor& z, const Tensor& mask, const Tensor& a_src, const Tensor& a_dst, double slope) {
  const std::size_t n = z.dim(0);
  const Tensor s = ad::matmul(z, a_src);                             // n x 1
  const Tensor t = ad::reshape(ad::matmul(z, a_dst), {n});           // n
  const Tensor e = ad::add(ad::matmul(s, Tensor({1, n}, 1.0)), t);   // e_ij = s_i + t_j
  return ad::softmax(ad::add(ad::leaky_relu(e, slope), mask), 1);
}

Tensor gat_layer(const Tensor& h, const Tensor& mask, const Tensor& w, const Tensor& a_src, const Tensor& a_dst,
                 const Tensor& b, bool activate) {
  const Tensor z = ad::matmul(h, w);
  const Tensor out = ad::add(ad::matmul(gat_attention(z, mask, a_src, a_dst), z), b);
  return activate ? ad::relu(out) : out;
}

void init_adapter(ParameterSet& params, const AdapterConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (cfg.input_len != cfg.length) {
    // Starts as a truncating / zero-padding identity.
    Tensor m({cfg.input_len, cfg.length});
    for (std::size_t i = 0; i < std::min(cfg.input_len, cfg.length); ++i) m.at(i, i) = 1.0;
    params.add("adapter.len.M", m);
    params.add("adapter.len.b", Tensor({cfg.length}));
  }
  if (cfg.n_layers == 0) return;
  for (std::size_t i = 0; i < cfg.n_layers; ++i)
    add_layer(params, "adapter.l" + std::to_string(i), cfg.variant, layer_in(cfg, i), cfg.hidden, false, rng);
  add_layer(params, "adapter.out", cfg.variant, cfg.hidden, cfg.length, true, rng);
}

Tensor length_adapt(const Tensor& x, const ParameterSet& params, const AdapterConfig& cfg) {
  if (x.rank() != 2 || x.dim(1) != cfg.input_len)
    throw ShapeError("length_adapt: expected [n, " + std::to_string(cfg.input_len) + "], got " +
                     ad::shape_str(x.shape()));
  if (cfg.input_len == cfg.length) return x;
  return ad::add(ad::matmul(x, params.get("adapter.len.M")), params.get("adapter.len.b"));
}

Tensor adapter_forward(const Tensor& x, const GraphTensors& graph, const ParameterSet& params,
                       const AdapterConfig& cfg, std::uint64_t step_seed) {
  if (x.rank() != 2 || x.dim(0) != graph.n)
    throw ShapeError("adapter_forward: input " + ad::shape_str(x.shape()) + " does not match a " +
                     std::to_string(graph.n) + "-node graph");
  const Tensor base = length_adapt(x, params, cfg);
  if (cfg.n_layers == 0) return base;
  Tensor h = base;
  for (std::size_t i = 0; i < cfg.n_layers; ++i)
    h = apply_layer(h, graph, params, "adapter.l" + std::to_string(i), cfg, cfg.hidden_relu,
                    step_seed * 4 + i);
  const Tensor out = apply_layer(h, graph, params, "adapter.out", cfg, false, step_seed * 4 + 3);
  return cfg.residual ? ad::add(base, out) : out;
}

AdapterCount adapter_param_count(const AdapterConfig& cfg) {
  AdapterCount c;
  if (cfg.input_len != cfg.length) c.length_adapter = cfg.input_len * cfg.length + cfg.length;
  if (cfg.n_layers == 0) return c;
  for (std::size_t i = 0; i < cfg.n_layers; ++i) c.hidden_layers += layer_count(cfg.variant, layer_in(cfg, i), cfg.hidden);
  c.output_layer = layer_count(cfg.variant, cfg.hidden, cfg.length);
  return c;
}

std::size_t count_params(const ParameterSet& params) { return params.count(true); }

}  // namespace ega::model
