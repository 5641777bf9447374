#include <gtest/gtest.h>

#include <cstring>
#include <numeric>
#include <random>

#include "ega/adapter.hpp"
#include "ega/gradcheck.hpp"
#include "ega/montage.hpp"
#include "ega/ops.hpp"
#include "support/dense_oracles.hpp"

using namespace ega;
using namespace ega::model;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

oracle::Mat mat(const Tensor& t) { return oracle::from_flat({t.data().begin(), t.data().end()}, t.dim(0), t.dim(1)); }
std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

void expect_matches(const Tensor& got, const oracle::Mat& want, double tol) {
  ASSERT_EQ(got.dim(0), want.size());
  ASSERT_EQ(got.dim(1), want[0].size());
  for (std::size_t i = 0; i < want.size(); ++i)
    for (std::size_t j = 0; j < want[0].size(); ++j) EXPECT_NEAR(got.at(i, j), want[i][j], tol) << i << "," << j;
}

montage::MontageGraph uniform(std::size_t n, double w = 1.0) {
  return montage::graph_from_weights(std::vector<double>(n * n, w), n);
}

Tensor identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

}  // namespace

TEST(Gcn, UniformThreeNodeAverage) {
  const auto g = uniform(3);
  const auto gt = graph_tensors(g);
  const Tensor h({3, 2}, {1, 2, 3, 4, 5, 6});
  const Tensor out = gcn_layer(h, gt.s_gcn, identity(2), Tensor({2}));
  // Every node sees all three rows (self loop + two neighbors) with weight 1/3.
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(out.at(i, 0), 3.0, 1e-12);
    EXPECT_NEAR(out.at(i, 1), 4.0, 1e-12);
  }
}

TEST(Gcn, ZeroInputGivesReluBias) {
  const auto gt = graph_tensors(uniform(4, 0.5));
  const Tensor out = gcn_layer(Tensor({4, 3}), gt.s_gcn, Tensor({3, 2}, 1.0), Tensor::vector({0.7, -0.2}));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(out.at(i, 0), 0.7);
    EXPECT_EQ(out.at(i, 1), 0.0);
  }
}

TEST(Gcn, SingleNode) {
  std::mt19937_64 rng(1);
  const auto gt = graph_tensors(montage::graph_from_weights({0.0}, 1));
  const Tensor h = random_tensor({1, 4}, rng), w = random_tensor({4, 3}, rng), b = random_tensor({3}, rng);
  const Tensor out = gcn_layer(h, gt.s_gcn, w, b);
  const Tensor ref = ad::relu(ad::add(ad::matmul(h, w), b));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out[j], ref[j], 1e-15);
}

TEST(Sage, NeighborBranchOff) {
  const auto gt = graph_tensors(uniform(3));
  const Tensor h({3, 2}, {1, -2, 3, 4, -5, 6});
  const Tensor out = sage_layer(h, gt.neighbor_mean, identity(2), Tensor({2, 2}), Tensor({2}));
  const Tensor ref = ad::relu(h);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out[i], ref[i]);
}

TEST(Sage, MeanOfOtherRows) {
  const auto gt = graph_tensors(uniform(3));
  const Tensor h({3, 2}, {1, -2, 3, 4, -5, 6});
  const Tensor out = sage_layer(h, gt.neighbor_mean, Tensor({2, 2}), identity(2), Tensor({2}));
  const double want[3][2] = {{std::max(0.0, (3 - 5) / 2.0), (4 + 6) / 2.0},
                             {std::max(0.0, (1 - 5) / 2.0), (-2 + 6) / 2.0},
                             {(1 + 3) / 2.0, (-2 + 4) / 2.0}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out.at(i, j), want[i][j], 1e-15);
}

TEST(Sage, SamplingDeterministicPerSeed) {
  const auto g = montage::build_graph(montage::standard_positions());
  const auto a = sage_mean_matrix(g, 5, 42, false);
  const auto b = sage_mean_matrix(g, 5, 42, false);
  const auto c = sage_mean_matrix(g, 5, 43, false);
  EXPECT_EQ(vec(a), vec(b));
  EXPECT_NE(vec(a), vec(c));
  for (std::size_t i = 0; i < 19; ++i) {
    std::size_t nz = 0;
    double s = 0.0;
    for (std::size_t j = 0; j < 19; ++j) {
      nz += a.at(i, j) != 0.0;
      s += a.at(i, j);
    }
    EXPECT_EQ(nz, 5u);
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_EQ(a.at(i, i), 0.0);
  }
}

TEST(Gat, ZeroAttentionIsUniformMean) {
  std::mt19937_64 rng(2);
  const auto gt = graph_tensors(uniform(4, 0.3));
  const Tensor h = random_tensor({4, 3}, rng), w = random_tensor({3, 2}, rng), b = random_tensor({2}, rng);
  const Tensor out = gat_layer(h, gt.attend_mask, w, Tensor({2, 1}), Tensor({2, 1}), b);
  const Tensor z = ad::matmul(h, w);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      const double mean = (z.at(0, j) + z.at(1, j) + z.at(2, j) + z.at(3, j)) / 4.0;
      EXPECT_NEAR(out.at(i, j), std::max(0.0, mean + b[j]), 1e-12);
    }
}

TEST(Gat, AttentionRowsAreDistributions) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto g = oracle::random_graph(2 + t % 5, rng);
    const auto gt = graph_tensors(g);
    const Tensor z = random_tensor({g.n, 3}, rng, 3.0);
    const Tensor alpha = gat_attention(z, gt.attend_mask, random_tensor({3, 1}, rng), random_tensor({3, 1}, rng));
    for (std::size_t i = 0; i < g.n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < g.n; ++j) {
        EXPECT_GE(alpha.at(i, j), 0.0);
        if (i != j && !g.is_neighbor(i, j)) {
          EXPECT_EQ(alpha.at(i, j), 0.0);
        }
        s += alpha.at(i, j);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(DenseOracle, LayersMatchOnRandomGraphs) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + t % 6, din = 1 + rng() % 5, dout = 1 + rng() % 4;
    const auto g = oracle::random_graph(n, rng);
    const auto gt = graph_tensors(g);
    const Tensor h = random_tensor({n, din}, rng), w = random_tensor({din, dout}, rng);
    const Tensor w2 = random_tensor({din, dout}, rng), b = random_tensor({dout}, rng);
    const Tensor as = random_tensor({dout, 1}, rng), adst = random_tensor({dout, 1}, rng);
    expect_matches(gcn_layer(h, gt.s_gcn, w, b), oracle::gcn(g, mat(h), mat(w), vec(b)), 1e-10);
    expect_matches(sage_layer(h, gt.neighbor_mean, w, w2, b), oracle::sage(g, mat(h), mat(w), mat(w2), vec(b)),
                   1e-10);
    expect_matches(gat_layer(h, gt.attend_mask, w, as, adst, b),
                   oracle::gat(g, mat(h), mat(w), vec(as), vec(adst), vec(b)), 1e-10);
    expect_matches(gat_attention(ad::matmul(h, w), gt.attend_mask, as, adst),
                   oracle::gat_alpha(g, oracle::matmul(mat(h), mat(w)), vec(as), vec(adst)), 1e-10);
  }
}

TEST(DenseOracle, WeightedSageMean) {
  std::mt19937_64 rng(5);
  const auto g = oracle::random_graph(5, rng, 0.0);
  const auto gt = graph_tensors(g, true);
  const Tensor h = random_tensor({5, 3}, rng), w = random_tensor({3, 2}, rng), w2 = random_tensor({3, 2}, rng),
               b = random_tensor({2}, rng);
  expect_matches(sage_layer(h, gt.neighbor_mean, w, w2, b),
                 oracle::sage(g, mat(h), mat(w), mat(w2), vec(b), true), 1e-10);
}

TEST(Equivariance, NodePermutation) {
  std::mt19937_64 rng(6);
  const std::size_t n = 6;
  const auto g = oracle::random_graph(n, rng, 0.2);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> pw(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) pw[i * n + j] = g.w(perm[i], perm[j]);
  const auto pg = montage::graph_from_weights(pw, n);
  const auto gt = graph_tensors(g), pgt = graph_tensors(pg);
  const Tensor h = random_tensor({n, 4}, rng), w = random_tensor({4, 3}, rng), w2 = random_tensor({4, 3}, rng),
               b = random_tensor({3}, rng), as = random_tensor({3, 1}, rng), adst = random_tensor({3, 1}, rng);
  const Tensor ph = ad::gather_rows(h, perm);
  auto check = [&](const Tensor& out, const Tensor& pout) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(pout.at(i, j), out.at(perm[i], j), 1e-9);
  };
  check(gcn_layer(h, gt.s_gcn, w, b), gcn_layer(ph, pgt.s_gcn, w, b));
  check(sage_layer(h, gt.neighbor_mean, w, w2, b), sage_layer(ph, pgt.neighbor_mean, w, w2, b));
  check(gat_layer(h, gt.attend_mask, w, as, adst, b), gat_layer(ph, pgt.attend_mask, w, as, adst, b));
}

TEST(GradCheck, LayersOverTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 5;
    const auto g = oracle::random_graph(n, rng, 0.2);
    const auto gt = graph_tensors(g);
    Tensor h = random_tensor({n, 4}, rng), w = random_tensor({4, 3}, rng), w2 = random_tensor({4, 3}, rng),
           b = random_tensor({3}, rng), as = random_tensor({3, 1}, rng), adst = random_tensor({3, 1}, rng);
    const Tensor probe = random_tensor({n, 3}, rng);
    auto loss = [&](const Tensor& out) { return ad::sum_all(ad::mul(out, probe)); };
    // Smooth (pre-activation) paths avoid relu kinks in the numeric estimate.
    auto r1 = ad::grad_check([&] { return loss(gcn_layer(h, gt.s_gcn, w, b, false)); }, {h, w, b});
    auto r2 = ad::grad_check([&] { return loss(sage_layer(h, gt.neighbor_mean, w, w2, b, false)); }, {h, w, w2, b});
    auto r3 = ad::grad_check([&] { return loss(gat_layer(h, gt.attend_mask, w, as, adst, b, false)); },
                             {h, w, as, adst, b});
    EXPECT_TRUE(r1.ok(1e-4)) << r1.summary();
    EXPECT_TRUE(r2.ok(1e-4)) << r2.summary();
    EXPECT_TRUE(r3.ok(1e-4)) << r3.summary();
  }
}

TEST(Adapter, IdentityAtInitBitwise) {
  const auto g = montage::build_graph(montage::standard_positions());
  const auto gt = graph_tensors(g);
  for (Variant v : {Variant::gcn, Variant::sage, Variant::gat}) {
    AdapterConfig cfg;
    cfg.variant = v;
    cfg.input_len = cfg.length = 96;
    ParameterSet params;
    std::mt19937_64 rng(7);
    init_adapter(params, cfg, rng);
    const Tensor x = random_tensor({19, 96}, rng);
    const Tensor y = adapter_forward(x, gt, params, cfg);
    ASSERT_EQ(y.shape(), x.shape());
    EXPECT_EQ(std::memcmp(y.data().data(), x.data().data(), x.numel() * sizeof(double)), 0) << to_string(v);
  }
}

TEST(Adapter, LengthAdapter) {
  AdapterConfig cfg;
  cfg.input_len = 512;
  cfg.length = 1024;
  ParameterSet params;
  std::mt19937_64 rng(8);
  init_adapter(params, cfg, rng);
  const Tensor x = random_tensor({19, 512}, rng);
  const Tensor y = length_adapt(x, params, cfg);
  EXPECT_EQ(y.shape(), (ad::Shape{19, 1024}));
  EXPECT_EQ(y.at(3, 100), x.at(3, 100));  // identity-padded init
  EXPECT_EQ(y.at(3, 700), 0.0);
  const auto gt = graph_tensors(montage::build_graph(montage::standard_positions()));
  EXPECT_EQ(adapter_forward(x, gt, params, cfg).shape(), (ad::Shape{19, 1024}));

  AdapterConfig same;
  same.input_len = same.length = 64;
  ParameterSet none;
  const Tensor x2 = random_tensor({19, 64}, rng);
  EXPECT_EQ(length_adapt(x2, none, same).impl(), x2.impl());
}

TEST(Adapter, ParameterGradientsMatchFiniteDifferences) {
  const std::size_t n = 5, len = 6;
  std::mt19937_64 rng(9);
  const auto g = oracle::random_graph(n, rng, 0.0);
  const auto gt = graph_tensors(g);
  for (Variant v : {Variant::gcn, Variant::sage, Variant::gat}) {
    AdapterConfig cfg;
    cfg.variant = v;
    cfg.hidden = 4;
    cfg.input_len = 4;
    cfg.length = len;
    ParameterSet params;
    init_adapter(params, cfg, rng);
    // Move off the zero init so every path carries gradient.
    for (auto& p : params.items())
      for (auto& x : p.value.data()) x += 0.3 * std::normal_distribution<double>()(rng);
    const Tensor x = random_tensor({n, 4}, rng), probe = random_tensor({n, len}, rng);
    std::vector<Tensor> inputs;
    for (auto& p : params.items()) inputs.push_back(p.value);
    const auto r = ad::grad_check(
        [&] { return ad::sum_all(ad::mul(adapter_forward(x, gt, params, cfg), probe)); }, inputs);
    EXPECT_LT(r.max_rel_error, 1e-4) << to_string(v) << ": " << r.summary();
  }
}

TEST(Counts, ClosedForms) {
  AdapterConfig cfg;
  cfg.input_len = cfg.length = 15360;
  cfg.variant = Variant::gcn;
  EXPECT_EQ(adapter_param_count(cfg).hidden_layers, 987264u);
  for (std::size_t len : {96u, 1024u, 15360u}) {
    std::size_t counts[3];
    for (Variant v : {Variant::gcn, Variant::gat, Variant::sage}) {
      cfg.variant = v;
      cfg.input_len = cfg.length = len;
      counts[static_cast<int>(v)] = adapter_param_count(cfg).total();
    }
    const auto gcn = counts[0], sage = counts[1], gat = counts[2];
    EXPECT_LT(gcn, gat);
    EXPECT_LT(gat, sage);
    const double ratio = static_cast<double>(sage) / static_cast<double>(gcn);
    EXPECT_GE(ratio, 1.9);
    EXPECT_LE(ratio, 2.1);
  }
  cfg.n_layers = 0;
  EXPECT_EQ(adapter_param_count(cfg).total(), 0u);
}

TEST(Counts, InitializedParamsMatchClosedForm) {
  for (Variant v : {Variant::gcn, Variant::sage, Variant::gat})
    for (std::size_t lin : {64u, 96u}) {
      AdapterConfig cfg;
      cfg.variant = v;
      cfg.input_len = lin;
      cfg.length = 96;
      ParameterSet params;
      std::mt19937_64 rng(1);
      init_adapter(params, cfg, rng);
      EXPECT_EQ(count_params(params), adapter_param_count(cfg).total());
    }
  AdapterConfig zero;
  zero.n_layers = 0;
  ParameterSet params;
  std::mt19937_64 rng(1);
  init_adapter(params, zero, rng);
  EXPECT_EQ(count_params(params), 0u);
}
