#include <chrono>
#include <functional>
#include <random>

#include "ega/adapter.hpp"
#include "ega/encoder.hpp"
#include "ega/gradcheck.hpp"
#include "ega/gradsuite.hpp"
#include "ega/head.hpp"
#include "ega/montage.hpp"
#include "ega/ops.hpp"

namespace ega {

using ad::Tensor;

namespace {

Tensor randn(ad::Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(ad::numel_of(shape));
  for (auto& x : v) x = n(rng);
  return Tensor(std::move(shape), std::move(v));
}

montage::MontageGraph random_graph(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) w[i * n + j] = w[j * n + i] = u(rng) < 0.3 ? 0.0 : u(rng);
  return montage::graph_from_weights(std::move(w), n);
}

Tensor probe_loss(const Tensor& out, const Tensor& probe) { return ad::sum_all(ad::mul(out, probe)); }

// One finite-difference check of a seeded random instance.
using Case = std::function<ad::GradCheckResult(std::mt19937_64&)>;

std::vector<std::pair<std::string, Case>> cases() {
  std::vector<std::pair<std::string, Case>> out;
  out.emplace_back("conv1d", [](std::mt19937_64& rng) {
    Tensor x = randn({3, 14}, rng), w = randn({4, 3, 3}, rng, 0.5), b = randn({4}, rng, 0.1);
    const Tensor probe = randn({4, 6}, rng);
    return ad::grad_check([&] { return probe_loss(ad::conv1d(x, w, b, 2), probe); }, {x, w, b});
  });
  out.emplace_back("group_norm", [](std::mt19937_64& rng) {
    Tensor x = randn({4, 7}, rng), g = randn({4}, rng), b = randn({4}, rng);
    const Tensor probe = randn({4, 7}, rng);
    return ad::grad_check([&] { return probe_loss(ad::group_norm(x, 1, g, b), probe); }, {x, g, b});
  });
  out.emplace_back("gcn", [](std::mt19937_64& rng) {
    const auto g = random_graph(5, rng);
    const auto gt = model::graph_tensors(g);
    Tensor h = randn({5, 4}, rng), w = randn({4, 3}, rng), b = randn({3}, rng);
    const Tensor probe = randn({5, 3}, rng);
    return ad::grad_check([&] { return probe_loss(model::gcn_layer(h, gt.s_gcn, w, b, false), probe); }, {h, w, b});
  });
  out.emplace_back("sage", [](std::mt19937_64& rng) {
    const auto g = random_graph(5, rng);
    const auto gt = model::graph_tensors(g);
    Tensor h = randn({5, 4}, rng), ws = randn({4, 3}, rng), wn = randn({4, 3}, rng), b = randn({3}, rng);
    const Tensor probe = randn({5, 3}, rng);
    return ad::grad_check(
        [&] { return probe_loss(model::sage_layer(h, gt.neighbor_mean, ws, wn, b, false), probe); }, {h, ws, wn, b});
  });
  out.emplace_back("gat", [](std::mt19937_64& rng) {
    const auto g = random_graph(5, rng);
    const auto gt = model::graph_tensors(g);
    Tensor h = randn({5, 4}, rng), w = randn({4, 3}, rng), as = randn({3, 1}, rng), ad_ = randn({3, 1}, rng),
           b = randn({3}, rng);
    const Tensor probe = randn({5, 3}, rng);
    return ad::grad_check(
        [&] { return probe_loss(model::gat_layer(h, gt.attend_mask, w, as, ad_, b, false), probe); },
        {h, w, as, ad_, b});
  });
  out.emplace_back("attention", [](std::mt19937_64& rng) {
    ParameterSet params;
    model::init_pretrain_head(params, 4, 6, rng);
    Tensor z = randn({5, 4}, rng);
    const Tensor probe = randn({5, 4}, rng);
    std::vector<Tensor> inputs{z};
    for (auto& p : params.items()) inputs.push_back(p.value);
    return ad::grad_check([&] { return probe_loss(model::contextualize(z, params), probe); }, inputs);
  });
  out.emplace_back("aggregator", [](std::mt19937_64& rng) {
    Tensor e = randn({3, 11}, rng);
    const Tensor probe = randn({1, 12}, rng);
    return ad::grad_check([&] { return probe_loss(model::aggregate(e), probe); }, {e});
  });
  out.emplace_back("cross_entropy", [](std::mt19937_64& rng) {
    Tensor logits = randn({1, 2}, rng, 2.0);
    const std::size_t label = rng() % 2;
    return ad::grad_check([&] { return model::ce_loss(logits, label); }, {logits});
  });
  return out;
}

}  // namespace

std::vector<GradSuiteEntry> run_grad_suite(std::size_t seeds, double tol) {
  std::vector<GradSuiteEntry> out;
  for (const auto& [name, check] : cases()) {
    const auto t0 = std::chrono::steady_clock::now();
    GradSuiteEntry e;
    e.layer = name;
    e.seeds = seeds;
    for (std::size_t s = 0; s < seeds; ++s) {
      std::mt19937_64 rng(s);
      const auto r = check(rng);
      ad::Tape::active().reset();
      e.max_rel_error = std::max(e.max_rel_error, r.max_rel_error);
      if (!r.ok(tol)) ++e.failures;
    }
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(e);
  }
  return out;
}

}  // namespace ega
