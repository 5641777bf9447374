#include "ega/montage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "json.hpp"

#include "ega/errors.hpp"
#include "ega/signal.hpp"

namespace ega::montage {

namespace {

struct Spherical {
  const char* name;
  double theta, phi;  // degrees; theta from the vertex, negative on the left
};

// Spherical 10-20 positions (BESA convention).
constexpr Spherical kTable[] = {
    {"Fp1", -92, -72}, {"Fp2", 92, 72}, {"F7", -92, -36}, {"F3", -60, -51}, {"Fz", 46, 90},
    {"F4", 60, 51},    {"F8", 92, 36},  {"T3", -92, 0},   {"C3", -46, 0},   {"Cz", 0, 0},
    {"C4", 46, 0},     {"T4", 92, 0},   {"T5", -92, 36},  {"P3", -60, 51},  {"Pz", 46, -90},
    {"P4", 60, -51},   {"T6", 92, -36}, {"O1", -92, 72},  {"O2", 92, -72}};

double norm3(const std::array<double, 3>& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

void check_unit(const std::array<double, 3>& v, const std::string& what) {
  const double nv = norm3(v);
  if (!(std::abs(nv - 1.0) <= 1e-6))
    throw ConfigError(what + ": position norm " + std::to_string(nv) + " is not 1");
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::vector<ElectrodePosition> standard_positions() {
  std::vector<ElectrodePosition> out;
  constexpr double deg = std::numbers::pi / 180.0;
  for (const auto& e : kTable) {
    const double t = e.theta * deg, p = e.phi * deg;
    out.push_back({e.name, {std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)}});
  }
  return out;
}

std::vector<ElectrodePosition> load_positions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open electrode file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path.string() + ": expected an object of name -> [x, y, z]");
  std::vector<ElectrodePosition> out;
  for (const auto& [name, v] : j.items()) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(path.string() + ": " + name + " needs three coordinates");
    ElectrodePosition p{name, {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()}};
    check_unit(p.xyz, path.string() + ": " + name);
    out.push_back(std::move(p));
  }
  return out;
}

double geodesic_distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  check_unit(a, "geodesic_distance");
  check_unit(b, "geodesic_distance");
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return std::acos(std::clamp(dot, -1.0, 1.0));
}

std::vector<double> MontageGraph::neighbor_mean(bool weighted) const {
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (is_neighbor(i, j)) total += weighted ? w(i, j) : 1.0;
    if (total == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j)
      if (is_neighbor(i, j)) m[i * n + j] = (weighted ? w(i, j) : 1.0) / total;
  }
  return m;
}

MontageGraph graph_from_weights(std::vector<double> weights, std::size_t n, const GraphOptions& opts,
                                std::vector<std::string> names) {
  if (n == 0 || weights.size() != n * n)
    throw ShapeError("graph_from_weights: expected " + std::to_string(n) + "x" + std::to_string(n) + " weights");
  if (names.empty())
    for (std::size_t i = 0; i < n; ++i) names.push_back("n" + std::to_string(i));
  if (names.size() != n) throw ShapeError("graph_from_weights: name count differs from node count");
  for (std::size_t i = 0; i < n; ++i) {
    weights[i * n + i] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = weights[i * n + j];
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("graph weights must be finite and non-negative");
      if (v != weights[j * n + i]) throw ConfigError("graph weights must be symmetric");
    }
  }
  MontageGraph g;
  g.n = n;
  g.node_order = std::move(names);
  g.weights = std::move(weights);
  g.options = opts;
  const double self = opts.no_self_loop ? 0.0 : 1.0;
  std::vector<double> dinv(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = self;
    for (std::size_t j = 0; j < n; ++j) deg += g.weights[i * n + j];
    dinv[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  g.s_gcn.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g.s_gcn[i * n + j] = (dinv[i] * dinv[j]) * (g.weights[i * n + j] + (i == j ? self : 0.0));
  return g;
}

MontageGraph build_graph(const std::vector<ElectrodePosition>& positions, const GraphOptions& opts) {
  std::map<std::string, const ElectrodePosition*> by_name;
  for (const auto& p : positions) {
    if (!by_name.emplace(lower(p.name), &p).second) throw ConfigError("duplicate electrode name " + p.name);
    check_unit(p.xyz, p.name);
  }
  std::vector<std::string> missing;
  std::vector<const ElectrodePosition*> nodes;
  for (auto name : signal::kCanonicalChannels) {
    auto it = by_name.find(lower(std::string(name)));
    if (it == by_name.end())
      missing.emplace_back(name);
    else
      nodes.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string msg = "electrode positions missing:";
    for (const auto& m : missing) msg += " " + m;
    throw ConfigError(msg);
  }
  const std::size_t n = nodes.size();
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = geodesic_distance(nodes[i]->xyz, nodes[j]->xyz) / std::numbers::pi;
      w[i * n + j] = w[j * n + i] = opts.raw_distance ? d : 1.0 - d;
    }
  return graph_from_weights(std::move(w), n, opts, signal::canonical_channel_names());
}

}  // namespace ega::montage
