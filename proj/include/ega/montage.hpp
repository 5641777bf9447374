#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace ega::montage {

struct ElectrodePosition {
  std::string name;
  std::array<double, 3> xyz;  // unit sphere
};

/// Built-in spherical 10-20 table (table version kPositionsVersion), in
/// canonical channel order.
std::vector<ElectrodePosition> standard_positions();
inline constexpr int kPositionsVersion = 1;

/// {"Fp1": [x, y, z], ...}; every vector must have unit norm within 1e-6.
std::vector<ElectrodePosition> load_positions(const std::filesystem::path& path);

/// Arc length between two unit vectors, in radians.
double geodesic_distance(const std::array<double, 3>& a, const std::array<double, 3>& b);

struct GraphOptions {
  /// Drop the identity term in the GCN propagation matrix.
  bool no_self_loop = false;
  /// Use d / pi as the weight instead of 1 - d / pi (ablation).
  bool raw_distance = false;
};

/// Dense weighted graph over n nodes plus its propagation matrices. All
/// matrices are n x n row-major.
struct MontageGraph {
  std::size_t n = 0;
  std::vector<std::string> node_order;
  std::vector<double> weights;  // W, zero diagonal
  std::vector<double> s_gcn;    // D^-1/2 (W + I) D^-1/2, or without I
  GraphOptions options;

  double w(std::size_t i, std::size_t j) const { return weights[i * n + j]; }
  double s(std::size_t i, std::size_t j) const { return s_gcn[i * n + j]; }
  bool is_neighbor(std::size_t i, std::size_t j) const { return i != j && weights[i * n + j] > 0.0; }

  /// Row-stochastic neighbor averaging: uniform over neighbors, or weighted
  /// by W when `weighted`. Rows of isolated nodes are zero.
  std::vector<double> neighbor_mean(bool weighted = false) const;
};

/// Graph over the 19 canonical electrodes, nodes in canonical order whatever
/// the input order.
MontageGraph build_graph(const std::vector<ElectrodePosition>& positions, const GraphOptions& opts = {});

/// Graph from an explicit symmetric non-negative weight matrix (used for
/// synthetic tasks and tests). The diagonal is ignored.
MontageGraph graph_from_weights(std::vector<double> weights, std::size_t n, const GraphOptions& opts = {},
                                std::vector<std::string> names = {});

}  // namespace ega::montage
