#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ega {

struct GradSuiteEntry {
  std::string layer;
  std::size_t seeds = 0;
  std::size_t failures = 0;
  double max_rel_error = 0.0;
  double seconds = 0.0;
};

/// Finite-difference checks of every differentiable layer (conv1d,
/// group_norm, gcn, sage, gat, attention, aggregator, cross_entropy) over
/// `seeds` random instances each. A seed fails when its max relative error
/// reaches `tol` or a numeric estimate is non-finite.
std::vector<GradSuiteEntry> run_grad_suite(std::size_t seeds = 10, double tol = 1e-4);

}  // namespace ega
