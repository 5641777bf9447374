#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ega/tensor.hpp"

namespace ega::ad {

struct GradCheckResult {
  /// max over coordinates of |analytic - numeric| / max(1, |analytic| + |numeric|)
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  /// (input, coordinate) pairs whose one-sided slopes disagree: likely kinks.
  std::vector<std::pair<std::size_t, std::size_t>> kinks;
  /// Set when a numeric estimate came out NaN/Inf.
  std::optional<std::pair<std::size_t, std::size_t>> non_finite;

  bool ok(double tol) const { return !non_finite && max_rel_error < tol; }
  std::string summary() const;
};

/// Compares reverse-mode gradients of the scalar `f()` with respect to each
/// of `inputs` against central differences with step h. `f` must rebuild its
/// graph from the current input values on every call.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs,
                           double h = 1e-5);

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                           double h = 1e-5);

}  // namespace ega::ad
