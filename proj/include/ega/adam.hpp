#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ega/parameters.hpp"

namespace ega {

struct AdamOptions {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Only trainable parameters get moment buffers;
/// frozen ones are never touched.
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  /// One update of every trainable parameter, then clears all gradients.
  /// Throws if a trainable parameter has no gradient.
  void step(ParameterSet& params);

  std::int64_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }
  bool has_state(const std::string& name) const { return moments_.count(name) != 0; }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamOptions options_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace ega
