#include "ega/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ega {

void Adam::step(ParameterSet& params) {
  for (const auto& p : params.items())
    if (p.trainable() && !p.value.has_grad())
      throw std::logic_error("adam: trainable parameter '" + p.name + "' has no gradient");

  ++t_;
  const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (auto& p : params.items()) {
    if (!p.trainable()) continue;
    auto& mom = moments_[p.name];
    const std::size_t n = p.value.numel();
    if (mom.m.size() != n) {
      mom.m.assign(n, 0.0);
      mom.v.assign(n, 0.0);
    }
    auto w = p.value.data();
    const auto g = p.value.grad();
    for (std::size_t i = 0; i < n; ++i) {
      mom.m[i] = options_.beta1 * mom.m[i] + (1.0 - options_.beta1) * g[i];
      mom.v[i] = options_.beta2 * mom.v[i] + (1.0 - options_.beta2) * g[i] * g[i];
      const double mhat = mom.m[i] / c1;
      const double vhat = mom.v[i] / c2;
      w[i] -= options_.lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
  params.clear_grads();
}

}  // namespace ega
