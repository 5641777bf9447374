#include "ega/gradcheck.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ega::ad {

std::string GradCheckResult::summary() const {
  std::ostringstream os;
  os << "max_rel_error=" << max_rel_error << " at input " << worst_input << "[" << worst_index << "]";
  if (!kinks.empty()) os << ", " << kinks.size() << " non-differentiable point(s)";
  if (non_finite)
    os << ", non-finite numeric estimate at input " << non_finite->first << "[" << non_finite->second << "]";
  return os.str();
}

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double h) {
  auto& tape = Tape::active();
  tape.reset();
  std::vector<bool> flags;
  for (auto& x : inputs) {
    flags.push_back(x.requires_grad());
    x.set_requires_grad(true);
    x.clear_grad();
  }
  Tensor loss = f();
  if (loss.numel() != 1) throw std::invalid_argument("grad_check: f must return a scalar");
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& x : inputs)
    analytic.push_back(x.has_grad() ? std::vector<double>(x.grad().begin(), x.grad().end())
                                    : std::vector<double>(x.numel(), 0.0));
  tape.reset();

  GradCheckResult res;
  NoGradGuard no_grad;
  auto eval = [&] { return f().item(); };
  const double f0 = eval();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto data = inputs[k].data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double fp = eval();
      data[i] = saved - h;
      const double fm = eval();
      data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      if (!std::isfinite(numeric)) {
        if (!res.non_finite) res.non_finite = std::make_pair(k, i);
        continue;
      }
      const double fwd = (fp - f0) / h;
      const double bwd = (f0 - fm) / h;
      if (std::abs(fwd - bwd) > 1e3 * h * std::max(1.0, std::abs(fwd) + std::abs(bwd)))
        res.kinks.emplace_back(k, i);
      const double a = analytic[k][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_input = k;
        res.worst_index = i;
      }
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    inputs[k].clear_grad();
    inputs[k].set_requires_grad(flags[k]);
  }
  return res;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
  return grad_check([&f, &x] { return f(x); }, std::vector<Tensor>{x}, h);
}

}  // namespace ega::ad
