#include "ega/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ega/errors.hpp"
#include "ega/kernels.hpp"

namespace ega::ad {

namespace {

bool any_requires_grad(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const auto* t : inputs)
    if (t && t->defined() && t->requires_grad()) return true;
  return false;
}

void check_finite(const Tensor& out, const char* op) {
  if (!numeric_checks()) return;
  const auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i)
    if (!std::isfinite(d[i]))
      throw NumericFault(std::string(op) + " produced a non-finite value at flat index " +
                         std::to_string(i));
}

// Gradient buffer of an input, or nullptr when it does not take gradients.
std::vector<double>* gbuf(TensorImpl* t) {
  if (t == nullptr || !t->requires_grad) return nullptr;
  if (!t->grad) t->grad.emplace(t->data.size(), 0.0);
  return &*t->grad;
}

void record(const Tensor& out, std::initializer_list<const Tensor*> inputs,
            Tape::BackwardFn fn) {
  std::vector<std::shared_ptr<TensorImpl>> ins;
  for (const auto* t : inputs)
    if (t && t->defined()) ins.push_back(t->shared());
  Tape::active().record(std::move(ins), out.shared(), std::move(fn));
}

Tensor result(Shape shape, std::vector<double> data, bool track) {
  return Tensor(std::move(shape), std::move(data), track);
}

struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisView axis_view(const Shape& s, std::size_t axis) {
  if (axis >= s.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                     shape_str(t.shape()));
}

enum class Broadcast { kSame, kRow, kScalar };

Broadcast broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (b.numel() == 1) return Broadcast::kScalar;
  if (b.rank() == 1 && b.dim(0) == a.shape().back()) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                   shape_str(b.shape()));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  std::vector<double> c(m * n);
  kernels::matmul(a.data(), b.data(), c, m, k, n);
  const bool track = any_requires_grad({&a, &b});
  Tensor out = result({m, n}, std::move(c), track);
  check_finite(out, "matmul");
  if (track) {
    auto* ai = a.impl();
    auto* bi = b.impl();
    auto* oi = out.impl();
    record(out, {&a, &b}, [ai, bi, oi, m, k, n] {
      const auto& g = *oi->grad;
      if (auto* ga = gbuf(ai)) kernels::matmul_a_bt_acc(g, bi->data, *ga, m, k, n);
      if (auto* gb = gbuf(bi)) kernels::matmul_at_b_acc(ai->data, g, *gb, m, k, n);
    });
  }
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t padding) {
  require_rank(x, 2, "conv1d input");
  require_rank(w, 3, "conv1d weight");
  if (stride == 0) throw ShapeError("conv1d: stride must be positive");
  kernels::Conv1dDims d{x.dim(0), x.dim(1), w.dim(0), w.dim(2), stride, padding};
  if (w.dim(1) != d.in_channels)
    throw ShapeError("conv1d: weight " + shape_str(w.shape()) + " does not match input " +
                     shape_str(x.shape()));
  if (d.length + 2 * padding < d.kernel)
    throw ShapeError("conv1d: input " + shape_str(x.shape()) + " shorter than kernel " +
                     std::to_string(d.kernel));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != d.out_channels))
    throw ShapeError("conv1d: bias " + shape_str(bias.shape()) + " does not match weight " +
                     shape_str(w.shape()));
  const std::size_t T = d.out_length();
  std::vector<double> out_data(d.out_channels * T);
  kernels::conv1d_forward(x.data(), w.data(),
                          bias.defined() ? bias.data() : std::span<const double>{}, out_data, d);
  const bool track = any_requires_grad({&x, &w, &bias});
  Tensor out = result({d.out_channels, T}, std::move(out_data), track);
  check_finite(out, "conv1d");
  if (track) {
    auto* xi = x.impl();
    auto* wi = w.impl();
    auto* bi = bias.defined() ? bias.impl() : nullptr;
    auto* oi = out.impl();
    record(out, {&x, &w, &bias}, [xi, wi, bi, oi, d, T] {
      const auto& g = *oi->grad;
      if (auto* gx = gbuf(xi)) kernels::conv1d_backward_input(g, wi->data, *gx, d);
      auto* gb = gbuf(bi);
      if (auto* gw = gbuf(wi)) {
        kernels::conv1d_backward_weight(g, xi->data, *gw,
                                        gb ? std::span<double>(*gb) : std::span<double>{}, d);
      } else if (gb) {
        for (std::size_t o = 0; o < d.out_channels; ++o)
          for (std::size_t t = 0; t < T; ++t) (*gb)[o] += g[o * T + t];
      }
    });
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  const auto mode = broadcast_mode(a, b, "add");
  const std::size_t n = a.numel();
  const std::size_t cols = a.shape().back();
  std::vector<double> c(n);
  const auto ad = a.data();
  const auto bd = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double bv = mode == Broadcast::kSame ? bd[i] : mode == Broadcast::kRow ? bd[i % cols] : bd[0];
    c[i] = ad[i] + bv;
  }
  const bool track = any_requires_grad({&a, &b});
  Tensor out = result(a.shape(), std::move(c), track);
  check_finite(out, "add");
  if (track) {
    auto* ai = a.impl();
    auto* bi = b.impl();
    auto* oi = out.impl();
    record(out, {&a, &b}, [ai, bi, oi, mode, n, cols] {
      const auto& g = *oi->grad;
      if (auto* ga = gbuf(ai))
        for (std::size_t i = 0; i < n; ++i) (*ga)[i] += g[i];
      if (auto* gb = gbuf(bi)) {
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = mode == Broadcast::kSame ? i : mode == Broadcast::kRow ? i % cols : 0;
          (*gb)[j] += g[i];
        }
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, scale(b, -1.0)); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ShapeError("mul: shapes differ, " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t n = a.numel();
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * b[i];
  const bool track = any_requires_grad({&a, &b});
  Tensor out = result(a.shape(), std::move(c), track);
  check_finite(out, "mul");
  if (track) {
    auto* ai = a.impl();
    auto* bi = b.impl();
    auto* oi = out.impl();
    record(out, {&a, &b}, [ai, bi, oi, n] {
      const auto& g = *oi->grad;
      // Read inputs before writing: a and b may alias (x * x).
      auto* ga = gbuf(ai);
      auto* gb = gbuf(bi);
      for (std::size_t i = 0; i < n; ++i) {
        const double av = ai->data[i], bv = bi->data[i];
        if (ga) (*ga)[i] += g[i] * bv;
        if (gb) (*gb)[i] += g[i] * av;
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  const std::size_t n = a.numel();
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] * s;
  const bool track = any_requires_grad({&a});
  Tensor out = result(a.shape(), std::move(c), track);
  check_finite(out, "scale");
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, n, s] {
      auto& ga = *gbuf(ai);
      for (std::size_t i = 0; i < n; ++i) ga[i] += (*oi->grad)[i] * s;
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  const std::size_t n = a.numel();
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = a[i] + s;
  const bool track = any_requires_grad({&a});
  Tensor out = result(a.shape(), std::move(c), track);
  check_finite(out, "add_scalar");
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, n] {
      auto& ga = *gbuf(ai);
      for (std::size_t i = 0; i < n; ++i) ga[i] += (*oi->grad)[i];
    });
  }
  return out;
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const bool track = any_requires_grad({&a});
  Tensor out = result({1}, {s}, track);
  check_finite(out, "sum_all");
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi] {
      auto& ga = *gbuf(ai);
      const double g = (*oi->grad)[0];
      for (auto& v : ga) v += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum(const Tensor& a, std::size_t axis) {
  const auto v = axis_view(a.shape(), axis);
  Shape shape;
  for (std::size_t i = 0; i < a.rank(); ++i)
    if (i != axis) shape.push_back(a.dim(i));
  if (shape.empty()) shape.push_back(1);
  std::vector<double> c(v.outer * v.inner, 0.0);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t l = 0; l < v.len; ++l)
      for (std::size_t i = 0; i < v.inner; ++i)
        c[o * v.inner + i] += a[(o * v.len + l) * v.inner + i];
  const bool track = any_requires_grad({&a});
  Tensor out = result(std::move(shape), std::move(c), track);
  check_finite(out, "sum");
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, v] {
      auto& ga = *gbuf(ai);
      const auto& g = *oi->grad;
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t l = 0; l < v.len; ++l)
          for (std::size_t i = 0; i < v.inner; ++i) ga[(o * v.len + l) * v.inner + i] += g[o * v.inner + i];
    });
  }
  return out;
}

Tensor mean(const Tensor& a, std::size_t axis) {
  const auto len = axis_view(a.shape(), axis).len;
  return scale(sum(a, axis), 1.0 / static_cast<double>(len));
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts.front().shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t i = 0; i < first.size(); ++i)
      if (i != axis && p.dim(i) != first[i])
        throw ShapeError("concat: shapes " + shape_str(first) + " and " + shape_str(p.shape()) +
                         " differ off the concat axis");
    total += axis_view(p.shape(), axis).len;
  }
  Shape shape = first;
  shape[axis] = total;
  const auto v = axis_view(shape, axis);
  std::vector<double> c(numel_of(shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const auto pv = axis_view(p.shape(), axis);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t l = 0; l < pv.len; ++l)
        for (std::size_t i = 0; i < v.inner; ++i)
          c[(o * v.len + off + l) * v.inner + i] = p[(o * pv.len + l) * v.inner + i];
    off += pv.len;
  }
  bool track = false;
  if (grad_enabled())
    for (const auto& p : parts) track = track || p.requires_grad();
  Tensor out = result(std::move(shape), std::move(c), track);
  if (track) {
    std::vector<std::shared_ptr<TensorImpl>> ins;
    std::vector<TensorImpl*> raw;
    for (const auto& p : parts) {
      ins.push_back(p.shared());
      raw.push_back(p.impl());
    }
    auto* oi = out.impl();
    Tape::active().record(std::move(ins), out.shared(), [raw, offsets, oi, v] {
      const auto& g = *oi->grad;
      for (std::size_t k = 0; k < raw.size(); ++k) {
        auto* gp = gbuf(raw[k]);
        if (!gp) continue;
        const std::size_t plen = raw[k]->data.size() / (v.outer * v.inner);
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t l = 0; l < plen; ++l)
            for (std::size_t i = 0; i < v.inner; ++i)
              (*gp)[(o * plen + l) * v.inner + i] += g[(o * v.len + offsets[k] + l) * v.inner + i];
      }
    });
  }
  return out;
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto v = axis_view(a.shape(), axis);
  if (begin >= end || end > v.len)
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for axis " + std::to_string(axis) + " of " + shape_str(a.shape()));
  Shape shape = a.shape();
  shape[axis] = end - begin;
  const std::size_t len = end - begin;
  std::vector<double> c(numel_of(shape));
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < v.inner; ++i)
        c[(o * len + l) * v.inner + i] = a[(o * v.len + begin + l) * v.inner + i];
  const bool track = any_requires_grad({&a});
  Tensor out = result(std::move(shape), std::move(c), track);
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, v, begin, len] {
      auto& ga = *gbuf(ai);
      const auto& g = *oi->grad;
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
          for (std::size_t i = 0; i < v.inner; ++i)
            ga[(o * v.len + begin + l) * v.inner + i] += g[(o * len + l) * v.inner + i];
    });
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> t(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) t[j * r + i] = a[i * c + j];
  const bool track = any_requires_grad({&a});
  Tensor out = result({c, r}, std::move(t), track);
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, r, c] {
      auto& ga = *gbuf(ai);
      const auto& g = *oi->grad;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel())
    throw ShapeError("reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  const bool track = any_requires_grad({&a});
  Tensor out = result(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()), track);
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi] {
      auto& ga = *gbuf(ai);
      const auto& g = *oi->grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows) {
  require_rank(a, 2, "gather_rows");
  if (rows.empty()) throw ShapeError("gather_rows with no rows");
  const std::size_t cols = a.dim(1);
  std::vector<double> c(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.dim(0)) throw ShapeError("gather_rows index out of range");
    std::copy_n(a.data().begin() + rows[r] * cols, cols, c.begin() + r * cols);
  }
  const bool track = any_requires_grad({&a});
  Tensor out = result({rows.size(), cols}, std::move(c), track);
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, rows, cols] {
      auto& ga = *gbuf(ai);
      const auto& g = *oi->grad;
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t j = 0; j < cols; ++j) ga[rows[r] * cols + j] += g[r * cols + j];
    });
  }
  return out;
}

namespace {

// Elementwise op with derivative f'(x) evaluated from the input value.
template <class F, class DF>
Tensor unary(const Tensor& a, const char* name, F f, DF df) {
  const std::size_t n = a.numel();
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = f(a[i]);
  const bool track = any_requires_grad({&a});
  Tensor out = result(a.shape(), std::move(c), track);
  check_finite(out, name);
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, n, df] {
      auto& ga = *gbuf(ai);
      const auto& g = *oi->grad;
      for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * df(ai->data[i]);
    });
  }
  return out;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Tensor relu(const Tensor& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x) { return x > 0.0 ? 1.0 : slope; });
}

Tensor gelu(const Tensor& a) {
  return unary(
      a, "gelu",
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); },
      [](double x) {
        const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      });
}

Tensor log(const Tensor& a) {
  return unary(
      a, "log", [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Tensor softmax(const Tensor& a, std::size_t axis) {
  const auto v = axis_view(a.shape(), axis);
  std::vector<double> y(a.numel());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      auto idx = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
      double mx = a[idx(0)];
      for (std::size_t l = 1; l < v.len; ++l) mx = std::max(mx, a[idx(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) z += (y[idx(l)] = std::exp(a[idx(l)] - mx));
      for (std::size_t l = 0; l < v.len; ++l) y[idx(l)] /= z;
    }
  const bool track = any_requires_grad({&a});
  Tensor out = result(a.shape(), std::move(y), track);
  check_finite(out, "softmax");
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, v] {
      auto& ga = *gbuf(ai);
      const auto& g = *oi->grad;
      const auto& y = oi->data;
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.inner; ++i) {
          auto idx = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
          double s = 0.0;
          for (std::size_t l = 0; l < v.len; ++l) s += g[idx(l)] * y[idx(l)];
          for (std::size_t l = 0; l < v.len; ++l) ga[idx(l)] += y[idx(l)] * (g[idx(l)] - s);
        }
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& a, std::size_t axis) {
  const auto v = axis_view(a.shape(), axis);
  std::vector<double> y(a.numel());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      auto idx = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
      double mx = a[idx(0)];
      for (std::size_t l = 1; l < v.len; ++l) mx = std::max(mx, a[idx(l)]);
      double z = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) z += std::exp(a[idx(l)] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t l = 0; l < v.len; ++l) y[idx(l)] = a[idx(l)] - lse;
    }
  const bool track = any_requires_grad({&a});
  Tensor out = result(a.shape(), std::move(y), track);
  check_finite(out, "log_softmax");
  if (track) {
    auto* ai = a.impl();
    auto* oi = out.impl();
    record(out, {&a}, [ai, oi, v] {
      auto& ga = *gbuf(ai);
      const auto& g = *oi->grad;
      const auto& y = oi->data;
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.inner; ++i) {
          auto idx = [&](std::size_t l) { return (o * v.len + l) * v.inner + i; };
          double s = 0.0;
          for (std::size_t l = 0; l < v.len; ++l) s += g[idx(l)];
          for (std::size_t l = 0; l < v.len; ++l) ga[idx(l)] += g[idx(l)] - std::exp(y[idx(l)]) * s;
        }
    });
  }
  return out;
}

Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  require_rank(x, 2, "group_norm");
  const std::size_t C = x.dim(0), T = x.dim(1);
  if (groups == 0 || C % groups != 0)
    throw ShapeError("group_norm: " + std::to_string(C) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  if (gamma.defined() && gamma.shape() != Shape{C})
    throw ShapeError("group_norm: gamma " + shape_str(gamma.shape()) + " for " + std::to_string(C) + " channels");
  if (beta.defined() && beta.shape() != Shape{C})
    throw ShapeError("group_norm: beta " + shape_str(beta.shape()) + " for " + std::to_string(C) + " channels");
  const std::size_t cg = C / groups;
  const std::size_t count = cg * T;
  std::vector<double> xhat(C * T), inv_std(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const double* base = x.data().data() + g * count;
    double mu = 0.0;
    for (std::size_t i = 0; i < count; ++i) mu += base[i];
    mu /= static_cast<double>(count);
    double var = 0.0;
    for (std::size_t i = 0; i < count; ++i) var += (base[i] - mu) * (base[i] - mu);
    var /= static_cast<double>(count);
    inv_std[g] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < count; ++i) xhat[g * count + i] = (base[i] - mu) * inv_std[g];
  }
  std::vector<double> y(C * T);
  for (std::size_t c = 0; c < C; ++c) {
    const double ga = gamma.defined() ? gamma[c] : 1.0;
    const double be = beta.defined() ? beta[c] : 0.0;
    for (std::size_t t = 0; t < T; ++t) y[c * T + t] = ga * xhat[c * T + t] + be;
  }
  const bool track = any_requires_grad({&x, &gamma, &beta});
  Tensor out = result({C, T}, std::move(y), track);
  check_finite(out, "group_norm");
  if (track) {
    auto* xi = x.impl();
    auto* gi = gamma.defined() ? gamma.impl() : nullptr;
    auto* bi = beta.defined() ? beta.impl() : nullptr;
    auto* oi = out.impl();
    record(out, {&x, &gamma, &beta},
           [xi, gi, bi, oi, xhat = std::move(xhat), inv_std = std::move(inv_std), C, T, groups, cg, count] {
             const auto& g = *oi->grad;
             if (auto* gg = gbuf(gi))
               for (std::size_t c = 0; c < C; ++c)
                 for (std::size_t t = 0; t < T; ++t) (*gg)[c] += g[c * T + t] * xhat[c * T + t];
             if (auto* gb = gbuf(bi))
               for (std::size_t c = 0; c < C; ++c)
                 for (std::size_t t = 0; t < T; ++t) (*gb)[c] += g[c * T + t];
             auto* gx = gbuf(xi);
             if (!gx) return;
             std::vector<double> dxhat(cg * T);
             const double n = static_cast<double>(count);
             for (std::size_t grp = 0; grp < groups; ++grp) {
               double s1 = 0.0, s2 = 0.0;
               for (std::size_t i = 0; i < count; ++i) {
                 const std::size_t idx = grp * count + i;
                 const double ga = gi ? gi->data[idx / T] : 1.0;
                 dxhat[i] = g[idx] * ga;
                 s1 += dxhat[i];
                 s2 += dxhat[i] * xhat[idx];
               }
               for (std::size_t i = 0; i < count; ++i) {
                 const std::size_t idx = grp * count + i;
                 (*gx)[idx] += inv_std[grp] / n * (n * dxhat[i] - s1 - xhat[idx] * s2);
               }
             }
           });
  }
  return out;
}

Tensor cosine_similarity_rows(const Tensor& a, const Tensor& b, double eps) {
  require_rank(a, 2, "cosine_similarity_rows");
  if (a.shape() != b.shape())
    throw ShapeError("cosine_similarity_rows: shapes differ, " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const std::size_t rows = a.dim(0), d = a.dim(1);
  std::vector<double> c(rows), na(rows), nb(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      ab += a[r * d + j] * b[r * d + j];
      aa += a[r * d + j] * a[r * d + j];
      bb += b[r * d + j] * b[r * d + j];
    }
    na[r] = std::sqrt(aa);
    nb[r] = std::sqrt(bb);
    c[r] = ab / std::max(na[r] * nb[r], eps);
  }
  const bool track = any_requires_grad({&a, &b});
  Tensor out = result({rows}, std::move(c), track);
  check_finite(out, "cosine_similarity_rows");
  if (track) {
    auto* ai = a.impl();
    auto* bi = b.impl();
    auto* oi = out.impl();
    record(out, {&a, &b}, [ai, bi, oi, rows, d, na = std::move(na), nb = std::move(nb), eps] {
      const auto& g = *oi->grad;
      auto* ga = gbuf(ai);
      auto* gb = gbuf(bi);
      for (std::size_t r = 0; r < rows; ++r) {
        const double denom = na[r] * nb[r];
        const double cr = oi->data[r];
        const bool clamped = denom < eps;
        const double den = clamped ? eps : denom;
        for (std::size_t j = 0; j < d; ++j) {
          const double av = ai->data[r * d + j], bv = bi->data[r * d + j];
          if (ga) (*ga)[r * d + j] += g[r] * (bv / den - (clamped ? 0.0 : cr * av / (na[r] * na[r])));
          if (gb) (*gb)[r * d + j] += g[r] * (av / den - (clamped ? 0.0 : cr * bv / (nb[r] * nb[r])));
        }
      }
    });
  }
  return out;
}

}  // namespace ega::ad
