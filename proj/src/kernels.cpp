#include "ega/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ega::kernels {

namespace {

std::atomic<int> g_threads{
#ifdef _OPENMP
    omp_get_max_threads()
#else
    1
#endif
};

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

// patches[(c*K + k) x T] = x[c][t*stride + k - padding], zero outside.
std::vector<double> im2col(std::span<const double> x, const Conv1dDims& d) {
  const std::size_t T = d.out_length();
  std::vector<double> p(d.in_channels * d.kernel * T, 0.0);
  for (std::size_t c = 0; c < d.in_channels; ++c) {
    const double* xc = x.data() + c * d.length;
    for (std::size_t k = 0; k < d.kernel; ++k) {
      double* row = p.data() + (c * d.kernel + k) * T;
      for (std::size_t t = 0; t < T; ++t) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * d.stride + k) -
                                   static_cast<std::ptrdiff_t>(d.padding);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(d.length)) row[t] = xc[pos];
      }
    }
  }
  return p;
}

}  // namespace

void set_num_threads(int n) { g_threads = std::max(1, n); }
int num_threads() { return g_threads; }

// ---------------------------------------------------------------------------
// Serial reference

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> g, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += a[i * k + p] * g[i * n + j];
      c[p * n + j] += s;
    }
}

void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * b[p * n + j];
      c[i * k + p] += s;
    }
}

void conv1d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out, const Conv1dDims& d) {
  const std::size_t T = d.out_length();
  for (std::size_t o = 0; o < d.out_channels; ++o)
    for (std::size_t t = 0; t < T; ++t) {
      double s = bias.empty() ? 0.0 : bias[o];
      for (std::size_t c = 0; c < d.in_channels; ++c)
        for (std::size_t k = 0; k < d.kernel; ++k) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * d.stride + k) -
                                     static_cast<std::ptrdiff_t>(d.padding);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(d.length)) continue;
          s += w[(o * d.in_channels + c) * d.kernel + k] * x[c * d.length + pos];
        }
      out[o * T + t] = s;
    }
}

void conv1d_backward_input(std::span<const double> gout, std::span<const double> w,
                           std::span<double> dx, const Conv1dDims& d) {
  const std::size_t T = d.out_length();
  for (std::size_t o = 0; o < d.out_channels; ++o)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < d.in_channels; ++c)
        for (std::size_t k = 0; k < d.kernel; ++k) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * d.stride + k) -
                                     static_cast<std::ptrdiff_t>(d.padding);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(d.length)) continue;
          dx[c * d.length + pos] += w[(o * d.in_channels + c) * d.kernel + k] * gout[o * T + t];
        }
}

void conv1d_backward_weight(std::span<const double> gout, std::span<const double> x,
                            std::span<double> dw, std::span<double> dbias, const Conv1dDims& d) {
  const std::size_t T = d.out_length();
  for (std::size_t o = 0; o < d.out_channels; ++o) {
    if (!dbias.empty())
      for (std::size_t t = 0; t < T; ++t) dbias[o] += gout[o * T + t];
    for (std::size_t c = 0; c < d.in_channels; ++c)
      for (std::size_t k = 0; k < d.kernel; ++k)
        for (std::size_t t = 0; t < T; ++t) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * d.stride + k) -
                                     static_cast<std::ptrdiff_t>(d.padding);
          if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(d.length)) continue;
          dw[(o * d.in_channels + c) * d.kernel + k] += gout[o * T + t] * x[c * d.length + pos];
        }
  }
}

}  // namespace serial

// ---------------------------------------------------------------------------
// Parallel

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const bool par = m * k * n >= kParallelWork && g_threads > 1;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(g_threads.load()) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    double* ci = c.data() + i * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip != 0.0) axpy(aip, b.data() + p * n, ci, n);
    }
  }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> g, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n) {
  const bool par = m * k * n >= kParallelWork && g_threads > 1;
  const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) num_threads(g_threads.load()) if (par)
  for (std::ptrdiff_t p = 0; p < rows; ++p) {
    double* cp = c.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = a[i * k + p];
      if (aip != 0.0) axpy(aip, g.data() + i * n, cp, n);
    }
  }
}

void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n) {
  const bool par = m * k * n >= kParallelWork && g_threads > 1;
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) num_threads(g_threads.load()) if (par)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const double* gi = g.data() + i * n;
    double* ci = c.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) ci[p] += dot(gi, b.data() + p * n, n);
  }
}

void conv1d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out, const Conv1dDims& d) {
  const std::size_t T = d.out_length();
  const std::size_t ck = d.in_channels * d.kernel;
  const auto patches = im2col(x, d);
  const bool par = d.out_channels * ck * T >= kParallelWork && g_threads > 1;
  const auto rows = static_cast<std::ptrdiff_t>(d.out_channels);
#pragma omp parallel for schedule(static) num_threads(g_threads.load()) if (par)
  for (std::ptrdiff_t o = 0; o < rows; ++o) {
    double* row = out.data() + o * T;
    std::fill(row, row + T, bias.empty() ? 0.0 : bias[o]);
    const double* wo = w.data() + o * ck;
    for (std::size_t q = 0; q < ck; ++q) axpy(wo[q], patches.data() + q * T, row, T);
  }
}

void conv1d_backward_input(std::span<const double> gout, std::span<const double> w,
                           std::span<double> dx, const Conv1dDims& d) {
  const std::size_t T = d.out_length();
  const std::size_t ck = d.in_channels * d.kernel;
  std::vector<double> dpatches(ck * T, 0.0);
  matmul_at_b_acc(w, gout, dpatches, d.out_channels, ck, T);
  const bool par = ck * T >= kParallelWork && g_threads > 1;
  const auto chans = static_cast<std::ptrdiff_t>(d.in_channels);
#pragma omp parallel for schedule(static) num_threads(g_threads.load()) if (par)
  for (std::ptrdiff_t c = 0; c < chans; ++c) {
    double* dxc = dx.data() + c * d.length;
    for (std::size_t k = 0; k < d.kernel; ++k) {
      const double* row = dpatches.data() + (c * d.kernel + k) * T;
      for (std::size_t t = 0; t < T; ++t) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * d.stride + k) -
                                   static_cast<std::ptrdiff_t>(d.padding);
        if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(d.length)) dxc[pos] += row[t];
      }
    }
  }
}

void conv1d_backward_weight(std::span<const double> gout, std::span<const double> x,
                            std::span<double> dw, std::span<double> dbias, const Conv1dDims& d) {
  const std::size_t T = d.out_length();
  const std::size_t ck = d.in_channels * d.kernel;
  const auto patches = im2col(x, d);
  matmul_a_bt_acc(gout, patches, dw, d.out_channels, ck, T);
  if (!dbias.empty())
    for (std::size_t o = 0; o < d.out_channels; ++o) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += gout[o * T + t];
      dbias[o] += s;
    }
}

}  // namespace ega::kernels
