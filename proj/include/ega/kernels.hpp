#pragma once

// Dense numeric kernels behind the autodiff ops.
//
// ega::kernels::serial holds the straightforward loop-nest reference used by
// the tests; the functions directly in ega::kernels are the blocked,
// OpenMP-parallel versions used at runtime. Parallel kernels partition work
// by output row only, so every output element is reduced in a fixed order and
// results are bitwise independent of the thread count.

#include <cstddef>
#include <span>

namespace ega::kernels {

struct Conv1dDims {
  std::size_t in_channels;
  std::size_t length;
  std::size_t out_channels;
  std::size_t kernel;
  std::size_t stride;
  std::size_t padding = 0;

  std::size_t out_length() const { return (length + 2 * padding - kernel) / stride + 1; }
};

namespace serial {

// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
// c[k x n] += a[m x k]^T * g[m x n]
void matmul_at_b_acc(std::span<const double> a, std::span<const double> g, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);
// c[m x k] += g[m x n] * b[k x n]^T
void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);

void conv1d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out, const Conv1dDims& d);
void conv1d_backward_input(std::span<const double> gout, std::span<const double> w,
                           std::span<double> dx, const Conv1dDims& d);
void conv1d_backward_weight(std::span<const double> gout, std::span<const double> x,
                            std::span<double> dw, std::span<double> dbias, const Conv1dDims& d);

}  // namespace serial

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b_acc(std::span<const double> a, std::span<const double> g, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);

void conv1d_forward(std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> out, const Conv1dDims& d);
void conv1d_backward_input(std::span<const double> gout, std::span<const double> w,
                           std::span<double> dx, const Conv1dDims& d);
void conv1d_backward_weight(std::span<const double> gout, std::span<const double> x,
                            std::span<double> dw, std::span<double> dbias, const Conv1dDims& d);

/// Thread count for the parallel kernels (1 disables OpenMP regions).
void set_num_threads(int n);
int num_threads();

}  // namespace ega::kernels
