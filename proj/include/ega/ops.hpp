#pragma once

// Differentiable tensor operations. Every op computes its value eagerly and,
// when an input requires grad and grad mode is on, records a backward rule on
// the calling thread's active tape.

#include <cstddef>
#include <vector>

#include "ega/tensor.hpp"

namespace ega::ad {

// [m x k] * [k x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [C_in x L], w: [C_out x C_in x K], bias: [C_out] or undefined.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t stride,
              std::size_t padding = 0);

/// Elementwise sum. `b` may match `a` exactly, be a vector over a's last axis
/// (row broadcast), or hold a single element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// Reductions over one axis of a rank-2 tensor; the axis is removed.
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Half-open range [begin, end) along `axis` of a rank-1 or rank-2 tensor.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor gather_rows(const Tensor& a, const std::vector<std::size_t>& rows);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
Tensor gelu(const Tensor& a);
Tensor log(const Tensor& a);
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);

/// x: [C x T]; statistics per group over (channels in group) x T, then a
/// per-channel affine map. gamma/beta may be undefined (identity affine).
Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

/// Row-wise cosine similarity of two [T x d] tensors, result [T].
Tensor cosine_similarity_rows(const Tensor& a, const Tensor& b, double eps = 1e-12);

}  // namespace ega::ad
