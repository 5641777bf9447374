#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ega::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::optional<std::vector<double>> grad;
  bool requires_grad = false;
};

/// Dense row-major float64 array. Copies of a Tensor share storage; use
/// clone() or detach() for an independent buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double item() const;
  double& operator[](std::size_t i) { return impl_->data[i]; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return impl_->requires_grad; }
  /// Clearing the flag also drops any stored gradient.
  void set_requires_grad(bool flag);

  bool has_grad() const { return impl_->grad.has_value(); }
  std::span<const double> grad() const;
  /// Gradient storage, allocated as zeros on first access.
  std::vector<double>& grad_buffer();
  void clear_grad() { impl_->grad.reset(); }

  /// New tensor with copied data, no gradient, not tracked.
  Tensor detach() const;
  Tensor clone() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& shared() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

/// Records differentiable operations in execution order and replays their
/// backward rules in reverse. One tape per thread; see Tape::active().
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(std::vector<std::shared_ptr<TensorImpl>> inputs,
              std::shared_ptr<TensorImpl> output, BackwardFn fn);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule once.
  void backward(const Tensor& loss);

  /// Drops all records and intermediate buffers and re-arms the tape.
  void reset();

  std::size_t size() const { return records_.size(); }
  bool consumed() const { return consumed_; }

  static Tape& active();

 private:
  struct Record {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn fn;
  };
  std::vector<Record> records_;
  bool consumed_ = false;
};

/// Runs backward on the calling thread's active tape.
void backward(const Tensor& loss);

bool grad_enabled();

/// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// NaN/Inf scanning after every op. Defaults to on unless NDEBUG.
void set_numeric_checks(bool enabled);
bool numeric_checks();

}  // namespace ega::ad
