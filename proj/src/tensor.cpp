#include "ega/tensor.hpp"

#include <atomic>
#include <sstream>
#include <stdexcept>

#include "ega/errors.hpp"

namespace ega::ad {

namespace {

#ifdef NDEBUG
std::atomic<bool> g_numeric_checks{false};
#else
std::atomic<bool> g_numeric_checks{true};
#endif

thread_local bool t_grad_enabled = true;

}  // namespace

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  impl_->data.assign(numel_of(shape), fill);
  impl_->shape = std::move(shape);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  if (data.size() != numel_of(shape))
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                     shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values), requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
  return impl_->data[0];
}

double& Tensor::at(std::size_t row, std::size_t col) {
  return impl_->data[row * impl_->shape.back() + col];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return impl_->data[row * impl_->shape.back() + col];
}

void Tensor::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  if (!flag) impl_->grad.reset();
}

std::span<const double> Tensor::grad() const {
  if (!impl_->grad) throw std::logic_error("tensor has no gradient");
  return *impl_->grad;
}

std::vector<double>& Tensor::grad_buffer() {
  if (!impl_->grad) impl_->grad.emplace(impl_->data.size(), 0.0);
  return *impl_->grad;
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

Tensor Tensor::clone() const { return Tensor(shape(), impl_->data, impl_->requires_grad); }

void Tape::record(std::vector<std::shared_ptr<TensorImpl>> inputs,
                  std::shared_ptr<TensorImpl> output, BackwardFn fn) {
  if (consumed_) throw std::logic_error("tape already consumed by backward(); call reset() first");
  records_.push_back(Record{std::move(inputs), std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward on undefined tensor");
  if (loss.numel() != 1)
    throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
  if (consumed_) throw std::logic_error("backward called twice without reset");
  if (!loss.requires_grad()) throw std::logic_error("loss does not require grad");
  consumed_ = true;
  auto* root = loss.impl();
  if (!root->grad) root->grad.emplace(1, 0.0);
  (*root->grad)[0] += 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (it->output->grad) it->fn();
  }
}

void Tape::reset() {
  records_.clear();
  records_.shrink_to_fit();
  consumed_ = false;
}

Tape& Tape::active() {
  thread_local Tape tape;
  return tape;
}

void backward(const Tensor& loss) { Tape::active().backward(loss); }

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void set_numeric_checks(bool enabled) { g_numeric_checks = enabled; }
bool numeric_checks() { return g_numeric_checks; }

}  // namespace ega::ad
