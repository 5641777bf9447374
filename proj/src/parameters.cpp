#include "ega/parameters.hpp"

#include <stdexcept>

namespace ega {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

ad::Tensor& ParameterSet::add(std::string name, ad::Tensor value, bool trainable) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  value.set_requires_grad(trainable);
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.back().value;
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

ad::Tensor& ParameterSet::get(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + std::string(name));
  return params_[it->second].value;
}

const ad::Tensor& ParameterSet::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + std::string(name));
  return params_[it->second].value;
}

void ParameterSet::set_trainable(std::string_view prefix, bool trainable) {
  for (auto& p : params_)
    if (p.name.starts_with(prefix)) p.value.set_requires_grad(trainable);
}

std::size_t ParameterSet::count(bool trainable_only) const { return count_prefix("", trainable_only); }

std::size_t ParameterSet::count_prefix(std::string_view prefix, bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.name.starts_with(prefix) && (!trainable_only || p.trainable())) n += p.value.numel();
  return n;
}

std::uint64_t ParameterSet::digest(std::string_view prefix) const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& p : params_) {
    if (!p.name.starts_with(prefix)) continue;
    h = fnv1a(p.name.data(), p.name.size(), h);
    h = fnv1a(p.value.shape().data(), p.value.shape().size() * sizeof(std::size_t), h);
    h = fnv1a(p.value.data().data(), p.value.numel() * sizeof(double), h);
  }
  return h;
}

void ParameterSet::clear_grads() {
  for (auto& p : params_) p.value.clear_grad();
}

void ParameterSet::merge(ParameterSet&& other) {
  for (auto& p : other.params_) {
    const bool t = p.trainable();
    add(std::move(p.name), std::move(p.value), t);
  }
  other.params_.clear();
  other.index_.clear();
}

}  // namespace ega
