#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ega/tensor.hpp"

namespace ega {

struct Parameter {
  std::string name;
  ad::Tensor value;

  bool trainable() const { return value.requires_grad(); }
};

/// Ordered, named parameter collection. Names are dotted paths whose first
/// component is the owning module ("adapter.", "encoder.", "head.", ...).
class ParameterSet {
 public:
  /// Registers a parameter; the trainable flag is stored as requires_grad.
  ad::Tensor& add(std::string name, ad::Tensor value, bool trainable = true);

  bool contains(std::string_view name) const;
  ad::Tensor& get(std::string_view name);
  const ad::Tensor& get(std::string_view name) const;

  std::vector<Parameter>& items() { return params_; }
  const std::vector<Parameter>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// Sets the trainable flag on every parameter whose name starts with prefix.
  void set_trainable(std::string_view prefix, bool trainable);

  std::size_t count(bool trainable_only = true) const;
  std::size_t count_prefix(std::string_view prefix, bool trainable_only = true) const;

  /// FNV-1a over names, shapes, and raw value bytes of matching parameters.
  std::uint64_t digest(std::string_view prefix = "") const;

  void clear_grads();

  /// Moves every parameter from other into this set (names must be unique).
  void merge(ParameterSet&& other);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Marks every parameter under prefix frozen (excluded from updates).
inline void freeze(ParameterSet& params, std::string_view prefix) { params.set_trainable(prefix, false); }
inline void unfreeze(ParameterSet& params, std::string_view prefix) { params.set_trainable(prefix, true); }

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace ega
