// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lookaround/autodiff/tensor.hpp"
#include "lookaround/error.hpp"

namespace lookaround::ad {

/// Named parameters in insertion order, each with a momentum buffer.
template <typename S>
class ParamStore {
 public:
  int add(std::string name, Tensor<S> value) {
    require(!name.empty(), ErrorCode::kInvalidArgument, "empty parameter name");
    require(!index_.contains(name), ErrorCode::kInvalidArgument,
            "duplicate parameter '" + name + "'");
    const int id = static_cast<int>(entries_.size());
    index_.emplace(name, id);
    Tensor<S> velocity(value.shape);
    entries_.push_back({std::move(name), std::move(value), std::move(velocity)});
    return id;
  }

  /// -1 when absent.
  int find(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    return it == index_.end() ? -1 : it->second;
  }
  int id(std::string_view name) const {
    const int i = find(name);
    require(i >= 0, ErrorCode::kUnknownName,
            "unknown parameter '" + std::string(name) + "'");
    return i;
  }
  bool contains(std::string_view name) const { return find(name) >= 0; }

  size_t size() const { return entries_.size(); }
  const std::string& name(int i) const { return entries_[i].name; }
  const Tensor<S>& value(int i) const { return entries_[i].value; }
  Tensor<S>& value(int i) { return entries_[i].value; }
  const Tensor<S>& value(std::string_view n) const { return value(id(n)); }
  Tensor<S>& value(std::string_view n) { return value(id(n)); }
  const Tensor<S>& velocity(int i) const { return entries_[i].velocity; }
  Tensor<S>& velocity(int i) { return entries_[i].velocity; }

  size_t total_elements() const {
    size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  /// Module of a parameter: the name up to its first '.'.
  std::string module_of(int i) const {
    const auto& n = entries_[i].name;
    return n.substr(0, n.find('.'));
  }

  template <typename T>
  ParamStore<T> cast() const {
    ParamStore<T> out;
    for (const auto& e : entries_) {
      const int i = out.add(e.name, e.value.template cast<T>());
      out.velocity(i) = e.velocity.template cast<T>();
    }
    return out;
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (size_t i = 0; i < a.entries_.size(); ++i) {
      const auto& x = a.entries_[i];
      const auto& y = b.entries_[i];
      if (x.name != y.name || !(x.value == y.value) || !(x.velocity == y.velocity))
        return false;
    }
    return true;
  }

 private:
  struct Entry {
    std::string name;
    Tensor<S> value;
    Tensor<S> velocity;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

/// Gradient buffers parallel to a ParamStore; a buffer stays empty until
/// something accumulates into it.
template <typename S>
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(size_t param_count) : buffers_(param_count) {}

  template <typename P>
  static Gradients like(const ParamStore<P>& params) {
    return Gradients(params.size());
  }

  size_t size() const { return buffers_.size(); }
  bool has(int i) const { return !buffers_[i].empty(); }
  const std::vector<S>& get(int i) const { return buffers_[i]; }

  std::vector<S>& accumulate(int i, size_t n) {
    auto& b = buffers_[i];
    if (b.empty()) b.assign(n, S(0));
    return b;
  }

  void add(const Gradients& other, S scale = S(1)) {
    require(other.size() == size(), ErrorCode::kShapeMismatch,
            "gradient sets differ in size");
    for (size_t i = 0; i < buffers_.size(); ++i) {
      const auto& src = other.buffers_[i];
      if (src.empty()) continue;
      auto& dst = accumulate(static_cast<int>(i), src.size());
      for (size_t k = 0; k < src.size(); ++k) dst[k] += scale * src[k];
    }
  }

  void scale(S factor) {
    for (auto& b : buffers_)
      for (auto& v : b) v *= factor;
  }

  void clear() {
    for (auto& b : buffers_) b.clear();
  }

 private:
  std::vector<std::vector<S>> buffers_;
};

}  // namespace lookaround::ad
