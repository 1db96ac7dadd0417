// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lookaround/autodiff/param_store.hpp"
#include "lookaround/error.hpp"

namespace lookaround::ad {

/// Handle to a value recorded on a Tape.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
  friend bool operator==(const Var&, const Var&) = default;
};

template <typename S>
struct Seed {
  Var root;
  S gradient;
};

/// Append-only record of executed primitives over one ParamStore.
///
/// Parameter gradients are accumulated into a Gradients sink, which is the
/// tape's own unless one is supplied. Frozen parameters (trainable == false)
/// receive no gradient, though gradients still flow through them.
template <typename S>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, Var)>;

  explicit Tape(const ParamStore<S>& params, Gradients<S>* sink = nullptr)
      : params_(&params),
        own_grads_(params.size()),
        sink_(sink != nullptr ? sink : &own_grads_),
        trainable_(params.size(), 1) {
    require(sink_->size() == params.size(), ErrorCode::kShapeMismatch,
            "gradient sink does not match parameter store");
  }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const ParamStore<S>& params() const { return *params_; }

  void set_trainable(std::vector<uint8_t> mask) {
    require(mask.size() == params_->size(), ErrorCode::kShapeMismatch,
            "trainable mask size mismatch");
    trainable_ = std::move(mask);
  }
  bool trainable(int param) const { return trainable_[param] != 0; }

  Var leaf(std::vector<S> value, bool requires_grad = false) {
    return record(std::move(value), requires_grad, nullptr);
  }

  Var record(std::vector<S> value, bool requires_grad, BackwardFn backward) {
    nodes_.push_back({std::move(value), {}, requires_grad, std::move(backward)});
    return Var{static_cast<int32_t>(nodes_.size() - 1)};
  }

  size_t size() const { return nodes_.size(); }

  const std::vector<S>& value(Var v) const { return node(v).value; }
  S scalar(Var v) const {
    const auto& val = value(v);
    require(val.size() == 1, ErrorCode::kShapeMismatch, "not a scalar");
    return val[0];
  }
  bool requires_grad(Var v) const { return node(v).requires_grad; }

  /// Accumulated gradient of a recorded value after backward(); empty when
  /// nothing reached it.
  std::span<const S> grad(Var v) const { return node(v).grad; }

  /// Buffer that a backward function adds into; allocated on first use.
  std::vector<S>& grad_buffer(Var v) {
    auto& n = node(v);
    if (n.grad.empty()) n.grad.assign(n.value.size(), S(0));
    return n.grad;
  }

  /// Parameter gradient buffer, or nullptr when the parameter is frozen.
  std::vector<S>* param_grad(int param) {
    if (!trainable(param)) return nullptr;
    return &sink_->accumulate(param, params_->value(param).size());
  }

  Gradients<S>& param_grads() { return *sink_; }

  /// Reverse pass over the whole tape, seeded at one or more scalar roots.
  /// Value gradients are reset first; parameter gradients accumulate.
  void backward(std::span<const Seed<S>> roots) {
    for (auto& n : nodes_) n.grad.clear();
    for (const auto& seed : roots) {
      require(seed.root.valid() && seed.root.id < static_cast<int32_t>(nodes_.size()),
              ErrorCode::kContract, "backward: unrecorded root");
      require(value(seed.root).size() == 1, ErrorCode::kContract,
              "backward: root is not a scalar");
      if (!requires_grad(seed.root)) continue;
      grad_buffer(seed.root)[0] += seed.gradient;
    }
    for (int32_t id = static_cast<int32_t>(nodes_.size()) - 1; id >= 0; --id) {
      auto& n = nodes_[id];
      if (n.grad.empty() || !n.backward) continue;
      n.backward(*this, Var{id});
    }
  }

  void backward(Var root, S seed = S(1)) {
    const Seed<S> s{root, seed};
    backward(std::span<const Seed<S>>(&s, 1));
  }

 private:
  struct Node {
    std::vector<S> value;
    std::vector<S> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Node& node(Var v) {
    require(v.valid() && v.id < static_cast<int32_t>(nodes_.size()),
            ErrorCode::kContract, "invalid tape variable");
    return nodes_[v.id];
  }
  const Node& node(Var v) const {
    require(v.valid() && v.id < static_cast<int32_t>(nodes_.size()),
            ErrorCode::kContract, "invalid tape variable");
    return nodes_[v.id];
  }

  const ParamStore<S>* params_;
  Gradients<S> own_grads_;
  Gradients<S>* sink_;
  std::vector<uint8_t> trainable_;
  std::vector<Node> nodes_;
};

}  // namespace lookaround::ad
