// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "lookaround/autodiff/param_store.hpp"
#include "lookaround/error.hpp"

namespace lookaround::ad {

/// Momentum SGD: v <- momentum * v + g;  p <- p - lr * v.
///
/// Only parameters flagged in `update_mask` (all when empty) are touched,
/// and each of those must have a gradient.
template <typename S>
void sgd_step(ParamStore<S>& params, const Gradients<S>& grads, S lr, S momentum,
              const std::vector<uint8_t>& update_mask = {}) {
  require(grads.size() == params.size(), ErrorCode::kShapeMismatch,
          "sgd_step: gradient set does not match parameters");
  require(update_mask.empty() || update_mask.size() == params.size(),
          ErrorCode::kShapeMismatch, "sgd_step: mask size mismatch");
  for (size_t i = 0; i < params.size(); ++i) {
    if (!update_mask.empty() && !update_mask[i]) continue;
    const int id = static_cast<int>(i);
    require(grads.has(id), ErrorCode::kContract,
            "sgd_step: missing gradient for '" + params.name(id) + "'");
    auto& p = params.value(id).data;
    auto& v = params.velocity(id).data;
    const auto& g = grads.get(id);
    require(g.size() == p.size(), ErrorCode::kShapeMismatch,
            "sgd_step: gradient shape mismatch for '" + params.name(id) + "'");
    for (size_t k = 0; k < p.size(); ++k) {
      v[k] = momentum * v[k] + g[k];
      p[k] -= lr * v[k];
    }
  }
}

}  // namespace lookaround::ad
