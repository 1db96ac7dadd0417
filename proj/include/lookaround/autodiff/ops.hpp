// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lookaround/autodiff/tape.hpp"
#include "lookaround/error.hpp"
#include "lookaround/rng.hpp"

namespace lookaround::ad {

enum class Activation { kIdentity, kTanh, kRelu, kSigmoid };

Activation parse_activation(std::string_view name);
const char* activation_name(Activation kind);

namespace detail {

template <typename S>
using RowMajor = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
Eigen::Map<const Vec<S>> vmap(const std::vector<S>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}
template <typename S>
Eigen::Map<Vec<S>> vmap(std::vector<S>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

template <typename S>
S sigmoid(S x) {
  return x >= S(0) ? S(1) / (S(1) + std::exp(-x))
                   : std::exp(x) / (S(1) + std::exp(x));
}

template <typename S>
S apply(Activation kind, S x) {
  switch (kind) {
    case Activation::kIdentity: return x;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kRelu: return x > S(0) ? x : S(0);
    case Activation::kSigmoid: return sigmoid(x);
  }
  return x;
}

/// Derivative expressed through the activation's output y.
template <typename S>
S derivative_from_output(Activation kind, S y) {
  switch (kind) {
    case Activation::kIdentity: return S(1);
    case Activation::kTanh: return S(1) - y * y;
    case Activation::kRelu: return y > S(0) ? S(1) : S(0);
    case Activation::kSigmoid: return y * (S(1) - y);
  }
  return S(1);
}

}  // namespace detail

template <typename S>
Var constant(Tape<S>& tape, std::vector<S> values, bool requires_grad = false) {
  return tape.leaf(std::move(values), requires_grad);
}

/// y = W x + b with W of shape (out, in) and b of shape (out).
template <typename S>
Var affine(Tape<S>& tape, Var x, int w_id, int b_id) {
  const auto& params = tape.params();
  const auto& W = params.value(w_id);
  const auto& b = params.value(b_id);
  const auto& xv = tape.value(x);
  require(W.shape.size() == 2 && b.shape.size() == 1 && W.shape[0] == b.shape[0],
          ErrorCode::kShapeMismatch,
          "affine: bad parameter shapes for " + params.name(w_id));
  require(static_cast<size_t>(W.shape[1]) == xv.size(), ErrorCode::kShapeMismatch,
          "affine: input size " + std::to_string(xv.size()) + " does not match " +
              params.name(w_id));
  const int out = W.shape[0];
  const int in = W.shape[1];
  std::vector<S> y(b.data);
  Eigen::Map<const detail::RowMajor<S>> Wm(W.data.data(), out, in);
  detail::vmap(y).noalias() += Wm * detail::vmap(xv);

  const bool needs = tape.requires_grad(x) || tape.trainable(w_id) || tape.trainable(b_id);
  return tape.record(std::move(y), needs, [x, w_id, b_id, out, in](Tape<S>& t, Var self) {
    const auto& gy = t.grad(self);
    Eigen::Map<const detail::Vec<S>> g(gy.data(), out);
    const auto& Wt = t.params().value(w_id);
    Eigen::Map<const detail::RowMajor<S>> Wm(Wt.data.data(), out, in);
    if (auto* gw = t.param_grad(w_id)) {
      Eigen::Map<detail::RowMajor<S>> G(gw->data(), out, in);
      G.noalias() += g * detail::vmap(t.value(x)).transpose();
    }
    if (auto* gb = t.param_grad(b_id)) detail::vmap(*gb) += g;
    if (t.requires_grad(x)) detail::vmap(t.grad_buffer(x)).noalias() += Wm.transpose() * g;
  });
}

template <typename S>
Var affine(Tape<S>& tape, Var x, std::string_view w_name, std::string_view b_name) {
  return affine(tape, x, tape.params().id(w_name), tape.params().id(b_name));
}

template <typename S>
Var activation(Tape<S>& tape, Var x, Activation kind) {
  std::vector<S> y(tape.value(x));
  for (auto& v : y) v = detail::apply(kind, v);
  return tape.record(std::move(y), tape.requires_grad(x), [x, kind](Tape<S>& t, Var self) {
    const auto g = t.grad(self);
    const auto& yv = t.value(self);
    auto& gx = t.grad_buffer(x);
    for (size_t i = 0; i < yv.size(); ++i)
      gx[i] += g[i] * detail::derivative_from_output(kind, yv[i]);
  });
}

template <typename S>
Var concat(Tape<S>& tape, Var a, Var b) {
  std::vector<S> y(tape.value(a));
  const size_t na = y.size();
  const auto& bv = tape.value(b);
  y.insert(y.end(), bv.begin(), bv.end());
  const bool needs = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(y), needs, [a, b, na](Tape<S>& t, Var self) {
    const auto g = t.grad(self);
    if (t.requires_grad(a)) {
      auto& ga = t.grad_buffer(a);
      for (size_t i = 0; i < na; ++i) ga[i] += g[i];
    }
    if (t.requires_grad(b)) {
      auto& gb = t.grad_buffer(b);
      for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
    }
  });
}

template <typename S>
struct LstmState {
  Var h;
  Var c;
};

/// One LSTM step with parameters <prefix>.Wx (4H x in), <prefix>.Wh (4H x H)
/// and <prefix>.b (4H); gate blocks are ordered input, forget, cell, output.
template <typename S>
LstmState<S> lstm_step(Tape<S>& tape, Var x, Var h, Var c, std::string_view prefix) {
  const std::string p(prefix);
  const int wx = tape.params().id(p + ".Wx");
  const int wh = tape.params().id(p + ".Wh");
  const int bb = tape.params().id(p + ".b");
  const auto& Wx = tape.params().value(wx);
  const auto& Wh = tape.params().value(wh);
  const auto& b = tape.params().value(bb);
  const int H = static_cast<int>(tape.value(h).size());
  const int in = static_cast<int>(tape.value(x).size());
  require(tape.value(c).size() == static_cast<size_t>(H) && Wx.shape == std::vector<int>{4 * H, in} &&
              Wh.shape == std::vector<int>{4 * H, H} &&
              b.shape == std::vector<int>{4 * H},
          ErrorCode::kShapeMismatch, "lstm_step: inconsistent shapes under " + p);

  // Pre-activations.
  std::vector<S> pre(b.data);
  {
    Eigen::Map<const detail::RowMajor<S>> Wxm(Wx.data.data(), 4 * H, in);
    Eigen::Map<const detail::RowMajor<S>> Whm(Wh.data.data(), 4 * H, H);
    detail::vmap(pre).noalias() += Wxm * detail::vmap(tape.value(x));
    detail::vmap(pre).noalias() += Whm * detail::vmap(tape.value(h));
  }
  const bool pre_needs = tape.requires_grad(x) || tape.requires_grad(h) ||
                         tape.trainable(wx) || tape.trainable(wh) || tape.trainable(bb);
  const Var pre_var = tape.record(std::move(pre), pre_needs,
      [x, h, wx, wh, bb, H, in](Tape<S>& t, Var self) {
        const auto& gv = t.grad(self);
        Eigen::Map<const detail::Vec<S>> g(gv.data(), 4 * H);
        const auto& Wxv = t.params().value(wx);
        const auto& Whv = t.params().value(wh);
        Eigen::Map<const detail::RowMajor<S>> Wxm(Wxv.data.data(), 4 * H, in);
        Eigen::Map<const detail::RowMajor<S>> Whm(Whv.data.data(), 4 * H, H);
        if (auto* gw = t.param_grad(wx)) {
          Eigen::Map<detail::RowMajor<S>> G(gw->data(), 4 * H, in);
          G.noalias() += g * detail::vmap(t.value(x)).transpose();
        }
        if (auto* gw = t.param_grad(wh)) {
          Eigen::Map<detail::RowMajor<S>> G(gw->data(), 4 * H, H);
          G.noalias() += g * detail::vmap(t.value(h)).transpose();
        }
        if (auto* gb = t.param_grad(bb)) detail::vmap(*gb) += g;
        if (t.requires_grad(x)) detail::vmap(t.grad_buffer(x)).noalias() += Wxm.transpose() * g;
        if (t.requires_grad(h)) detail::vmap(t.grad_buffer(h)).noalias() += Whm.transpose() * g;
      });

  // Gate activations: sigmoid on i, f, o and tanh on g.
  std::vector<S> gates(tape.value(pre_var));
  for (int k = 0; k < 4 * H; ++k) {
    const bool cell_block = k >= 2 * H && k < 3 * H;
    gates[k] = cell_block ? std::tanh(gates[k]) : detail::sigmoid(gates[k]);
  }
  const Var gates_var = tape.record(std::move(gates), pre_needs, [pre_var, H](Tape<S>& t, Var self) {
    const auto g = t.grad(self);
    const auto& y = t.value(self);
    auto& gp = t.grad_buffer(pre_var);
    for (int k = 0; k < 4 * H; ++k) {
      const bool cell_block = k >= 2 * H && k < 3 * H;
      gp[k] += g[k] * (cell_block ? S(1) - y[k] * y[k] : y[k] * (S(1) - y[k]));
    }
  });

  // c' = f * c + i * g
  const auto& gv = tape.value(gates_var);
  const auto& cprev = tape.value(c);
  std::vector<S> c_next(H);
  for (int k = 0; k < H; ++k) c_next[k] = gv[H + k] * cprev[k] + gv[k] * gv[2 * H + k];
  const bool c_needs = pre_needs || tape.requires_grad(c);
  const Var c_var = tape.record(std::move(c_next), c_needs, [gates_var, c, H](Tape<S>& t, Var self) {
    const auto g = t.grad(self);
    const auto& gt = t.value(gates_var);
    const auto& cprev = t.value(c);
    if (t.requires_grad(gates_var)) {
      auto& gg = t.grad_buffer(gates_var);
      for (int k = 0; k < H; ++k) {
        gg[k] += g[k] * gt[2 * H + k];      // i
        gg[H + k] += g[k] * cprev[k];       // f
        gg[2 * H + k] += g[k] * gt[k];      // g
      }
    }
    if (t.requires_grad(c)) {
      auto& gc = t.grad_buffer(c);
      for (int k = 0; k < H; ++k) gc[k] += g[k] * gt[H + k];
    }
  });

  // h' = o * tanh(c')
  const auto& cn = tape.value(c_var);
  const auto& gv2 = tape.value(gates_var);
  std::vector<S> h_next(H);
  for (int k = 0; k < H; ++k) h_next[k] = gv2[3 * H + k] * std::tanh(cn[k]);
  const Var h_var = tape.record(std::move(h_next), c_needs, [gates_var, c_var, H](Tape<S>& t, Var self) {
    const auto g = t.grad(self);
    const auto& gt = t.value(gates_var);
    const auto& cn2 = t.value(c_var);
    if (t.requires_grad(gates_var)) {
      auto& gg = t.grad_buffer(gates_var);
      for (int k = 0; k < H; ++k) gg[3 * H + k] += g[k] * std::tanh(cn2[k]);
    }
    if (t.requires_grad(c_var)) {
      auto& gc = t.grad_buffer(c_var);
      for (int k = 0; k < H; ++k) {
        const S th = std::tanh(cn2[k]);
        gc[k] += g[k] * gt[3 * H + k] * (S(1) - th * th);
      }
    }
  });
  return {h_var, c_var};
}

/// Numerically stable softmax (max subtracted); rejects non-finite logits.
template <typename S>
Var softmax(Tape<S>& tape, Var logits) {
  const auto& z = tape.value(logits);
  require(!z.empty(), ErrorCode::kShapeMismatch, "softmax: empty input");
  for (S v : z)
    require(std::isfinite(v), ErrorCode::kInvalidArgument, "softmax: non-finite logit");
  const S m = *std::max_element(z.begin(), z.end());
  std::vector<S> p(z.size());
  S total = 0;
  for (size_t i = 0; i < z.size(); ++i) total += (p[i] = std::exp(z[i] - m));
  for (auto& v : p) v /= total;
  return tape.record(std::move(p), tape.requires_grad(logits), [logits](Tape<S>& t, Var self) {
    const auto g = t.grad(self);
    const auto& pv = t.value(self);
    S dot = 0;
    for (size_t i = 0; i < pv.size(); ++i) dot += g[i] * pv[i];
    auto& gz = t.grad_buffer(logits);
    for (size_t i = 0; i < pv.size(); ++i) gz[i] += pv[i] * (g[i] - dot);
  });
}

/// ln probs[index] as a recorded scalar.
template <typename S>
Var log_pick(Tape<S>& tape, Var probs, int index) {
  const auto& p = tape.value(probs);
  require(index >= 0 && static_cast<size_t>(index) < p.size(), ErrorCode::kContract,
          "log_pick: index out of range");
  return tape.record({std::log(p[index])}, tape.requires_grad(probs),
                     [probs, index](Tape<S>& t, Var self) {
                       const S g = t.grad(self)[0];
                       t.grad_buffer(probs)[index] += g / t.value(probs)[index];
                     });
}

template <typename S>
struct Sample {
  int index = 0;
  Var log_prob;
};

/// Inverse-CDF draw from the recorded distribution `probs`.
template <typename S>
int inverse_cdf(std::span<const S> p, double u) {
  double acc = 0.0;
  int last_positive = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] > S(0)) last_positive = static_cast<int>(i);
    acc += static_cast<double>(p[i]);
    if (u < acc && p[i] > S(0)) return static_cast<int>(i);
  }
  return last_positive;
}

template <typename S>
Sample<S> categorical_sample(Tape<S>& tape, Var probs, RngStream& rng) {
  const auto& p = tape.value(probs);
  double total = 0.0;
  for (S v : p) {
    require(v >= S(0), ErrorCode::kInvalidArgument, "categorical_sample: negative probability");
    total += static_cast<double>(v);
  }
  require(std::abs(total - 1.0) <= 1e-5, ErrorCode::kInvalidArgument,
          "categorical_sample: probabilities not normalized");
  const int index = inverse_cdf<S>(p, rng.uniform());
  return {index, log_pick(tape, probs, index)};
}

/// Masked mean squared error against a constant target; the mask (if any)
/// holds one flag per element.
template <typename S>
Var mse(Tape<S>& tape, Var pred, std::span<const S> target,
        std::span<const uint8_t> mask = {}) {
  const auto& pv = tape.value(pred);
  require(pv.size() == target.size(), ErrorCode::kShapeMismatch, "mse: size mismatch");
  require(mask.empty() || mask.size() == pv.size(), ErrorCode::kShapeMismatch,
          "mse: mask size mismatch");
  S sum = 0;
  size_t count = 0;
  for (size_t i = 0; i < pv.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const S d = pv[i] - target[i];
    sum += d * d;
    ++count;
  }
  const S inv = count == 0 ? S(0) : S(1) / static_cast<S>(count);
  std::vector<S> tgt(target.begin(), target.end());
  std::vector<uint8_t> m(mask.begin(), mask.end());
  return tape.record({sum * inv}, tape.requires_grad(pred),
                     [pred, tgt = std::move(tgt), m = std::move(m), inv](Tape<S>& t, Var self) {
                       const S g = t.grad(self)[0];
                       const auto& p = t.value(pred);
                       auto& gp = t.grad_buffer(pred);
                       for (size_t i = 0; i < p.size(); ++i) {
                         if (!m.empty() && !m[i]) continue;
                         gp[i] += g * S(2) * (p[i] - tgt[i]) * inv;
                       }
                     });
}

/// Overwrites spans of `x`; gradient reaches x only where not overwritten.
template <typename S>
struct PasteRange {
  size_t offset;
  std::span<const float> values;
};

template <typename S>
Var paste(Tape<S>& tape, Var x, std::span<const PasteRange<S>> ranges) {
  std::vector<S> y(tape.value(x));
  std::vector<uint8_t> pasted(y.size(), 0);
  for (const auto& r : ranges) {
    require(r.offset + r.values.size() <= y.size(), ErrorCode::kShapeMismatch,
            "paste: range out of bounds");
    for (size_t i = 0; i < r.values.size(); ++i) {
      y[r.offset + i] = static_cast<S>(r.values[i]);
      pasted[r.offset + i] = 1;
    }
  }
  return tape.record(std::move(y), tape.requires_grad(x),
                     [x, pasted = std::move(pasted)](Tape<S>& t, Var self) {
                       const auto g = t.grad(self);
                       auto& gx = t.grad_buffer(x);
                       for (size_t i = 0; i < gx.size(); ++i)
                         if (!pasted[i]) gx[i] += g[i];
                     });
}

/// Σ weights[i] * terms[i] over scalar terms.
template <typename S>
Var weighted_sum(Tape<S>& tape, std::span<const Var> terms, std::span<const S> weights) {
  require(terms.size() == weights.size(), ErrorCode::kShapeMismatch,
          "weighted_sum: size mismatch");
  S total = 0;
  bool needs = false;
  for (size_t i = 0; i < terms.size(); ++i) {
    total += weights[i] * tape.scalar(terms[i]);
    needs = needs || tape.requires_grad(terms[i]);
  }
  std::vector<Var> ts(terms.begin(), terms.end());
  std::vector<S> ws(weights.begin(), weights.end());
  return tape.record({total}, needs, [ts = std::move(ts), ws = std::move(ws)](Tape<S>& t, Var self) {
    const S g = t.grad(self)[0];
    for (size_t i = 0; i < ts.size(); ++i)
      if (t.requires_grad(ts[i])) t.grad_buffer(ts[i])[0] += g * ws[i];
  });
}

template <typename S>
Var sum_scalars(Tape<S>& tape, std::span<const Var> terms) {
  std::vector<S> ones(terms.size(), S(1));
  return weighted_sum<S>(tape, terms, ones);
}

/// Σ of all elements of a recorded tensor.
template <typename S>
Var reduce_sum(Tape<S>& tape, Var x) {
  S total = 0;
  for (S v : tape.value(x)) total += v;
  return tape.record({total}, tape.requires_grad(x), [x](Tape<S>& t, Var self) {
    const S g = t.grad(self)[0];
    for (auto& v : t.grad_buffer(x)) v += g;
  });
}

/// -ln softmax(logits)[label], computed with log-sum-exp.
template <typename S>
Var cross_entropy(Tape<S>& tape, Var logits, int label) {
  const auto& z = tape.value(logits);
  require(label >= 0 && static_cast<size_t>(label) < z.size(), ErrorCode::kContract,
          "cross_entropy: label out of range");
  const S m = *std::max_element(z.begin(), z.end());
  S total = 0;
  for (S v : z) total += std::exp(v - m);
  const S lse = m + std::log(total);
  return tape.record({lse - z[label]}, tape.requires_grad(logits),
                     [logits, label, lse](Tape<S>& t, Var self) {
                       const S g = t.grad(self)[0];
                       const auto& zv = t.value(logits);
                       auto& gz = t.grad_buffer(logits);
                       for (size_t i = 0; i < zv.size(); ++i)
                         gz[i] += g * (std::exp(zv[i] - lse) - (static_cast<int>(i) == label ? S(1) : S(0)));
                     });
}

}  // namespace lookaround::ad
