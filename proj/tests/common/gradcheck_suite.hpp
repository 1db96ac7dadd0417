// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lookaround/autodiff/grad_check.hpp"
#include "lookaround/autodiff/ops.hpp"
#include "lookaround/autodiff/param_store.hpp"
#include "lookaround/autodiff/tape.hpp"
#include "lookaround/rng.hpp"

namespace lookaround::testing {

using ad::Tape;
using ad::Var;
using Params = ad::ParamStore<double>;
using Build = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

/// A scalar function of parameters and free inputs, built on a double tape.
struct GradProblem {
  Params params;
  std::vector<std::vector<double>> inputs;
  Build build;
};

inline double evaluate(const GradProblem& p) {
  Tape<double> tape(p.params);
  std::vector<Var> leaves;
  for (const auto& x : p.inputs) leaves.push_back(ad::constant(tape, x, true));
  return tape.scalar(p.build(tape, leaves));
}

/// Central differences on every parameter and input coordinate against one
/// backward pass; returns the largest relative error.
inline double max_relative_error(GradProblem& p, double eps = 1e-3) {
  Tape<double> tape(p.params);
  std::vector<Var> leaves;
  for (const auto& x : p.inputs) leaves.push_back(ad::constant(tape, x, true));
  const Var root = p.build(tape, leaves);
  tape.backward(root);

  std::function<double(const Params&)> fn = [&p](const Params& params) {
    GradProblem q{params, p.inputs, p.build};
    return evaluate(q);
  };
  double worst = 0.0;
  if (p.params.size() > 0) {
    const auto report = ad::grad_check<double>(fn, p.params, tape.param_grads(),
                                               ad::all_coordinates(p.params), eps);
    worst = report.max_rel_error;
  }
  for (size_t i = 0; i < p.inputs.size(); ++i) {
    const auto analytic = tape.grad(leaves[i]);
    for (size_t k = 0; k < p.inputs[i].size(); ++k) {
      const double saved = p.inputs[i][k];
      p.inputs[i][k] = saved + eps;
      const double up = evaluate(p);
      p.inputs[i][k] = saved - eps;
      const double down = evaluate(p);
      p.inputs[i][k] = saved;
      const double a = analytic.empty() ? 0.0 : analytic[k];
      worst = std::max(worst, ad::relative_error(a, (up - down) / (2 * eps)));
    }
  }
  return worst;
}

inline std::vector<double> uniform_vector(RngStream& rng, size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

/// Values bounded away from zero, for kinked activations.
inline std::vector<double> off_zero_vector(RngStream& rng, size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) {
    const double m = rng.uniform(0.05, 1.5);
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return v;
}

inline ad::Tensor<double> random_tensor(RngStream& rng, std::vector<int> shape, double scale) {
  ad::Tensor<double> t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

/// Reduces a vector node to a scalar with fixed random weights bounded away
/// from zero. Being linear, it adds no curvature of its own to the check.
inline Var readout(Tape<double>& tape, Var y, uint64_t seed) {
  RngStream rng(seed, StreamPurpose::kTest, 99);
  std::vector<double> w(tape.value(y).size());
  for (auto& v : w) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
  double total = 0.0;
  for (size_t i = 0; i < w.size(); ++i) total += w[i] * tape.value(y)[i];
  return tape.record({total}, tape.requires_grad(y), [y, w](Tape<double>& t, Var self) {
    const double g = t.grad(self)[0];
    auto& gy = t.grad_buffer(y);
    for (size_t i = 0; i < w.size(); ++i) gy[i] += g * w[i];
  });
}

struct PrimitiveCase {
  std::string name;
  std::function<GradProblem(uint64_t)> make;
};

inline std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;

  cases.push_back({"affine", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 1);
    const int in = 1 + rng.uniform_int(6), out = 1 + rng.uniform_int(6);
    GradProblem p;
    p.params.add("l.W", random_tensor(rng, {out, in}, 1.0));
    p.params.add("l.b", random_tensor(rng, {out}, 1.0));
    p.inputs = {uniform_vector(rng, in, -1, 1)};
    p.build = [seed](Tape<double>& t, const std::vector<Var>& x) {
      return readout(t, ad::affine(t, x[0], "l.W", "l.b"), seed);
    };
    return p;
  }});

  for (auto kind : {ad::Activation::kTanh, ad::Activation::kRelu, ad::Activation::kSigmoid,
                    ad::Activation::kIdentity}) {
    cases.push_back({std::string("activation.") + ad::activation_name(kind),
                     [kind](uint64_t seed) {
      RngStream rng(seed, StreamPurpose::kTest, 2);
      GradProblem p;
      p.inputs = {off_zero_vector(rng, 1 + rng.uniform_int(8))};
      p.build = [seed, kind](Tape<double>& t, const std::vector<Var>& x) {
        return readout(t, ad::activation(t, x[0], kind), seed);
      };
      return p;
    }});
  }

  cases.push_back({"concat", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 3);
    GradProblem p;
    p.inputs = {uniform_vector(rng, 1 + rng.uniform_int(5), -1, 1),
                uniform_vector(rng, 1 + rng.uniform_int(5), -1, 1)};
    p.build = [seed](Tape<double>& t, const std::vector<Var>& x) {
      return readout(t, ad::concat(t, x[0], x[1]), seed);
    };
    return p;
  }});

  cases.push_back({"lstm_step", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 4);
    const int in = 1 + rng.uniform_int(4), H = 1 + rng.uniform_int(4);
    GradProblem p;
    p.params.add("m.Wx", random_tensor(rng, {4 * H, in}, 0.8));
    p.params.add("m.Wh", random_tensor(rng, {4 * H, H}, 0.8));
    p.params.add("m.b", random_tensor(rng, {4 * H}, 0.5));
    p.inputs = {uniform_vector(rng, in, -1, 1), uniform_vector(rng, H, -1, 1),
                uniform_vector(rng, H, -1, 1)};
    p.build = [](Tape<double>& t, const std::vector<Var>& x) {
      const auto s = ad::lstm_step(t, x[0], x[1], x[2], "m");
      return ad::reduce_sum(t, s.h);
    };
    return p;
  }});

  cases.push_back({"softmax", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 5);
    GradProblem p;
    p.inputs = {uniform_vector(rng, 2 + rng.uniform_int(12), -3, 3)};
    p.build = [seed](Tape<double>& t, const std::vector<Var>& x) {
      return readout(t, ad::softmax(t, x[0]), seed);
    };
    return p;
  }});

  cases.push_back({"log_pick", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 6);
    const int n = 2 + rng.uniform_int(10);
    const int pick = rng.uniform_int(n);
    GradProblem p;
    p.inputs = {uniform_vector(rng, n, -2, 2)};
    p.build = [pick](Tape<double>& t, const std::vector<Var>& x) {
      return ad::log_pick(t, ad::softmax(t, x[0]), pick);
    };
    return p;
  }});

  cases.push_back({"categorical_sample", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 7);
    GradProblem p;
    p.inputs = {uniform_vector(rng, 2 + rng.uniform_int(10), -2, 2)};
    // The drawn index must not flip under the perturbation, so the uniform
    // draw is kept away from every CDF edge of the unperturbed distribution.
    std::vector<double> cdf;
    {
      const auto& z = p.inputs[0];
      const double m = *std::max_element(z.begin(), z.end());
      double total = 0.0;
      for (double v : z) total += std::exp(v - m);
      double acc = 0.0;
      for (double v : z) cdf.push_back(acc += std::exp(v - m) / total);
    }
    uint64_t stream = 0;
    for (;; ++stream) {
      RngStream probe(seed, StreamPurpose::kTest, 8, stream);
      const double u = probe.uniform();
      if (std::all_of(cdf.begin(), cdf.end(), [u](double c) { return std::abs(u - c) > 0.01; }))
        break;
    }
    p.build = [seed, stream](Tape<double>& t, const std::vector<Var>& x) {
      RngStream draw(seed, StreamPurpose::kTest, 8, stream);
      return ad::categorical_sample(t, ad::softmax(t, x[0]), draw).log_prob;
    };
    return p;
  }});

  cases.push_back({"mse", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 9);
    const size_t n = 1 + rng.uniform_int(12);
    std::vector<double> target = uniform_vector(rng, n, 0, 1);
    std::vector<uint8_t> mask;
    if (rng.uniform() < 0.5) {
      mask.resize(n);
      for (auto& m : mask) m = rng.uniform() < 0.6;
      mask[0] = 1;
    }
    GradProblem p;
    p.inputs = {uniform_vector(rng, n, 0, 1)};
    p.build = [target, mask](Tape<double>& t, const std::vector<Var>& x) {
      return ad::mse<double>(t, x[0], target, mask);
    };
    return p;
  }});

  cases.push_back({"paste", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 10);
    const size_t n = 4 + rng.uniform_int(12);
    auto values = std::make_shared<std::vector<float>>(2);
    for (auto& v : *values) v = static_cast<float>(rng.uniform());
    const size_t offset = rng.uniform_int(static_cast<int>(n - 1));
    GradProblem p;
    p.inputs = {uniform_vector(rng, n, -1, 1)};
    p.build = [seed, values, offset](Tape<double>& t, const std::vector<Var>& x) {
      const ad::PasteRange<double> r{offset, *values};
      return readout(t, ad::paste<double>(t, x[0], std::span(&r, 1)), seed);
    };
    return p;
  }});

  cases.push_back({"weighted_sum", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 11);
    const int n = 1 + rng.uniform_int(5);
    std::vector<double> w = uniform_vector(rng, n, -2, 2);
    GradProblem p;
    for (int i = 0; i < n; ++i) p.inputs.push_back(uniform_vector(rng, 3, -1, 1));
    p.build = [seed, w](Tape<double>& t, const std::vector<Var>& x) {
      std::vector<Var> terms;
      for (size_t i = 0; i < x.size(); ++i) terms.push_back(readout(t, x[i], seed + i));
      return ad::weighted_sum<double>(t, terms, w);
    };
    return p;
  }});

  cases.push_back({"reduce_sum", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 12);
    GradProblem p;
    p.inputs = {uniform_vector(rng, 1 + rng.uniform_int(8), -1, 1)};
    p.build = [](Tape<double>& t, const std::vector<Var>& x) {
      const Var y = ad::activation(t, x[0], ad::Activation::kTanh);
      return ad::reduce_sum(t, y);
    };
    return p;
  }});

  cases.push_back({"cross_entropy", [](uint64_t seed) {
    RngStream rng(seed, StreamPurpose::kTest, 13);
    const int n = 2 + rng.uniform_int(9);
    const int label = rng.uniform_int(n);
    GradProblem p;
    p.inputs = {uniform_vector(rng, n, -3, 3)};
    p.build = [label](Tape<double>& t, const std::vector<Var>& x) {
      return ad::cross_entropy(t, x[0], label);
    };
    return p;
  }});

  return cases;
}

}  // namespace lookaround::testing
