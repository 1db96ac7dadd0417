// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <numeric>

#include "../common/gradcheck_suite.hpp"
#include "helpers.hpp"
#include "lookaround/autodiff/checkpoint.hpp"
#include "lookaround/autodiff/optimizer.hpp"

using namespace lookaround;
using namespace lookaround::ad;
using lookaround::testing::error_of;
using lookaround::testing::TempDir;

namespace {

ParamStore<float> small_store() {
  ParamStore<float> p;
  p.add("l.W", Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6}));
  p.add("l.b", Tensor<float>({2}, {0.5f, -0.5f}));
  return p;
}

}  // namespace

TEST_CASE("tensor and param store basics") {
  Tensor<float> t({2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(error_of([] { Tensor<float>({2, 2}, {1, 2, 3}); }) == ErrorCode::kShapeMismatch);

  auto p = small_store();
  CHECK(p.size() == 2);
  CHECK(p.name(0) == "l.W");
  CHECK(p.find("l.b") == 1);
  CHECK(p.find("nope") == -1);
  CHECK(p.module_of(0) == "l");
  CHECK(error_of([&] { p.add("l.W", Tensor<float>({1})); }) == ErrorCode::kInvalidArgument);
  CHECK(error_of([&] { p.id("nope"); }) == ErrorCode::kUnknownName);
  CHECK(p.velocity(0).shape == p.value(0).shape);
}

TEST_CASE("affine") {
  ParamStore<double> p;
  p.add("l.W", Tensor<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  p.add("l.b", Tensor<double>({3}));
  p.add("z.W", Tensor<double>({2, 3}));
  p.add("z.b", Tensor<double>({2}, {4, -7}));
  Tape<double> tape(p);
  const Var x = constant<double>(tape, {0.25, -2, 9});
  CHECK(tape.value(affine(tape, x, "l.W", "l.b")) == std::vector<double>{0.25, -2, 9});
  CHECK(tape.value(affine(tape, x, "z.W", "z.b")) == std::vector<double>{4, -7});
  const Var short_x = constant<double>(tape, {1, 2});
  CHECK(error_of([&] { affine(tape, short_x, "l.W", "l.b"); }) == ErrorCode::kShapeMismatch);
}

TEST_CASE("activations") {
  ParamStore<double> p;
  Tape<double> tape(p);
  const Var zero = constant<double>(tape, {0.0}, true);
  CHECK(tape.scalar(activation(tape, zero, Activation::kTanh)) == 0.0);
  CHECK(tape.scalar(activation(tape, zero, Activation::kSigmoid)) == 0.5);
  const Var neg = constant<double>(tape, {-1.0});
  CHECK(tape.scalar(activation(tape, neg, Activation::kRelu)) == 0.0);

  Tape<double> t2(p);
  const Var x = constant<double>(t2, {0.0}, true);
  t2.backward(activation(t2, x, Activation::kTanh));
  CHECK(t2.grad(x)[0] == 1.0);

  CHECK(parse_activation("tanh") == Activation::kTanh);
  CHECK(error_of([] { parse_activation("swish"); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("lstm_step") {
  const int H = 3, in = 2;
  ParamStore<double> p;
  p.add("m.Wx", Tensor<double>({4 * H, in}));
  p.add("m.Wh", Tensor<double>({4 * H, H}));
  p.add("m.b", Tensor<double>({4 * H}));
  {
    Tape<double> tape(p);
    const Var z = constant<double>(tape, std::vector<double>(H, 0.0));
    const auto s = lstm_step(tape, constant<double>(tape, {0, 0}), z, z, "m");
    CHECK(tape.value(s.h) == std::vector<double>(H, 0.0));
    CHECK(tape.value(s.c) == std::vector<double>(H, 0.0));
  }
  {
    // Gate order i, f, g, o: forget wide open, input shut.
    auto& b = p.value("m.b").data;
    for (int k = 0; k < H; ++k) {
      b[k] = -30.0;
      b[H + k] = 30.0;
    }
    Tape<double> tape(p);
    const std::vector<double> c{5.0, -3.0, 12.0};
    const auto s = lstm_step(tape, constant<double>(tape, {0.3, -0.7}),
                             constant<double>(tape, {0.1, 0.2, 0.3}), constant(tape, c), "m");
    for (int k = 0; k < H; ++k) CHECK(tape.value(s.c)[k] == doctest::Approx(c[k]).epsilon(1e-9));
  }
  Tape<double> tape(p);
  const Var bad_h = constant<double>(tape, {0, 0});
  CHECK(error_of([&] { lstm_step(tape, constant<double>(tape, {0, 0}), bad_h, bad_h, "m"); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("softmax") {
  ParamStore<double> p;
  Tape<double> tape(p);
  const auto uniform = tape.value(softmax(tape, constant(tape, std::vector<double>(15, 0.3))));
  for (double v : uniform) CHECK(std::abs(v - 1.0 / 15) < 1e-15);

  RngStream rng(1);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> z = testing::uniform_vector(rng, 1 + rng.uniform_int(20), -20, 20);
    const auto base = tape.value(softmax(tape, constant(tape, z)));
    CHECK(std::abs(std::accumulate(base.begin(), base.end(), 0.0) - 1.0) < 1e-6);
    const double shift = rng.uniform(-50, 50);
    for (auto& v : z) v += shift;
    const auto shifted = tape.value(softmax(tape, constant(tape, z)));
    for (size_t k = 0; k < z.size(); ++k) CHECK(std::abs(shifted[k] - base[k]) < 1e-7);
  }

  const auto p123 = tape.value(softmax(tape, constant<double>(tape, {1, 2, 3})));
  const double denom = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(p123[k] - std::exp(k + 1.0) / denom) < 1e-7);

  ParamStore<float> pf;
  Tape<float> tf(pf);
  const auto pf_vals = tf.value(softmax(tf, constant<float>(tf, {80.f, -80.f, 3.f})));
  CHECK(std::abs(pf_vals[0] + pf_vals[1] + pf_vals[2] - 1.0f) < 1e-6f);

  CHECK(error_of([&] { softmax(tape, constant<double>(tape, {1.0, NAN})); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(error_of([&] { softmax(tape, constant<double>(tape, {1.0, INFINITY})); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("categorical_sample") {
  ParamStore<double> p;
  Tape<double> tape(p);
  const Var certain = constant<double>(tape, {1, 0, 0});
  RngStream rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto s = categorical_sample(tape, certain, rng);
    CHECK(s.index == 0);
    CHECK(tape.scalar(s.log_prob) == 0.0);
  }

  const Var probs = constant<double>(tape, {0.2, 0.3, 0.5});
  RngStream a(42, StreamPurpose::kTest, 3), b(42, StreamPurpose::kTest, 3);
  for (int i = 0; i < 100; ++i)
    CHECK(categorical_sample(tape, probs, a).index == categorical_sample(tape, probs, b).index);

  const Var half = constant<double>(tape, {0.5, 0.5});
  RngStream draw(7);
  int zeros = 0;
  for (int i = 0; i < 100000; ++i) zeros += categorical_sample(tape, half, draw).index == 0;
  CHECK(zeros >= 49400);
  CHECK(zeros <= 50600);

  const Var unnormalized = constant<double>(tape, {0.5, 0.6});
  CHECK(error_of([&] { categorical_sample(tape, unnormalized, draw); }) ==
        ErrorCode::kInvalidArgument);
  const Var negative = constant<double>(tape, {1.5, -0.5});
  CHECK(error_of([&] { categorical_sample(tape, negative, draw); }) ==
        ErrorCode::kInvalidArgument);

  const Var logits = constant<double>(tape, {0.1, 0.4, -0.3}, true);
  const Var sm = softmax(tape, logits);
  RngStream d2(9);
  const auto s = categorical_sample(tape, sm, d2);
  CHECK(tape.requires_grad(s.log_prob));
  CHECK(tape.scalar(s.log_prob) == std::log(tape.value(sm)[s.index]));
}

TEST_CASE("mse") {
  ParamStore<double> p;
  Tape<double> tape(p);
  const std::vector<double> target{0.1, 0.5, 0.9, 0.3};
  CHECK(tape.scalar(mse<double>(tape, constant(tape, target), target)) == 0.0);

  const std::vector<double> pred{0.4, 0.2, 0.7, 0.3};
  const Var x = constant(tape, pred, true);
  tape.backward(mse<double>(tape, x, target));
  for (size_t i = 0; i < pred.size(); ++i)
    CHECK(tape.grad(x)[i] == doctest::Approx(2 * (pred[i] - target[i]) / 4).epsilon(1e-12));

  const std::vector<uint8_t> mask{1, 0, 1, 0};
  Tape<double> t2(p);
  const Var y = constant(t2, pred, true);
  const Var masked = mse<double>(t2, y, target, mask);
  CHECK(t2.scalar(masked) == doctest::Approx((0.09 + 0.04) / 2).epsilon(1e-12));
  t2.backward(masked);
  CHECK(t2.grad(y)[1] == 0.0);
  CHECK(t2.grad(y)[3] == 0.0);

  RngStream rng(2);
  for (int i = 0; i < 20; ++i) {
    const size_t n = 1 + rng.uniform_int(50);
    const auto a = testing::uniform_vector(rng, n, 0, 1);
    const auto b = testing::uniform_vector(rng, n, 0, 1);
    double sum = 0.0;
    for (size_t k = 0; k < n; ++k) sum += (a[k] - b[k]) * (a[k] - b[k]);
    CHECK(std::abs(tape.scalar(mse<double>(tape, constant(tape, a), b)) - sum / n) < 1e-6);
  }
  CHECK(error_of([&] { mse<double>(tape, x, std::vector<double>{1.0}); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("backward") {
  ParamStore<double> p;
  {
    // y = 3 * tanh(x)^2 via reduce/weights: chain rule by hand.
    Tape<double> tape(p);
    const Var x = constant<double>(tape, {0.4}, true);
    const Var t = activation(tape, x, Activation::kTanh);
    const Var sq = mse<double>(tape, t, std::vector<double>{0.0});
    const std::vector<Var> terms{sq};
    const Var y = weighted_sum<double>(tape, terms, std::vector<double>{3.0});
    tape.backward(y);
    const double th = std::tanh(0.4);
    CHECK(tape.grad(x)[0] == doctest::Approx(3 * 2 * th * (1 - th * th)).epsilon(1e-12));
  }
  {
    auto grads_for = [&](std::vector<Seed<double>> seeds_of_roots, bool both) {
      Tape<double> tape(p);
      const Var x = constant<double>(tape, {0.3, -0.2}, true);
      const Var a = mse<double>(tape, x, std::vector<double>{1.0, 1.0});
      const Var b = reduce_sum(tape, activation(tape, x, Activation::kSigmoid));
      std::vector<Seed<double>> seeds;
      seeds.push_back({a, seeds_of_roots[0].gradient});
      if (both) seeds.push_back({b, seeds_of_roots[1].gradient});
      tape.backward(seeds);
      return std::vector<double>(tape.grad(x).begin(), tape.grad(x).end());
    };
    const Var none{};
    CHECK(grads_for({{none, 1.0}, {none, 0.0}}, true) == grads_for({{none, 1.0}}, false));
    const auto g_a = grads_for({{none, 1.0}, {none, 0.0}}, true);
    const auto g_b = grads_for({{none, 0.0}, {none, 1.0}}, true);
    const auto g_ab = grads_for({{none, 1.0}, {none, 1.0}}, true);
    for (int k = 0; k < 2; ++k) CHECK(std::abs(g_ab[k] - (g_a[k] + g_b[k])) < 1e-15);
  }
  {
    Tape<double> tape(p);
    CHECK(error_of([&] { tape.backward(Var{5}); }) == ErrorCode::kContract);
    const Var v = constant<double>(tape, {1, 2}, true);
    CHECK(error_of([&] { tape.backward(v); }) == ErrorCode::kContract);
  }
}

TEST_CASE("linearity on random graphs") {
  for (uint64_t seed = 0; seed < 30; ++seed) {
    RngStream rng(seed);
    ParamStore<double> p;
    p.add("g.W", testing::random_tensor(rng, {4, 3}, 1.0));
    p.add("g.b", testing::random_tensor(rng, {4}, 1.0));
    const auto x0 = testing::uniform_vector(rng, 3, -1, 1);
    const int roots = 2 + rng.uniform_int(3);
    auto run = [&](int only) {
      Gradients<double> sink(p.size());
      Tape<double> tape(p, &sink);
      const Var x = constant(tape, x0, true);
      const Var h = activation(tape, affine(tape, x, "g.W", "g.b"), Activation::kTanh);
      std::vector<Seed<double>> seeds;
      for (int r = 0; r < roots; ++r) {
        if (only >= 0 && r != only) continue;
        seeds.push_back({testing::readout(tape, h, seed * 10 + r), 1.0});
      }
      tape.backward(seeds);
      return sink;
    };
    const auto all = run(-1);
    Gradients<double> summed(p.size());
    for (int r = 0; r < roots; ++r) summed.add(run(r));
    for (int i = 0; i < 2; ++i)
      for (size_t k = 0; k < all.get(i).size(); ++k)
        CHECK(std::abs(all.get(i)[k] - summed.get(i)[k]) < 1e-12);
  }
}

TEST_CASE("backward is deterministic") {
  ParamStore<float> p;
  RngStream rng(3);
  p.add("m.Wx", Tensor<float>({8, 3}));
  p.add("m.Wh", Tensor<float>({8, 2}));
  p.add("m.b", Tensor<float>({8}));
  for (size_t i = 0; i < p.size(); ++i)
    for (auto& v : p.value(static_cast<int>(i)).data) v = static_cast<float>(rng.uniform(-1, 1));
  auto run = [&] {
    Gradients<float> g(p.size());
    Tape<float> tape(p, &g);
    auto s = lstm_step(tape, constant<float>(tape, {0.1f, 0.2f, 0.3f}),
                       constant<float>(tape, {0, 0}), constant<float>(tape, {0, 0}), "m");
    for (int t = 0; t < 4; ++t)
      s = lstm_step(tape, constant<float>(tape, {0.3f, -0.1f, 0.5f}), s.h, s.c, "m");
    tape.backward(reduce_sum(tape, s.h));
    return g;
  };
  const auto a = run();
  const auto b = run();
  for (int i = 0; i < 3; ++i)
    CHECK(std::memcmp(a.get(i).data(), b.get(i).data(), a.get(i).size() * sizeof(float)) == 0);
}

TEST_CASE("sgd_step") {
  {
    auto p = small_store();
    auto g = Gradients<float>::like(p);
    for (int i = 0; i < 2; ++i) g.accumulate(i, p.value(i).size()) = p.value(i).data;
    sgd_step(p, g, 1.0f, 0.0f);
    for (int i = 0; i < 2; ++i)
      for (float v : p.value(i).data) CHECK(v == 0.0f);
  }
  {
    auto p = small_store();
    const auto before = p;
    auto g = Gradients<float>::like(p);
    for (int i = 0; i < 2; ++i) g.accumulate(i, p.value(i).size());
    sgd_step(p, g, 0.5f, 0.9f);
    CHECK(p == before);
  }
  {
    ParamStore<double> p;
    p.add("x.W", Tensor<double>({3}, {1.0, -2.0, 0.5}));
    auto g = Gradients<double>::like(p);
    g.accumulate(0, 3) = {0.3, 0.1, -0.4};
    const double lr = 0.1;
    sgd_step(p, g, lr, 0.9);
    sgd_step(p, g, lr, 0.9);
    const std::vector<double> p0{1.0, -2.0, 0.5}, gv{0.3, 0.1, -0.4};
    for (int k = 0; k < 3; ++k)
      CHECK(p.value(0).data[k] == doctest::Approx(p0[k] - lr * gv[k] - lr * 1.9 * gv[k]).epsilon(1e-14));
  }
  {
    auto p = small_store();
    auto g = Gradients<float>::like(p);
    g.accumulate(0, p.value(0).size());
    CHECK(error_of([&] { sgd_step(p, g, 0.1f, 0.9f); }) == ErrorCode::kContract);
    sgd_step(p, g, 0.1f, 0.9f, std::vector<uint8_t>{1, 0});
  }
}

TEST_CASE("grad_check reports relative error") {
  ParamStore<double> p;
  p.add("q.W", Tensor<double>({1}, {3.0}));
  Gradients<double> analytic(1);
  analytic.accumulate(0, 1)[0] = 6.0;
  const std::function<double(const ParamStore<double>&)> square =
      [](const ParamStore<double>& ps) { return ps.value(0).data[0] * ps.value(0).data[0]; };
  CHECK(grad_check(square, p, analytic, all_coordinates(p), 1e-3).max_rel_error < 1e-9);

  Gradients<double> zero(1);
  zero.accumulate(0, 1);
  const std::function<double(const ParamStore<double>&)> constant_fn =
      [](const ParamStore<double>&) { return 4.0; };
  const auto r = grad_check(constant_fn, p, zero, all_coordinates(p), 1e-3);
  CHECK(r.max_rel_error == 0.0);
  CHECK(r.checked == 1);
  CHECK(relative_error(1e-12, 0.0) < 1e-3);
}

TEST_CASE("every primitive passes central differences") {
  for (auto& c : testing::primitive_cases()) {
    double worst = 0.0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
      auto problem = c.make(seed);
      worst = std::max(worst, testing::max_relative_error(problem, 1e-3));
    }
    INFO(c.name);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("GLMP1 round-trip and errors") {
  auto p = small_store();
  p.velocity(0).data[2] = 0.125f;
  const auto bytes = encode_params(p);
  CHECK(std::string(bytes.data(), 5) == "GLMP1");
  const auto back = decode_params(bytes);
  CHECK(back == p);
  CHECK(back.velocity(0).data[2] == 0.125f);

  TempDir dir("glmp");
  save_params(p, dir.path() / "p.glmp");
  CHECK(load_params(dir.path() / "p.glmp") == p);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK(error_of([&] { decode_params(bad); }) == ErrorCode::kBadMagic);
  const std::vector<char> cut(bytes.begin(), bytes.end() - 3);
  CHECK(error_of([&] { decode_params(cut); }) == ErrorCode::kTruncated);

  ParamStore<float> other;
  other.add("l.W", Tensor<float>({2, 3}));
  CHECK(error_of([&] { decode_params(bytes, &other); }) == ErrorCode::kUnknownName);
  ParamStore<float> reshaped;
  reshaped.add("l.W", Tensor<float>({3, 2}));
  reshaped.add("l.b", Tensor<float>({2}));
  CHECK(error_of([&] { decode_params(bytes, &reshaped); }) == ErrorCode::kFormat);
}
