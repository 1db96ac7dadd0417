// SPDX-License-Identifier: Apache-2.0
#include "lookaround/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <tuple>

#include "lookaround/error.hpp"

namespace lookaround {

const char* method_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kLearned: return "ours";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kLargeAction: return "large-action";
    case PolicyKind::kPeekSaliency: return "peek-saliency";
    case PolicyKind::kOneView: return "1-view";
  }
  return "?";
}

std::vector<PolicySpec> standard_policies() {
  return {{PolicyKind::kLearned, {}},
          {PolicyKind::kRandom, {}},
          {PolicyKind::kLargeAction, {}},
          {PolicyKind::kPeekSaliency, {}},
          {PolicyKind::kOneView, {}}};
}

Action policy_random(RngStream& rng, const MotionModel& motion) {
  const auto actions = legal_actions(motion);
  return actions[rng.uniform_int(static_cast<int>(actions.size()))];
}

std::vector<Action> policy_large_action_candidates(const MotionModel& motion) {
  std::vector<Action> out;
  for (const auto& a : legal_actions(motion))
    if (std::abs(a.d_elev) == motion.e_radius || std::abs(a.d_azim) == motion.a_radius)
      out.push_back(a);
  return out;
}

double saliency_score(View view, const GridDims& dims) {
  const int H = dims.view_h, W = dims.view_w, C = dims.view_c;
  require(view.size() == dims.view_size(), ErrorCode::kShapeMismatch,
          "saliency_score: view size mismatch");
  auto px = [&](int y, int x, int c) {
    return static_cast<double>(view[(static_cast<size_t>(y) * W + x) * C + c]);
  };
  double sum = 0.0;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x + 1 < W; ++x)
      for (int c = 0; c < C; ++c) sum += std::abs(px(y, x + 1, c) - px(y, x, c));
  for (int y = 0; y + 1 < H; ++y)
    for (int x = 0; x < W; ++x)
      for (int c = 0; c < C; ++c) sum += std::abs(px(y + 1, x, c) - px(y, x, c));
  const double terms = static_cast<double>(H) * (W - 1) * C + static_cast<double>(H - 1) * W * C;
  return terms > 0.0 ? sum / terms : 0.0;
}

Action policy_peek_saliency(const ViewGrid& world, Viewpoint current,
                            std::span<const Viewpoint> visited, const MotionModel& motion) {
  const auto actions = legal_actions(motion);
  const auto& dims = world.dims();
  auto seen = [&](const Viewpoint& vp) {
    return std::find(visited.begin(), visited.end(), vp) != visited.end();
  };
  bool any_unvisited = false;
  for (const auto& a : actions)
    if (!seen(apply_action(current, a, dims))) any_unvisited = true;

  int best = -1;
  double best_score = 0.0;
  for (size_t i = 0; i < actions.size(); ++i) {
    const Viewpoint next = apply_action(current, actions[i], dims);
    if (any_unvisited && seen(next)) continue;
    const double s = saliency_score(capture(world, next), dims);
    if (best < 0 || s > best_score) {
      best = static_cast<int>(i);
      best_score = s;
    }
  }
  return actions[best];
}

ActionSelector random_selector() {
  return [](const StepContext& ctx) { return policy_random(ctx.rng, ctx.motion); };
}

ActionSelector fixed_selector(Action a) {
  return [a](const StepContext&) { return a; };
}

ActionSelector peek_saliency_selector() {
  return [](const StepContext& ctx) {
    return policy_peek_saliency(ctx.world, ctx.current, ctx.visited, ctx.motion);
  };
}

void MetricTable::sort() {
  std::sort(completion.begin(), completion.end(), [](const auto& a, const auto& b) {
    return std::tie(a.method, a.t) < std::tie(b.method, b.t);
  });
  std::sort(accuracy.begin(), accuracy.end(), [](const auto& a, const auto& b) {
    return std::tie(a.method, a.t) < std::tie(b.method, b.t);
  });
}

double improvement_pct(double mse_one_view, double mse) {
  require(mse_one_view > 0.0, ErrorCode::kContract, "1-view error must be positive");
  return 100.0 * (mse_one_view - mse) / mse_one_view;
}

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

const std::vector<std::string> kEncodeDecode{"sense", "fuse", "aggregate", "decode"};

}  // namespace

void write_completion_csv(std::ostream& os, const MetricTable& table) {
  os << "method,t,mse_x1000,improvement_pct\n";
  for (const auto& r : table.completion)
    os << r.method << ',' << r.t << ',' << fixed4(r.mse_x1000) << ','
       << fixed4(r.improvement_pct) << '\n';
}

void write_accuracy_csv(std::ostream& os, const MetricTable& table) {
  os << "method,t,accuracy\n";
  for (const auto& r : table.accuracy)
    os << r.method << ',' << r.t << ',' << fixed4(r.accuracy) << '\n';
}

void save_csv(const MetricTable& table, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorCode::kIo, "cannot write " + path.string());
  if (!table.completion.empty())
    write_completion_csv(os, table);
  else
    write_accuracy_csv(os, table);
  require(static_cast<bool>(os), ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<double> mse_curve(const PolicySpec& policy, std::span<const ViewGrid> worlds,
                              const TrainState& model, const EvalOptions& options,
                              std::vector<int64_t>* elevation_histogram) {
  require(!worlds.empty(), ErrorCode::kInvalidArgument, "evaluation needs test worlds");
  require(options.T >= 1, ErrorCode::kInvalidArgument, "T must be >= 1");
  ModelConfig config = model.model;
  config.T = policy.kind == PolicyKind::kOneView ? 1 : options.T;

  RolloutPolicy rp;
  rp.mode = options.mode;
  switch (policy.kind) {
    case PolicyKind::kLearned:
    case PolicyKind::kOneView: break;
    case PolicyKind::kRandom: rp.external = random_selector(); break;
    case PolicyKind::kPeekSaliency: rp.external = peek_saliency_selector(); break;
    case PolicyKind::kLargeAction:
      require(policy.fixed.has_value(), ErrorCode::kInvalidArgument,
              "large-action curve needs a fixed action");
      require(config.motion.is_legal(*policy.fixed), ErrorCode::kInvalidArgument,
              "large-action must be legal");
      rp.external = fixed_selector(*policy.fixed);
      break;
  }
  if (elevation_histogram != nullptr) elevation_histogram->assign(config.dims.n_elev, 0);

  std::vector<double> sums(config.T, 0.0);
  for (size_t w = 0; w < worlds.size(); ++w) {
    const ViewGrid& world = worlds[w];
    RngStream start_rng(options.seed, StreamPurpose::kEval, w, 0);
    const Viewpoint start{start_rng.uniform_int(config.dims.n_elev),
                          start_rng.uniform_int(config.dims.m_azim)};
    RngStream rng(options.seed, StreamPurpose::kEval, w, 1);
    ad::Tape<float> tape(model.params);
    const auto trace = rollout(tape, world, start, config, rp, rng);
    const ViewGrid target = roll_azimuth(world, trace.delta0);
    for (int t = 0; t < config.T; ++t) {
      sums[t] += grid_mse(prediction_grid(tape, trace.steps[t].prediction, config.dims), target);
      if (elevation_histogram != nullptr)
        ++(*elevation_histogram)[trace.steps[t].viewpoint.elev];
    }
  }
  std::vector<double> curve(options.T);
  for (int t = 0; t < options.T; ++t)
    curve[t] = 1000.0 * sums[std::min(t, config.T - 1)] / static_cast<double>(worlds.size());
  return curve;
}

MetricTable evaluate_policies(std::span<const PolicySpec> policies,
                              std::span<const ViewGrid> worlds, const TrainState& model,
                              const EvalOptions& options) {
  require(!worlds.empty(), ErrorCode::kInvalidArgument, "evaluation needs test worlds");
  const uint64_t checksum = params_checksum(model.params, kEncodeDecode);

  struct Curve {
    std::string method;
    std::vector<double> mse;
  };
  std::vector<Curve> curves;
  MetricTable table;
  for (const auto& policy : policies) {
    require(params_checksum(model.params, kEncodeDecode) == checksum, ErrorCode::kContract,
            "encode/decode parameters changed between policies");
    if (policy.kind == PolicyKind::kLargeAction && !policy.fixed) {
      std::vector<double> best;
      for (const auto& a : policy_large_action_candidates(model.model.motion)) {
        auto c = mse_curve({PolicyKind::kLargeAction, a}, worlds, model, options);
        if (best.empty() || c.back() < best.back()) {
          best = std::move(c);
          table.large_action_choice = a;
        }
      }
      curves.push_back({method_name(policy.kind), std::move(best)});
      continue;
    }
    std::vector<int64_t>* hist =
        policy.kind == PolicyKind::kLearned ? &table.elevation_histogram : nullptr;
    curves.push_back({method_name(policy.kind), mse_curve(policy, worlds, model, options, hist)});
  }

  // Improvements are relative to 1-view, evaluated here if not requested.
  std::vector<double> one_view;
  for (const auto& c : curves)
    if (c.method == method_name(PolicyKind::kOneView)) one_view = c.mse;
  if (one_view.empty()) one_view = mse_curve({PolicyKind::kOneView, {}}, worlds, model, options);

  for (const auto& c : curves)
    for (int t = 0; t < options.T; ++t)
      table.completion.push_back(
          {c.method, t + 1, c.mse[t], improvement_pct(one_view[t], c.mse[t])});
  table.sort();
  return table;
}

}  // namespace lookaround
