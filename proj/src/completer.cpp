// SPDX-License-Identifier: Apache-2.0
#include "lookaround/completer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "lookaround/error.hpp"

namespace lookaround {

void ModelConfig::validate() const {
  dims.validate();
  require(motion.e_radius >= 0 && motion.a_radius >= 0, ErrorCode::kInvalidArgument,
          "motion radii must be >= 0");
  require(T >= 1, ErrorCode::kInvalidArgument, "episode length T must be >= 1");
  require(view_code >= 1 && proprio_code >= 1 && fuse_code >= 1 && agg_code >= 1,
          ErrorCode::kInvalidArgument, "code sizes must be >= 1");
  require(view_hidden >= 0 && proprio_hidden >= 0 && decode_hidden >= 0 && act_hidden >= 0,
          ErrorCode::kInvalidArgument, "hidden widths must be >= 0");
}

std::vector<int> ModelConfig::encode() const {
  return {dims.n_elev, dims.m_azim, dims.view_h, dims.view_w, dims.view_c,
          motion.e_radius, motion.a_radius, T, view_code, proprio_code,
          fuse_code, agg_code, view_hidden, proprio_hidden, decode_hidden, act_hidden};
}

ModelConfig ModelConfig::decode(std::span<const int> v) {
  require(v.size() == 16, ErrorCode::kFormat, "model layout record has wrong length");
  ModelConfig c;
  c.dims = {v[0], v[1], v[2], v[3], v[4]};
  c.motion = {v[5], v[6]};
  c.T = v[7];
  c.view_code = v[8];
  c.proprio_code = v[9];
  c.fuse_code = v[10];
  c.agg_code = v[11];
  c.view_hidden = v[12];
  c.proprio_hidden = v[13];
  c.decode_hidden = v[14];
  c.act_hidden = v[15];
  c.validate();
  return c;
}

ModelConfig preset_config(const std::string& name, GridDims dims) {
  ModelConfig c;
  c.dims = dims;
  if (name == "scene") {
    c.motion = {1, 2};
    c.T = 6;
  } else if (name == "object") {
    c.motion = {2, 2};
    c.T = 4;
  } else {
    fail(ErrorCode::kInvalidArgument, "unknown preset '" + name + "'");
  }
  return c;
}

size_t EpisodeTrace::action_count() const {
  size_t n = 0;
  for (const auto& s : steps) n += s.action.has_value() ? 1 : 0;
  return n;
}

namespace {

std::vector<int> widths(int in, int hidden, int out) {
  if (hidden > 0) return {in, hidden, out};
  return {in, out};
}

int layer_count(int hidden) { return hidden > 0 ? 2 : 1; }

std::string layer_name(const std::string& prefix, int k) {
  return prefix + ".l" + std::to_string(k);
}

}  // namespace

template <typename S>
void add_stack_params(ad::ParamStore<S>& params, const std::string& prefix,
                      const std::vector<int>& w, RngStream& rng) {
  for (size_t k = 0; k + 1 < w.size(); ++k) {
    const int in = w[k];
    const int out = w[k + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    ad::Tensor<S> W({out, in});
    for (auto& v : W.data) v = static_cast<S>(static_cast<float>(rng.uniform(-limit, limit)));
    const std::string base = layer_name(prefix, static_cast<int>(k));
    params.add(base + ".W", std::move(W));
    params.add(base + ".b", ad::Tensor<S>({out}));
  }
}

template <typename S>
void add_lstm_params(ad::ParamStore<S>& params, const std::string& prefix, int in,
                     int hidden, RngStream& rng) {
  // Each gate is its own (hidden x in) map, so fans are taken per gate.
  const int rows = 4 * hidden;
  const double lx = std::sqrt(6.0 / (in + hidden));
  const double lh = std::sqrt(6.0 / (hidden + hidden));
  ad::Tensor<S> Wx({rows, in});
  for (auto& v : Wx.data) v = static_cast<S>(static_cast<float>(rng.uniform(-lx, lx)));
  ad::Tensor<S> Wh({rows, hidden});
  for (auto& v : Wh.data) v = static_cast<S>(static_cast<float>(rng.uniform(-lh, lh)));
  ad::Tensor<S> b({rows});
  for (int k = hidden; k < 2 * hidden; ++k) b.data[k] = S(1);
  params.add(prefix + ".Wx", std::move(Wx));
  params.add(prefix + ".Wh", std::move(Wh));
  params.add(prefix + ".b", std::move(b));
}

template <typename S>
ad::ParamStore<S> init_params(const ModelConfig& config, uint64_t seed) {
  config.validate();
  RngStream rng(seed, StreamPurpose::kInit);
  ad::ParamStore<S> params;
  add_stack_params(params, "sense.view",
                   widths(static_cast<int>(config.dims.view_size()), config.view_hidden,
                          config.view_code),
                   rng);
  add_stack_params(params, "sense.prop",
                   widths(config.proprio_size(), config.proprio_hidden, config.proprio_code),
                   rng);
  add_stack_params(params, "fuse", {config.sense_code(), config.fuse_code}, rng);
  add_lstm_params(params, "aggregate", config.fuse_code, config.agg_code, rng);
  add_stack_params(params, "decode",
                   widths(config.agg_code, config.decode_hidden,
                          static_cast<int>(config.dims.total_size())),
                   rng);
  add_stack_params(params, "act",
                   widths(config.agg_code, config.act_hidden, config.action_count()), rng);
  return params;
}

template <typename S>
Var stack_forward(ad::Tape<S>& tape, Var x, const std::string& prefix, int layers,
                  ad::Activation last) {
  Var h = x;
  for (int k = 0; k < layers; ++k) {
    const std::string base = layer_name(prefix, k);
    h = ad::affine(tape, h, base + ".W", base + ".b");
    h = ad::activation(tape, h, k + 1 == layers ? last : ad::Activation::kTanh);
  }
  return h;
}

template <typename S>
Var sense_from(ad::Tape<S>& tape, Var view, Var proprio, const ModelConfig& config) {
  const Var v = stack_forward(tape, view, "sense.view", layer_count(config.view_hidden),
                              ad::Activation::kTanh);
  const Var p = stack_forward(tape, proprio, "sense.prop", layer_count(config.proprio_hidden),
                              ad::Activation::kTanh);
  return ad::concat(tape, v, p);
}

template <typename S>
Var sense(ad::Tape<S>& tape, View view, const Proprioception& proprio,
          const ModelConfig& config, bool view_requires_grad) {
  require(view.size() == config.dims.view_size(), ErrorCode::kShapeMismatch,
          "sense: view size mismatch");
  const auto flat = proprio.flattened();
  require(flat.size() == static_cast<size_t>(config.proprio_size()),
          ErrorCode::kShapeMismatch, "sense: proprioception size mismatch");
  // Pixels enter centered on zero, [0,1] -> [-1,1].
  std::vector<S> centered(view.size());
  for (size_t i = 0; i < view.size(); ++i) centered[i] = S(2) * static_cast<S>(view[i]) - S(1);
  const Var v = ad::constant(tape, std::move(centered), view_requires_grad);
  const Var p = ad::constant(tape, std::vector<S>(flat.begin(), flat.end()));
  return sense_from(tape, v, p, config);
}

template <typename S>
Var fuse(ad::Tape<S>& tape, Var s) {
  return stack_forward(tape, s, "fuse", 1, ad::Activation::kTanh);
}

template <typename S>
AggregateState initial_state(ad::Tape<S>& tape, const ModelConfig& config) {
  return {ad::constant(tape, std::vector<S>(config.agg_code, S(0))),
          ad::constant(tape, std::vector<S>(config.agg_code, S(0)))};
}

template <typename S>
AggregateState aggregate(ad::Tape<S>& tape, const AggregateState& prev, Var f) {
  const auto next = ad::lstm_step(tape, f, prev.h, prev.c, "aggregate");
  return {next.h, next.c};
}

template <typename S>
Prediction decode(ad::Tape<S>& tape, Var a, std::span<const SeenView> seen,
                  const ModelConfig& config) {
  const GridDims& d = config.dims;
  const Var raw = stack_forward(tape, a, "decode", layer_count(config.decode_hidden),
                                ad::Activation::kSigmoid);
  Prediction pred;
  pred.pasted_mask.assign(d.cell_count(), 0);
  std::map<size_t, View> by_cell;
  for (const auto& sv : seen) {
    require(sv.elev >= 0 && sv.elev < d.n_elev && sv.agent_azim >= 0 &&
                sv.agent_azim < d.m_azim,
            ErrorCode::kContract, "decode: seen cell out of bounds");
    require(sv.view.size() == d.view_size(), ErrorCode::kShapeMismatch,
            "decode: seen view size mismatch");
    const size_t cell = static_cast<size_t>(sv.elev) * d.m_azim + sv.agent_azim;
    const auto [it, inserted] = by_cell.emplace(cell, sv.view);
    if (!inserted) {
      require(std::memcmp(it->second.data(), sv.view.data(), sv.view.size_bytes()) == 0,
              ErrorCode::kContract, "decode: conflicting views for one cell");
    }
    pred.pasted_mask[cell] = 1;
  }
  std::vector<ad::PasteRange<S>> ranges;
  for (const auto& [cell, view] : by_cell) ranges.push_back({cell * d.view_size(), view});
  pred.estimate = ad::paste<S>(tape, raw, ranges);
  return pred;
}

template <typename S>
ActOutput act(ad::Tape<S>& tape, Var a, const ModelConfig& config, ActMode mode,
              RngStream& rng, std::optional<int> forced) {
  const Var logits = stack_forward(tape, a, "act", layer_count(config.act_hidden),
                                   ad::Activation::kIdentity);
  const Var probs = ad::softmax(tape, logits);
  const auto& pv = tape.value(probs);
  ActOutput out;
  out.probs.assign(pv.begin(), pv.end());
  if (forced) {
    out.index = *forced;
    out.log_prob = ad::log_pick(tape, probs, out.index);
  } else if (mode == ActMode::kSample) {
    const auto sample = ad::categorical_sample(tape, probs, rng);
    out.index = sample.index;
    out.log_prob = sample.log_prob;
  } else {
    out.index = static_cast<int>(std::max_element(out.probs.begin(), out.probs.end()) -
                                 out.probs.begin());
    out.log_prob = ad::log_pick(tape, probs, out.index);
  }
  const auto actions = legal_actions(config.motion);
  require(out.index >= 0 && out.index < static_cast<int>(actions.size()),
          ErrorCode::kContract, "act: action index out of range");
  out.action = actions[out.index];
  return out;
}

template <typename S>
EpisodeTrace rollout(ad::Tape<S>& tape, const ViewGrid& world, Viewpoint start,
                     const ModelConfig& config, const RolloutPolicy& policy,
                     RngStream& rng) {
  require(world.dims() == config.dims, ErrorCode::kShapeMismatch,
          "rollout: world dimensions do not match the model");
  require(in_bounds(start, config.dims), ErrorCode::kContract,
          "rollout: start viewpoint out of bounds");
  require(policy.forced_actions.empty() ||
              policy.forced_actions.size() + 1 >= static_cast<size_t>(config.T),
          ErrorCode::kInvalidArgument, "rollout: too few forced actions");
  const GridDims& d = config.dims;

  EpisodeTrace trace;
  trace.delta0 = start.azim;
  AggregateState state = initial_state(tape, config);
  std::vector<SeenView> seen;
  std::vector<Viewpoint> visited;
  Viewpoint vp = start;
  std::optional<Action> prev;

  for (int t = 0; t < config.T; ++t) {
    StepRecord step;
    step.viewpoint = vp;
    step.observed = capture(world, vp);
    step.proprio = make_proprioception(vp, prev, config.motion, d);
    visited.push_back(vp);

    step.codes.s = sense(tape, step.observed, step.proprio, config);
    step.codes.f = fuse(tape, step.codes.s);
    state = aggregate(tape, state, step.codes.f);
    step.codes.a = state.h;

    seen.push_back({vp.elev, wrap(vp.azim - trace.delta0, d.m_azim), step.observed});
    step.prediction = decode(tape, step.codes.a, seen, config);

    if (t + 1 < config.T) {
      if (policy.external) {
        const StepContext ctx{world, vp, visited, config.motion, rng};
        const Action a = policy.external(ctx);
        require(config.motion.is_legal(a), ErrorCode::kContract,
                "rollout: policy returned illegal action " + to_string(a));
        step.action = a;
        step.action_index = action_index(config.motion, a);
      } else {
        std::optional<int> forced;
        if (!policy.forced_actions.empty()) forced = policy.forced_actions[t];
        auto out = act(tape, step.codes.a, config, policy.mode, rng, forced);
        step.action = out.action;
        step.action_index = out.index;
        step.log_prob = out.log_prob;
        step.probs = std::move(out.probs);
      }
      prev = step.action;
      vp = apply_action(vp, *step.action, d);
    }
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

template <typename S>
ViewGrid prediction_grid(const ad::Tape<S>& tape, const Prediction& p, const GridDims& dims) {
  const auto& v = tape.value(p.estimate);
  return ViewGrid(dims, std::vector<float>(v.begin(), v.end()));
}

template <typename S>
std::vector<uint8_t> module_mask(const ad::ParamStore<S>& params,
                                 const std::vector<std::string>& modules) {
  std::vector<uint8_t> mask(params.size(), 0);
  for (size_t i = 0; i < params.size(); ++i) {
    const auto m = params.module_of(static_cast<int>(i));
    mask[i] = std::find(modules.begin(), modules.end(), m) != modules.end() ? 1 : 0;
  }
  return mask;
}

uint64_t params_checksum(const ad::ParamStore<float>& params,
                         const std::vector<std::string>& modules) {
  uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 0x100000001B3ULL;
  };
  for (size_t i = 0; i < params.size(); ++i) {
    const int id = static_cast<int>(i);
    if (!modules.empty() &&
        std::find(modules.begin(), modules.end(), params.module_of(id)) == modules.end())
      continue;
    mix(params.name(id).data(), params.name(id).size());
    const auto& data = params.value(id).data;
    mix(data.data(), data.size() * sizeof(float));
  }
  return h;
}

#define LOOKAROUND_INSTANTIATE(S)                                                       \
  template ad::ParamStore<S> init_params<S>(const ModelConfig&, uint64_t);              \
  template void add_stack_params<S>(ad::ParamStore<S>&, const std::string&,             \
                                    const std::vector<int>&, RngStream&);               \
  template void add_lstm_params<S>(ad::ParamStore<S>&, const std::string&, int, int,    \
                                   RngStream&);                                          \
  template Var stack_forward<S>(ad::Tape<S>&, Var, const std::string&, int,             \
                                ad::Activation);                                         \
  template Var sense<S>(ad::Tape<S>&, View, const Proprioception&, const ModelConfig&,  \
                        bool);                                                           \
  template Var sense_from<S>(ad::Tape<S>&, Var, Var, const ModelConfig&);               \
  template Var fuse<S>(ad::Tape<S>&, Var);                                               \
  template AggregateState initial_state<S>(ad::Tape<S>&, const ModelConfig&);           \
  template AggregateState aggregate<S>(ad::Tape<S>&, const AggregateState&, Var);        \
  template Prediction decode<S>(ad::Tape<S>&, Var, std::span<const SeenView>,           \
                                const ModelConfig&);                                     \
  template ActOutput act<S>(ad::Tape<S>&, Var, const ModelConfig&, ActMode, RngStream&, \
                            std::optional<int>);                                         \
  template EpisodeTrace rollout<S>(ad::Tape<S>&, const ViewGrid&, Viewpoint,            \
                                   const ModelConfig&, const RolloutPolicy&, RngStream&); \
  template ViewGrid prediction_grid<S>(const ad::Tape<S>&, const Prediction&,           \
                                       const GridDims&);                                 \
  template std::vector<uint8_t> module_mask<S>(const ad::ParamStore<S>&,                \
                                               const std::vector<std::string>&);

LOOKAROUND_INSTANTIATE(float)
LOOKAROUND_INSTANTIATE(double)

#undef LOOKAROUND_INSTANTIATE

}  // namespace lookaround
