// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lookaround/autodiff/ops.hpp"
#include "lookaround/autodiff/param_store.hpp"
#include "lookaround/autodiff/tape.hpp"
#include "lookaround/gridworld.hpp"
#include "lookaround/rng.hpp"

namespace lookaround {

using ad::Var;

/// Network layout. A hidden width of 0 removes that stack's hidden layer.
struct ModelConfig {
  GridDims dims{};
  MotionModel motion{2, 2};
  int T = 4;

  int view_code = 64;
  int proprio_code = 32;
  int fuse_code = 128;
  int agg_code = 256;

  int view_hidden = 128;
  int proprio_hidden = 32;
  int decode_hidden = 128;
  int act_hidden = 64;

  int sense_code() const { return view_code + proprio_code; }
  int proprio_size() const { return dims.n_elev + motion.action_count(); }
  int action_count() const { return motion.action_count(); }

  /// Throws kInvalidArgument on non-positive sizes or T < 1.
  void validate() const;

  /// Integer encoding used to embed the layout in checkpoints.
  std::vector<int> encode() const;
  static ModelConfig decode(std::span<const int> values);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Scene-style (3x5 neighborhood, T=6) and object-style (5x5, T=4) presets.
ModelConfig preset_config(const std::string& name, GridDims dims = {});

inline const std::vector<std::string>& completer_modules() {
  static const std::vector<std::string> kModules{"sense", "fuse", "aggregate", "decode", "act"};
  return kModules;
}

/// Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases, forget-gate
/// bias 1.
template <typename S>
ad::ParamStore<S> init_params(const ModelConfig& config, uint64_t seed);

/// Adds affine layers <prefix>.l<k>.{W,b} for the given widths.
template <typename S>
void add_stack_params(ad::ParamStore<S>& params, const std::string& prefix,
                      const std::vector<int>& widths, RngStream& rng);

template <typename S>
void add_lstm_params(ad::ParamStore<S>& params, const std::string& prefix, int in,
                     int hidden, RngStream& rng);

/// Affine layers <prefix>.l0, l1, ... with tanh between them and `last` on the
/// final layer.
template <typename S>
Var stack_forward(ad::Tape<S>& tape, Var x, const std::string& prefix, int layers,
                  ad::Activation last);

struct StepCodes {
  Var s;
  Var f;
  Var a;
};

/// Recurrent state of AGGREGATE.
struct AggregateState {
  Var h;
  Var c;
};

/// Predicted viewgrid in the agent frame: cell (e, k) stands for world cell
/// (e, (delta0 + k) mod M).
struct Prediction {
  Var estimate;
  CellMask pasted_mask;
};

/// A directly observed view in agent-frame coordinates.
struct SeenView {
  int elev = 0;
  int agent_azim = 0;
  View view;
};

enum class ActMode { kSample, kArgmax };

struct ActOutput {
  Action action;
  int index = 0;
  Var log_prob;
  std::vector<double> probs;
};

/// Two independent stacks (view, proprioception) concatenated into s_t.
template <typename S>
Var sense(ad::Tape<S>& tape, View view, const Proprioception& proprio,
          const ModelConfig& config, bool view_requires_grad = false);

template <typename S>
Var sense_from(ad::Tape<S>& tape, Var view, Var proprio, const ModelConfig& config);

template <typename S>
Var fuse(ad::Tape<S>& tape, Var s);

template <typename S>
AggregateState initial_state(ad::Tape<S>& tape, const ModelConfig& config);

template <typename S>
AggregateState aggregate(ad::Tape<S>& tape, const AggregateState& prev, Var f);

/// Decodes a_t to [0,1] pixels and pastes the seen views over their cells.
template <typename S>
Prediction decode(ad::Tape<S>& tape, Var a, std::span<const SeenView> seen,
                  const ModelConfig& config);

/// Logits over legal_actions, softmax, then a sampled or argmax choice.
/// With `forced` set, that index is taken and its log-probability recorded.
template <typename S>
ActOutput act(ad::Tape<S>& tape, Var a, const ModelConfig& config, ActMode mode,
              RngStream& rng, std::optional<int> forced = std::nullopt);

/// What an external (non-learned) policy may look at when choosing a move.
struct StepContext {
  const ViewGrid& world;
  Viewpoint current;
  std::span<const Viewpoint> visited;
  const MotionModel& motion;
  RngStream& rng;
};

using ActionSelector = std::function<Action(const StepContext&)>;

/// Drives the episode. With no selector the learned ACT module chooses;
/// `forced_actions` replays fixed indices through ACT (log-probs recorded).
struct RolloutPolicy {
  ActMode mode = ActMode::kSample;
  ActionSelector external;
  std::vector<int> forced_actions;
};

struct StepRecord {
  Viewpoint viewpoint;
  View observed;
  Proprioception proprio;
  StepCodes codes;
  Prediction prediction;
  std::optional<Action> action;  // empty at t = T
  int action_index = -1;
  Var log_prob;                  // invalid for external policies
  std::vector<double> probs;
  Var loss;                      // filled in by episode_loss
};

struct EpisodeTrace {
  std::vector<StepRecord> steps;
  int delta0 = 0;
  std::string world_ref;

  size_t action_count() const;
};

template <typename S>
EpisodeTrace rollout(ad::Tape<S>& tape, const ViewGrid& world, Viewpoint start,
                     const ModelConfig& config, const RolloutPolicy& policy,
                     RngStream& rng);

/// Prediction values as a ViewGrid (agent frame).
template <typename S>
ViewGrid prediction_grid(const ad::Tape<S>& tape, const Prediction& p, const GridDims& dims);

/// Mask selecting the parameters of the named modules.
template <typename S>
std::vector<uint8_t> module_mask(const ad::ParamStore<S>& params,
                                 const std::vector<std::string>& modules);

/// Order-independent digest of parameter bytes for the given modules.
uint64_t params_checksum(const ad::ParamStore<float>& params,
                         const std::vector<std::string>& modules = {});

}  // namespace lookaround
