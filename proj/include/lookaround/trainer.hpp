// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lookaround/autodiff/param_store.hpp"
#include "lookaround/autodiff/tape.hpp"
#include "lookaround/completer.hpp"
#include "lookaround/gridworld.hpp"

namespace lookaround {

struct TrainConfig {
  double lr = 3.0;
  double momentum = 0.9;
  // ACT's step is lr * act_lr_scale. Reconstruction losses are per-pixel
  // means, so their gradients are orders of magnitude smaller than the
  // REINFORCE gradients reaching ACT.
  double act_lr_scale = 0.03;
  int batch = 8;
  int updates = 3000;           // policy-phase updates
  int pretrain_updates = 3000;  // T = 1 phase
  double beta = 0.9;            // baseline decay
  uint64_t seed = 0;
  int T = 4;
  std::vector<std::string> freeze{"sense", "fuse", "decode"};
  ActMode mode = ActMode::kSample;
  std::ostream* log = nullptr;  // one TSV line per update when set

  void validate() const;
};

enum class TrainPhase : int { kInitial = 0, kPretrain = 1, kPolicy = 2 };

struct TrainState {
  ModelConfig model;
  ad::ParamStore<float> params;
  float baseline = 0.0f;
  int64_t update = 0;  // completed updates within `phase`
  TrainPhase phase = TrainPhase::kInitial;
};

TrainState initial_state(const ModelConfig& model, uint64_t seed);

struct EpisodeLoss {
  Var total;  // summed over timesteps
  Var final;  // t = T term alone
};

/// Per-timestep masked-free MSE between each agent-frame prediction and the
/// world rolled by delta0; also stores each step's loss in the trace.
template <typename S>
EpisodeLoss episode_loss(ad::Tape<S>& tape, EpisodeTrace& trace, const ViewGrid& world);

struct Reward {
  double reward = 0.0;
  double advantage = 0.0;
};

/// R = -L_T, advantage = R - b, then b <- beta b + (1 - beta) R.
Reward compute_reward(TrainState& state, double final_loss, double beta);

/// Batch form: every advantage uses the same b, which then moves once toward
/// the batch-mean reward.
std::vector<Reward> compute_batch_rewards(TrainState& state,
                                          std::span<const double> final_losses,
                                          double beta);

/// Single reverse pass seeded with `weight` on L and -advantage * weight on
/// every ACT log-probability.
template <typename S>
void backprop_episode(ad::Tape<S>& tape, const EpisodeTrace& trace, Var total_loss,
                      double advantage, S weight = S(1));

/// T = 1 training of SENSE, FUSE, AGGREGATE and DECODE; resumes when `state`
/// is already in the pretrain phase.
TrainState pretrain_t1(std::span<const ViewGrid> dataset, const TrainConfig& config,
                       TrainState state);

/// Policy-phase training with the freeze set held fixed; resumes when
/// `state` is already in the policy phase.
TrainState train_policy(std::span<const ViewGrid> dataset, const TrainConfig& config,
                        TrainState state);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

std::vector<char> encode_checkpoint(const TrainState& state);
TrainState decode_checkpoint(std::span<const char> bytes);

}  // namespace lookaround
