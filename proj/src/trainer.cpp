// SPDX-License-Identifier: Apache-2.0
#include "lookaround/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "lookaround/autodiff/checkpoint.hpp"
#include "lookaround/autodiff/optimizer.hpp"
#include "lookaround/binary_io.hpp"
#include "lookaround/error.hpp"
#include "lookaround/rng.hpp"

namespace lookaround {

void TrainConfig::validate() const {
  require(lr > 0.0 && std::isfinite(lr), ErrorCode::kInvalidArgument, "lr must be > 0");
  require(act_lr_scale > 0.0 && std::isfinite(act_lr_scale), ErrorCode::kInvalidArgument,
          "act_lr_scale must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, ErrorCode::kInvalidArgument,
          "momentum must be in [0, 1)");
  require(batch >= 1, ErrorCode::kInvalidArgument, "batch must be >= 1");
  require(updates >= 0 && pretrain_updates >= 0, ErrorCode::kInvalidArgument,
          "update counts must be >= 0");
  require(beta >= 0.0 && beta < 1.0, ErrorCode::kInvalidArgument, "beta must be in [0, 1)");
  require(T >= 1, ErrorCode::kInvalidArgument, "T must be >= 1");
  for (const auto& m : freeze) {
    const auto& mods = completer_modules();
    require(std::find(mods.begin(), mods.end(), m) != mods.end(),
            ErrorCode::kInvalidArgument, "freeze set names unknown module '" + m + "'");
  }
}

TrainState initial_state(const ModelConfig& model, uint64_t seed) {
  TrainState s;
  s.model = model;
  s.params = init_params<float>(model, seed);
  return s;
}

template <typename S>
EpisodeLoss episode_loss(ad::Tape<S>& tape, EpisodeTrace& trace, const ViewGrid& world) {
  require(!trace.steps.empty(), ErrorCode::kInvalidArgument, "episode_loss: empty trace");
  const ViewGrid target = roll_azimuth(world, trace.delta0);
  const std::vector<S> tgt(target.data().begin(), target.data().end());
  std::vector<Var> terms;
  for (auto& step : trace.steps) {
    require(tape.value(step.prediction.estimate).size() == tgt.size(),
            ErrorCode::kShapeMismatch, "episode_loss: prediction/world size mismatch");
    step.loss = ad::mse<S>(tape, step.prediction.estimate, tgt);
    terms.push_back(step.loss);
  }
  return {ad::sum_scalars<S>(tape, terms), trace.steps.back().loss};
}

Reward compute_reward(TrainState& state, double final_loss, double beta) {
  const double losses[1] = {final_loss};
  return compute_batch_rewards(state, losses, beta).front();
}

std::vector<Reward> compute_batch_rewards(TrainState& state,
                                          std::span<const double> final_losses,
                                          double beta) {
  require(beta >= 0.0 && beta < 1.0, ErrorCode::kInvalidArgument, "beta must be in [0, 1)");
  std::vector<Reward> out;
  double mean = 0.0;
  for (double l : final_losses) {
    require(std::isfinite(l), ErrorCode::kInvalidArgument, "non-finite final loss");
    const double r = -l;
    out.push_back({r, r - static_cast<double>(state.baseline)});
    mean += r;
  }
  if (!final_losses.empty()) {
    mean /= static_cast<double>(final_losses.size());
    state.baseline = static_cast<float>(beta * state.baseline + (1.0 - beta) * mean);
  }
  return out;
}

template <typename S>
void backprop_episode(ad::Tape<S>& tape, const EpisodeTrace& trace, Var total_loss,
                      double advantage, S weight) {
  std::vector<ad::Seed<S>> seeds{{total_loss, weight}};
  for (size_t t = 0; t + 1 < trace.steps.size(); ++t) {
    const auto& step = trace.steps[t];
    require(step.log_prob.valid(), ErrorCode::kContract,
            "backprop_episode: missing log-probability record at t=" + std::to_string(t + 1));
    seeds.push_back({step.log_prob, static_cast<S>(-advantage) * weight});
  }
  tape.backward(seeds);
}

namespace {

using Clock = std::chrono::steady_clock;

struct Episode {
  const ViewGrid* world;
  Viewpoint start;
};

Episode draw_episode(std::span<const ViewGrid> dataset, const GridDims& dims, RngStream& rng) {
  const auto& world = dataset[rng.uniform_int(static_cast<int>(dataset.size()))];
  Viewpoint start{rng.uniform_int(dims.n_elev), rng.uniform_int(dims.m_azim)};
  return {&world, start};
}

void log_update(std::ostream* log, int64_t update, double mean_l, double mean_lt,
                float baseline, Clock::time_point t0) {
  if (log == nullptr) return;
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  *log << update << '\t' << mean_l << '\t' << mean_lt * 1000.0 << '\t' << baseline << '\t'
       << secs << '\n';
}

void check_dataset(std::span<const ViewGrid> dataset, const ModelConfig& model) {
  require(!dataset.empty(), ErrorCode::kInvalidArgument, "training set is empty");
  for (const auto& w : dataset)
    require(w.dims() == model.dims, ErrorCode::kShapeMismatch,
            "training world dimensions do not match the model");
}

}  // namespace

TrainState pretrain_t1(std::span<const ViewGrid> dataset, const TrainConfig& config,
                       TrainState state) {
  config.validate();
  check_dataset(dataset, state.model);
  if (state.phase != TrainPhase::kPretrain) {
    state.phase = TrainPhase::kPretrain;
    state.update = 0;
  }
  ModelConfig model = state.model;
  model.T = 1;
  const auto mask = module_mask(state.params, {"sense", "fuse", "aggregate", "decode"});
  const RolloutPolicy policy{};
  const auto t0 = Clock::now();
  const float weight = 1.0f / static_cast<float>(config.batch);

  for (; state.update < config.pretrain_updates; ++state.update) {
    auto grads = ad::Gradients<float>::like(state.params);
    double sum_l = 0.0;
    for (int i = 0; i < config.batch; ++i) {
      RngStream rng(config.seed, StreamPurpose::kPretrain, static_cast<uint64_t>(state.update),
                    static_cast<uint64_t>(i));
      const auto ep = draw_episode(dataset, model.dims, rng);
      ad::Tape<float> tape(state.params, &grads);
      tape.set_trainable(mask);
      auto trace = rollout(tape, *ep.world, ep.start, model, policy, rng);
      const auto loss = episode_loss(tape, trace, *ep.world);
      sum_l += tape.scalar(loss.total);
      tape.backward(loss.total, weight);
    }
    ad::sgd_step(state.params, grads, static_cast<float>(config.lr),
                 static_cast<float>(config.momentum), mask);
    const double mean = sum_l / config.batch;
    log_update(config.log, state.update, mean, mean, state.baseline, t0);
  }
  return state;
}

TrainState train_policy(std::span<const ViewGrid> dataset, const TrainConfig& config,
                        TrainState state) {
  config.validate();
  check_dataset(dataset, state.model);
  if (state.phase != TrainPhase::kPolicy) {
    state.phase = TrainPhase::kPolicy;
    state.update = 0;
  }
  state.model.T = config.T;
  const ModelConfig& model = state.model;

  std::vector<std::string> trainable;
  for (const auto& m : completer_modules())
    if (std::find(config.freeze.begin(), config.freeze.end(), m) == config.freeze.end())
      trainable.push_back(m);
  const auto mask = module_mask(state.params, trainable);
  auto act_mask = module_mask(state.params, {"act"});
  auto body_mask = mask;
  for (size_t i = 0; i < mask.size(); ++i) {
    act_mask[i] = act_mask[i] && mask[i];
    body_mask[i] = mask[i] && !act_mask[i];
  }
  RolloutPolicy policy;
  policy.mode = config.mode;
  const auto t0 = Clock::now();
  const float weight = 1.0f / static_cast<float>(config.batch);

  for (; state.update < config.updates; ++state.update) {
    auto grads = ad::Gradients<float>::like(state.params);
    // Materialize every trainable buffer so the optimizer sees a gradient
    // even when T = 1 leaves ACT untouched.
    for (size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) grads.accumulate(static_cast<int>(i), state.params.value(static_cast<int>(i)).size());

    const float baseline = state.baseline;
    double sum_l = 0.0;
    std::vector<double> finals;
    for (int i = 0; i < config.batch; ++i) {
      RngStream rng(config.seed, StreamPurpose::kPolicy, static_cast<uint64_t>(state.update),
                    static_cast<uint64_t>(i));
      const auto ep = draw_episode(dataset, model.dims, rng);
      ad::Tape<float> tape(state.params, &grads);
      tape.set_trainable(mask);
      auto trace = rollout(tape, *ep.world, ep.start, model, policy, rng);
      const auto loss = episode_loss(tape, trace, *ep.world);
      const double lt = tape.scalar(loss.final);
      sum_l += tape.scalar(loss.total);
      finals.push_back(lt);
      const double advantage = -lt - static_cast<double>(baseline);
      backprop_episode(tape, trace, loss.total, advantage, weight);
    }
    compute_batch_rewards(state, finals, config.beta);
    ad::sgd_step(state.params, grads, static_cast<float>(config.lr),
                 static_cast<float>(config.momentum), body_mask);
    ad::sgd_step(state.params, grads, static_cast<float>(config.lr * config.act_lr_scale),
                 static_cast<float>(config.momentum), act_mask);
    double mean_lt = 0.0;
    for (double v : finals) mean_lt += v;
    mean_lt /= config.batch;
    log_update(config.log, state.update, sum_l / config.batch, mean_lt, state.baseline, t0);
  }
  return state;
}

namespace {

constexpr char kBaselineName[] = "__baseline";
constexpr char kUpdateName[] = "__update";
constexpr char kPhaseName[] = "__phase";
constexpr char kModelName[] = "__model";
constexpr int64_t kSplit = int64_t{1} << 24;

}  // namespace

std::vector<char> encode_checkpoint(const TrainState& state) {
  ad::ParamStore<float> out = state.params.cast<float>();
  const auto layout = state.model.encode();
  out.add(kModelName, ad::Tensor<float>({static_cast<int>(layout.size())},
                                        std::vector<float>(layout.begin(), layout.end())));
  out.add(kBaselineName, ad::Tensor<float>({1}, {state.baseline}));
  out.add(kUpdateName, ad::Tensor<float>({2}, {static_cast<float>(state.update % kSplit),
                                               static_cast<float>(state.update / kSplit)}));
  out.add(kPhaseName, ad::Tensor<float>({1}, {static_cast<float>(static_cast<int>(state.phase))}));
  return ad::encode_params(out);
}

TrainState decode_checkpoint(std::span<const char> bytes) {
  const auto raw = ad::decode_params(bytes);
  auto scalar_record = [&raw](const char* name, size_t n) -> const std::vector<float>& {
    const int id = raw.find(name);
    require(id >= 0, ErrorCode::kFormat, std::string("checkpoint lacks ") + name);
    require(raw.value(id).size() == n, ErrorCode::kFormat, std::string("bad ") + name);
    return raw.value(id).data;
  };
  const auto& layout_f = scalar_record(kModelName, 16);
  std::vector<int> layout(layout_f.begin(), layout_f.end());

  TrainState state;
  state.model = ModelConfig::decode(layout);
  state.baseline = scalar_record(kBaselineName, 1)[0];
  const auto& upd = scalar_record(kUpdateName, 2);
  state.update = static_cast<int64_t>(upd[0]) + static_cast<int64_t>(upd[1]) * kSplit;
  const int phase = static_cast<int>(scalar_record(kPhaseName, 1)[0]);
  require(phase >= 0 && phase <= 2, ErrorCode::kFormat, "bad training phase");
  state.phase = static_cast<TrainPhase>(phase);

  const auto expected = init_params<float>(state.model, 0);
  for (size_t i = 0; i < raw.size(); ++i) {
    const int id = static_cast<int>(i);
    const auto& name = raw.name(id);
    if (name.rfind("__", 0) == 0) continue;
    const int eid = expected.find(name);
    require(eid >= 0, ErrorCode::kUnknownName, "checkpoint has unknown parameter '" + name + "'");
    require(expected.value(eid).shape == raw.value(id).shape, ErrorCode::kFormat,
            "checkpoint shape mismatch for '" + name + "'");
    const int nid = state.params.add(name, raw.value(id));
    state.params.velocity(nid) = raw.velocity(id);
  }
  require(state.params.size() == expected.size(), ErrorCode::kFormat,
          "checkpoint is missing parameters");
  return state;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(state));
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

#define LOOKAROUND_TRAINER_INSTANTIATE(S)                                                 \
  template EpisodeLoss episode_loss<S>(ad::Tape<S>&, EpisodeTrace&, const ViewGrid&);    \
  template void backprop_episode<S>(ad::Tape<S>&, const EpisodeTrace&, Var, double, S);

LOOKAROUND_TRAINER_INSTANTIATE(float)
LOOKAROUND_TRAINER_INSTANTIATE(double)
#undef LOOKAROUND_TRAINER_INSTANTIATE

}  // namespace lookaround
