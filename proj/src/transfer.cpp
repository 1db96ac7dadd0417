// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <ostream>

#include "lookaround/autodiff/checkpoint.hpp"
#include "lookaround/autodiff/ops.hpp"
#include "lookaround/autodiff/optimizer.hpp"
#include "lookaround/error.hpp"
#include "lookaround/evalsuite.hpp"

namespace lookaround {

namespace {

const std::vector<std::string> kEncoderModules{"sense", "fuse", "aggregate"};

int label_index(const ClassifierHead& head, const ViewGrid& world) {
  require(world.label().has_value(), ErrorCode::kInvalidArgument,
          "classification needs labeled worlds");
  const auto it = std::find(head.labels.begin(), head.labels.end(), *world.label());
  require(it != head.labels.end(), ErrorCode::kInvalidArgument,
          "world label " + std::to_string(*world.label()) + " is not a known class");
  return static_cast<int>(it - head.labels.begin());
}

/// Class logits after every step of the trajectory.
template <typename S>
std::vector<Var> step_logits(ad::Tape<S>& tape, const ClassifierModel& model,
                             const ViewGrid& world, Viewpoint start,
                             std::span<const Action> actions) {
  const ModelConfig& config = model.encoder;
  require(world.dims() == config.dims, ErrorCode::kShapeMismatch,
          "classifier: world dimensions do not match the encoder");
  AggregateState state = initial_state(tape, config);
  Viewpoint vp = start;
  std::optional<Action> prev;
  std::vector<Var> logits;
  for (size_t t = 0; t <= actions.size(); ++t) {
    const auto proprio = make_proprioception(vp, prev, config.motion, config.dims);
    const Var s = sense(tape, capture(world, vp), proprio, config);
    state = aggregate(tape, state, fuse(tape, s));
    logits.push_back(stack_forward(tape, state.h, "classify", 1, ad::Activation::kIdentity));
    if (t < actions.size()) {
      require(config.motion.is_legal(actions[t]), ErrorCode::kContract,
              "classifier: illegal action " + to_string(actions[t]));
      prev = actions[t];
      vp = apply_action(vp, actions[t], config.dims);
    }
  }
  return logits;
}

uint32_t argmax_label(const std::vector<float>& z, const ClassifierHead& head) {
  return head.labels[std::max_element(z.begin(), z.end()) - z.begin()];
}

std::vector<Action> random_actions(RngStream& rng, const MotionModel& motion, int count) {
  std::vector<Action> out;
  for (int i = 0; i < count; ++i) out.push_back(policy_random(rng, motion));
  return out;
}

}  // namespace

ClassifierModel init_classifier(const ModelConfig& encoder, std::vector<uint32_t> labels,
                                uint64_t seed) {
  encoder.validate();
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  require(labels.size() >= 2, ErrorCode::kInvalidArgument,
          "classification needs at least 2 classes");
  ClassifierModel model;
  model.encoder = encoder;
  model.head.labels = std::move(labels);
  const auto full = init_params<float>(encoder, seed);
  for (size_t i = 0; i < full.size(); ++i) {
    const int id = static_cast<int>(i);
    const auto m = full.module_of(id);
    if (std::find(kEncoderModules.begin(), kEncoderModules.end(), m) != kEncoderModules.end())
      model.params.add(full.name(id), full.value(id));
  }
  RngStream rng(seed, StreamPurpose::kClassifier, 0);
  add_stack_params(model.params, "classify", {encoder.agg_code, model.head.class_count()}, rng);
  return model;
}

template <typename S>
Var classifier_loss(ad::Tape<S>& tape, const ClassifierModel& model, const ViewGrid& world,
                    Viewpoint start, std::span<const Action> actions, int target) {
  const auto logits = step_logits(tape, model, world, start, actions);
  std::vector<Var> terms;
  for (const Var z : logits) terms.push_back(ad::cross_entropy(tape, z, target));
  const std::vector<S> weights(terms.size(), S(1) / static_cast<S>(terms.size()));
  return ad::weighted_sum<S>(tape, terms, weights);
}

std::vector<uint32_t> classify_trajectory(const ClassifierModel& model, const ViewGrid& world,
                                          Viewpoint start, std::span<const Action> actions) {
  ad::Tape<float> tape(model.params);
  std::vector<uint32_t> out;
  for (const Var z : step_logits(tape, model, world, start, actions))
    out.push_back(argmax_label(tape.value(z), model.head));
  return out;
}

ClassifierModel train_classifier_random_policy(std::span<const ViewGrid> worlds,
                                               const ModelConfig& encoder,
                                               const ClassifierConfig& config) {
  require(!worlds.empty(), ErrorCode::kInvalidArgument, "classifier training set is empty");
  require(config.batch >= 1 && config.updates >= 0 && config.lr > 0.0,
          ErrorCode::kInvalidArgument, "bad classifier training settings");
  std::vector<uint32_t> labels;
  for (const auto& w : worlds) {
    require(w.label().has_value(), ErrorCode::kInvalidArgument,
            "classifier training needs labeled worlds");
    labels.push_back(*w.label());
  }
  ClassifierModel model = init_classifier(encoder, std::move(labels), config.seed);
  const float weight = 1.0f / static_cast<float>(config.batch);

  for (int u = 0; u < config.updates; ++u) {
    auto grads = ad::Gradients<float>::like(model.params);
    double sum = 0.0;
    for (int i = 0; i < config.batch; ++i) {
      RngStream rng(config.seed, StreamPurpose::kClassifier, static_cast<uint64_t>(u) + 1,
                    static_cast<uint64_t>(i));
      const auto& world = worlds[rng.uniform_int(static_cast<int>(worlds.size()))];
      const Viewpoint start{rng.uniform_int(encoder.dims.n_elev),
                            rng.uniform_int(encoder.dims.m_azim)};
      const auto actions = random_actions(rng, encoder.motion, encoder.T - 1);
      ad::Tape<float> tape(model.params, &grads);
      const Var loss = classifier_loss(tape, model, world, start, actions,
                                       label_index(model.head, world));
      sum += tape.scalar(loss);
      tape.backward(loss, weight);
    }
    ad::sgd_step(model.params, grads, static_cast<float>(config.lr),
                 static_cast<float>(config.momentum));
    if (config.log != nullptr) *config.log << u << '\t' << sum / config.batch << '\n';
  }
  return model;
}

MetricTable run_transfer(const ClassifierModel& model_a, const TrainState& completion,
                         std::span<const ViewGrid> worlds, int T, uint64_t seed,
                         ActMode mode) {
  require(!worlds.empty(), ErrorCode::kInvalidArgument, "transfer needs test worlds");
  require(T >= 1, ErrorCode::kInvalidArgument, "T must be >= 1");
  require(model_a.encoder.motion == completion.model.motion, ErrorCode::kInvalidArgument,
          "classifier and completion models use different motion models");
  require(model_a.encoder.dims == completion.model.dims, ErrorCode::kShapeMismatch,
          "classifier and completion models use different grid dimensions");
  const GridDims& dims = completion.model.dims;
  ModelConfig driver = completion.model;
  driver.T = T;
  RolloutPolicy learned;
  learned.mode = mode;

  std::vector<int64_t> ours(T, 0), random(T, 0), one_view(T, 0);
  for (size_t w = 0; w < worlds.size(); ++w) {
    const ViewGrid& world = worlds[w];
    const uint32_t truth = model_a.head.labels[label_index(model_a.head, world)];
    RngStream start_rng(seed, StreamPurpose::kTransfer, w, 0);
    const Viewpoint start{start_rng.uniform_int(dims.n_elev), start_rng.uniform_int(dims.m_azim)};

    // The completion model sees the same views as model A, so its actions
    // can be generated first and then replayed through A.
    std::vector<Action> driven;
    {
      RngStream rng(seed, StreamPurpose::kTransfer, w, 1);
      ad::Tape<float> tape(completion.params);
      const auto trace = rollout(tape, world, start, driver, learned, rng);
      for (const auto& step : trace.steps)
        if (step.action) driven.push_back(*step.action);
    }
    RngStream rng(seed, StreamPurpose::kTransfer, w, 2);
    const auto randomly = random_actions(rng, driver.motion, T - 1);

    const auto a = classify_trajectory(model_a, world, start, driven);
    const auto b = classify_trajectory(model_a, world, start, randomly);
    const auto c = classify_trajectory(model_a, world, start, {});
    for (int t = 0; t < T; ++t) {
      ours[t] += a[t] == truth;
      random[t] += b[t] == truth;
      one_view[t] += c[0] == truth;
    }
  }

  MetricTable table;
  const double n = static_cast<double>(worlds.size());
  for (int t = 0; t < T; ++t) {
    table.accuracy.push_back({method_name(PolicyKind::kLearned), t + 1, 100.0 * ours[t] / n});
    table.accuracy.push_back({method_name(PolicyKind::kRandom), t + 1, 100.0 * random[t] / n});
    table.accuracy.push_back({method_name(PolicyKind::kOneView), t + 1, 100.0 * one_view[t] / n});
  }
  table.sort();
  return table;
}

namespace {
constexpr char kEncoderName[] = "__encoder";
constexpr char kLabelsName[] = "__labels";
}  // namespace

std::vector<char> encode_classifier(const ClassifierModel& model) {
  ad::ParamStore<float> out = model.params;
  const auto layout = model.encoder.encode();
  out.add(kEncoderName, ad::Tensor<float>({static_cast<int>(layout.size())},
                                          std::vector<float>(layout.begin(), layout.end())));
  out.add(kLabelsName,
          ad::Tensor<float>({model.head.class_count()},
                            std::vector<float>(model.head.labels.begin(), model.head.labels.end())));
  return ad::encode_params(out);
}

ClassifierModel decode_classifier(std::span<const char> bytes) {
  const auto raw = ad::decode_params(bytes);
  const int enc = raw.find(kEncoderName);
  const int lab = raw.find(kLabelsName);
  require(enc >= 0 && lab >= 0, ErrorCode::kFormat, "not a classifier checkpoint");
  const auto& layout_f = raw.value(enc).data;
  const std::vector<int> layout(layout_f.begin(), layout_f.end());
  const auto& labels_f = raw.value(lab).data;
  std::vector<uint32_t> labels;
  for (float v : labels_f) labels.push_back(static_cast<uint32_t>(v));

  ClassifierModel model = init_classifier(ModelConfig::decode(layout), labels, 0);
  require(model.head.labels == labels, ErrorCode::kFormat, "classifier labels must be sorted and unique");
  size_t matched = 0;
  for (size_t i = 0; i < raw.size(); ++i) {
    const int id = static_cast<int>(i);
    if (raw.name(id).rfind("__", 0) == 0) continue;
    const int mid = model.params.find(raw.name(id));
    require(mid >= 0, ErrorCode::kUnknownName, "unknown parameter '" + raw.name(id) + "'");
    require(model.params.value(mid).shape == raw.value(id).shape, ErrorCode::kFormat,
            "shape mismatch for '" + raw.name(id) + "'");
    model.params.value(mid) = raw.value(id);
    model.params.velocity(mid) = raw.velocity(id);
    ++matched;
  }
  require(matched == model.params.size(), ErrorCode::kFormat, "classifier is missing parameters");
  return model;
}

template Var classifier_loss<float>(ad::Tape<float>&, const ClassifierModel&, const ViewGrid&,
                                    Viewpoint, std::span<const Action>, int);
template Var classifier_loss<double>(ad::Tape<double>&, const ClassifierModel&, const ViewGrid&,
                                     Viewpoint, std::span<const Action>, int);

}  // namespace lookaround
