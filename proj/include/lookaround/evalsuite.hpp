// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lookaround/autodiff/param_store.hpp"
#include "lookaround/completer.hpp"
#include "lookaround/gridworld.hpp"
#include "lookaround/rng.hpp"
#include "lookaround/trainer.hpp"

namespace lookaround {

enum class PolicyKind { kLearned, kRandom, kLargeAction, kPeekSaliency, kOneView };

/// Method label used in metric tables: "ours", "random", "large-action",
/// "peek-saliency", "1-view".
const char* method_name(PolicyKind kind);

struct PolicySpec {
  PolicyKind kind = PolicyKind::kLearned;
  // Only for kLargeAction; when unset, every perimeter action is tried and
  // the best one on the test set is reported.
  std::optional<Action> fixed;
};

/// The five compared methods.
std::vector<PolicySpec> standard_policies();

Action policy_random(RngStream& rng, const MotionModel& motion);

/// Actions on the border of the motion neighborhood, in legal_actions order.
std::vector<Action> policy_large_action_candidates(const MotionModel& motion);

/// Mean absolute horizontal plus vertical finite difference: the summed
/// magnitudes divided by the number of difference terms,
/// H(W-1)C + (H-1)WC.
double saliency_score(View view, const GridDims& dims);

/// Moves to the reachable unvisited cell with the highest true-view saliency;
/// ties go to the earlier legal action. Falls back to all reachable cells when
/// every one has been visited.
Action policy_peek_saliency(const ViewGrid& world, Viewpoint current,
                            std::span<const Viewpoint> visited, const MotionModel& motion);

ActionSelector random_selector();
ActionSelector fixed_selector(Action a);
ActionSelector peek_saliency_selector();

struct CompletionRow {
  std::string method;
  int t = 0;
  double mse_x1000 = 0.0;
  double improvement_pct = 0.0;
};

struct AccuracyRow {
  std::string method;
  int t = 0;
  double accuracy = 0.0;  // percent
};

struct MetricTable {
  std::vector<CompletionRow> completion;
  std::vector<AccuracyRow> accuracy;
  // Diagnostics.
  std::optional<Action> large_action_choice;
  std::vector<int64_t> elevation_histogram;  // learned policy, all visited steps

  void sort();
};

/// 100 (mse_1view - mse) / mse_1view.
double improvement_pct(double mse_one_view, double mse);

void write_completion_csv(std::ostream& os, const MetricTable& table);
void write_accuracy_csv(std::ostream& os, const MetricTable& table);
void save_csv(const MetricTable& table, const std::filesystem::path& path);

struct EvalOptions {
  int T = 4;
  uint64_t seed = 0;
  ActMode mode = ActMode::kSample;
};

/// Per-t mean grid_mse x 1000 of one policy over the test worlds. Start
/// viewpoints and policy randomness come from per-world streams, so every
/// policy sees the same starts.
std::vector<double> mse_curve(const PolicySpec& policy, std::span<const ViewGrid> worlds,
                              const TrainState& model, const EvalOptions& options,
                              std::vector<int64_t>* elevation_histogram = nullptr);

MetricTable evaluate_policies(std::span<const PolicySpec> policies,
                              std::span<const ViewGrid> worlds, const TrainState& model,
                              const EvalOptions& options);

/// Maps the aggregate code to class logits; labels[k] is the world label of
/// logit k.
struct ClassifierHead {
  std::vector<uint32_t> labels;
  int class_count() const { return static_cast<int>(labels.size()); }
};

/// Recognition model: a sense/fuse/aggregate encoder plus a linear
/// "classify" head.
struct ClassifierModel {
  ModelConfig encoder;
  ClassifierHead head;
  ad::ParamStore<float> params;
};

struct ClassifierConfig {
  double lr = 0.1;
  double momentum = 0.9;
  int batch = 8;
  int updates = 1000;
  uint64_t seed = 0;
  std::ostream* log = nullptr;
};

ClassifierModel init_classifier(const ModelConfig& encoder, std::vector<uint32_t> labels,
                                uint64_t seed);

/// Mean cross-entropy over timesteps under uniformly random actions.
ClassifierModel train_classifier_random_policy(std::span<const ViewGrid> worlds,
                                               const ModelConfig& encoder,
                                               const ClassifierConfig& config);

/// Argmax class (as a world label) after each step of the trajectory that
/// starts at `start` and takes `actions`.
std::vector<uint32_t> classify_trajectory(const ClassifierModel& model, const ViewGrid& world,
                                          Viewpoint start, std::span<const Action> actions);

/// Mean cross-entropy of one trajectory, recorded on a tape for training.
template <typename S>
Var classifier_loss(ad::Tape<S>& tape, const ClassifierModel& model, const ViewGrid& world,
                    Viewpoint start, std::span<const Action> actions, int target);

/// Accuracy-vs-t of the classifier when driven by the completion policy
/// ("ours"), by random actions ("random"), and after a single view ("1-view").
MetricTable run_transfer(const ClassifierModel& model_a, const TrainState& completion,
                         std::span<const ViewGrid> worlds, int T, uint64_t seed,
                         ActMode mode = ActMode::kSample);

std::vector<char> encode_classifier(const ClassifierModel& model);
ClassifierModel decode_classifier(std::span<const char> bytes);

}  // namespace lookaround
