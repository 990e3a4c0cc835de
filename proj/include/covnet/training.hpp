#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "covnet/model.hpp"
#include "covnet/numerics/adamw.hpp"
#include "covnet/numerics/schedules.hpp"
#include "covnet/numerics/softmax.hpp"

namespace covnet {

// ------------------------------------------------------------------------------------------------
// Losses. Each returns the scalar loss and, when requested, d(loss)/d(logits).

/// Per-defender one-hot rows over [no matchup, receivers...].
template <typename S>
Matrix<S> matchup_onehot(const std::vector<int>& classes, Index n_columns) {
  Matrix<S> t = Matrix<S>::Zero(static_cast<Index>(classes.size()), n_columns);
  for (std::size_t d = 0; d < classes.size(); ++d) {
    if (classes[d] < 0 || classes[d] >= n_columns) throw ConfigError("matchup class out of range");
    t(static_cast<Index>(d), classes[d]) = S(1);
  }
  return t;
}

/// Mean over defenders of -sum_r z*_{d,r} log softmax_r(Z_{d,r}).
template <typename S>
S loss_matchup(const Matrix<S>& logits, const Matrix<S>& targets, Matrix<S>* grad = nullptr) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols())
    throw ConfigError("matchup targets shape mismatch");
  if (logits.rows() == 0) throw ConfigError("matchup loss needs at least one defender");
  for (Index d = 0; d < targets.rows(); ++d) {
    int ones = 0;
    for (Index r = 0; r < targets.cols(); ++r) {
      if (targets(d, r) == S(1))
        ++ones;
      else if (targets(d, r) != S(0))
        throw ConfigError("matchup target row " + std::to_string(d) + " is not one-hot");
    }
    if (ones != 1) throw ConfigError("matchup target row " + std::to_string(d) + " is not one-hot");
  }
  const S D = static_cast<S>(logits.rows());
  const Matrix<S> lsm = log_softmax(logits);
  const S loss = -(targets.array() * lsm.array()).sum() / D;
  if (grad) *grad = (lsm.array().exp() - targets.array()).matrix() / D;
  return loss;
}

/// Mean over defenders of the 20-class cross-entropy.
template <typename S>
S loss_coverage(const Matrix<S>& logits, const std::vector<int>& classes, Matrix<S>* grad = nullptr) {
  if (static_cast<Index>(classes.size()) != logits.rows()) throw ConfigError("coverage targets size mismatch");
  if (logits.rows() == 0) throw ConfigError("coverage loss needs at least one defender");
  for (int c : classes)
    if (c < 0 || c >= logits.cols()) throw ConfigError("coverage class " + std::to_string(c) + " out of range");
  const Matrix<S> lsm = log_softmax(logits);
  const S D = static_cast<S>(logits.rows());
  S loss = S(0);
  for (Index d = 0; d < logits.rows(); ++d) loss -= lsm(d, classes[static_cast<std::size_t>(d)]);
  loss /= D;
  if (grad) {
    *grad = lsm.array().exp().matrix();
    for (Index d = 0; d < logits.rows(); ++d) (*grad)(d, classes[static_cast<std::size_t>(d)]) -= S(1);
    *grad /= D;
  }
  return loss;
}

/// -log softmax(z)_true over all slots; the last slot is the (masked) targeted receiver.
template <typename S>
S loss_target(const Matrix<S>& logits, Index true_index, Matrix<S>* grad = nullptr) {
  if (logits.rows() != 1 || logits.cols() < 2) throw ConfigError("target logits must be [1, D + 1]");
  if (true_index == logits.cols() - 1) throw ConfigError("target index points at the offensive slot");
  if (true_index < 0 || true_index >= logits.cols()) throw ConfigError("target index out of range");
  const Matrix<S> lsm = log_softmax(logits);
  if (grad) {
    *grad = lsm.array().exp().matrix();
    (*grad)(0, true_index) -= S(1);
  }
  return -lsm(0, true_index);
}

// ------------------------------------------------------------------------------------------------

struct TrainConfig {
  Task task = Task::Coverage;
  int batch_size = 16;
  int epochs = 150;
  AdamWConfig optimizer;
  OneCycleConfig onecycle;         // target, matchup
  CosineRestartConfig cosine;      // coverage
  std::uint64_t seed = 7;
  bool augmentation = true;
  double val_fraction = 0.1;
  double clip_norm = 1.0;          // <= 0 disables clipping

  static TrainConfig defaults(Task task);
  bool uses_onecycle() const { return task != Task::Coverage; }
  void validate() const;
  nlohmann::json to_json() const;
};

struct MetricsRow {
  int epoch = 0;
  long step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingState {
  int epoch = 0;
  long step = 0;
  std::string rng_state;
};

struct TrainResult {
  CovNet<float> model;
  std::vector<MetricsRow> metrics;
  std::vector<double> lr_trace;  // lr used at each optimizer step
  TrainingState state;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
};

/// True when the play carries a label usable for the task (target plays need a defender target).
bool has_task_label(const PreparedPlay& p, Task task);

/// Deterministic 10% style holdout keyed on the play id.
bool in_validation_split(const std::string& play_id, double fraction);

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);

/// Task loss and logits gradient for one play window.
template <typename S>
S task_loss(const HeadOutputs<S>& out, const PreparedPlay& p, Task task, Matrix<S>* grad = nullptr) {
  switch (task) {
    case Task::Coverage: return loss_coverage(out.coverage_logits, p.coverage_targets, grad);
    case Task::Matchup:
      return loss_matchup(out.matchup_logits, matchup_onehot<S>(p.matchup_targets, out.matchup_logits.cols()), grad);
    case Task::Target:
      if (!p.target_slot) throw ConfigError("play " + p.play.play_id + " has no target defender");
      return loss_target(out.target_logits, *p.target_slot, grad);
  }
  return S(0);
}

/// Per-defender (coverage, matchup) or per-play (target) correct counts for one prediction.
struct Tally {
  long correct = 0;
  long total = 0;
  double accuracy() const { return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
};
template <typename S>
Tally score_outputs(const HeadOutputs<S>& out, const PreparedPlay& p, Task task);

using EpochCallback = std::function<void(const MetricsRow&)>;

TrainResult train(const std::vector<PreparedPlay>& plays, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

std::string metrics_csv(const std::vector<MetricsRow>& rows);

// ------------------------------------------------------------------------------------------------
// Checkpoints: little-endian u64 manifest length, JSON manifest, raw little-endian payload.

inline constexpr int kCheckpointSchemaVersion = 1;

struct LoadedModel {
  CovNet<float> model;
  TrainingState state;
};

std::string serialize_checkpoint(const CovNet<float>& model, const TrainingState& state);
LoadedModel deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const CovNet<float>& model, const TrainingState& state, const std::string& path);
LoadedModel load_checkpoint(const std::string& path);

}  // namespace covnet
