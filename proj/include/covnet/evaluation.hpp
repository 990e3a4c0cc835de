#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covnet/training.hpp"

namespace covnet {

/// Predicted classes for one play window: per defender for coverage (class) and matchup
/// (0 = no matchup, r + 1 = receivers[r]); a single defender slot for target (-1 = none).
using Predictor = std::function<std::vector<int>(const PreparedPlay&, const ModelInput&)>;

Predictor model_predictor(const CovNet<float>& model);

/// Ground truth in the same encoding as the predictor output.
std::vector<int> truth_classes(const PreparedPlay& p, Task task);

struct PlayPrediction {
  std::string play_id;
  std::string defense_team;
  std::vector<int> truth;
  std::vector<int> predicted;
};

struct StrategyResult {
  TruncationStrategy strategy;
  // coverage: defenders whose truth is not NO_ASSIGNMENT; matchup: all defenders; target: per play.
  Tally primary;
  // coverage: all defenders; matchup: defenders with a true matchup; target: same as primary.
  Tally variant;
  double f1 = 0.0;  // macro over classes seen in truth or prediction
  std::map<std::string, Tally> per_team;  // primary metric keyed by defense team
  std::map<std::pair<int, int>, long> confusion;  // (truth, predicted) -> count
  std::vector<PlayPrediction> plays;
};

struct TargetTable {
  double baseline = 0.0;
  double raw = 0.0;
  double postprocessed = 0.0;
  long n_plays = 0;
};

struct EvalReport {
  Task task = Task::Coverage;
  std::vector<StrategyResult> strategies;
  std::optional<TargetTable> target;

  const StrategyResult& find(const TruncationStrategy& s) const;
  std::string strategies_csv() const;
  nlohmann::json to_json() const;
};

/// Plays scored for a task: coverage and matchup need their labels, target needs a defender target.
std::vector<const PreparedPlay*> scorable_plays(const std::vector<PreparedPlay>& plays, Task task);

EvalReport evaluate_strategies(const Predictor& predict, const std::vector<PreparedPlay>& plays, Task task);
EvalReport evaluate_strategies(const CovNet<float>& model, const std::vector<PreparedPlay>& plays);

double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted);

/// Defender closest to the targeted receiver at pass arrival; ties go to the smallest agent_id.
std::string nearest_defender_baseline(const Play& play, const std::string& targeted_receiver);

struct PostprocessOptions {
  double threshold = 0.5;
  double deep_yards = 15.0;
  int min_deep_defenders = 4;
  double late_clock_s = 120.0;
  bool assume_lead = false;  // stands in for a multi-score lead
};

/// At least `min_deep_defenders` defenders deeper than `deep_yards` beyond the LOS at the snap,
/// in a late-clock (or protected-lead) situation. Expects a normalized play.
bool preventative_alignment(const Play& play, const PostprocessOptions& opt = {});

/// Matchup-model output used as the fallback: probabilities [D, R + 1] over (none, receivers).
struct MatchupPrediction {
  Matrix<double> probs;
  std::vector<Index> receivers;  // agent indices for columns 1..R
};

/// Final target defender id, or empty for NONE. `target_probs` is the masked softmax [1, D + 1].
std::optional<std::string> target_postprocess(const Matrix<double>& target_probs, const Play& play,
                                              const std::optional<Index>& targeted_receiver,
                                              const MatchupPrediction* matchup, const PostprocessOptions& opt = {});

/// Share of exact matches; NONE (empty) is a class of its own.
double target_accuracy(const std::vector<std::optional<std::string>>& predicted,
                       const std::vector<std::optional<std::string>>& truth);

/// Baseline, raw-model and post-processed play-level accuracy over plays with a target label.
TargetTable evaluate_target_table(const CovNet<float>& target_model, const CovNet<float>* matchup_model,
                                  const std::vector<PreparedPlay>& plays, const PostprocessOptions& opt = {});

}  // namespace covnet
