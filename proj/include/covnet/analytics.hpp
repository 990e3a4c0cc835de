#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "covnet/evaluation.hpp"

namespace covnet {

struct DisguiseRow {
  std::string team_id;
  double presnap_accuracy = 0.0;  // (-30, snap)
  double full_accuracy = 0.0;     // (-30, pass_arrival)
  double gap = 0.0;               // full - presnap
  long n_defenders = 0;
};

/// Per defense team, sorted by ascending pre-snap accuracy. Teams without scored defenders are
/// dropped and named in `notes`.
std::vector<DisguiseRow> disguise_table(const EvalReport& coverage_report, std::vector<std::string>* notes = nullptr);
/// Same table recomputed from per-play predictions of the two windows.
std::vector<DisguiseRow> disguise_table(const std::vector<PlayPrediction>& presnap,
                                        const std::vector<PlayPrediction>& full,
                                        std::vector<std::string>* notes = nullptr);
std::vector<DisguiseRow> disguise_table(const CovNet<float>& coverage_model, const std::vector<PreparedPlay>& plays,
                                        std::vector<std::string>* notes = nullptr);

std::string disguise_csv(const std::vector<DisguiseRow>& rows);

using CoverageCalls = std::map<std::string, int>;                         // defender -> class
using MatchupCalls = std::map<std::string, std::optional<std::string>>;  // defender -> receiver

struct DoubleCoverage {
  std::string receiver;
  std::vector<std::string> defenders;  // sorted
  bool operator==(const DoubleCoverage&) const = default;
};

/// Receivers matched by two or more defenders whose coverage class is a man class.
std::vector<DoubleCoverage> detect_double_coverage(const CoverageCalls& coverage, const MatchupCalls& matchup);

enum class GroupBy { Receiver, DefenseTeam };
GroupBy group_by_from_name(const std::string& name);

struct DoubleCoverageRow {
  std::string entity_id;
  long plays_eligible = 0;
  long double_covered_plays = 0;        // model detections
  long truth_double_covered_plays = 0;  // from labels
  double rate() const { return plays_eligible ? static_cast<double>(double_covered_plays) / plays_eligible : 0.0; }
  double truth_rate() const {
    return plays_eligible ? static_cast<double>(truth_double_covered_plays) / plays_eligible : 0.0;
  }
};

struct DoubleCoverageTable {
  std::vector<DoubleCoverageRow> rows;  // sorted by entity id
  long plays_eligible = 0;
  long plays_detected = 0;
  long plays_truth = 0;
  double global_rate() const { return plays_eligible ? static_cast<double>(plays_detected) / plays_eligible : 0.0; }
  double truth_global_rate() const { return plays_eligible ? static_cast<double>(plays_truth) / plays_eligible : 0.0; }
};

using CallConfidence = std::map<std::string, double>;  // defender -> P(coverage call) * P(matchup call)

/// Only defenders whose confidence reaches `min_confidence` take part.
std::vector<DoubleCoverage> detect_double_coverage(const CoverageCalls& coverage, const MatchupCalls& matchup,
                                                   const CallConfidence& confidence, double min_confidence);

/// Largest threshold at which the play still shows a double coverage, or 0 when it never does.
double double_coverage_score(const CoverageCalls& coverage, const MatchupCalls& matchup,
                             const CallConfidence& confidence);

struct ModelCalls {
  CoverageCalls coverage;
  MatchupCalls matchup;
  CallConfidence confidence;
};

/// Per-play calls from the two models on the full (-30, pass_arrival) window.
ModelCalls model_calls(const CovNet<float>& coverage_model, const CovNet<float>& matchup_model, const PreparedPlay& p);

/// Confidence threshold at which the models flag as many eligible plays as the labels do.
double calibrate_double_coverage(const CovNet<float>& coverage_model, const CovNet<float>& matchup_model,
                                 const std::vector<PreparedPlay>& plays);

/// Eligible plays carry both coverage and matchup labels. Without models only the ground-truth
/// columns are filled.
DoubleCoverageTable double_coverage_rates(const CovNet<float>* coverage_model, const CovNet<float>* matchup_model,
                                          const std::vector<PreparedPlay>& plays, GroupBy group_by,
                                          double min_confidence = 0.0);

std::string double_coverage_csv(const DoubleCoverageTable& table);

}  // namespace covnet
