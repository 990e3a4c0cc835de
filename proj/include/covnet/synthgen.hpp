#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "covnet/play.hpp"

namespace covnet {

struct TeamProfile {
  std::string team_id;
  double p_disguise = 0.0;
};

struct GenConfig {
  long n_plays = 1000;
  int n_defenders = 7;
  int n_offense = 7;
  int n_receivers = 5;
  // Order follows kSchemeNames.
  std::array<double, kNumSchemes> scheme_mix = {0.20, 0.15, 0.25, 0.15, 0.10, 0.11, 0.04};
  double p_disguise = 0.3;
  double p_double_coverage = 0.055;
  double noise_sigma = 0.15;
  std::uint64_t seed = 7;
  int n_offense_teams = 8;
  // Defense teams cycle by play index. Empty: eight teams sharing p_disguise.
  std::vector<TeamProfile> defense_teams;

  void validate() const;
  std::vector<TeamProfile> resolved_teams() const;
  nlohmann::json to_json() const;
  static GenConfig from_json(const nlohmann::json& j);
};

// Generator internals exposed for tests.
struct GenTrace {
  Scheme alignment_scheme = Scheme::Cover3;
  bool disguised = false;
  bool double_covered = false;
  // Per defender (in Play::defender_indices() order).
  std::vector<double> cushion_x;
  std::vector<double> cushion_y;
  std::vector<int> man_receiver;  // agent index or -1
  int reaction_lag_frames = 0;
};

/// Play `play_index` of the dataset described by cfg. Each play draws from its own RNG stream
/// keyed by (seed, play_index).
LabeledPlay gen_play(const GenConfig& cfg, long play_index, GenTrace* trace = nullptr);
std::vector<LabeledPlay> gen_plays(const GenConfig& cfg);

struct DatasetPaths {
  std::string plays;
  std::string manifest;
};

/// Writes <out_dir>/plays.jsonl and <out_dir>/manifest.json.
DatasetPaths gen_dataset(const GenConfig& cfg, const std::string& out_dir);

inline constexpr int kDatasetSchemaVersion = 1;

}  // namespace covnet
