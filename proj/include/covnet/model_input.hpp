#pragma once

#include <optional>
#include <vector>

#include "covnet/augmentation.hpp"
#include "covnet/numerics/tensor.hpp"
#include "covnet/play.hpp"

namespace covnet {

/// One play window as consumed by the network. Features are laid out agent-major: row a * T + t.
struct ModelInput {
  Matrix<double> features;
  Index n_agents = 0;
  Index n_frames = 0;
  int first_offset = 0;  // snap-relative frame of t = 0
  std::vector<PositionCode> positions;
  std::vector<TeamSide> sides;
  std::vector<Index> defenders;
  std::vector<Index> receivers;
  Situation situation;
  std::optional<Index> targeted_receiver;  // agent index
};

/// A filtered play with its full (-30, pass_arrival) feature cube and per-task targets.
struct PreparedPlay {
  Play play;  // normalized to rightward
  LabelSet labels;
  Tensor<double> sequence;
  EventOffsets events;
  std::vector<Index> defenders;
  std::vector<Index> receivers;
  std::vector<int> coverage_targets;  // per defender; -1 when unlabeled
  std::vector<int> matchup_targets;   // per defender; 0 = no matchup, r + 1 = receivers[r]
  std::optional<Index> targeted_receiver;
  std::optional<int> target_slot;  // defender slot of the target defender; empty = NONE

  Window full_window() const { return {kEarliestStartOffset, events.pass_arrival}; }
};

PreparedPlay prepare_play(const LabeledPlay& lp);

ModelInput make_input(const Play& play, const Tensor<double>& window, int first_offset,
                      std::optional<Index> targeted_receiver = std::nullopt);
ModelInput make_input(const PreparedPlay& p, const Window& w);

/// Reorders agents: new agent i is old agent perm[i]. Used for equivariance checks.
ModelInput permute_agents(const ModelInput& in, const std::vector<Index>& perm);

}  // namespace covnet
