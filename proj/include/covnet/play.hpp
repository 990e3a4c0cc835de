#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covnet/numerics/tensor.hpp"
#include "covnet/vocab.hpp"

namespace covnet {

enum class TeamSide { Offense, Defense };
enum class PlayDirection { Left, Right };
enum class Task { Coverage, Matchup, Target };
enum class EndEvent { Snap, PassForward, PassArrival };

std::string_view task_name(Task task);
Task task_from_name(std::string_view name);

struct Agent {
  std::string agent_id;
  TeamSide side = TeamSide::Offense;
  PositionCode position = PositionCode::WR;
  bool eligible_receiver = false;

  bool operator==(const Agent&) const = default;
};

struct AgentState {
  double x = 0.0;
  double y = 0.0;
  double orientation = 0.0;  // degrees [0, 360)
  double direction = 0.0;    // degrees [0, 360); 0 = toward +x
  std::optional<double> speed;

  bool operator==(const AgentState&) const = default;
};

// One sample at 10 Hz; entry i belongs to Play::agents[i].
using Frame = std::vector<AgentState>;

// Raw indices into Play::frames.
struct PlayEvents {
  Index snap = 0;
  std::optional<Index> pass_forward;
  std::optional<Index> pass_arrival;

  bool operator==(const PlayEvents&) const = default;
};

struct Situation {
  int down = 1;
  double distance = 10.0;
  double yard_line = 25.0;  // yards from the offense's own goal line
  double game_clock_s = 3600.0;
  Scheme team_scheme = Scheme::Cover3;

  bool operator==(const Situation&) const = default;
};

struct Play {
  std::string play_id;
  std::string offense_team;
  std::string defense_team;
  PlayDirection direction = PlayDirection::Right;
  std::vector<Agent> agents;
  std::vector<Frame> frames;
  PlayEvents events;
  Situation situation;

  bool operator==(const Play&) const = default;

  Index n_agents() const { return static_cast<Index>(agents.size()); }
  Index n_frames() const { return static_cast<Index>(frames.size()); }
  std::vector<Index> defender_indices() const;
  std::vector<Index> receiver_indices() const;
  std::optional<Index> agent_index(const std::string& id) const;
  // Line of scrimmage x on the normalized (rightward) field.
  double line_of_scrimmage_x() const { return kGoalLineX + situation.yard_line; }
  // Event frame relative to the snap.
  Index relative_frame(EndEvent e) const;
};

struct LabelSet {
  std::optional<std::map<std::string, int>> coverage;  // defender id -> coverage class
  std::optional<std::map<std::string, std::optional<std::string>>> matchup;
  bool has_target = false;  // target_defender key present
  std::optional<std::string> target_defender;
  std::optional<std::string> targeted_receiver;

  bool operator==(const LabelSet&) const = default;
};

struct LabeledPlay {
  Play play;
  LabelSet labels;
};

struct ParseOptions {
  std::optional<int> required_defenders;
};

struct ParseIssue {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct ParseResult {
  std::vector<LabeledPlay> plays;
  std::vector<ParseIssue> errors;
};

/// Reads a JSONL play file. Malformed lines are reported and skipped; an unreadable file throws.
ParseResult parse_plays(const std::string& path, const ParseOptions& options = {});
/// Parses one JSON line; throws DataError with the rejection reason.
LabeledPlay parse_play_line(const std::string& line, const ParseOptions& options = {});
std::string serialize_play(const LabeledPlay& lp);

/// Throws DataError describing the first violated invariant.
void validate_play(const Play& play, const LabelSet& labels, const ParseOptions& options = {});

/// Mirrors a left-moving play so that offense moves toward +x; identity for right-moving plays.
Play normalize_direction(const Play& play);

inline constexpr int kFeatureChannels = 8;

/// Feature cube [agents, frames, channels] for the inclusive window [snap + start_offset, end_frame]
/// (frames relative to the snap). Channels: x/120, y/53.3, sin/cos orientation, sin/cos direction,
/// speed/10, post-snap indicator. The play is normalized first.
Tensor<double> extract_window(const Play& play, int start_offset, Index end_offset);
Tensor<double> extract_sequence(const Play& play, int start_offset, EndEvent end_event);

struct FilterResult {
  bool keep = true;
  std::string reason;
};

FilterResult filter_play(const Play& play, const LabelSet& labels, Task task,
                         const ParseOptions& options = {});

}  // namespace covnet
