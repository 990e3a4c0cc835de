#include "covnet/play.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "covnet/error.hpp"

namespace covnet {

using nlohmann::json;

std::string_view task_name(Task task) {
  switch (task) {
    case Task::Coverage: return "coverage";
    case Task::Matchup: return "matchup";
    case Task::Target: return "target";
  }
  return "unknown";
}

Task task_from_name(std::string_view name) {
  if (name == "coverage") return Task::Coverage;
  if (name == "matchup") return Task::Matchup;
  if (name == "target") return Task::Target;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::vector<Index> Play::defender_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < n_agents(); ++i)
    if (agents[static_cast<std::size_t>(i)].side == TeamSide::Defense) out.push_back(i);
  return out;
}

std::vector<Index> Play::receiver_indices() const {
  std::vector<Index> out;
  for (Index i = 0; i < n_agents(); ++i)
    if (agents[static_cast<std::size_t>(i)].eligible_receiver) out.push_back(i);
  return out;
}

std::optional<Index> Play::agent_index(const std::string& id) const {
  for (Index i = 0; i < n_agents(); ++i)
    if (agents[static_cast<std::size_t>(i)].agent_id == id) return i;
  return std::nullopt;
}

Index Play::relative_frame(EndEvent e) const {
  switch (e) {
    case EndEvent::Snap: return 0;
    case EndEvent::PassForward:
      if (!events.pass_forward) throw DataError("no pass forward");
      return *events.pass_forward - events.snap;
    case EndEvent::PassArrival:
      if (!events.pass_arrival) throw DataError("missing pass arrival");
      return *events.pass_arrival - events.snap;
  }
  return 0;
}

namespace {

double wrap_degrees(double a) {
  double w = std::fmod(a, 360.0);
  if (w < 0.0) w += 360.0;
  if (w >= 360.0) w -= 360.0;
  return w;
}

template <typename T>
T require(const json& obj, const char* key, const char* context) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(std::string("missing ") + context + " field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(std::string("bad type for ") + context + " field '" + key + "'");
  }
}

std::optional<Index> optional_event(const json& events, const char* key) {
  auto it = events.find(key);
  if (it == events.end()) throw DataError(std::string("missing event '") + key + "'");
  if (it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) throw DataError(std::string("bad event index '") + key + "'");
  return it->get<Index>();
}

}  // namespace

void validate_play(const Play& play, const LabelSet& labels, const ParseOptions& options) {
  if (play.play_id.empty()) throw DataError("empty play_id");
  int qbs = 0;
  int defenders = 0;
  std::set<std::string> ids;
  for (const auto& a : play.agents) {
    if (!ids.insert(a.agent_id).second) throw DataError("duplicate agent_id '" + a.agent_id + "'");
    if (a.position == PositionCode::QB) ++qbs;
    if (a.side == TeamSide::Defense) ++defenders;
    if (a.eligible_receiver && a.side != TeamSide::Offense)
      throw DataError("eligible receiver '" + a.agent_id + "' is not on offense");
  }
  if (qbs != 1) throw DataError("play must have exactly one QB");
  if (defenders == 0) throw DataError("play has no defenders");
  if (options.required_defenders && defenders != *options.required_defenders)
    throw DataError("expected " + std::to_string(*options.required_defenders) + " defenders, found " +
                    std::to_string(defenders));
  if (play.receiver_indices().empty()) throw DataError("play has no eligible receivers");

  const auto& ev = play.events;
  if (ev.snap < kPreSnapFrames) throw DataError("fewer than 30 pre-snap frames recorded");
  if (ev.pass_forward) {
    if (*ev.pass_forward <= ev.snap) throw DataError("pass_forward must follow snap");
    if (!ev.pass_arrival) throw DataError("missing pass arrival");
    if (*ev.pass_arrival < *ev.pass_forward) throw DataError("pass_arrival precedes pass_forward");
    if (*ev.pass_arrival >= play.n_frames()) throw DataError("pass_arrival beyond recorded frames");
  } else if (ev.snap >= play.n_frames()) {
    throw DataError("snap beyond recorded frames");
  }

  for (std::size_t f = 0; f < play.frames.size(); ++f) {
    const auto& frame = play.frames[f];
    if (frame.size() != play.agents.size())
      throw DataError("frame " + std::to_string(f) + " has " + std::to_string(frame.size()) +
                      " entries for " + std::to_string(play.agents.size()) + " agents");
    for (const auto& s : frame) {
      if (!(s.x >= 0.0 && s.x <= kFieldLength && s.y >= 0.0 && s.y <= kFieldWidth))
        throw DataError("position outside the field in frame " + std::to_string(f));
      if (!(s.orientation >= 0.0 && s.orientation < 360.0 && s.direction >= 0.0 && s.direction < 360.0))
        throw DataError("angle outside [0, 360) in frame " + std::to_string(f));
      if (s.speed && !(std::isfinite(*s.speed) && *s.speed >= 0.0))
        throw DataError("invalid speed in frame " + std::to_string(f));
    }
  }

  const auto& sit = play.situation;
  if (sit.down < 1 || sit.down > 4) throw DataError("down must be 1-4");
  if (!(sit.distance > 0.0) || !(sit.yard_line > 0.0 && sit.yard_line < 100.0) || !(sit.game_clock_s >= 0.0))
    throw DataError("situation out of range");

  auto require_defender = [&](const std::string& id) {
    auto idx = play.agent_index(id);
    if (!idx || play.agents[static_cast<std::size_t>(*idx)].side != TeamSide::Defense)
      throw DataError("label references unknown defender '" + id + "'");
  };
  auto require_receiver = [&](const std::string& id) {
    auto idx = play.agent_index(id);
    if (!idx || !play.agents[static_cast<std::size_t>(*idx)].eligible_receiver)
      throw DataError("label references ineligible receiver '" + id + "'");
  };
  if (labels.coverage) {
    for (const auto& [id, cls] : *labels.coverage) {
      require_defender(id);
      if (cls < 0 || cls >= kNumCoverageClasses) throw DataError("coverage class out of range");
    }
  }
  if (labels.matchup) {
    for (const auto& [id, rec] : *labels.matchup) {
      require_defender(id);
      if (rec) require_receiver(*rec);
    }
  }
  if (labels.target_defender) require_defender(*labels.target_defender);
  if (labels.targeted_receiver) require_receiver(*labels.targeted_receiver);
}

LabeledPlay parse_play_line(const std::string& line, const ParseOptions& options) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("line is not a JSON object");

  LabeledPlay lp;
  Play& p = lp.play;
  p.play_id = require<std::string>(j, "play_id", "play");
  p.offense_team = j.value("offense_team", std::string("UNK"));
  p.defense_team = j.value("defense_team", std::string("UNK"));
  const auto dir = require<std::string>(j, "play_direction", "play");
  if (dir == "left")
    p.direction = PlayDirection::Left;
  else if (dir == "right")
    p.direction = PlayDirection::Right;
  else
    throw DataError("play_direction must be 'left' or 'right'");

  const json sit = require<json>(j, "situation", "play");
  p.situation.down = require<int>(sit, "down", "situation");
  p.situation.distance = require<double>(sit, "distance", "situation");
  p.situation.yard_line = require<double>(sit, "yard_line", "situation");
  p.situation.game_clock_s = require<double>(sit, "game_clock_s", "situation");
  const auto scheme = require<std::string>(sit, "team_scheme", "situation");
  auto scheme_idx = lookup_name(kSchemeNames, scheme);
  if (!scheme_idx) throw DataError("unknown team_scheme '" + scheme + "'");
  p.situation.team_scheme = static_cast<Scheme>(*scheme_idx);

  const json ev = require<json>(j, "events", "play");
  auto snap = optional_event(ev, "snap");
  if (!snap) throw DataError("missing event 'snap'");
  p.events.snap = *snap;
  p.events.pass_forward = optional_event(ev, "pass_forward");
  p.events.pass_arrival = optional_event(ev, "pass_arrival");

  for (const auto& a : require<json>(j, "agents", "play")) {
    Agent agent;
    agent.agent_id = require<std::string>(a, "agent_id", "agent");
    const auto side = require<std::string>(a, "team_side", "agent");
    if (side == "offense")
      agent.side = TeamSide::Offense;
    else if (side == "defense")
      agent.side = TeamSide::Defense;
    else
      throw DataError("team_side must be 'offense' or 'defense'");
    const auto pos = require<std::string>(a, "position", "agent");
    auto pos_idx = lookup_name(kPositionNames, pos);
    if (!pos_idx) throw DataError("unknown position '" + pos + "'");
    agent.position = static_cast<PositionCode>(*pos_idx);
    agent.eligible_receiver = require<bool>(a, "eligible_receiver", "agent");
    p.agents.push_back(std::move(agent));
  }

  for (const auto& fr : require<json>(j, "frames", "play")) {
    Frame frame;
    frame.reserve(fr.size());
    for (const auto& s : fr) {
      AgentState st;
      st.x = require<double>(s, "x", "frame");
      st.y = require<double>(s, "y", "frame");
      st.orientation = require<double>(s, "o", "frame");
      st.direction = require<double>(s, "dir", "frame");
      if (auto it = s.find("s"); it != s.end() && !it->is_null()) st.speed = it->get<double>();
      frame.push_back(st);
    }
    p.frames.push_back(std::move(frame));
  }

  if (auto lit = j.find("labels"); lit != j.end() && !lit->is_null()) {
    const json& lab = *lit;
    LabelSet& ls = lp.labels;
    if (auto it = lab.find("coverage"); it != lab.end() && !it->is_null()) {
      std::map<std::string, int> cov;
      for (const auto& [id, cls] : it->items()) {
        auto c = coverage_from_name(cls.get<std::string>());
        if (!c) throw DataError("unknown coverage class '" + cls.get<std::string>() + "'");
        cov[id] = *c;
      }
      ls.coverage = std::move(cov);
    }
    if (auto it = lab.find("matchup"); it != lab.end() && !it->is_null()) {
      std::map<std::string, std::optional<std::string>> mu;
      for (const auto& [id, rec] : it->items())
        mu[id] = rec.is_null() ? std::nullopt : std::optional<std::string>(rec.get<std::string>());
      ls.matchup = std::move(mu);
    }
    if (auto it = lab.find("target_defender"); it != lab.end()) {
      ls.has_target = true;
      if (!it->is_null()) ls.target_defender = it->get<std::string>();
    }
    if (auto it = lab.find("targeted_receiver"); it != lab.end() && !it->is_null())
      ls.targeted_receiver = it->get<std::string>();
  }

  validate_play(p, lp.labels, options);
  return lp;
}

ParseResult parse_plays(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open play file '" + path + "'");
  ParseResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      result.plays.push_back(parse_play_line(line, options));
    } catch (const DataError& e) {
      result.errors.push_back({lineno, e.what()});
    } catch (const json::exception& e) {
      result.errors.push_back({lineno, std::string("schema violation: ") + e.what()});
    }
  }
  if (in.bad()) throw DataError("read failure on '" + path + "'");
  return result;
}

std::string serialize_play(const LabeledPlay& lp) {
  const Play& p = lp.play;
  json j;
  j["play_id"] = p.play_id;
  j["offense_team"] = p.offense_team;
  j["defense_team"] = p.defense_team;
  j["play_direction"] = p.direction == PlayDirection::Left ? "left" : "right";
  j["situation"] = {{"down", p.situation.down},
                    {"distance", p.situation.distance},
                    {"yard_line", p.situation.yard_line},
                    {"game_clock_s", p.situation.game_clock_s},
                    {"team_scheme", std::string(scheme_name(p.situation.team_scheme))}};
  json ev;
  ev["snap"] = p.events.snap;
  ev["pass_forward"] = p.events.pass_forward ? json(*p.events.pass_forward) : json(nullptr);
  ev["pass_arrival"] = p.events.pass_arrival ? json(*p.events.pass_arrival) : json(nullptr);
  j["events"] = ev;
  json agents = json::array();
  for (const auto& a : p.agents) {
    agents.push_back({{"agent_id", a.agent_id},
                      {"team_side", a.side == TeamSide::Offense ? "offense" : "defense"},
                      {"position", std::string(position_name(a.position))},
                      {"eligible_receiver", a.eligible_receiver}});
  }
  j["agents"] = agents;
  json frames = json::array();
  for (const auto& fr : p.frames) {
    json row = json::array();
    for (const auto& s : fr) {
      json st = {{"x", s.x}, {"y", s.y}, {"o", s.orientation}, {"dir", s.direction}};
      if (s.speed) st["s"] = *s.speed;
      row.push_back(std::move(st));
    }
    frames.push_back(std::move(row));
  }
  j["frames"] = frames;

  const LabelSet& ls = lp.labels;
  json labels = json::object();
  if (ls.coverage) {
    json cov = json::object();
    for (const auto& [id, c] : *ls.coverage) cov[id] = std::string(coverage_name(c));
    labels["coverage"] = cov;
  }
  if (ls.matchup) {
    json mu = json::object();
    for (const auto& [id, r] : *ls.matchup) mu[id] = r ? json(*r) : json(nullptr);
    labels["matchup"] = mu;
  }
  if (ls.has_target) labels["target_defender"] = ls.target_defender ? json(*ls.target_defender) : json(nullptr);
  if (ls.targeted_receiver) labels["targeted_receiver"] = *ls.targeted_receiver;
  j["labels"] = labels;
  return j.dump();
}

Play normalize_direction(const Play& play) {
  Play out = play;
  if (play.direction == PlayDirection::Right) return out;
  for (auto& frame : out.frames) {
    for (auto& s : frame) {
      s.x = kFieldLength - s.x;
      s.y = kFieldWidth - s.y;
      s.orientation = wrap_degrees(s.orientation + 180.0);
      s.direction = wrap_degrees(s.direction + 180.0);
    }
  }
  out.direction = PlayDirection::Right;
  return out;
}

namespace {

double frame_speed(const Play& play, Index raw_frame, std::size_t agent) {
  const auto& st = play.frames[static_cast<std::size_t>(raw_frame)][agent];
  if (st.speed) return *st.speed;
  const Index n = play.n_frames();
  if (n < 2) return 0.0;
  const Index a = raw_frame > 0 ? raw_frame - 1 : 0;
  const Index b = raw_frame > 0 ? raw_frame : 1;
  const auto& p0 = play.frames[static_cast<std::size_t>(a)][agent];
  const auto& p1 = play.frames[static_cast<std::size_t>(b)][agent];
  return std::hypot(p1.x - p0.x, p1.y - p0.y) * kFrameRateHz;
}

}  // namespace

Tensor<double> extract_window(const Play& play, int start_offset, Index end_offset) {
  const Play& src = play;
  const Play normalized = play.direction == PlayDirection::Left ? normalize_direction(play) : Play{};
  const Play& p = play.direction == PlayDirection::Left ? normalized : src;

  const Index raw_start = p.events.snap + start_offset;
  const Index raw_end = p.events.snap + end_offset;
  if (raw_start < 0 || raw_end >= p.n_frames())
    throw DataError("window [" + std::to_string(start_offset) + ", " + std::to_string(end_offset) +
                    "] exceeds recorded frames");
  if (raw_end < raw_start) throw DataError("empty window");

  const Index n_agents = p.n_agents();
  const Index n_frames = raw_end - raw_start + 1;
  Tensor<double> out({n_agents, n_frames, kFeatureChannels});
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  for (Index t = 0; t < n_frames; ++t) {
    const Index raw = raw_start + t;
    const auto& frame = p.frames[static_cast<std::size_t>(raw)];
    const double post_snap = raw >= p.events.snap ? 1.0 : 0.0;
    for (Index a = 0; a < n_agents; ++a) {
      const auto& s = frame[static_cast<std::size_t>(a)];
      out(a, t, 0) = s.x / kFieldLength;
      out(a, t, 1) = s.y / kFieldWidth;
      out(a, t, 2) = std::sin(s.orientation * kDeg);
      out(a, t, 3) = std::cos(s.orientation * kDeg);
      out(a, t, 4) = std::sin(s.direction * kDeg);
      out(a, t, 5) = std::cos(s.direction * kDeg);
      out(a, t, 6) = frame_speed(p, raw, static_cast<std::size_t>(a)) / 10.0;
      out(a, t, 7) = post_snap;
    }
  }
  return out;
}

Tensor<double> extract_sequence(const Play& play, int start_offset, EndEvent end_event) {
  if (start_offset < -kPreSnapFrames || start_offset > 0)
    throw DataError("start_offset must be within [-30, 0]");
  return extract_window(play, start_offset, play.relative_frame(end_event));
}

FilterResult filter_play(const Play& play, const LabelSet& labels, Task task, const ParseOptions& options) {
  if (!play.events.pass_forward) return {false, "no pass forward"};
  if (!play.events.pass_arrival) return {false, "missing event"};
  try {
    validate_play(play, labels, options);
  } catch (const DataError& e) {
    return {false, std::string("invalid: ") + e.what()};
  }
  const auto defenders = play.defender_indices();
  auto covers_all = [&](const auto& m) {
    for (Index d : defenders)
      if (!m.count(play.agents[static_cast<std::size_t>(d)].agent_id)) return false;
    return true;
  };
  switch (task) {
    case Task::Coverage:
      if (!labels.coverage || !covers_all(*labels.coverage)) return {false, "missing annotation"};
      break;
    case Task::Matchup:
      if (!labels.matchup || !covers_all(*labels.matchup)) return {false, "missing annotation"};
      break;
    case Task::Target:
      if (!labels.has_target || !labels.targeted_receiver) return {false, "missing annotation"};
      break;
  }
  return {true, {}};
}

}  // namespace covnet
