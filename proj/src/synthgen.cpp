#include "covnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "covnet/error.hpp"
#include "covnet/io.hpp"
#include "covnet/rng.hpp"

namespace covnet {

using nlohmann::json;

namespace {

constexpr double kMidY = kFieldWidth / 2.0;
constexpr double kDt = 1.0 / kFrameRateHz;
constexpr double kDisguiseBlendS = 0.5;
constexpr int kReactionLagFrames = 2;
// Zone defenders react to receivers within this radius of their landmark.
constexpr double kZoneReactRadius = 8.0;
constexpr int kZoneMatchMinFrames = 5;
constexpr double kBallBreakRadius = 14.0;
constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

Vec2 step_toward(Vec2 from, Vec2 to, double max_step) {
  const Vec2 d = to - from;
  const double n = norm(d);
  if (n <= max_step || n == 0.0) return to;
  return from + (max_step / n) * d;
}

Vec2 clamp_field(Vec2 p) {
  return {std::clamp(p.x, 0.0, kFieldLength), std::clamp(p.y, 0.0, kFieldWidth)};
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

template <typename Weights>
std::size_t sample_weighted(Rng& rng, const Weights& w) {
  const double total = std::accumulate(std::begin(w), std::end(w), 0.0);
  double u = uniform(rng, 0.0, total);
  for (std::size_t i = 0; i < std::size(w); ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  return std::size(w) - 1;
}

// Dividing by the exact inverse keeps boundary values such as 53.3 on the field.
double round_to(double v, double q) {
  const double inv = std::round(1.0 / q);
  return std::round(v * inv) / inv;
}

double wrap_deg(double a) {
  double w = std::fmod(a, 360.0);
  if (w < 0.0) w += 360.0;
  w = round_to(w, 0.01);
  if (w >= 360.0) w -= 360.0;
  return w;
}

// ---------------------------------------------------------------------------------------------
// Offense

enum class RouteKind { Go, Out, In, Curl, Post, Flat };

struct Route {
  Vec2 start;
  std::vector<Vec2> waypoints;  // absolute
  double speed = 8.0;
};

Vec2 route_position(const Route& r, double t) {
  if (t <= 0.0) return r.start;
  double remaining = r.speed * t;
  Vec2 at = r.start;
  for (const Vec2& wp : r.waypoints) {
    const double seg = norm(wp - at);
    if (remaining <= seg) return at + (remaining / seg) * (wp - at);
    remaining -= seg;
    at = wp;
  }
  return at;
}

Route make_route(RouteKind kind, Vec2 start, double speed, Rng& rng) {
  Route r;
  r.start = start;
  r.speed = speed;
  const double outside = start.y > kMidY ? 1.0 : -1.0;
  const double stem = uniform(rng, 7.0, 11.0);
  auto clampy = [](double y) { return std::clamp(y, 1.5, kFieldWidth - 1.5); };
  switch (kind) {
    case RouteKind::Go:
      r.waypoints = {{start.x + 45.0, start.y}};
      break;
    case RouteKind::Out:
      r.waypoints = {{start.x + stem, start.y}, {start.x + stem, clampy(start.y + outside * 7.0)}};
      break;
    case RouteKind::In:
      r.waypoints = {{start.x + stem, start.y}, {start.x + stem, clampy(start.y - outside * 16.0)}};
      break;
    case RouteKind::Curl:
      r.waypoints = {{start.x + stem + 3.0, start.y}, {start.x + stem + 1.5, start.y - outside * 1.0}};
      break;
    case RouteKind::Post:
      r.waypoints = {{start.x + stem, start.y}, {start.x + stem + 24.0, clampy(start.y - outside * 12.0)}};
      break;
    case RouteKind::Flat:
      r.waypoints = {{start.x + 1.5, clampy(start.y + outside * 4.0)},
                     {start.x + uniform(rng, 3.0, 8.0), clampy(start.y + outside * 14.0)}};
      break;
  }
  return r;
}

// ---------------------------------------------------------------------------------------------
// Defense

struct Role {
  Coverage cls = Coverage::NoAssignment;
  int man_receiver = -1;  // index into the receiver list
  Vec2 landmark;
};

struct DefenseRoster {
  std::vector<int> dl, lb, cb, s;  // indices into the defender list
};

DefenseRoster make_roster(int n_defenders) {
  DefenseRoster r;
  const int rest = n_defenders - 4;
  const int n_lb = std::min(3, rest - 1);
  const int n_dl = rest - n_lb;
  int k = 0;
  for (int i = 0; i < n_dl; ++i) r.dl.push_back(k++);
  for (int i = 0; i < n_lb; ++i) r.lb.push_back(k++);
  r.cb = {k, k + 1};
  r.s = {k + 2, k + 3};
  return r;
}

Vec2 landmark_of(Coverage c, double los) {
  const auto& info = coverage_info(c);
  return {los + info.landmark_depth, info.landmark_y};
}

std::vector<Coverage> hook_roles(std::size_t n_lb) {
  switch (n_lb) {
    case 0: return {};
    case 1: return {Coverage::HookMiddle};
    case 2: return {Coverage::HookCurlLeft, Coverage::HookCurlRight};
    default: {
      std::vector<Coverage> v = {Coverage::HookCurlLeft, Coverage::HookMiddle, Coverage::HookCurlRight};
      while (v.size() < n_lb) v.push_back(Coverage::NoAssignment);
      return v;
    }
  }
}

struct RoleContext {
  const DefenseRoster& roster;
  int n_defenders;
  const std::vector<Vec2>& receivers;  // pre-snap positions
  double los;
};

// Receivers ordered left (high y) to right.
std::vector<int> receivers_left_to_right(const std::vector<Vec2>& rec) {
  std::vector<int> order(rec.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rec[a].y > rec[b].y; });
  return order;
}

void assign_man(std::vector<Role>& roles, const RoleContext& ctx, std::vector<int> coverers, Rng& rng,
                Coverage leftover) {
  const auto order = receivers_left_to_right(ctx.receivers);
  std::vector<int> open(order.begin(), order.end());
  auto take = [&](int defender, int receiver) {
    roles[defender] = {Coverage::Man, receiver, {}};
    open.erase(std::find(open.begin(), open.end(), receiver));
  };
  take(ctx.roster.cb[0], order.front());
  if (order.size() > 1) take(ctx.roster.cb[1], order.back());
  std::shuffle(coverers.begin(), coverers.end(), rng);
  std::shuffle(open.begin(), open.end(), rng);
  std::size_t k = 0;
  for (int receiver : open) {
    if (k >= coverers.size()) break;
    roles[coverers[k++]] = {Coverage::Man, receiver, {}};
  }
  for (; k < coverers.size(); ++k) {
    roles[coverers[k]] = {leftover, -1, {}};
    leftover = Coverage::NoAssignment;
  }
}

std::vector<Role> build_roles(Scheme scheme, const RoleContext& ctx, Rng& rng) {
  const auto& R = ctx.roster;
  std::vector<Role> roles(static_cast<std::size_t>(ctx.n_defenders));
  auto set_zone = [&](int d, Coverage c) { roles[d] = {c, -1, landmark_of(c, ctx.los)}; };
  std::vector<int> lbs = R.lb;
  std::shuffle(lbs.begin(), lbs.end(), rng);
  auto hooks = [&](std::vector<int> ids) {
    auto cls = hook_roles(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) set_zone(ids[i], cls[i]);
  };
  const int s_pick = uniform_int(rng, 0, 1);

  switch (scheme) {
    case Scheme::Man: {
      std::vector<int> coverers = {R.s[0], R.s[1]};
      coverers.insert(coverers.end(), lbs.begin(), lbs.end());
      assign_man(roles, ctx, coverers, rng, Coverage::NoAssignment);
      break;
    }
    case Scheme::Cover1: {
      set_zone(R.s[s_pick], Coverage::DeepMiddle);
      std::vector<int> coverers = {R.s[1 - s_pick]};
      coverers.insert(coverers.end(), lbs.begin(), lbs.end());
      assign_man(roles, ctx, coverers, rng, Coverage::HookMiddle);
      break;
    }
    case Scheme::Cover2:
      set_zone(R.cb[0], Coverage::FlatLeft);
      set_zone(R.cb[1], Coverage::FlatRight);
      set_zone(R.s[0], Coverage::DeepHalfLeft);
      set_zone(R.s[1], Coverage::DeepHalfRight);
      hooks(lbs);
      break;
    case Scheme::Cover3: {
      set_zone(R.cb[0], Coverage::DeepThirdLeft);
      set_zone(R.cb[1], Coverage::DeepThirdRight);
      set_zone(R.s[s_pick], Coverage::DeepMiddle);
      const bool rotate_left = s_pick == 1;  // remaining safety is the left one
      set_zone(R.s[1 - s_pick], rotate_left ? Coverage::CurlFlatLeft : Coverage::CurlFlatRight);
      const Coverage other_curl = rotate_left ? Coverage::CurlFlatRight : Coverage::CurlFlatLeft;
      const Coverage same_hook = rotate_left ? Coverage::HookCurlLeft : Coverage::HookCurlRight;
      const Coverage seq[] = {other_curl, Coverage::HookMiddle, same_hook};
      for (std::size_t i = 0; i < lbs.size(); ++i) set_zone(lbs[i], seq[i]);
      break;
    }
    case Scheme::Cover4:
      set_zone(R.cb[0], Coverage::QuarterOutsideLeft);
      set_zone(R.cb[1], Coverage::QuarterOutsideRight);
      set_zone(R.s[0], Coverage::QuarterInsideLeft);
      set_zone(R.s[1], Coverage::QuarterInsideRight);
      hooks(lbs);
      break;
    case Scheme::Cover6: {
      const bool quarters_left = s_pick == 0;
      if (quarters_left) {
        set_zone(R.cb[0], Coverage::QuarterOutsideLeft);
        set_zone(R.s[0], Coverage::QuarterInsideLeft);
        set_zone(R.s[1], Coverage::DeepHalfRight);
        set_zone(R.cb[1], Coverage::FlatRight);
      } else {
        set_zone(R.cb[1], Coverage::QuarterOutsideRight);
        set_zone(R.s[1], Coverage::QuarterInsideRight);
        set_zone(R.s[0], Coverage::DeepHalfLeft);
        set_zone(R.cb[0], Coverage::FlatLeft);
      }
      hooks(lbs);
      break;
    }
    case Scheme::Prevent: {
      const int deep[] = {R.cb[0], R.s[0], R.s[1], R.cb[1]};
      const double ys[] = {44.0, 33.0, 20.3, 9.3};
      for (int i = 0; i < 4; ++i) {
        set_zone(deep[i], Coverage::PreventDeep);
        roles[deep[i]].landmark.y = ys[i];
      }
      hooks(lbs);
      break;
    }
  }
  for (int d : R.dl) roles[d] = {Coverage::NoAssignment, -1, {}};
  return roles;
}

struct Alignment {
  Vec2 spot;
  Vec2 cushion;  // man roles: offset from the receiver
};

Alignment align(const Role& role, PositionCode pos, int dl_rank, int n_dl, const std::vector<Vec2>& rec,
                double los, Rng& rng) {
  Alignment a;
  const double jitter_x = uniform(rng, -0.5, 0.5);
  const double jitter_y = uniform(rng, -0.5, 0.5);
  switch (role.cls) {
    case Coverage::NoAssignment:
      if (pos == PositionCode::DL) {
        a.spot = {los + 1.0, kMidY + (dl_rank - (n_dl - 1) / 2.0) * 2.5};
      } else {
        a.spot = {los + uniform(rng, 1.5, 3.0), std::clamp(kMidY + uniform(rng, -7.0, 7.0), 15.0, 38.0)};
      }
      return a;
    case Coverage::Man:
    case Coverage::Bracket: {
      const Vec2 r = rec[static_cast<std::size_t>(role.man_receiver)];
      const double inside = r.y > kMidY ? -1.0 : 1.0;
      if (role.cls == Coverage::Man)
        a.cushion = {uniform(rng, 2.5, 6.0), inside * uniform(rng, 0.0, 1.5)};
      else
        a.cushion = {uniform(rng, 7.0, 10.0), inside * uniform(rng, 1.5, 3.5)};
      a.spot = r + a.cushion;
      return a;
    }
    default: break;
  }
  // Zone roles: depth and width of the pre-snap spot depend on the position group.
  const Vec2 lm = role.landmark;
  const bool left = lm.y > kMidY;
  if (pos == PositionCode::CB) {
    double depth = 6.0;
    switch (role.cls) {
      case Coverage::FlatLeft:
      case Coverage::FlatRight: depth = 3.5; break;
      case Coverage::CurlFlatLeft:
      case Coverage::CurlFlatRight: depth = 5.0; break;
      case Coverage::QuarterOutsideLeft:
      case Coverage::QuarterOutsideRight: depth = 7.0; break;
      case Coverage::DeepThirdLeft:
      case Coverage::DeepThirdRight: depth = 8.0; break;
      case Coverage::PreventDeep: depth = 17.0; break;
      default: break;
    }
    // Over the outermost receiver on the landmark's side.
    double wide = left ? 0.0 : kFieldWidth;
    for (const Vec2& r : rec) wide = left ? std::max(wide, r.y) : std::min(wide, r.y);
    a.spot = {los + depth + jitter_x, wide + (left ? -1.0 : 1.0) + jitter_y};
  } else if (pos == PositionCode::S) {
    double depth = std::min(0.7 * coverage_info(role.cls).landmark_depth, 13.0);
    if (role.cls == Coverage::PreventDeep) depth = 20.0;
    if (role.cls == Coverage::DeepHalfLeft || role.cls == Coverage::DeepHalfRight) depth = 12.0;
    a.spot = {los + depth + jitter_x, lm.y + jitter_y};
  } else {
    const double depth = role.cls == Coverage::PreventDeep ? 15.0 : 4.5;
    a.spot = {los + depth + jitter_x, std::clamp(lm.y, 15.0, 38.3) + jitter_y};
  }
  return a;
}

struct Placement {
  std::vector<Role> roles;
  std::vector<Alignment> align;
};

Placement place(Scheme scheme, const RoleContext& ctx, const std::vector<PositionCode>& def_pos, Rng& rng) {
  Placement p;
  p.roles = build_roles(scheme, ctx, rng);
  int rank = 0;
  for (std::size_t d = 0; d < p.roles.size(); ++d) {
    const bool dl = def_pos[d] == PositionCode::DL;
    p.align.push_back(align(p.roles[d], def_pos[d], dl ? rank : 0, static_cast<int>(ctx.roster.dl.size()),
                            ctx.receivers, ctx.los, rng));
    if (dl) ++rank;
  }
  return p;
}

// Adds a second man-class defender on one receiver.
void inject_double_coverage(Placement& pl, const RoleContext& ctx, const std::vector<PositionCode>& def_pos,
                            int receiver, Rng& rng) {
  auto& roles = pl.roles;
  const int n = static_cast<int>(roles.size());
  int primary = -1;
  for (int d = 0; d < n; ++d)
    if (roles[d].cls == Coverage::Man && roles[d].man_receiver == receiver) primary = d;
  const Vec2 rpos = ctx.receivers[static_cast<std::size_t>(receiver)];
  auto eligible = [&](int d) { return def_pos[d] != PositionCode::DL && d != primary; };
  if (primary < 0) {
    double best = 1e18;
    for (int d = 0; d < n; ++d) {
      if (!eligible(d) || roles[d].cls == Coverage::Man) continue;
      const double dist = norm(pl.align[d].spot - rpos);
      if (dist < best) {
        best = dist;
        primary = d;
      }
    }
    if (primary < 0) return;
    roles[primary] = {Coverage::Man, receiver, {}};
    pl.align[primary] = align(roles[primary], def_pos[primary], 0, 0, ctx.receivers, ctx.los, rng);
  }
  // Bracket defender: prefer a linebacker or safety that is not already in man coverage.
  int flex = -1;
  for (const auto* group : {&ctx.roster.lb, &ctx.roster.s, &ctx.roster.cb}) {
    std::vector<int> cand;
    for (int d : *group)
      if (eligible(d) && roles[d].cls != Coverage::Man) cand.push_back(d);
    if (!cand.empty()) {
      flex = cand[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(cand.size()) - 1))];
      break;
    }
  }
  if (flex < 0) {
    for (int d = 0; d < n; ++d)
      if (eligible(d)) flex = d;
  }
  if (flex < 0) return;
  roles[flex] = {Coverage::Bracket, receiver, {}};
  pl.align[flex] = align(roles[flex], def_pos[flex], 0, 0, ctx.receivers, ctx.los, rng);
}

}  // namespace

// -----------------------------------------------------------------------------------------------

void GenConfig::validate() const {
  if (n_plays < 0) throw ConfigError("n_plays must be non-negative");
  if (n_defenders < 5 || n_defenders > 11) throw ConfigError("n_defenders must be within [5, 11]");
  if (n_receivers < 1) throw ConfigError("n_receivers must be >= 1");
  if (n_offense < n_receivers + 1 || n_offense > 11) throw ConfigError("n_offense must fit QB + receivers (<= 11)");
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must be within [0, 1]");
  };
  prob(p_disguise, "p_disguise");
  prob(p_double_coverage, "p_double_coverage");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
  double total = 0.0;
  for (double w : scheme_mix) {
    prob(w, "scheme_mix entry");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-6) throw ConfigError("scheme_mix must sum to 1");
  if (n_offense_teams < 1) throw ConfigError("n_offense_teams must be >= 1");
  for (const auto& t : defense_teams) prob(t.p_disguise, "team p_disguise");

  // Man-family schemes need a man defender per receiver beyond the corners.
  const auto roster = make_roster(n_defenders);
  const int man_pool = 2 + static_cast<int>(roster.s.size() + roster.lb.size());
  if (scheme_mix[static_cast<int>(Scheme::Man)] > 0.0 && man_pool < n_receivers)
    throw ConfigError("infeasible: MAN scheme needs at least one coverage defender per receiver");
  if (scheme_mix[static_cast<int>(Scheme::Cover1)] > 0.0 && man_pool - 1 < n_receivers)
    throw ConfigError("infeasible: COVER_1 needs one man defender per receiver plus a deep safety");
  if (p_double_coverage > 0.0 && n_defenders - static_cast<int>(roster.dl.size()) < 2)
    throw ConfigError("infeasible: double coverage needs two coverage defenders");
}

std::vector<TeamProfile> GenConfig::resolved_teams() const {
  if (!defense_teams.empty()) return defense_teams;
  std::vector<TeamProfile> teams;
  for (int i = 0; i < 8; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "D%02d", i);
    teams.push_back({id, p_disguise});
  }
  return teams;
}

json GenConfig::to_json() const {
  json teams = json::array();
  for (const auto& t : defense_teams) teams.push_back({{"team_id", t.team_id}, {"p_disguise", t.p_disguise}});
  json mix = json::object();
  for (int i = 0; i < kNumSchemes; ++i) mix[std::string(kSchemeNames[static_cast<std::size_t>(i)])] = scheme_mix[static_cast<std::size_t>(i)];
  return {{"n_plays", n_plays},
          {"n_defenders", n_defenders},
          {"n_offense", n_offense},
          {"n_receivers", n_receivers},
          {"scheme_mix", mix},
          {"p_disguise", p_disguise},
          {"p_double_coverage", p_double_coverage},
          {"noise_sigma", noise_sigma},
          {"seed", seed},
          {"n_offense_teams", n_offense_teams},
          {"defense_teams", teams}};
}

GenConfig GenConfig::from_json(const json& j) {
  GenConfig c;
  c.n_plays = j.value("n_plays", c.n_plays);
  c.n_defenders = j.value("n_defenders", c.n_defenders);
  c.n_offense = j.value("n_offense", c.n_offense);
  c.n_receivers = j.value("n_receivers", c.n_receivers);
  if (j.contains("scheme_mix")) {
    for (int i = 0; i < kNumSchemes; ++i)
      c.scheme_mix[static_cast<std::size_t>(i)] =
          j["scheme_mix"].value(std::string(kSchemeNames[static_cast<std::size_t>(i)]), 0.0);
  }
  c.p_disguise = j.value("p_disguise", c.p_disguise);
  c.p_double_coverage = j.value("p_double_coverage", c.p_double_coverage);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.seed = j.value("seed", c.seed);
  c.n_offense_teams = j.value("n_offense_teams", c.n_offense_teams);
  if (j.contains("defense_teams"))
    for (const auto& t : j["defense_teams"]) c.defense_teams.push_back({t.at("team_id"), t.at("p_disguise")});
  return c;
}

LabeledPlay gen_play(const GenConfig& cfg, long play_index, GenTrace* trace) {
  cfg.validate();
  Rng rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(play_index));
  const auto teams = cfg.resolved_teams();
  const TeamProfile& defense = teams[static_cast<std::size_t>(play_index) % teams.size()];
  char offense_id[8];
  std::snprintf(offense_id, sizeof(offense_id), "O%02d", uniform_int(rng, 0, cfg.n_offense_teams - 1));

  LabeledPlay lp;
  Play& play = lp.play;
  char pid[32];
  std::snprintf(pid, sizeof(pid), "P%06ld", play_index);
  play.play_id = pid;
  play.offense_team = offense_id;
  play.defense_team = defense.team_id;
  play.direction = coin(rng, 0.5) ? PlayDirection::Left : PlayDirection::Right;

  // Situation.
  const Scheme scheme = static_cast<Scheme>(sample_weighted(rng, cfg.scheme_mix));
  Situation& sit = play.situation;
  sit.down = uniform_int(rng, 1, 4);
  sit.distance = uniform_int(rng, 1, 15);
  sit.yard_line = uniform_int(rng, 15, 50);
  sit.game_clock_s = scheme == Scheme::Prevent ? uniform_int(rng, 5, 120) : uniform_int(rng, 0, 3600);
  sit.team_scheme = scheme;
  const double los = play.line_of_scrimmage_x();

  // Timeline.
  const int extra_pre = uniform_int(rng, 0, 5);
  const Index snap = kPreSnapFrames + extra_pre;
  const Index pass_forward = snap + uniform_int(rng, 15, 40);
  const Index arrival = pass_forward + uniform_int(rng, 3, 15);
  const Index n_frames = arrival + 1 + uniform_int(rng, 0, 5);
  play.events = {snap, pass_forward, arrival};

  // Offense roster and formation.
  std::vector<PositionCode> rec_pos_codes;
  const PositionCode receiver_cycle[] = {PositionCode::WR, PositionCode::WR, PositionCode::TE, PositionCode::RB,
                                         PositionCode::WR, PositionCode::WR, PositionCode::TE};
  for (int i = 0; i < cfg.n_receivers; ++i) rec_pos_codes.push_back(receiver_cycle[i % 7]);
  const int n_ol = cfg.n_offense - 1 - cfg.n_receivers;

  std::vector<Vec2> off_start;
  std::vector<Route> routes;
  std::vector<int> receiver_agent;
  auto add_agent = [&](std::string id, TeamSide side, PositionCode pos, bool eligible) {
    play.agents.push_back({std::move(id), side, pos, eligible});
  };
  add_agent(std::string(offense_id) + "_QB1", TeamSide::Offense, PositionCode::QB, false);
  const Vec2 qb_start{los - 5.0, kMidY};
  off_start.push_back(qb_start);
  for (int k = 0; k < n_ol; ++k) {
    add_agent(std::string(offense_id) + "_OL" + std::to_string(k + 1), TeamSide::Offense, PositionCode::OL, false);
    off_start.push_back({los - 1.0, kMidY + (k - (n_ol - 1) / 2.0) * 1.5});
  }
  int counts[kNumPositionCodes] = {};
  const double slot_side = coin(rng, 0.5) ? 1.0 : -1.0;
  const double te_side = coin(rng, 0.5) ? 1.0 : -1.0;
  int wr_seen = 0;
  std::vector<Vec2> rec_start;
  for (int i = 0; i < cfg.n_receivers; ++i) {
    const PositionCode pc = rec_pos_codes[static_cast<std::size_t>(i)];
    const int k = ++counts[static_cast<int>(pc)];
    add_agent(std::string(offense_id) + "_" + std::string(position_name(pc)) + std::to_string(k), TeamSide::Offense,
              pc, true);
    receiver_agent.push_back(static_cast<int>(play.agents.size()) - 1);
    Vec2 p;
    if (pc == PositionCode::WR) {
      const int w = wr_seen++;
      if (w == 0)
        p = {los - 1.0, uniform(rng, 41.0, 46.0)};
      else if (w == 1)
        p = {los - 1.0, uniform(rng, 7.3, 12.3)};
      else {
        const double side = (w % 2 == 0) ? slot_side : -slot_side;
        p = {los - 1.0, kMidY + side * uniform(rng, 8.0, 12.0)};
      }
    } else if (pc == PositionCode::TE) {
      p = {los - 1.0, kMidY + te_side * uniform(rng, 4.0, 5.0)};
    } else {
      p = {los - 6.0, kMidY + uniform(rng, -2.0, 2.0)};
    }
    rec_start.push_back(p);
    off_start.push_back(p);
  }
  for (int i = 0; i < cfg.n_receivers; ++i) {
    const PositionCode pc = rec_pos_codes[static_cast<std::size_t>(i)];
    RouteKind kind;
    double speed;
    if (pc == PositionCode::WR) {
      const RouteKind opts[] = {RouteKind::Go, RouteKind::Out, RouteKind::In, RouteKind::Curl, RouteKind::Post};
      kind = opts[uniform_int(rng, 0, 4)];
      speed = uniform(rng, 7.5, 8.5);
    } else if (pc == PositionCode::TE) {
      const RouteKind opts[] = {RouteKind::In, RouteKind::Curl, RouteKind::Flat, RouteKind::Out};
      kind = opts[uniform_int(rng, 0, 3)];
      speed = uniform(rng, 6.5, 7.5);
    } else {
      const RouteKind opts[] = {RouteKind::Flat, RouteKind::Flat, RouteKind::Curl};
      kind = opts[uniform_int(rng, 0, 2)];
      speed = uniform(rng, 6.5, 7.5);
    }
    routes.push_back(make_route(kind, rec_start[static_cast<std::size_t>(i)], speed, rng));
  }

  // Defense roster.
  const DefenseRoster roster = make_roster(cfg.n_defenders);
  std::vector<PositionCode> def_pos(static_cast<std::size_t>(cfg.n_defenders));
  for (int d : roster.dl) def_pos[d] = PositionCode::DL;
  for (int d : roster.lb) def_pos[d] = PositionCode::LB;
  for (int d : roster.cb) def_pos[d] = PositionCode::CB;
  for (int d : roster.s) def_pos[d] = PositionCode::S;
  const int first_defender = static_cast<int>(play.agents.size());
  std::fill(std::begin(counts), std::end(counts), 0);
  for (int d = 0; d < cfg.n_defenders; ++d) {
    const PositionCode pc = def_pos[static_cast<std::size_t>(d)];
    const int k = ++counts[static_cast<int>(pc)];
    add_agent(defense.team_id + "_" + std::string(position_name(pc)) + std::to_string(k), TeamSide::Defense, pc,
              false);
  }

  const RoleContext ctx{roster, cfg.n_defenders, rec_start, los};
  Placement truth = place(scheme, ctx, def_pos, rng);
  bool doubled = false;
  if (coin(rng, cfg.p_double_coverage)) {
    int wr1 = -1;
    for (int i = 0; i < cfg.n_receivers; ++i)
      if (rec_pos_codes[static_cast<std::size_t>(i)] == PositionCode::WR) {
        wr1 = i;
        break;
      }
    const int r = (wr1 >= 0 && coin(rng, 0.6)) ? wr1 : uniform_int(rng, 0, cfg.n_receivers - 1);
    inject_double_coverage(truth, ctx, def_pos, r, rng);
    doubled = true;
  }
  const bool disguised = coin(rng, defense.p_disguise);
  Scheme shown = scheme;
  Placement decoy;
  if (disguised) {
    shown = static_cast<Scheme>(sample_weighted(rng, cfg.scheme_mix));
    decoy = place(shown, ctx, def_pos, rng);
  }
  const Placement& presnap = disguised ? decoy : truth;

  // Kinematics on the normalized field, one position per agent per frame.
  const std::size_t n_agents = play.agents.size();
  std::vector<std::vector<Vec2>> pos(static_cast<std::size_t>(n_frames), std::vector<Vec2>(n_agents));
  auto time_of = [&](Index r) { return static_cast<double>(r - snap) * kDt; };
  auto receiver_at = [&](int i, double t) { return route_position(routes[static_cast<std::size_t>(i)], t); };
  auto qb_at = [&](double t) { return Vec2{qb_start.x - 2.0 * std::clamp(t, 0.0, 1.0), qb_start.y}; };

  for (Index r = 0; r < n_frames; ++r) {
    const double t = time_of(r);
    auto& fr = pos[static_cast<std::size_t>(r)];
    fr[0] = qb_at(t);
    for (int k = 0; k < n_ol; ++k) {
      const Vec2 s = off_start[static_cast<std::size_t>(1 + k)];
      fr[static_cast<std::size_t>(1 + k)] = {s.x - std::clamp(t / 0.5, 0.0, 1.0), s.y};
    }
    for (int i = 0; i < cfg.n_receivers; ++i) fr[static_cast<std::size_t>(receiver_agent[i])] = receiver_at(i, t);
  }

  std::vector<double> target_weights;
  for (int i = 0; i < cfg.n_receivers; ++i) {
    const PositionCode pc = rec_pos_codes[static_cast<std::size_t>(i)];
    target_weights.push_back(pc == PositionCode::WR ? 1.0 : pc == PositionCode::TE ? 0.7 : 0.4);
  }
  const int targeted = static_cast<int>(sample_weighted(rng, target_weights));
  const Vec2 catch_point =
      pos[static_cast<std::size_t>(arrival)][static_cast<std::size_t>(receiver_agent[targeted])];
  const double break_speed = uniform(rng, 6.0, 8.5);

  for (int d = 0; d < cfg.n_defenders; ++d) {
    const std::size_t agent = static_cast<std::size_t>(first_defender + d);
    const Role& role = truth.roles[static_cast<std::size_t>(d)];
    const Alignment& true_align = truth.align[static_cast<std::size_t>(d)];
    const Vec2 shown_spot = presnap.align[static_cast<std::size_t>(d)].spot;
    Vec2 state = true_align.spot;
    for (Index r = 0; r < n_frames; ++r) {
      const double t = time_of(r);
      if (t < 0.0) {
        pos[static_cast<std::size_t>(r)][agent] = shown_spot;
        continue;
      }
      Vec2 path;
      if (role.cls == Coverage::Man || role.cls == Coverage::Bracket) {
        const double lag_t = std::max(0.0, t - kReactionLagFrames * kDt);
        path = receiver_at(role.man_receiver, lag_t) + true_align.cushion;
      } else if (role.cls == Coverage::NoAssignment) {
        if (r > snap) {
          const Vec2 qb = pos[static_cast<std::size_t>(r)][0];
          if (norm(qb - state) > 1.2) state = step_toward(state, qb, 5.5 * kDt);
        }
        path = state;
      } else {
        if (r > pass_forward + kReactionLagFrames && norm(state - catch_point) < kBallBreakRadius) {
          // Zone defenders near the throw leave their zone and break on the ball.
          state = step_toward(state, catch_point, break_speed * kDt);
        } else if (r > snap) {
          Vec2 target = role.landmark;
          double best = kZoneReactRadius;
          for (int i = 0; i < cfg.n_receivers; ++i) {
            const Vec2 rp = pos[static_cast<std::size_t>(r)][static_cast<std::size_t>(receiver_agent[i])];
            const double dist = norm(rp - role.landmark);
            if (dist < best) {
              best = dist;
              target = role.landmark + 0.5 * (rp - role.landmark);
            }
          }
          state = step_toward(state, target, 6.5 * kDt);
        }
        path = state;
      }
      const double w = std::min(1.0, t / kDisguiseBlendS);
      pos[static_cast<std::size_t>(r)][agent] = clamp_field((1.0 - w) * shown_spot + w * path);
    }
  }

  // Labels from the noise-free kinematics.
  const std::vector<Vec2>& at_arrival = pos[static_cast<std::size_t>(arrival)];
  std::map<std::string, int> coverage;
  std::map<std::string, std::optional<std::string>> matchup;
  for (int d = 0; d < cfg.n_defenders; ++d) {
    const Role& role = truth.roles[static_cast<std::size_t>(d)];
    const std::string& id = play.agents[static_cast<std::size_t>(first_defender + d)].agent_id;
    coverage[id] = static_cast<int>(role.cls);
    std::optional<std::string> rec;
    if (role.man_receiver >= 0) {
      rec = play.agents[static_cast<std::size_t>(receiver_agent[role.man_receiver])].agent_id;
    } else if (role.cls != Coverage::NoAssignment) {
      // The receiver that spent the most post-snap frames inside the zone.
      int best_frames = kZoneMatchMinFrames - 1;
      for (int i = 0; i < cfg.n_receivers; ++i) {
        int frames = 0;
        for (Index r = snap + 1; r <= arrival; ++r)
          frames += norm(pos[static_cast<std::size_t>(r)][static_cast<std::size_t>(receiver_agent[i])] - role.landmark) <
                    kZoneReactRadius;
        if (frames > best_frames) {
          best_frames = frames;
          rec = play.agents[static_cast<std::size_t>(receiver_agent[i])].agent_id;
        }
      }
    }
    matchup[id] = rec;
  }

  std::optional<std::string> target_defender;
  if (scheme != Scheme::Prevent && catch_point.x >= los) {
    int best_d = -1;
    for (int pass = 0; pass < 2 && best_d < 0; ++pass) {
      const Coverage want = pass == 0 ? Coverage::Man : Coverage::Bracket;
      for (int d = 0; d < cfg.n_defenders; ++d) {
        const Role& role = truth.roles[static_cast<std::size_t>(d)];
        if (role.cls == want && role.man_receiver == targeted) best_d = d;
      }
    }
    if (best_d < 0) {
      double best = 1e18;
      for (int d = 0; d < cfg.n_defenders; ++d) {
        const Role& role = truth.roles[static_cast<std::size_t>(d)];
        if (!coverage_info(role.cls).is_zone) continue;
        const double dist = norm(role.landmark - catch_point);
        if (dist < best) {
          best = dist;
          best_d = d;
        }
      }
    }
    if (best_d < 0) {
      double best = 1e18;
      for (int d = 0; d < cfg.n_defenders; ++d) {
        if (truth.roles[static_cast<std::size_t>(d)].cls == Coverage::NoAssignment) continue;
        const double dist = norm(at_arrival[static_cast<std::size_t>(first_defender + d)] - catch_point);
        if (dist < best) {
          best = dist;
          best_d = d;
        }
      }
    }
    if (best_d >= 0) target_defender = play.agents[static_cast<std::size_t>(first_defender + best_d)].agent_id;
  }

  lp.labels.coverage = std::move(coverage);
  lp.labels.matchup = std::move(matchup);
  lp.labels.has_target = true;
  lp.labels.target_defender = target_defender;
  lp.labels.targeted_receiver = play.agents[static_cast<std::size_t>(receiver_agent[targeted])].agent_id;

  // Observation noise (AR(1) jitter), angles, speeds; then the broadcast orientation.
  std::vector<Vec2> jitter(n_agents);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rho = 0.85;
  const double innovation = cfg.noise_sigma * std::sqrt(1.0 - rho * rho);
  std::vector<std::vector<Vec2>> obs = pos;
  for (Index r = 0; r < n_frames; ++r) {
    for (std::size_t a = 0; a < n_agents; ++a) {
      if (cfg.noise_sigma > 0.0) {
        if (r == 0)
          jitter[a] = {cfg.noise_sigma * gauss(rng), cfg.noise_sigma * gauss(rng)};
        else
          jitter[a] = {rho * jitter[a].x + innovation * gauss(rng), rho * jitter[a].y + innovation * gauss(rng)};
      }
      const Vec2 p = clamp_field(pos[static_cast<std::size_t>(r)][a] + jitter[a]);
      obs[static_cast<std::size_t>(r)][a] = {round_to(p.x, 0.01), round_to(p.y, 0.01)};
    }
  }

  play.frames.assign(static_cast<std::size_t>(n_frames), Frame(n_agents));
  std::vector<double> heading(n_agents);
  for (std::size_t a = 0; a < n_agents; ++a) heading[a] = play.agents[a].side == TeamSide::Offense ? 0.0 : 180.0;
  for (Index r = 0; r < n_frames; ++r) {
    const auto& cur = obs[static_cast<std::size_t>(r)];
    const auto& prev = obs[static_cast<std::size_t>(r > 0 ? r - 1 : 0)];
    const auto& next = obs[static_cast<std::size_t>(std::min<Index>(r + 1, n_frames - 1))];
    for (std::size_t a = 0; a < n_agents; ++a) {
      const Vec2 v = r > 0 ? cur[a] - prev[a] : next[a] - cur[a];
      const double speed = norm(v) * kFrameRateHz;
      if (speed > 0.5) heading[a] = std::atan2(v.y, v.x) * 180.0 / kPi;
      double orientation = heading[a];
      const bool defender = play.agents[a].side == TeamSide::Defense;
      if (r < snap) {
        orientation = defender ? 180.0 : 0.0;
      } else if (defender) {
        const Coverage c = truth.roles[a - static_cast<std::size_t>(first_defender)].cls;
        if (coverage_info(c).is_zone) {
          const Vec2 to_qb = cur[0] - cur[a];
          orientation = std::atan2(to_qb.y, to_qb.x) * 180.0 / kPi;
        }
      }
      AgentState st;
      st.x = cur[a].x;
      st.y = cur[a].y;
      st.direction = wrap_deg(heading[a]);
      st.orientation = wrap_deg(orientation);
      st.speed = round_to(speed, 0.01);
      play.frames[static_cast<std::size_t>(r)][a] = st;
    }
  }

  if (play.direction == PlayDirection::Left) {
    // Store raw coordinates as recorded for a leftward play.
    for (auto& fr : play.frames) {
      for (auto& s : fr) {
        s.x = round_to(kFieldLength - s.x, 0.01);
        s.y = round_to(kFieldWidth - s.y, 0.01);
        s.orientation = wrap_deg(s.orientation + 180.0);
        s.direction = wrap_deg(s.direction + 180.0);
      }
    }
  }

  if (trace) {
    trace->alignment_scheme = shown;
    trace->disguised = disguised;
    trace->double_covered = doubled;
    trace->reaction_lag_frames = kReactionLagFrames;
    trace->cushion_x.clear();
    trace->cushion_y.clear();
    trace->man_receiver.clear();
    for (int d = 0; d < cfg.n_defenders; ++d) {
      const Role& role = truth.roles[static_cast<std::size_t>(d)];
      trace->cushion_x.push_back(truth.align[static_cast<std::size_t>(d)].cushion.x);
      trace->cushion_y.push_back(truth.align[static_cast<std::size_t>(d)].cushion.y);
      trace->man_receiver.push_back(role.man_receiver >= 0 ? receiver_agent[role.man_receiver] : -1);
    }
  }
  return lp;
}

std::vector<LabeledPlay> gen_plays(const GenConfig& cfg) {
  cfg.validate();
  std::vector<LabeledPlay> out;
  out.reserve(static_cast<std::size_t>(cfg.n_plays));
  for (long i = 0; i < cfg.n_plays; ++i) out.push_back(gen_play(cfg, i));
  return out;
}

DatasetPaths gen_dataset(const GenConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  DatasetPaths paths{(std::filesystem::path(out_dir) / "plays.jsonl").string(),
                     (std::filesystem::path(out_dir) / "manifest.json").string()};
  std::string body;
  for (long i = 0; i < cfg.n_plays; ++i) {
    body += serialize_play(gen_play(cfg, i));
    body += '\n';
  }
  write_file_atomic(paths.plays, body);
  const json manifest = {{"config", cfg.to_json()},
                         {"seed", cfg.seed},
                         {"n_plays", cfg.n_plays},
                         {"schema_version", kDatasetSchemaVersion}};
  write_file_atomic(paths.manifest, manifest.dump(2) + "\n");
  return paths;
}

}  // namespace covnet
