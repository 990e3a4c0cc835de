#include "covnet/analytics.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace covnet {

namespace {

std::vector<DisguiseRow> finish(std::map<std::string, std::pair<Tally, Tally>> teams, std::vector<std::string>* notes) {
  std::vector<DisguiseRow> rows;
  for (const auto& [team, t] : teams) {
    if (t.first.total == 0 || t.second.total == 0) {
      if (notes) notes->push_back("team " + team + " has no scored defenders; excluded");
      continue;
    }
    DisguiseRow r;
    r.team_id = team;
    r.presnap_accuracy = t.first.accuracy();
    r.full_accuracy = t.second.accuracy();
    r.gap = r.full_accuracy - r.presnap_accuracy;
    r.n_defenders = t.second.total;
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const DisguiseRow& a, const DisguiseRow& b) { return a.presnap_accuracy < b.presnap_accuracy; });
  return rows;
}

const TruncationStrategy kPresnap{kEarliestStartOffset, EndEvent::Snap, 0};
const TruncationStrategy kFull{kEarliestStartOffset, EndEvent::PassArrival, 0};

void tally_play(Tally& t, const PlayPrediction& p) {
  for (std::size_t i = 0; i < p.truth.size(); ++i) {
    if (p.truth[i] == static_cast<int>(Coverage::NoAssignment)) continue;
    t.correct += p.truth[i] == p.predicted[i];
    ++t.total;
  }
}

}  // namespace

std::vector<DisguiseRow> disguise_table(const EvalReport& report, std::vector<std::string>* notes) {
  if (report.task != Task::Coverage) throw ConfigError("disguise table needs a coverage report");
  std::map<std::string, std::pair<Tally, Tally>> teams;
  for (const auto& [team, t] : report.find(kPresnap).per_team) teams[team].first = t;
  for (const auto& [team, t] : report.find(kFull).per_team) teams[team].second = t;
  return finish(std::move(teams), notes);
}

std::vector<DisguiseRow> disguise_table(const std::vector<PlayPrediction>& presnap,
                                        const std::vector<PlayPrediction>& full, std::vector<std::string>* notes) {
  std::map<std::string, std::pair<Tally, Tally>> teams;
  for (const auto& p : presnap) tally_play(teams[p.defense_team].first, p);
  for (const auto& p : full) tally_play(teams[p.defense_team].second, p);
  return finish(std::move(teams), notes);
}

std::vector<DisguiseRow> disguise_table(const CovNet<float>& model, const std::vector<PreparedPlay>& plays,
                                        std::vector<std::string>* notes) {
  if (model.task() != Task::Coverage) throw ConfigError("disguise table needs a coverage model");
  const Predictor predict = model_predictor(model);
  std::vector<PlayPrediction> presnap, full;
  for (const PreparedPlay* p : scorable_plays(plays, Task::Coverage)) {
    for (const auto& [s, out] : {std::pair{&kPresnap, &presnap}, std::pair{&kFull, &full}}) {
      const ModelInput in = make_input(*p, resolve_window(*s, p->events));
      out->push_back({p->play.play_id, p->play.defense_team, p->coverage_targets, predict(*p, in)});
    }
  }
  return disguise_table(presnap, full, notes);
}

std::string disguise_csv(const std::vector<DisguiseRow>& rows) {
  std::ostringstream os;
  os.precision(6);
  os << "team_id,presnap_accuracy,full_accuracy,gap,n_defenders\n";
  for (const auto& r : rows)
    os << r.team_id << ',' << r.presnap_accuracy << ',' << r.full_accuracy << ',' << r.gap << ',' << r.n_defenders
       << '\n';
  return os.str();
}

std::vector<DoubleCoverage> detect_double_coverage(const CoverageCalls& coverage, const MatchupCalls& matchup) {
  std::map<std::string, std::vector<std::string>> by_receiver;
  for (const auto& [defender, receiver] : matchup) {
    if (!receiver) continue;
    auto it = coverage.find(defender);
    if (it == coverage.end() || !is_man_coverage(it->second)) continue;
    by_receiver[*receiver].push_back(defender);
  }
  std::vector<DoubleCoverage> out;
  for (auto& [receiver, defenders] : by_receiver) {
    if (defenders.size() < 2) continue;
    std::sort(defenders.begin(), defenders.end());
    out.push_back({receiver, defenders});
  }
  return out;
}

GroupBy group_by_from_name(const std::string& name) {
  if (name == "receiver") return GroupBy::Receiver;
  if (name == "defense_team" || name == "defense-team" || name == "team") return GroupBy::DefenseTeam;
  throw ConfigError("unknown group-by '" + name + "' (expected receiver or defense_team)");
}

std::vector<DoubleCoverage> detect_double_coverage(const CoverageCalls& coverage, const MatchupCalls& matchup,
                                                   const CallConfidence& confidence, double min_confidence) {
  MatchupCalls kept;
  for (const auto& [defender, receiver] : matchup) {
    const auto it = confidence.find(defender);
    if (it == confidence.end()) throw ConfigError("no confidence for defender " + defender);
    if (it->second >= min_confidence) kept.emplace(defender, receiver);
  }
  return detect_double_coverage(coverage, kept);
}

double double_coverage_score(const CoverageCalls& coverage, const MatchupCalls& matchup,
                             const CallConfidence& confidence) {
  std::map<std::string, std::vector<double>> by_receiver;
  for (const auto& [defender, receiver] : matchup) {
    if (!receiver) continue;
    const auto c = coverage.find(defender);
    if (c == coverage.end() || !is_man_coverage(c->second)) continue;
    const auto it = confidence.find(defender);
    if (it == confidence.end()) throw ConfigError("no confidence for defender " + defender);
    by_receiver[*receiver].push_back(it->second);
  }
  double best = 0.0;
  for (auto& [receiver, conf] : by_receiver) {
    if (conf.size() < 2) continue;
    std::sort(conf.rbegin(), conf.rend());
    best = std::max(best, conf[1]);
  }
  return best;
}

ModelCalls model_calls(const CovNet<float>& coverage_model, const CovNet<float>& matchup_model, const PreparedPlay& p) {
  if (coverage_model.task() != Task::Coverage || matchup_model.task() != Task::Matchup)
    throw ConfigError("double coverage needs a coverage and a matchup model");
  const ModelInput in = make_input(p, p.full_window());
  const Matrix<float> pc = softmax(coverage_model.forward(in).logits(Task::Coverage));
  const Matrix<float> pm = softmax(matchup_model.forward(in).logits(Task::Matchup));
  ModelCalls calls;
  for (std::size_t i = 0; i < p.defenders.size(); ++i) {
    const Index d = static_cast<Index>(i);
    const std::string& id = p.play.agents[static_cast<std::size_t>(p.defenders[i])].agent_id;
    Index c = 0, m = 0;
    pc.row(d).maxCoeff(&c);
    pm.row(d).maxCoeff(&m);
    calls.coverage[id] = static_cast<int>(c);
    calls.matchup[id] = m == 0 ? std::nullopt
                               : std::optional<std::string>(
                                     p.play.agents[static_cast<std::size_t>(p.receivers[static_cast<std::size_t>(m - 1)])].agent_id);
    calls.confidence[id] = static_cast<double>(pc(d, c)) * static_cast<double>(pm(d, m));
  }
  return calls;
}

double calibrate_double_coverage(const CovNet<float>& coverage_model, const CovNet<float>& matchup_model,
                                 const std::vector<PreparedPlay>& plays) {
  std::vector<double> scores;
  long truth = 0;
  for (const PreparedPlay& p : plays) {
    if (!p.labels.coverage || !p.labels.matchup) continue;
    truth += !detect_double_coverage(*p.labels.coverage, *p.labels.matchup).empty();
    const ModelCalls calls = model_calls(coverage_model, matchup_model, p);
    const double s = double_coverage_score(calls.coverage, calls.matchup, calls.confidence);
    if (s > 0.0) scores.push_back(s);
  }
  if (truth == 0) throw DataError("calibration plays contain no labeled double coverage");
  if (static_cast<std::size_t>(truth) >= scores.size()) return 0.0;
  std::sort(scores.rbegin(), scores.rend());
  // Halfway between the last flagged play and the first one left out.
  return 0.5 * (scores[static_cast<std::size_t>(truth) - 1] + scores[static_cast<std::size_t>(truth)]);
}

DoubleCoverageTable double_coverage_rates(const CovNet<float>* coverage_model, const CovNet<float>* matchup_model,
                                          const std::vector<PreparedPlay>& plays, GroupBy group_by,
                                          double min_confidence) {
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw ConfigError("min_confidence must lie in [0, 1]");
  if ((coverage_model == nullptr) != (matchup_model == nullptr))
    throw ConfigError("double coverage needs both the coverage and the matchup model");
  DoubleCoverageTable table;
  std::map<std::string, DoubleCoverageRow> rows;
  for (const PreparedPlay& p : plays) {
    if (!p.labels.coverage || !p.labels.matchup) continue;
    ++table.plays_eligible;
    const auto truth = detect_double_coverage(*p.labels.coverage, *p.labels.matchup);
    std::vector<DoubleCoverage> detected;
    if (coverage_model) {
      const ModelCalls calls = model_calls(*coverage_model, *matchup_model, p);
      detected = detect_double_coverage(calls.coverage, calls.matchup, calls.confidence, min_confidence);
    }
    table.plays_truth += !truth.empty();
    table.plays_detected += !detected.empty();

    std::set<std::string> entities, hit, hit_truth;
    if (group_by == GroupBy::DefenseTeam) {
      entities.insert(p.play.defense_team);
      if (!detected.empty()) hit.insert(p.play.defense_team);
      if (!truth.empty()) hit_truth.insert(p.play.defense_team);
    } else {
      for (Index r : p.receivers) entities.insert(p.play.agents[static_cast<std::size_t>(r)].agent_id);
      for (const auto& d : detected) hit.insert(d.receiver);
      for (const auto& d : truth) hit_truth.insert(d.receiver);
    }
    for (const auto& e : entities) {
      DoubleCoverageRow& row = rows[e];
      row.entity_id = e;
      ++row.plays_eligible;
      row.double_covered_plays += hit.count(e);
      row.truth_double_covered_plays += hit_truth.count(e);
    }
  }
  for (auto& [id, row] : rows)
    if (row.plays_eligible > 0) table.rows.push_back(row);
  return table;
}

std::string double_coverage_csv(const DoubleCoverageTable& table) {
  std::ostringstream os;
  os.precision(6);
  os << "entity_id,plays_eligible,double_covered_plays,rate,truth_double_covered_plays,truth_rate\n";
  for (const auto& r : table.rows)
    os << r.entity_id << ',' << r.plays_eligible << ',' << r.double_covered_plays << ',' << r.rate() << ','
       << r.truth_double_covered_plays << ',' << r.truth_rate() << '\n';
  os << "ALL," << table.plays_eligible << ',' << table.plays_detected << ',' << table.global_rate() << ','
     << table.plays_truth << ',' << table.truth_global_rate() << '\n';
  return os.str();
}

}  // namespace covnet
