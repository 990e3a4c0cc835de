#include "covnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace covnet {

using nlohmann::json;

namespace {

int row_argmax(const Matrix<float>& m, Index r) {
  Index arg = 0;
  m.row(r).maxCoeff(&arg);
  return static_cast<int>(arg);
}

void add(Tally& t, bool correct) {
  t.correct += correct;
  ++t.total;
}

}  // namespace

Predictor model_predictor(const CovNet<float>& model) {
  return [&model](const PreparedPlay&, const ModelInput& in) {
    const HeadOutputs<float> out = model.forward(in);
    const Matrix<float>& z = out.logits(model.task());
    std::vector<int> pred;
    if (model.task() == Task::Target) {
      pred.push_back(row_argmax(z, 0));
    } else {
      for (Index d = 0; d < z.rows(); ++d) pred.push_back(row_argmax(z, d));
    }
    return pred;
  };
}

std::vector<int> truth_classes(const PreparedPlay& p, Task task) {
  switch (task) {
    case Task::Coverage: return p.coverage_targets;
    case Task::Matchup: return p.matchup_targets;
    case Task::Target: return {p.target_slot ? *p.target_slot : -1};
  }
  return {};
}

std::vector<const PreparedPlay*> scorable_plays(const std::vector<PreparedPlay>& plays, Task task) {
  std::vector<const PreparedPlay*> out;
  for (const auto& p : plays)
    if (has_task_label(p, task)) out.push_back(&p);
  return out;
}

double macro_f1(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size()) throw ConfigError("macro_f1: size mismatch");
  if (truth.empty()) throw ConfigError("macro_f1: no samples");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  double sum = 0.0;
  for (int c : classes) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool t = truth[i] == c, p = predicted[i] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    sum += denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  }
  return sum / static_cast<double>(classes.size());
}

EvalReport evaluate_strategies(const Predictor& predict, const std::vector<PreparedPlay>& plays, Task task) {
  const auto scored = scorable_plays(plays, task);
  if (scored.empty()) throw DataError("evaluation dataset has no plays labeled for task " + std::string(task_name(task)));
  EvalReport report;
  report.task = task;
  for (const TruncationStrategy& s : fixed_strategies()) {
    StrategyResult r;
    r.strategy = s;
    std::vector<int> all_truth, all_pred;
    for (const PreparedPlay* p : scored) {
      const Window w = resolve_window(s, p->events);
      const std::vector<int> pred = predict(*p, make_input(*p, w));
      const std::vector<int> truth = truth_classes(*p, task);
      if (pred.size() != truth.size())
        throw ConfigError("predictor returned " + std::to_string(pred.size()) + " classes for play " + p->play.play_id);
      Tally& team = r.per_team[p->play.defense_team];
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool ok = pred[i] == truth[i];
        const bool primary = task != Task::Coverage || truth[i] != static_cast<int>(Coverage::NoAssignment);
        const bool variant = task != Task::Matchup || truth[i] != 0;
        if (primary) {
          add(r.primary, ok);
          add(team, ok);
        }
        if (variant) add(r.variant, ok);
        ++r.confusion[{truth[i], pred[i]}];
      }
      all_truth.insert(all_truth.end(), truth.begin(), truth.end());
      all_pred.insert(all_pred.end(), pred.begin(), pred.end());
      r.plays.push_back({p->play.play_id, p->play.defense_team, truth, pred});
    }
    r.f1 = macro_f1(all_truth, all_pred);
    report.strategies.push_back(std::move(r));
  }
  return report;
}

EvalReport evaluate_strategies(const CovNet<float>& model, const std::vector<PreparedPlay>& plays) {
  return evaluate_strategies(model_predictor(model), plays, model.task());
}

const StrategyResult& EvalReport::find(const TruncationStrategy& s) const {
  for (const auto& r : strategies)
    if (r.strategy == s) return r;
  throw ConfigError("strategy " + s.label() + " not in report");
}

std::string EvalReport::strategies_csv() const {
  std::ostringstream os;
  os.precision(6);
  os << "task,start,end,accuracy,accuracy_variant,f1,n_scored,n_variant\n";
  for (const auto& r : strategies) {
    const std::string label = r.strategy.label();
    const std::string end = label.substr(label.find(',') + 1, label.size() - label.find(',') - 2);
    os << task_name(task) << ',' << r.strategy.start << ',' << end << ',' << r.primary.accuracy() << ','
       << r.variant.accuracy() << ',' << r.f1 << ',' << r.primary.total << ',' << r.variant.total << '\n';
  }
  return os.str();
}

json EvalReport::to_json() const {
  json rows = json::array();
  for (const auto& r : strategies) {
    json teams = json::object();
    for (const auto& [team, t] : r.per_team) teams[team] = {{"correct", t.correct}, {"total", t.total}};
    json confusion = json::array();
    for (const auto& [k, n] : r.confusion) confusion.push_back({k.first, k.second, n});
    json per_play = json::array();
    for (const auto& p : r.plays)
      per_play.push_back({{"play_id", p.play_id}, {"truth", p.truth}, {"predicted", p.predicted}});
    rows.push_back({{"strategy", r.strategy.label()},
                    {"accuracy", r.primary.accuracy()},
                    {"accuracy_variant", r.variant.accuracy()},
                    {"f1", r.f1},
                    {"n_scored", r.primary.total},
                    {"n_variant", r.variant.total},
                    {"per_team", teams},
                    {"confusion", confusion},
                    {"per_play", per_play}});
  }
  json out = {{"task", std::string(task_name(task))}, {"strategies", rows}};
  if (target)
    out["target_table"] = {{"nearest_defender_baseline", target->baseline},
                           {"transformer", target->raw},
                           {"transformer_postprocessed", target->postprocessed},
                           {"n_plays", target->n_plays}};
  return out;
}

// ------------------------------------------------------------------------------------------------

std::string nearest_defender_baseline(const Play& play, const std::string& targeted_receiver) {
  const auto r = play.agent_index(targeted_receiver);
  if (!r) throw DataError("unknown targeted receiver '" + targeted_receiver + "'");
  if (!play.events.pass_arrival) throw DataError("missing pass arrival");
  const Frame& f = play.frames.at(static_cast<std::size_t>(*play.events.pass_arrival));
  const AgentState& rs = f[static_cast<std::size_t>(*r)];
  std::optional<std::string> best;
  double best_d = 0.0;
  for (Index d : play.defender_indices()) {
    const AgentState& s = f[static_cast<std::size_t>(d)];
    const double dist = std::hypot(s.x - rs.x, s.y - rs.y);
    const std::string& id = play.agents[static_cast<std::size_t>(d)].agent_id;
    if (!best || dist < best_d || (dist == best_d && id < *best)) {
      best = id;
      best_d = dist;
    }
  }
  if (!best) throw DataError("play has no defenders");
  return *best;
}

bool preventative_alignment(const Play& play, const PostprocessOptions& opt) {
  const Frame& snap = play.frames.at(static_cast<std::size_t>(play.events.snap));
  const double los = play.line_of_scrimmage_x();
  int deep = 0;
  for (Index d : play.defender_indices()) deep += snap[static_cast<std::size_t>(d)].x - los > opt.deep_yards;
  const bool late = play.situation.game_clock_s <= opt.late_clock_s || opt.assume_lead;
  return deep >= opt.min_deep_defenders && late;
}

std::optional<std::string> target_postprocess(const Matrix<double>& target_probs, const Play& play,
                                              const std::optional<Index>& targeted_receiver,
                                              const MatchupPrediction* matchup, const PostprocessOptions& opt) {
  const auto defenders = play.defender_indices();
  const Index D = static_cast<Index>(defenders.size());
  if (target_probs.rows() != 1 || target_probs.cols() != D + 1) throw ConfigError("target probabilities must be [1, D + 1]");
  Index arg = 0;
  const double pmax = target_probs.row(0).head(D).maxCoeff(&arg);
  auto id = [&](Index slot) { return play.agents[static_cast<std::size_t>(defenders[static_cast<std::size_t>(slot)])].agent_id; };
  if (pmax >= opt.threshold) return id(arg);

  if (preventative_alignment(play, opt)) return std::nullopt;
  if (targeted_receiver && play.events.pass_arrival) {
    const auto& catcher = play.frames.at(static_cast<std::size_t>(*play.events.pass_arrival))
                              .at(static_cast<std::size_t>(*targeted_receiver));
    if (catcher.x < play.line_of_scrimmage_x()) return std::nullopt;
  }
  if (matchup && targeted_receiver) {
    const auto col_it = std::find(matchup->receivers.begin(), matchup->receivers.end(), *targeted_receiver);
    if (col_it != matchup->receivers.end()) {
      const Index col = static_cast<Index>(col_it - matchup->receivers.begin()) + 1;
      std::optional<Index> best;
      for (Index d = 0; d < matchup->probs.rows(); ++d) {
        Index m = 0;
        matchup->probs.row(d).maxCoeff(&m);
        if (m == col && (!best || matchup->probs(d, col) > matchup->probs(*best, col))) best = d;
      }
      if (best) return id(*best);
    }
  }
  return id(arg);
}

double target_accuracy(const std::vector<std::optional<std::string>>& predicted,
                       const std::vector<std::optional<std::string>>& truth) {
  if (predicted.size() != truth.size()) throw ConfigError("target_accuracy: size mismatch");
  if (predicted.empty()) throw ConfigError("target_accuracy: no predictions");
  long correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

TargetTable evaluate_target_table(const CovNet<float>& target_model, const CovNet<float>* matchup_model,
                                  const std::vector<PreparedPlay>& plays, const PostprocessOptions& opt) {
  if (target_model.task() != Task::Target) throw ConfigError("target table needs a target model");
  if (matchup_model && matchup_model->task() != Task::Matchup) throw ConfigError("fallback model must be a matchup model");
  std::vector<std::optional<std::string>> truth, baseline, raw, post;
  for (const PreparedPlay& p : plays) {
    if (!p.labels.has_target || !p.targeted_receiver) continue;
    const ModelInput in = make_input(p, p.full_window());
    const Matrix<double> probs = head_probabilities(target_model.forward(in), Task::Target);
    const auto defenders = p.defenders;
    Index arg = 0;
    probs.row(0).head(static_cast<Index>(defenders.size())).maxCoeff(&arg);
    std::optional<MatchupPrediction> mp;
    if (matchup_model) mp = MatchupPrediction{head_probabilities(matchup_model->forward(in), Task::Matchup), p.receivers};

    truth.push_back(p.labels.target_defender);
    baseline.push_back(nearest_defender_baseline(p.play, *p.labels.targeted_receiver));
    raw.push_back(p.play.agents[static_cast<std::size_t>(defenders[static_cast<std::size_t>(arg)])].agent_id);
    post.push_back(target_postprocess(probs, p.play, p.targeted_receiver, mp ? &*mp : nullptr, opt));
  }
  if (truth.empty()) throw DataError("no plays carry a target label");
  return {target_accuracy(baseline, truth), target_accuracy(raw, truth), target_accuracy(post, truth),
          static_cast<long>(truth.size())};
}

}  // namespace covnet
