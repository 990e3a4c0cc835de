#include "covnet/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "covnet/analytics.hpp"
#include "covnet/io.hpp"
#include "covnet/synthgen.hpp"

namespace covnet {

using nlohmann::json;
namespace fs = std::filesystem;

LoadedPlays load_plays(const std::string& path, Task task) {
  if (!fs::exists(path)) throw DataError("play file '" + path + "' does not exist");
  ParseResult parsed = parse_plays(path);
  LoadedPlays out;
  out.malformed = static_cast<long>(parsed.errors.size());
  for (const LabeledPlay& lp : parsed.plays) {
    if (!filter_play(lp.play, lp.labels, task).keep) {
      ++out.filtered;
      continue;
    }
    PreparedPlay p = prepare_play(lp);
    if (!has_task_label(p, task)) {
      ++out.filtered;
      continue;
    }
    out.plays.push_back(std::move(p));
  }
  return out;
}

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory '" + dir + "'");
}

LoadedPlays load_nonempty(const std::string& path, Task task, std::ostream& err) {
  LoadedPlays lp = load_plays(path, task);
  if (lp.malformed) err << "skipped " << lp.malformed << " malformed line(s) in " << path << "\n";
  if (lp.filtered) err << "filtered " << lp.filtered << " play(s) without usable " << task_name(task) << " labels\n";
  if (lp.plays.empty()) throw DataError("no plays in '" + path + "' are usable for task " + std::string(task_name(task)));
  return lp;
}

LoadedModel load_for(const std::string& path, std::optional<Task> expected) {
  if (!fs::exists(path)) throw DataError("checkpoint '" + path + "' does not exist");
  LoadedModel m = load_checkpoint(path);
  if (expected && m.model.task() != *expected)
    throw ConfigError("checkpoint '" + path + "' holds a " + std::string(task_name(m.model.task())) +
                      " model, expected " + std::string(task_name(*expected)));
  return m;
}

json matrix_json(const Matrix<double>& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

struct GenArgs {
  GenConfig cfg;
  std::string out = "data";
  std::vector<std::string> teams;  // ID:p_disguise
};

struct TrainArgs {
  std::string data, out = "run", task = "coverage";
  std::uint64_t seed = 7;
  std::optional<int> epochs, batch_size, layers, d_model, heads;
  std::optional<double> lr, weight_decay, dropout, val_fraction;
  bool no_augmentation = false;
};

struct EvalArgs {
  std::string data, checkpoint, matchup_checkpoint, out = "eval";
  bool assume_lead = false;
};

struct PredictArgs {
  std::string data, out = "predictions.jsonl";
  std::vector<std::string> checkpoints, play_ids;
  long stride = 1;
};

struct MetricsArgs {
  std::string data, kind, coverage_checkpoint, matchup_checkpoint, group_by = "receiver", out = "metrics";
  std::string calibrate_on;
  double min_confidence = 0.0;
};

void cmd_gen(GenArgs& a, std::ostream& out) {
  for (const std::string& t : a.teams) {
    const auto colon = t.find(':');
    if (colon == std::string::npos) throw ConfigError("--team expects ID:p_disguise, got '" + t + "'");
    TeamProfile tp;
    tp.team_id = t.substr(0, colon);
    try {
      tp.p_disguise = std::stod(t.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("--team expects ID:p_disguise, got '" + t + "'");
    }
    a.cfg.defense_teams.push_back(tp);
  }
  a.cfg.validate();
  ensure_dir(a.out);
  const DatasetPaths paths = gen_dataset(a.cfg, a.out);
  out << "wrote " << a.cfg.n_plays << " plays to " << paths.plays << "\n";
  out << "manifest " << paths.manifest << ": seed " << a.cfg.seed << ", " << a.cfg.n_offense << "v"
      << a.cfg.n_defenders << ", p_disguise " << a.cfg.p_disguise << ", p_double_coverage "
      << a.cfg.p_double_coverage << "\n";
}

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const Task task = task_from_name(a.task);
  ModelConfig mc = ModelConfig::defaults(task);
  TrainConfig tc = TrainConfig::defaults(task);
  if (a.layers) mc.n_layers = *a.layers;
  if (a.d_model) mc.d_model = *a.d_model;
  if (a.heads) mc.n_heads = *a.heads;
  if (a.dropout) mc.dropout = *a.dropout;
  if (a.epochs) tc.epochs = *a.epochs;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.lr) tc.onecycle.max_lr = tc.cosine.init_lr = *a.lr;
  if (a.weight_decay) tc.optimizer.weight_decay = *a.weight_decay;
  if (a.val_fraction) tc.val_fraction = *a.val_fraction;
  tc.augmentation = !a.no_augmentation;
  tc.seed = a.seed;
  mc.validate();
  tc.validate();

  const LoadedPlays data = load_nonempty(a.data, task, err);
  ensure_dir(a.out);
  TrainResult r = train(data.plays, mc, tc, [&](const MetricsRow& row) {
    out << "epoch " << row.epoch << " lr " << row.lr << " train_loss " << row.train_loss << " val_loss " << row.val_loss
        << " val_accuracy " << row.val_accuracy << "\n";
  });
  const std::string ckpt = join(a.out, std::string(task_name(task)) + ".ckpt");
  save_checkpoint(r.model, r.state, ckpt);
  write_file_atomic(join(a.out, std::string(task_name(task)) + "_metrics.csv"), metrics_csv(r.metrics));
  json cfg = {{"model", mc.to_json()}, {"train", tc.to_json()}, {"n_train", r.n_train}, {"n_val", r.n_val}};
  write_file_atomic(join(a.out, std::string(task_name(task)) + "_config.json"), cfg.dump(2) + "\n");
  out << "trained on " << r.n_train << " plays (" << r.n_val << " held out); checkpoint " << ckpt << "\n";
}

void cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const LoadedModel m = load_for(a.checkpoint, std::nullopt);
  const Task task = m.model.task();
  const LoadedPlays data = load_nonempty(a.data, task, err);
  EvalReport report = evaluate_strategies(m.model, data.plays);
  std::optional<LoadedModel> fallback;
  if (task == Task::Target) {
    if (!a.matchup_checkpoint.empty()) fallback = load_for(a.matchup_checkpoint, Task::Matchup);
    PostprocessOptions opt;
    opt.assume_lead = a.assume_lead;
    report.target = evaluate_target_table(m.model, fallback ? &fallback->model : nullptr, data.plays, opt);
  } else if (!a.matchup_checkpoint.empty()) {
    throw ConfigError("--matchup-checkpoint only applies to target checkpoints");
  }
  ensure_dir(a.out);
  const std::string stem = std::string(task_name(task));
  write_file_atomic(join(a.out, stem + "_strategies.csv"), report.strategies_csv());
  write_file_atomic(join(a.out, stem + "_report.json"), report.to_json().dump(2) + "\n");
  out << report.strategies_csv();
  if (report.target) {
    std::ostringstream os;
    os << "method,accuracy\nnearest_defender," << report.target->baseline << "\ntransformer," << report.target->raw
       << "\ntransformer_postprocessed," << report.target->postprocessed << "\n";
    write_file_atomic(join(a.out, "target_table.csv"), os.str());
    out << os.str();
  }
}

void cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  if (a.checkpoints.empty()) throw ConfigError("predict needs at least one --checkpoint");
  if (a.stride < 1) throw ConfigError("--stride must be >= 1");
  std::vector<LoadedModel> models;
  for (const auto& c : a.checkpoints) models.push_back(load_for(c, std::nullopt));
  if (!fs::exists(a.data)) throw DataError("play file '" + a.data + "' does not exist");
  ParseResult parsed = parse_plays(a.data);
  if (!parsed.errors.empty()) err << "skipped " << parsed.errors.size() << " malformed line(s)\n";
  std::map<std::string, const LabeledPlay*> by_id;
  for (const auto& lp : parsed.plays) by_id[lp.play.play_id] = &lp;

  std::vector<std::string> ids = a.play_ids;
  if (ids.empty())
    for (const auto& [id, lp] : by_id) ids.push_back(id);
  std::ostringstream rows;
  for (const std::string& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      std::string known;
      for (const auto& [k, v] : by_id) known += (known.empty() ? "" : ", ") + k;
      throw DataError("play_id '" + id + "' not found; available: " + known);
    }
    const PreparedPlay p = prepare_play(*it->second);
    std::vector<std::vector<FramePrediction<float>>> per_model;
    for (const auto& m : models) per_model.push_back(predict_frames(p, m.model, a.stride));
    for (std::size_t i = 0; i < per_model.front().size(); ++i) {
      json row = {{"play_id", id}, {"end_frame", per_model.front()[i].end_frame}, {"start_frame", kEarliestStartOffset}};
      for (std::size_t k = 0; k < models.size(); ++k) {
        const Task t = models[k].model.task();
        row[std::string(task_name(t)) + "_probabilities"] = matrix_json(head_probabilities(per_model[k][i].outputs, t));
      }
      rows << row.dump() << "\n";
    }
  }
  const fs::path parent = fs::path(a.out).parent_path();
  if (!parent.empty()) ensure_dir(parent.string());
  write_file_atomic(a.out, rows.str());
  out << "wrote predictions for " << ids.size() << " play(s) to " << a.out << "\n";
}

void cmd_metrics(const MetricsArgs& a, std::ostream& out, std::ostream& err) {
  if (a.kind == "disguise") {
    if (a.coverage_checkpoint.empty()) throw ConfigError("disguise metrics need --coverage-checkpoint");
    const LoadedModel cov = load_for(a.coverage_checkpoint, Task::Coverage);
    const LoadedPlays data = load_nonempty(a.data, Task::Coverage, err);
    std::vector<std::string> notes;
    const auto rows = disguise_table(cov.model, data.plays, &notes);
    for (const auto& n : notes) err << n << "\n";
    ensure_dir(a.out);
    write_file_atomic(join(a.out, "disguise.csv"), disguise_csv(rows));
    out << disguise_csv(rows);
  } else if (a.kind == "double-coverage") {
    if (a.coverage_checkpoint.empty() || a.matchup_checkpoint.empty())
      throw ConfigError("double coverage needs both --coverage-checkpoint and --matchup-checkpoint");
    const GroupBy group = group_by_from_name(a.group_by);
    const LoadedModel cov = load_for(a.coverage_checkpoint, Task::Coverage);
    const LoadedModel mat = load_for(a.matchup_checkpoint, Task::Matchup);
    const LoadedPlays data = load_nonempty(a.data, Task::Matchup, err);
    double threshold = a.min_confidence;
    if (!a.calibrate_on.empty()) {
      const LoadedPlays cal = load_nonempty(a.calibrate_on, Task::Matchup, err);
      threshold = calibrate_double_coverage(cov.model, mat.model, cal.plays);
      err << "calibrated min confidence " << threshold << " on " << cal.plays.size() << " play(s)\n";
    }
    const auto table = double_coverage_rates(&cov.model, &mat.model, data.plays, group, threshold);
    ensure_dir(a.out);
    write_file_atomic(join(a.out, "double_coverage_" + a.group_by + ".csv"), double_coverage_csv(table));
    out << double_coverage_csv(table);
  } else {
    throw CLI::ValidationError("--kind", "unknown kind '" + a.kind + "' (expected disguise or double-coverage)");
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coverage, matchup and target-defender transformer toolkit", "covnet"};
  app.require_subcommand(1);
  // Subcommands inherit fallthrough, so --config may follow the subcommand name.
  app.fallthrough();
  app.set_config("--config", "", "key = value file with one [subcommand] section each; command-line flags win");

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a synthetic play dataset");
  g->add_option("--n-plays", gen.cfg.n_plays)->check(CLI::NonNegativeNumber);
  g->add_option("--seed", gen.cfg.seed);
  g->add_option("--out", gen.out);
  g->add_option("--n-defenders", gen.cfg.n_defenders);
  g->add_option("--n-offense", gen.cfg.n_offense);
  g->add_option("--n-receivers", gen.cfg.n_receivers);
  g->add_option("--p-disguise", gen.cfg.p_disguise);
  g->add_option("--p-double-coverage", gen.cfg.p_double_coverage);
  g->add_option("--noise-sigma", gen.cfg.noise_sigma);
  g->add_option("--n-offense-teams", gen.cfg.n_offense_teams);
  g->add_option("--team", gen.teams, "Defense team as ID:p_disguise (repeatable)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one task model");
  t->add_option("--data", tr.data)->required();
  t->add_option("--task", tr.task)->check(CLI::IsMember({"coverage", "matchup", "target"}));
  t->add_option("--out", tr.out);
  t->add_option("--seed", tr.seed);
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--layers", tr.layers);
  t->add_option("--d-model", tr.d_model);
  t->add_option("--heads", tr.heads);
  t->add_option("--lr", tr.lr, "Peak (one-cycle) or initial (cosine) learning rate");
  t->add_option("--weight-decay", tr.weight_decay);
  t->add_option("--dropout", tr.dropout);
  t->add_option("--val-fraction", tr.val_fraction);
  t->add_flag("--no-augmentation", tr.no_augmentation);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint over the truncation strategies");
  e->add_option("--data", ev.data)->required();
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--matchup-checkpoint", ev.matchup_checkpoint, "Fallback model for target post-processing");
  e->add_option("--out", ev.out);
  e->add_flag("--assume-lead", ev.assume_lead);

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Frame-by-frame head probabilities");
  p->add_option("--data", pr.data)->required();
  p->add_option("--checkpoint", pr.checkpoints)->required();
  p->add_option("--play-id", pr.play_ids);
  p->add_option("--stride", pr.stride);
  p->add_option("--out", pr.out);

  MetricsArgs me;
  auto* m = app.add_subcommand("metrics", "Disguise and double-coverage tables");
  m->add_option("--data", me.data)->required();
  m->add_option("--kind", me.kind)->required();
  m->add_option("--coverage-checkpoint", me.coverage_checkpoint);
  m->add_option("--matchup-checkpoint", me.matchup_checkpoint);
  m->add_option("--group-by", me.group_by);
  m->add_option("--min-confidence", me.min_confidence, "Per-defender confidence needed to count a double coverage");
  m->add_option("--calibrate-on", me.calibrate_on, "Fit --min-confidence so detections match labels on these plays")
      ->excludes(m->get_option("--min-confidence"));
  m->add_option("--out", me.out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (g->parsed()) cmd_gen(gen, out);
    if (t->parsed()) cmd_train(tr, out, err);
    if (e->parsed()) cmd_eval(ev, out, err);
    if (p->parsed()) cmd_predict(pr, out, err);
    if (m->parsed()) cmd_metrics(me, out, err);
    return kExitOk;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::Error& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& ex) {
    err << "usage error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& ex) {
    err << "numeric abort: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& ex) {
    err << "data error: " << ex.what() << "\n";
    return kExitData;
  }
}

}  // namespace covnet
