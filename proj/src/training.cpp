#include "covnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace covnet {

using nlohmann::json;

TrainConfig TrainConfig::defaults(Task task) {
  TrainConfig c;
  c.task = task;
  c.epochs = task == Task::Target ? 100 : task == Task::Matchup ? 200 : 150;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be within [0, 1)");
  optimizer.validate();
  if (!(onecycle.max_lr >= 0.0)) throw ConfigError("max_lr must be non-negative");
  if (!(cosine.init_lr >= 0.0)) throw ConfigError("init_lr must be non-negative");
}

json TrainConfig::to_json() const {
  return {{"task", std::string(task_name(task))},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"weight_decay", optimizer.weight_decay},
          {"betas", {optimizer.beta1, optimizer.beta2}},
          {"scheduler", uses_onecycle() ? "onecycle" : "cosine_restart"},
          {"max_lr", onecycle.max_lr},
          {"pct_start", onecycle.pct_start},
          {"div_factor", onecycle.div_factor},
          {"final_div_factor", onecycle.final_div_factor},
          {"init_lr", cosine.init_lr},
          {"t0", cosine.t0},
          {"t_mult", cosine.t_mult},
          {"eta_min", cosine.eta_min},
          {"seed", seed},
          {"augmentation", augmentation},
          {"val_fraction", val_fraction},
          {"clip_norm", clip_norm}};
}

bool has_task_label(const PreparedPlay& p, Task task) {
  switch (task) {
    case Task::Coverage:
      return !p.coverage_targets.empty() &&
             std::all_of(p.coverage_targets.begin(), p.coverage_targets.end(), [](int c) { return c >= 0; });
    case Task::Matchup: return p.labels.matchup.has_value() && !p.receivers.empty();
    case Task::Target: return p.target_slot.has_value() && p.targeted_receiver.has_value();
  }
  return false;
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

bool in_validation_split(const std::string& play_id, double fraction) {
  const std::uint64_t h = splitmix64(fnv1a64(play_id.data(), play_id.size()));
  return static_cast<double>(h % 10000) < fraction * 10000.0;
}

template <typename S>
Tally score_outputs(const HeadOutputs<S>& out, const PreparedPlay& p, Task task) {
  Tally t;
  Index arg = 0;
  switch (task) {
    case Task::Coverage:
      for (Index d = 0; d < out.coverage_logits.rows(); ++d) {
        out.coverage_logits.row(d).maxCoeff(&arg);
        t.correct += arg == p.coverage_targets[static_cast<std::size_t>(d)];
        ++t.total;
      }
      break;
    case Task::Matchup:
      for (Index d = 0; d < out.matchup_logits.rows(); ++d) {
        out.matchup_logits.row(d).maxCoeff(&arg);
        t.correct += arg == p.matchup_targets[static_cast<std::size_t>(d)];
        ++t.total;
      }
      break;
    case Task::Target:
      out.target_logits.row(0).maxCoeff(&arg);
      t.correct += p.target_slot && arg == *p.target_slot;
      ++t.total;
      break;
  }
  return t;
}

template Tally score_outputs(const HeadOutputs<float>&, const PreparedPlay&, Task);
template Tally score_outputs(const HeadOutputs<double>&, const PreparedPlay&, Task);

namespace {

double global_grad_norm(CovNet<float>& model) {
  double sq = 0.0;
  model.visit([&](const std::string&, Param<float>& p) { sq += p.grad.template cast<double>().squaredNorm(); });
  return std::sqrt(sq);
}

}  // namespace

TrainResult train(const std::vector<PreparedPlay>& plays, const ModelConfig& model_cfg, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (model_cfg.task != cfg.task) throw ConfigError("model and training task differ");

  TrainResult result;
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t i = 0; i < plays.size(); ++i) {
    if (!has_task_label(plays[i], cfg.task)) continue;
    (in_validation_split(plays[i].play.play_id, cfg.val_fraction) ? val_idx : train_idx).push_back(i);
  }
  if (train_idx.empty()) throw DataError("no training plays carry labels for task " + std::string(task_name(cfg.task)));
  result.n_train = train_idx.size();
  result.n_val = val_idx.size();

  result.model = CovNet<float>(model_cfg, cfg.seed);
  CovNet<float>& model = result.model;
  std::vector<NamedParam<float>> params;
  model.visit([&](const std::string& name, Param<float>& p) { params.push_back({name, &p}); });
  AdamWState<float> opt_state;
  AdamWConfig opt = cfg.optimizer;

  const long batches_per_epoch =
      static_cast<long>((train_idx.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                        static_cast<std::size_t>(cfg.batch_size));
  OneCycleConfig onecycle = cfg.onecycle;
  onecycle.total_steps = batches_per_epoch * cfg.epochs;

  Rng rng = derive_rng(cfg.seed, 0x7A41ull);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    double lr = 0.0;
    for (long b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = static_cast<std::size_t>(b) * static_cast<std::size_t>(cfg.batch_size);
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg.batch_size));
      const float scale = 1.0f / static_cast<float>(hi - lo);
      model.zero_grad();
      for (std::size_t k = lo; k < hi; ++k) {
        const PreparedPlay& p = plays[order[k]];
        const Window w = cfg.augmentation ? resolve_window(sample_truncation(rng, p.events.pass_arrival), p.events)
                                          : p.full_window();
        const ModelInput in = make_input(p, w);
        CovNet<float>::Cache cache;
        const HeadOutputs<float> out = model.forward(in, &rng, &cache);
        Matrix<float> grad;
        const float loss = task_loss(out, p, cfg.task, &grad);
        if (!std::isfinite(loss))
          throw NumericError("non-finite loss on play " + p.play.play_id + " at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(step) + ", window " + std::to_string(w.start) + ".." +
                             std::to_string(w.end));
        epoch_loss += loss;
        grad *= scale;
        model.backward(in, cache, grad);
      }
      if (cfg.clip_norm > 0.0) {
        const double norm = global_grad_norm(model);
        if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm at step " + std::to_string(step));
        if (norm > cfg.clip_norm) {
          const float f = static_cast<float>(cfg.clip_norm / (norm + 1e-6));
          for (auto& np : params) np.param->grad *= f;
        }
      }
      lr = cfg.uses_onecycle()
               ? onecycle_lr(step, onecycle)
               : cosine_restart_lr(epoch + static_cast<double>(b) / static_cast<double>(batches_per_epoch), cfg.cosine);
      opt.lr = lr;
      adamw_step(params, opt_state, opt, step + 1);
      result.lr_trace.push_back(lr);
      ++step;
    }

    MetricsRow row;
    row.epoch = epoch + 1;
    row.step = step;
    row.lr = lr;
    row.train_loss = epoch_loss / static_cast<double>(train_idx.size());
    if (val_idx.empty()) {
      row.val_loss = std::numeric_limits<double>::quiet_NaN();
      row.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    } else {
      double val_loss = 0.0;
      Tally tally;
      for (std::size_t i : val_idx) {
        const PreparedPlay& p = plays[i];
        const HeadOutputs<float> out = model.forward(make_input(p, p.full_window()));
        val_loss += task_loss(out, p, cfg.task);
        const Tally t = score_outputs(out, p, cfg.task);
        tally.correct += t.correct;
        tally.total += t.total;
      }
      row.val_loss = val_loss / static_cast<double>(val_idx.size());
      row.val_accuracy = tally.accuracy();
    }
    result.metrics.push_back(row);
    if (on_epoch) on_epoch(row);
  }

  std::ostringstream rs;
  rs << rng;
  result.state = {cfg.epochs, step, rs.str()};
  return result;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream os;
  os.precision(9);
  os << "epoch,step,lr,train_loss,val_loss,val_accuracy\n";
  for (const auto& r : rows)
    os << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.train_loss << ',' << r.val_loss << ','
       << r.val_accuracy << '\n';
  return os.str();
}

}  // namespace covnet
