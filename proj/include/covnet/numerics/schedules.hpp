#pragma once

#include <cmath>
#include <numbers>

#include "covnet/error.hpp"

namespace covnet {

struct OneCycleConfig {
  double max_lr = 2e-4;
  long total_steps = 1;
  double pct_start = 0.1;
  double div_factor = 10.0;
  double final_div_factor = 100.0;

  double initial_lr() const { return max_lr / div_factor; }
  double final_lr() const { return initial_lr() / final_div_factor; }
  long peak_step() const { return std::lround(pct_start * static_cast<double>(total_steps)); }
};

struct CosineRestartConfig {
  double init_lr = 2e-5;
  long t0 = 15;
  long t_mult = 1;
  double eta_min = 2e-7;
};

namespace detail {
inline double cosine_anneal(double from, double to, double pct) {
  return to + (from - to) * 0.5 * (1.0 + std::cos(std::numbers::pi * pct));
}
}  // namespace detail

/// One-cycle schedule: cosine rise from max_lr/div_factor to max_lr at step round(pct_start * total),
/// then cosine decay to max_lr/(div_factor * final_div_factor) at the last step.
inline double onecycle_lr(long step, const OneCycleConfig& cfg) {
  if (cfg.total_steps < 1) throw ConfigError("onecycle: total_steps must be positive");
  if (!(cfg.pct_start > 0.0 && cfg.pct_start < 1.0)) throw ConfigError("onecycle: pct_start must be in (0, 1)");
  if (step < 0 || step >= cfg.total_steps) throw ConfigError("onecycle: step out of range");
  const long peak = cfg.peak_step();
  const long last = cfg.total_steps - 1;
  if (step <= peak) {
    if (peak == 0) return cfg.max_lr;
    return detail::cosine_anneal(cfg.initial_lr(), cfg.max_lr,
                                 static_cast<double>(step) / static_cast<double>(peak));
  }
  return detail::cosine_anneal(cfg.max_lr, cfg.final_lr(),
                               static_cast<double>(step - peak) / static_cast<double>(last - peak));
}

/// Cosine annealing with warm restarts. `epoch` may be fractional (epoch + batch / batches_per_epoch).
inline double cosine_restart_lr(double epoch, const CosineRestartConfig& cfg) {
  if (cfg.t0 < 1) throw ConfigError("cosine restart: t0 must be positive");
  if (cfg.t_mult < 1) throw ConfigError("cosine restart: t_mult must be positive");
  if (!(epoch >= 0.0)) throw ConfigError("cosine restart: epoch must be non-negative");
  const double t0 = static_cast<double>(cfg.t0);
  double t_cur = 0.0;
  double t_i = t0;
  if (cfg.t_mult == 1) {
    t_cur = std::fmod(epoch, t0);
  } else {
    const double mult = static_cast<double>(cfg.t_mult);
    const double n = std::floor(std::log(epoch / t0 * (mult - 1.0) + 1.0) / std::log(mult));
    t_cur = epoch - t0 * (std::pow(mult, n) - 1.0) / (mult - 1.0);
    t_i = t0 * std::pow(mult, n);
  }
  return detail::cosine_anneal(cfg.init_lr, cfg.eta_min, t_cur / t_i);
}

}  // namespace covnet
