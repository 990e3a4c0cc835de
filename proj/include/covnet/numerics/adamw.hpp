#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "covnet/error.hpp"
#include "covnet/numerics/layers.hpp"

namespace covnet {

struct AdamWConfig {
  double lr = 2e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(lr >= 0.0)) throw ConfigError("AdamW: lr must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("AdamW: beta1 must be in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("AdamW: beta2 must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("AdamW: eps must be positive");
  }
};

template <typename S>
struct NamedParam {
  std::string name;
  Param<S>* param;
};

template <typename S>
struct AdamWState {
  std::vector<Matrix<S>> first_moment;
  std::vector<Matrix<S>> second_moment;
};

/// One AdamW update (decoupled weight decay, bias-corrected moments) at 1-based step `step`.
/// Every gradient is checked before any parameter is touched.
template <typename S>
void adamw_step(const std::vector<NamedParam<S>>& params, AdamWState<S>& state, const AdamWConfig& cfg,
                long step) {
  cfg.validate();
  if (step < 1) throw ConfigError("AdamW: step must be >= 1");
  for (const auto& np : params) {
    if (!np.param->grad.allFinite())
      throw NumericError("AdamW: non-finite gradient in parameter '" + np.name + "'");
  }
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (const auto& np : params) {
      state.first_moment.push_back(Matrix<S>::Zero(np.param->value.rows(), np.param->value.cols()));
      state.second_moment.push_back(Matrix<S>::Zero(np.param->value.rows(), np.param->value.cols()));
    }
  }
  const S lr = static_cast<S>(cfg.lr);
  const S b1 = static_cast<S>(cfg.beta1);
  const S b2 = static_cast<S>(cfg.beta2);
  const S corr1 = static_cast<S>(1.0 - std::pow(cfg.beta1, static_cast<double>(step)));
  const S corr2 = static_cast<S>(1.0 - std::pow(cfg.beta2, static_cast<double>(step)));
  const S decay = static_cast<S>(1.0 - cfg.lr * cfg.weight_decay);
  const S eps = static_cast<S>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i].param;
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = b1 * m + (S(1) - b1) * p.grad;
    v = b2 * v + (S(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value *= decay;
    p.value.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
  }
}

}  // namespace covnet
