#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "covnet/numerics/tensor.hpp"

namespace covnet {

template <typename S>
struct Param {
  Matrix<S> value;
  Matrix<S> grad;

  Param() = default;
  Param(Index rows, Index cols) : value(Matrix<S>::Zero(rows, cols)), grad(Matrix<S>::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename S, typename Rng>
void xavier_uniform(Param<S>& p, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(p.value.rows() + p.value.cols()));
  std::uniform_real_distribution<double> u(-a, a);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<S>(u(rng));
}

template <typename S, typename Rng>
void normal_init(Param<S>& p, double sigma, Rng& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<S>(n(rng));
}

/// y = x W + b, with W stored [in, out].
template <typename S>
struct Linear {
  Param<S> weight;
  Param<S> bias;

  Linear() = default;
  Linear(Index in, Index out) : weight(in, out), bias(1, out) {}

  template <typename Rng>
  void init(Rng& rng) {
    xavier_uniform(weight, rng);
    bias.value.setZero();
  }

  Index in_dim() const { return weight.value.rows(); }
  Index out_dim() const { return weight.value.cols(); }

  Matrix<S> forward(const Matrix<S>& x) const {
    Matrix<S> y(x.rows(), out_dim());
    y.noalias() = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
  }

  Matrix<S> backward(const Matrix<S>& x, const Matrix<S>& dy) {
    weight.grad.noalias() += x.transpose() * dy;
    bias.grad += dy.colwise().sum();
    Matrix<S> dx(dy.rows(), in_dim());
    dx.noalias() = dy * weight.value.transpose();
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

/// Row-wise layer normalization with learned gain and shift.
template <typename S>
struct LayerNorm {
  Param<S> gain;
  Param<S> shift;
  S eps = S(1e-5);

  struct Cache {
    Matrix<S> normalized;
    Vector<S> inv_std;
  };

  LayerNorm() = default;
  explicit LayerNorm(Index dim) : gain(1, dim), shift(1, dim) { gain.value.setOnes(); }

  Matrix<S> forward(const Matrix<S>& x, Cache& cache) const {
    const Index n = x.cols();
    cache.normalized.resize(x.rows(), n);
    cache.inv_std.resize(x.rows());
    for (Index r = 0; r < x.rows(); ++r) {
      const S mean = x.row(r).mean();
      auto centered = x.row(r).array() - mean;
      const S var = centered.square().sum() / static_cast<S>(n);
      const S inv = S(1) / std::sqrt(var + eps);
      cache.inv_std(r) = inv;
      cache.normalized.row(r) = centered * inv;
    }
    Matrix<S> y = cache.normalized.array().rowwise() * gain.value.row(0).array();
    y.rowwise() += shift.value.row(0);
    return y;
  }

  Matrix<S> backward(const Cache& cache, const Matrix<S>& dy) {
    gain.grad += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
    shift.grad += dy.colwise().sum();
    const S n = static_cast<S>(dy.cols());
    Matrix<S> dxhat = dy.array().rowwise() * gain.value.row(0).array();
    Matrix<S> dx(dy.rows(), dy.cols());
    for (Index r = 0; r < dy.rows(); ++r) {
      const S mean_d = dxhat.row(r).mean();
      const S mean_dx = (dxhat.row(r).array() * cache.normalized.row(r).array()).sum() / n;
      dx.row(r) = cache.inv_std(r) *
                  (dxhat.row(r).array() - mean_d - cache.normalized.row(r).array() * mean_dx);
    }
    return dx;
  }

  template <typename F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gain", gain);
    f(prefix + ".shift", shift);
  }
};

// tanh approximation of GELU.
template <typename S>
Matrix<S> gelu(const Matrix<S>& x) {
  const S c = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
  const auto v = x.array();
  return (S(0.5) * v * (S(1) + (c * (v + S(0.044715) * v.cube())).tanh())).matrix();
}

template <typename S>
Matrix<S> gelu_backward(const Matrix<S>& x, const Matrix<S>& dy) {
  const S c = static_cast<S>(0.7978845608028654);
  const auto v = x.array();
  const Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> t =
      (c * (v + S(0.044715) * v.cube())).tanh();
  const auto du = c * (S(1) + S(3 * 0.044715) * v.square());
  return ((S(0.5) * (S(1) + t) + S(0.5) * v * (S(1) - t.square()) * du) * dy.array()).matrix();
}

/// Inverted dropout. An empty mask means identity (evaluation mode or rate 0).
template <typename S>
struct DropoutMask {
  Matrix<S> scale;

  bool active() const { return scale.size() > 0; }

  Matrix<S> apply(const Matrix<S>& x) const {
    if (!active()) return x;
    return (x.array() * scale.array()).matrix();
  }
};

template <typename S, typename Rng>
DropoutMask<S> make_dropout(Index rows, Index cols, double rate, Rng* rng) {
  DropoutMask<S> m;
  if (rng == nullptr || rate <= 0.0) return m;
  static_assert(Rng::max() == UINT64_MAX && Rng::min() == 0, "dropout expects a full 64-bit engine");
  // Two 32-bit keep decisions per 64-bit draw.
  const auto threshold = static_cast<std::uint64_t>((1.0 - rate) * 4294967296.0);
  const S kept = static_cast<S>(1.0 / (1.0 - rate));
  m.scale.resize(rows, cols);
  S* out = m.scale.data();
  const Index n = m.scale.size();
  for (Index i = 0; i < n; i += 2) {
    const std::uint64_t bits = (*rng)();
    out[i] = (bits & 0xFFFFFFFFull) < threshold ? kept : S(0);
    if (i + 1 < n) out[i + 1] = (bits >> 32) < threshold ? kept : S(0);
  }
  return m;
}

}  // namespace covnet
