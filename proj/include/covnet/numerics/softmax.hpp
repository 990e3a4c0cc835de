#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "covnet/error.hpp"
#include "covnet/numerics/tensor.hpp"

namespace covnet {

// axis = 1 normalizes each row (across columns); axis = 0 normalizes each column.
template <typename Derived>
Matrix<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits, int axis = 1) {
  using S = typename Derived::Scalar;
  if (axis != 0 && axis != 1) throw ConfigError("softmax axis must be 0 or 1");
  if (!logits.allFinite()) throw NumericError("softmax: non-finite logit");
  Matrix<S> out(logits.rows(), logits.cols());
  if (axis == 1) {
    for (Index r = 0; r < logits.rows(); ++r) {
      const S m = logits.row(r).maxCoeff();
      const S lse = m + std::log((logits.row(r).array() - m).exp().sum());
      out.row(r) = logits.row(r).array() - lse;
    }
  } else {
    for (Index c = 0; c < logits.cols(); ++c) {
      const S m = logits.col(c).maxCoeff();
      const S lse = m + std::log((logits.col(c).array() - m).exp().sum());
      out.col(c) = logits.col(c).array() - lse;
    }
  }
  return out;
}

template <typename Derived>
Matrix<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits, int axis = 1) {
  using S = typename Derived::Scalar;
  if (axis != 0 && axis != 1) throw ConfigError("softmax axis must be 0 or 1");
  if (!logits.allFinite()) throw NumericError("softmax: non-finite logit");
  Matrix<S> out(logits.rows(), logits.cols());
  if (axis == 1) {
    for (Index r = 0; r < logits.rows(); ++r) {
      auto e = (logits.row(r).array() - logits.row(r).maxCoeff()).exp();
      out.row(r) = e / e.sum();
    }
  } else {
    for (Index c = 0; c < logits.cols(); ++c) {
      auto e = (logits.col(c).array() - logits.col(c).maxCoeff()).exp();
      out.col(c) = e / e.sum();
    }
  }
  return out;
}

// Backward of row-wise softmax: dL/dz given p = softmax(z) and dL/dp.
template <typename S>
Matrix<S> softmax_rows_backward(const Matrix<S>& probs, const Matrix<S>& dprobs) {
  Vector<S> dot = (probs.array() * dprobs.array()).rowwise().sum();
  return (probs.array() * (dprobs.colwise() - dot).array()).matrix();
}

}  // namespace covnet
