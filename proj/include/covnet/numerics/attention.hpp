#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "covnet/error.hpp"
#include "covnet/numerics/softmax.hpp"
#include "covnet/numerics/tensor.hpp"

namespace covnet {

// true = attend, false = blocked. Shape [queries, keys].
using AttentionMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

template <typename S>
void attention_into(const Eigen::Ref<const Matrix<S>>& q, const Eigen::Ref<const Matrix<S>>& k,
                    const Eigen::Ref<const Matrix<S>>& v, const AttentionMask* mask,
                    Eigen::Ref<Matrix<S>> out, Matrix<S>& probs) {
  const S scale = S(1) / std::sqrt(static_cast<S>(q.cols()));
  probs.noalias() = (q * k.transpose()) * scale;
  if (mask) {
    for (Index i = 0; i < probs.rows(); ++i) {
      bool any = false;
      for (Index j = 0; j < probs.cols(); ++j) {
        if (!(*mask)(i, j))
          probs(i, j) += static_cast<S>(kMaskSentinel);
        else
          any = true;
      }
      if (!any) throw NumericError("attention: query row " + std::to_string(i) + " has every key blocked");
    }
  }
  for (Index i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i);
    row = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  out.noalias() = probs * v;
}

// Accumulates into dq, dk, dv.
template <typename S>
void attention_backward_into(const Eigen::Ref<const Matrix<S>>& q, const Eigen::Ref<const Matrix<S>>& k,
                             const Eigen::Ref<const Matrix<S>>& v, const Matrix<S>& probs,
                             const Eigen::Ref<const Matrix<S>>& dout, Eigen::Ref<Matrix<S>> dq,
                             Eigen::Ref<Matrix<S>> dk, Eigen::Ref<Matrix<S>> dv) {
  const S scale = S(1) / std::sqrt(static_cast<S>(q.cols()));
  Matrix<S> dprobs = dout * v.transpose();
  Matrix<S> dscores = softmax_rows_backward<S>(probs, dprobs) * scale;
  dq.noalias() += dscores * k;
  dk.noalias() += dscores.transpose() * q;
  dv.noalias() += probs.transpose() * dout;
}

}  // namespace detail

/// Single-head scaled dot-product attention: out_i = sum_j softmax_j(q_i . k_j / sqrt(d_k)) v_j.
/// Blocked mask entries get the additive sentinel and therefore zero weight.
template <typename DQ, typename DK, typename DV>
Matrix<typename DQ::Scalar> scaled_dot_attention(const Eigen::MatrixBase<DQ>& q, const Eigen::MatrixBase<DK>& k,
                                                 const Eigen::MatrixBase<DV>& v,
                                                 const AttentionMask* mask = nullptr,
                                                 Matrix<typename DQ::Scalar>* probs_out = nullptr) {
  using S = typename DQ::Scalar;
  if (q.cols() != k.cols()) throw ConfigError("attention: query/key dimension mismatch");
  if (k.rows() != v.rows()) throw ConfigError("attention: key/value length mismatch");
  if (k.rows() == 0) throw ConfigError("attention: empty key set");
  if (mask && (mask->rows() != q.rows() || mask->cols() != k.rows()))
    throw ConfigError("attention: mask shape mismatch");
  const Matrix<S> qm = q, km = k, vm = v;
  Matrix<S> out(q.rows(), v.cols());
  Matrix<S> probs;
  detail::attention_into<S>(qm, km, vm, mask, out, probs);
  if (probs_out) *probs_out = std::move(probs);
  return out;
}

}  // namespace covnet
