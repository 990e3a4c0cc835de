#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "covnet/error.hpp"

namespace covnet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

// Additive logit value for masked positions.
inline constexpr double kMaskSentinel = -1e9;

/// Dense row-major n-dimensional array. Used for feature cubes [agents, frames, channels];
/// the layer math works on Eigen matrices viewed over the same storage.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<Index> shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(element_count(shape_), fill) {}

  const std::vector<Index>& shape() const { return shape_; }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::vector<Scalar>& data() { return data_; }
  const std::vector<Scalar>& data() const { return data_; }

  Scalar& operator()(Index i, Index j, Index k) { return data_[offset3(i, j, k)]; }
  Scalar operator()(Index i, Index j, Index k) const { return data_[offset3(i, j, k)]; }

  bool all_finite() const {
    for (Scalar v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  bool operator==(const Tensor& other) const = default;

  static std::size_t element_count(const std::vector<Index>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t acc, Index d) {
                             if (d < 0) throw ConfigError("negative tensor dimension");
                             return acc * static_cast<std::size_t>(d);
                           });
  }

 private:
  std::size_t offset3(Index i, Index j, Index k) const {
    return static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k);
  }

  std::vector<Index> shape_;
  std::vector<Scalar> data_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

}  // namespace covnet
