#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "covnet/numerics/tensor.hpp"

namespace covnet {

struct GradCheckResult {
  double max_rel_error = 0.0;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// f(x, grad) returns the value and, when grad != nullptr, writes the reverse-mode gradient.
using ScalarFunction = std::function<double(const Vector<double>&, Vector<double>*)>;

/// Compares the reverse-mode gradient of f against central differences, coordinate by coordinate.
/// Relative error is |a - n| / max(|a|, |n|, abs_floor); abs_floor keeps near-zero components
/// from dominating on round-off. `coords` restricts the check to a subset (empty = all).
inline GradCheckResult grad_check(const ScalarFunction& f, const Vector<double>& point, double epsilon = 1e-5,
                                  const std::vector<Index>& coords = {}, double abs_floor = 1e-6) {
  Vector<double> analytic(point.size());
  f(point, &analytic);
  GradCheckResult result;
  Vector<double> x = point;
  auto check = [&](Index i) {
    const double orig = x(i);
    x(i) = orig + epsilon;
    const double up = f(x, nullptr);
    x(i) = orig - epsilon;
    const double down = f(x, nullptr);
    x(i) = orig;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), abs_floor});
    const double rel = std::abs(analytic(i) - numeric) / denom;
    if (rel > result.max_rel_error || result.worst_index < 0) {
      result.max_rel_error = std::max(rel, result.max_rel_error);
      if (rel >= result.max_rel_error) {
        result.worst_index = i;
        result.analytic = analytic(i);
        result.numeric = numeric;
      }
    }
  };
  if (coords.empty()) {
    for (Index i = 0; i < point.size(); ++i) check(i);
  } else {
    for (Index i : coords) check(i);
  }
  return result;
}

}  // namespace covnet
