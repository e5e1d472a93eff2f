#pragma once

#include <algorithm>
#include <cmath>

#include "tsg/dense.hpp"

namespace tsg {

/// Floor applied to probabilities before taking a logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

/// Order q of the uncertainty measure: 1 is Shannon, 2 is Tsallis/Gini.
enum class EntropyOrder { shannon = 1, tsallis2 = 2 };

template <typename Scalar>
Scalar clamped_log(Scalar p) {
  return std::log(std::max(p, Scalar(kProbabilityFloor)));
}

/// Shannon entropy with 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar shannon_entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar h = 0;
  for (Index i = 0; i < p.size(); ++i) {
    const Scalar pi = p(i);
    if (pi > Scalar(0)) h -= pi * clamped_log(pi);
  }
  return h;
}

/// 1 - ||p||^2.
template <typename Derived>
typename Derived::Scalar tsallis2_entropy(const Eigen::MatrixBase<Derived>& p) {
  using Scalar = typename Derived::Scalar;
  Scalar sq = 0;
  for (Index i = 0; i < p.size(); ++i) sq += p(i) * p(i);
  return Scalar(1) - sq;
}

template <typename Derived>
typename Derived::Scalar entropy_value(const Eigen::MatrixBase<Derived>& p, EntropyOrder order) {
  return order == EntropyOrder::shannon ? shannon_entropy(p) : tsallis2_entropy(p);
}

/// d entropy / d p_i for a single coordinate.
template <typename Scalar>
Scalar entropy_partial(Scalar p, EntropyOrder order) {
  if (order == EntropyOrder::tsallis2) return Scalar(-2) * p;
  // Below the floor the log is frozen, leaving only the linear factor.
  if (p < Scalar(kProbabilityFloor)) return -std::log(Scalar(kProbabilityFloor));
  return -(std::log(p) + Scalar(1));
}

}  // namespace tsg
