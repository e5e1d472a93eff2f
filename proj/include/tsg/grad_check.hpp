#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tsg/dense.hpp"

namespace tsg {

/// A scalar function of several matrices. When `grads` is non-null the
/// callee also writes the analytic gradient, one matrix per argument.
using ScalarFunction = std::function<double(std::span<const Matrix> args, std::vector<Matrix>* grads)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_analytic = 0.0;   // largest |analytic| component seen
  double max_numeric = 0.0;    // largest |central difference| seen
};

/// Compares analytic gradients with central differences at `point`:
/// max over coordinates of |analytic - numeric| / max(1, |numeric|).
/// Throws InvalidArgument if any evaluation is non-finite.
GradCheckResult grad_check(const ScalarFunction& fn, std::vector<Matrix> point, double epsilon = 1e-5);

}  // namespace tsg
