#include "tsg/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tsg {

namespace {

double finite_or_throw(double v, const char* where) {
  if (!std::isfinite(v)) throw InvalidArgument(std::string("grad_check: non-finite value at ") + where);
  return v;
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& fn, std::vector<Matrix> point, double epsilon) {
  std::vector<Matrix> analytic;
  finite_or_throw(fn(point, &analytic), "base point");
  if (analytic.size() != point.size()) {
    throw InvalidArgument("grad_check: function returned " + std::to_string(analytic.size()) +
                          " gradients for " + std::to_string(point.size()) + " arguments");
  }

  GradCheckResult result;
  for (std::size_t a = 0; a < point.size(); ++a) {
    if (analytic[a].rows() != point[a].rows() || analytic[a].cols() != point[a].cols()) {
      throw InvalidArgument("grad_check: gradient shape mismatch for argument " + std::to_string(a));
    }
    for (Index k = 0; k < point[a].size(); ++k) {
      double& x = point[a].data()[k];
      const double saved = x;
      x = saved + epsilon;
      const double up = finite_or_throw(fn(point, nullptr), "x + eps");
      x = saved - epsilon;
      const double down = finite_or_throw(fn(point, nullptr), "x - eps");
      x = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double exact = analytic[a].data()[k];
      finite_or_throw(exact, "analytic gradient");
      const double rel = std::abs(exact - numeric) / std::max(1.0, std::abs(numeric));
      result.max_relative_error = std::max(result.max_relative_error, rel);
      result.max_analytic = std::max(result.max_analytic, std::abs(exact));
      result.max_numeric = std::max(result.max_numeric, std::abs(numeric));
    }
  }
  return result;
}

}  // namespace tsg
