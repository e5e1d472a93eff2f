#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tsg/error.hpp"
#include "tsg/rng.hpp"

namespace tsg {

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using DenseRow = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = DenseMatrix<double>;
using RowVector = DenseRow<double>;
using Index = Eigen::Index;

enum class Mode { train, eval };

inline constexpr double kNormEpsilon = 1e-5;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Softmax of each row, computed after subtracting the row maximum.
/// Throws InvalidArgument naming the first row holding a non-finite value.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> row_softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  DenseMatrix<Scalar> out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    if (!logits.row(r).allFinite()) {
      throw InvalidArgument("row_softmax: non-finite logit in row " + std::to_string(r));
    }
    const Scalar peak = logits.row(r).maxCoeff();
    Scalar total = 0;
    for (Index c = 0; c < logits.cols(); ++c) {
      out(r, c) = std::exp(logits(r, c) - peak);
      total += out(r, c);
    }
    out.row(r) /= total;
  }
  return out;
}

template <typename Derived>
DenseMatrix<typename Derived::Scalar> relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// Inverted-dropout multiplier: each entry is 0 with probability `rate`,
/// otherwise 1/(1-rate). Entry (r, c) depends only on (seed, r, c), so the
/// mask is a pure function of its arguments.
template <typename Scalar = double>
DenseMatrix<Scalar> dropout_mask(Index rows, Index cols, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw InvalidArgument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  const Scalar keep_scale = Scalar(1) / Scalar(1.0 - rate);
  DenseMatrix<Scalar> mask(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const auto bits = mix64(seed ^ mix64(static_cast<std::uint64_t>(r * cols + c)));
      mask(r, c) = bits_to_unit(bits) < rate ? Scalar(0) : keep_scale;
    }
  }
  return mask;
}

template <typename Derived>
DenseMatrix<typename Derived::Scalar> dropout(const Eigen::MatrixBase<Derived>& x, double rate,
                                              std::uint64_t seed, Mode mode) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw InvalidArgument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return x;
  return x.cwiseProduct(dropout_mask<typename Derived::Scalar>(x.rows(), x.cols(), rate, seed));
}

/// Mean and 1/sqrt(var + eps) along one axis; population variance.
template <typename Scalar>
struct NormMoments {
  DenseRow<Scalar> mean;
  DenseRow<Scalar> inv_std;
};

template <typename Derived>
NormMoments<typename Derived::Scalar> column_moments(const Eigen::MatrixBase<Derived>& x,
                                                     double eps = kNormEpsilon) {
  using Scalar = typename Derived::Scalar;
  NormMoments<Scalar> m;
  m.mean = x.colwise().mean();
  m.inv_std.resize(x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    const Scalar var = (x.col(c).array() - m.mean(c)).square().mean();
    m.inv_std(c) = Scalar(1) / std::sqrt(var + Scalar(eps));
  }
  return m;
}

/// Per-row standardization followed by `gamma * xhat + beta`.
template <typename Derived, typename RowDerived>
DenseMatrix<typename Derived::Scalar> layer_norm(const Eigen::MatrixBase<Derived>& x,
                                                 const Eigen::MatrixBase<RowDerived>& gamma,
                                                 const Eigen::MatrixBase<RowDerived>& beta,
                                                 double eps = kNormEpsilon) {
  using Scalar = typename Derived::Scalar;
  DenseMatrix<Scalar> out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mean).square().mean();
    const Scalar inv = Scalar(1) / std::sqrt(var + Scalar(eps));
    out.row(r) = ((x.row(r).array() - mean) * inv * gamma.array() + beta.array()).matrix();
  }
  return out;
}

/// Per-column standardization with the supplied moments, then affine.
template <typename Derived, typename RowDerived>
DenseMatrix<typename Derived::Scalar> batch_norm(const Eigen::MatrixBase<Derived>& x,
                                                 const NormMoments<typename Derived::Scalar>& m,
                                                 const Eigen::MatrixBase<RowDerived>& gamma,
                                                 const Eigen::MatrixBase<RowDerived>& beta) {
  DenseMatrix<typename Derived::Scalar> out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    out.row(r) = ((x.row(r) - m.mean).array() * m.inv_std.array() * gamma.array() +
                  beta.array())
                     .matrix();
  }
  return out;
}

/// Row-wise argmax; ties resolve to the lowest class index.
template <typename Derived>
std::vector<int> argmax_rows(const Eigen::MatrixBase<Derived>& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()), 0);
  for (Index r = 0; r < m.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < m.cols(); ++c) {
      if (m(r, c) > m(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

}  // namespace tsg
