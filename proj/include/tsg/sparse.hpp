#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "tsg/dense.hpp"

namespace tsg {

template <typename Scalar>
struct Triplet {
  Index row;
  Index col;
  Scalar value;
};

/// Compressed sparse rows. Column indices are strictly increasing within
/// each row, so products accumulate in ascending column order.
template <typename Scalar>
struct CsrMatrix {
  Index rows = 0;
  Index cols = 0;
  std::vector<Index> offsets{0};
  std::vector<Index> indices;
  std::vector<Scalar> values;

  Index nnz() const { return static_cast<Index>(indices.size()); }

  static CsrMatrix identity(Index n) {
    CsrMatrix m;
    m.rows = m.cols = n;
    m.offsets.resize(static_cast<std::size_t>(n) + 1);
    for (Index i = 0; i <= n; ++i) m.offsets[static_cast<std::size_t>(i)] = i;
    m.indices.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) m.indices[static_cast<std::size_t>(i)] = i;
    m.values.assign(static_cast<std::size_t>(n), Scalar(1));
    return m;
  }

  /// Rejects out-of-range and duplicate coordinates.
  static CsrMatrix from_triplets(Index rows, Index cols, std::vector<Triplet<Scalar>> entries) {
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.offsets.assign(static_cast<std::size_t>(rows) + 1, 0);
    m.indices.reserve(entries.size());
    m.values.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
        throw InvalidArgument("csr: entry (" + std::to_string(e.row) + ", " +
                              std::to_string(e.col) + ") outside " + std::to_string(rows) +
                              "x" + std::to_string(cols));
      }
      if (k > 0 && entries[k - 1].row == e.row && entries[k - 1].col == e.col) {
        throw InvalidArgument("csr: duplicate entry (" + std::to_string(e.row) + ", " +
                              std::to_string(e.col) + ")");
      }
      ++m.offsets[static_cast<std::size_t>(e.row) + 1];
      m.indices.push_back(e.col);
      m.values.push_back(e.value);
    }
    for (std::size_t r = 0; r < static_cast<std::size_t>(rows); ++r) {
      m.offsets[r + 1] += m.offsets[r];
    }
    return m;
  }

  void validate() const {
    if (offsets.size() != static_cast<std::size_t>(rows) + 1 || offsets.front() != 0 ||
        offsets.back() != nnz() || values.size() != indices.size()) {
      throw InvalidArgument("csr: inconsistent offsets/indices/values lengths");
    }
    for (Index r = 0; r < rows; ++r) {
      const auto begin = offsets[static_cast<std::size_t>(r)];
      const auto end = offsets[static_cast<std::size_t>(r) + 1];
      if (end < begin) throw InvalidArgument("csr: offsets decrease at row " + std::to_string(r));
      for (Index k = begin; k < end; ++k) {
        const Index c = indices[static_cast<std::size_t>(k)];
        if (c < 0 || c >= cols) throw InvalidArgument("csr: column out of range in row " + std::to_string(r));
        if (k > begin && indices[static_cast<std::size_t>(k) - 1] >= c) {
          throw InvalidArgument("csr: columns not strictly increasing in row " + std::to_string(r));
        }
      }
    }
  }

  CsrMatrix transpose() const {
    CsrMatrix t;
    t.rows = cols;
    t.cols = rows;
    t.offsets.assign(static_cast<std::size_t>(cols) + 1, 0);
    for (auto c : indices) ++t.offsets[static_cast<std::size_t>(c) + 1];
    for (std::size_t c = 0; c < static_cast<std::size_t>(cols); ++c) t.offsets[c + 1] += t.offsets[c];
    t.indices.resize(indices.size());
    t.values.resize(values.size());
    std::vector<Index> cursor(t.offsets.begin(), t.offsets.end() - 1);
    // Rows are visited in ascending order, so each transposed row receives
    // its column indices already sorted.
    for (Index r = 0; r < rows; ++r) {
      for (Index k = offsets[static_cast<std::size_t>(r)]; k < offsets[static_cast<std::size_t>(r) + 1]; ++k) {
        const auto c = static_cast<std::size_t>(indices[static_cast<std::size_t>(k)]);
        const auto dst = static_cast<std::size_t>(cursor[c]++);
        t.indices[dst] = r;
        t.values[dst] = values[static_cast<std::size_t>(k)];
      }
    }
    return t;
  }

  DenseMatrix<Scalar> to_dense() const {
    DenseMatrix<Scalar> d = DenseMatrix<Scalar>::Zero(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index k = offsets[static_cast<std::size_t>(r)]; k < offsets[static_cast<std::size_t>(r) + 1]; ++k) {
        d(r, indices[static_cast<std::size_t>(k)]) = values[static_cast<std::size_t>(k)];
      }
    }
    return d;
  }
};

/// Sparse times dense. Each output entry sums its terms in ascending
/// column index of `a`.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> spmm(const CsrMatrix<Scalar>& a, const Eigen::MatrixBase<Derived>& b) {
  if (a.cols != b.rows()) {
    throw InvalidArgument("spmm: shape mismatch " + std::to_string(a.rows) + "x" +
                          std::to_string(a.cols) + " * " + std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()));
  }
  DenseMatrix<Scalar> out = DenseMatrix<Scalar>::Zero(a.rows, b.cols());
  for (Index r = 0; r < a.rows; ++r) {
    for (Index k = a.offsets[static_cast<std::size_t>(r)]; k < a.offsets[static_cast<std::size_t>(r) + 1]; ++k) {
      out.row(r).noalias() += a.values[static_cast<std::size_t>(k)] *
                              b.row(a.indices[static_cast<std::size_t>(k)]);
    }
  }
  return out;
}

/// A sparse linear map together with its adjoint, for reverse passes.
template <typename Scalar>
struct SparseOperator {
  CsrMatrix<Scalar> forward;
  CsrMatrix<Scalar> adjoint;

  explicit SparseOperator(CsrMatrix<Scalar> m) : forward(std::move(m)), adjoint(forward.transpose()) {}
};

using Csr = CsrMatrix<double>;
using SparseOp = SparseOperator<double>;

}  // namespace tsg
