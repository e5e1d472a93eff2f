#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tsg/dense.hpp"
#include "tsg/entropy.hpp"
#include "tsg/sparse.hpp"

namespace tsg {

struct NodeId {
  std::uint32_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

/// Column statistics kept by a batch-norm layer between passes. Train-mode
/// passes overwrite them; eval-mode passes read them (or compute fresh ones
/// when no train pass has happened yet).
struct BatchStats {
  std::optional<NormMoments<double>> moments;
};

/// Reverse-mode computation record. Nodes are appended in evaluation order,
/// which is a topological order; backward() walks them once in reverse.
///
/// Parameter and reference-input leaves point at caller-owned matrices,
/// which must outlive the graph. Sparse operators are likewise borrowed.
class ValueGraph {
 public:
  enum class Kind : std::uint8_t {
    constant,
    parameter,
    matmul,
    add,
    add_row,
    spmm,
    relu,
    dropout,
    layer_norm,
    batch_norm,
    softmax,
    mean_nll,
    mean_entropy,
    weighted_sum,
  };

  NodeId constant(Matrix value);
  NodeId constant_ref(const Matrix& value);
  NodeId parameter(const Matrix& value);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  /// a + 1 * row, broadcasting a 1 x cols row over every row of a.
  NodeId add_row(NodeId a, NodeId row);
  NodeId spmm(const SparseOp& op, NodeId a);
  NodeId relu(NodeId a);
  /// Identity (returns `a`) in eval mode or at rate 0.
  NodeId dropout(NodeId a, double rate, std::uint64_t seed, Mode mode);
  NodeId layer_norm(NodeId a, NodeId gamma, NodeId beta, double eps = kNormEpsilon);
  NodeId batch_norm(NodeId a, NodeId gamma, NodeId beta, BatchStats& stats, Mode mode,
                    double eps = kNormEpsilon);
  NodeId row_softmax(NodeId logits);

  /// Mean over `rows` of -log max(p[v, labels[v]], floor). 1x1.
  NodeId mean_nll(NodeId probs, std::span<const Index> rows, std::span<const int> labels);
  /// Mean over `rows` of the chosen entropy of p[v]. 1x1.
  NodeId mean_entropy(NodeId probs, std::span<const Index> rows, EntropyOrder order);
  /// Sum of coefficient * scalar node, accumulated in the given order. 1x1.
  NodeId weighted_sum(std::span<const std::pair<double, NodeId>> terms);

  const Matrix& value(NodeId id) const;
  double scalar(NodeId id) const;
  /// Gradient of the last backward() loss with respect to a node. Empty
  /// for nodes that do not depend on any parameter.
  const Matrix& grad(NodeId id) const;
  Kind kind(NodeId id) const { return nodes_[id.index].kind; }
  std::size_t size() const { return nodes_.size(); }

  /// Fills gradient slots with d loss / d value. `loss` must be 1x1.
  void backward(NodeId loss);

 private:
  struct Node {
    Kind kind = Kind::constant;
    std::uint32_t in[3] = {0, 0, 0};
    bool needs_grad = false;
    const Matrix* borrowed = nullptr;
    Matrix value;
    Matrix grad;
    // Per-kind saved state: dropout multiplier, normalized activations,
    // inverse standard deviations.
    Matrix saved;
    Matrix aux;
    const SparseOp* op = nullptr;
    std::vector<Index> rows;
    std::vector<int> labels;
    std::vector<double> coefficients;
    std::vector<std::uint32_t> operands;
    EntropyOrder order = EntropyOrder::tsallis2;
    bool frozen_stats = false;
  };

  NodeId push(Node node);
  const Matrix& val(std::uint32_t i) const;
  Matrix& grad_slot(std::uint32_t i);
  void check_rows(const char* who, const Matrix& probs, std::span<const Index> rows) const;

  std::vector<Node> nodes_;
};

}  // namespace tsg
