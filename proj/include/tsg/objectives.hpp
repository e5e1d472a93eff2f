#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsg/dense.hpp"
#include "tsg/entropy.hpp"
#include "tsg/graph_data.hpp"
#include "tsg/value_graph.hpp"

namespace tsg {

/// The recommended coefficient when no per-dataset tuning is done.
inline constexpr double kUniversalLambda = 0.25;

enum class UnlabeledSet {
  all_non_train,   // val u test u extra
  test_and_extra,  // validation nodes excluded
};

std::string to_string(UnlabeledSet s);
UnlabeledSet parse_unlabeled_set(const std::string& s);

/// Coefficients of the sharpening objective
///   mean CE over V_L + lambda_unlabeled * mean R(p) over U
///                    + lambda_labeled   * mean R(p) over V_L.
/// The symmetric form uses lambda_labeled = -lambda_unlabeled.
struct TSConfig {
  double lambda_unlabeled = 0.0;
  double lambda_labeled = 0.0;
  EntropyOrder order = EntropyOrder::tsallis2;
  UnlabeledSet unlabeled_set = UnlabeledSet::all_non_train;

  static TSConfig symmetric(double lambda, EntropyOrder order = EntropyOrder::tsallis2) {
    return TSConfig{lambda, -lambda, order, UnlabeledSet::all_non_train};
  }
  static TSConfig supervised() { return TSConfig{}; }

  bool sharpening_enabled() const { return lambda_unlabeled != 0.0 || lambda_labeled != 0.0; }
  /// Short name for the ablation axis this configuration sits on.
  std::string variant_label() const;
};

struct LossReport {
  double total = 0.0;
  double supervised = 0.0;          // mean CE over V_L
  double unlabeled_entropy = 0.0;   // mean R over U; 0 when that branch is skipped
  double labeled_entropy = 0.0;     // mean R over V_L; 0 when that branch is skipped
  double lambda_unlabeled = 0.0;
  double lambda_labeled = 0.0;
};

struct CrossEntropy {
  double sum = 0.0;
  double mean = 0.0;
};

/// -sum over mask of log max(p[v, y_v], 1e-12), reported as sum and mean.
CrossEntropy supervised_ce(const Matrix& probs, std::span<const int> labels, std::span<const Index> mask);

/// Entropy of one simplex row (rejected when off the simplex by > 1e-9).
double entropy_R(std::span<const double> p, EntropyOrder order);

/// (H(p), sum_i (p_i - y_i) log p_i) for an interior p and a one-hot y.
std::pair<double, double> ce_decomposition(std::span<const double> p, int label);

/// Unlabeled set U for the given selector.
std::vector<Index> sharpening_nodes(const GraphBundle& bundle, UnlabeledSet set);

/// Eager evaluation of the objective on a probability matrix.
LossReport ts_objective(const Matrix& probs, const GraphBundle& bundle, const TSConfig& cfg);

/// Loss nodes appended to a computation record.
struct LossNodes {
  NodeId total;
  NodeId supervised;
  std::optional<NodeId> unlabeled_entropy;
  std::optional<NodeId> labeled_entropy;

  LossReport report(const ValueGraph& g, const TSConfig& cfg) const;
};

/// Appends the objective on top of a probability node. Entropy branches
/// with a zero coefficient are not built; with both coefficients zero the
/// total is the supervised node itself.
LossNodes build_ts_loss(ValueGraph& g, NodeId probs, const GraphBundle& bundle, const TSConfig& cfg);

/// Supervised-only objective: mean CE over V_L.
LossNodes build_supervised_loss(ValueGraph& g, NodeId probs, const GraphBundle& bundle);

}  // namespace tsg
