#include "tsg/objectives.hpp"

#include <cmath>

namespace tsg {

namespace {

constexpr double kSimplexTolerance = 1e-9;

void require_simplex(std::span<const double> p, const std::string& who) {
  double total = 0.0;
  for (double x : p) {
    if (!(x >= -kSimplexTolerance)) throw InvalidArgument(who + ": negative or non-finite probability");
    total += x;
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw InvalidArgument(who + ": probabilities sum to " + std::to_string(total) + ", not 1");
  }
}

}  // namespace

std::string to_string(UnlabeledSet s) {
  return s == UnlabeledSet::all_non_train ? "all" : "test-only";
}

UnlabeledSet parse_unlabeled_set(const std::string& s) {
  if (s == "all") return UnlabeledSet::all_non_train;
  if (s == "test-only") return UnlabeledSet::test_and_extra;
  throw InvalidArgument("unknown unlabeled set '" + s + "' (expected all or test-only)");
}

std::string TSConfig::variant_label() const {
  if (!sharpening_enabled()) return "supervised";
  std::string label;
  auto append = [&](const char* part) { label += label.empty() ? part : std::string("+") + part; };
  if (lambda_labeled == 0.0) {
    append("labeled-off");
  } else if (lambda_labeled != -lambda_unlabeled) {
    append("offset");
  }
  if (order == EntropyOrder::shannon) append("shannon");
  if (unlabeled_set == UnlabeledSet::test_and_extra) append("test-only");
  return label.empty() ? "symmetric" : label;
}

CrossEntropy supervised_ce(const Matrix& probs, std::span<const int> labels, std::span<const Index> mask) {
  if (labels.size() != mask.size()) throw InvalidArgument("supervised_ce: labels/mask length mismatch");
  CrossEntropy ce;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const Index v = mask[k];
    if (v < 0 || v >= probs.rows()) throw InvalidArgument("supervised_ce: node " + std::to_string(v) + " out of range");
    if (labels[k] < 0 || labels[k] >= probs.cols()) {
      throw InvalidArgument("supervised_ce: node " + std::to_string(v) + " has no valid label");
    }
    ce.sum -= clamped_log(probs(v, labels[k]));
  }
  ce.mean = mask.empty() ? 0.0 : ce.sum / static_cast<double>(mask.size());
  return ce;
}

double entropy_R(std::span<const double> p, EntropyOrder order) {
  require_simplex(p, "entropy");
  const Eigen::Map<const RowVector> row(p.data(), static_cast<Index>(p.size()));
  return entropy_value(row, order);
}

std::pair<double, double> ce_decomposition(std::span<const double> p, int label) {
  require_simplex(p, "ce_decomposition");
  if (label < 0 || static_cast<std::size_t>(label) >= p.size()) {
    throw InvalidArgument("ce_decomposition: label " + std::to_string(label) + " out of range");
  }
  double entropy = 0.0;
  double residual = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < kProbabilityFloor) {
      throw InvalidArgument("ce_decomposition: p[" + std::to_string(i) + "] is on the simplex boundary");
    }
    const double log_p = std::log(p[i]);
    const double y = static_cast<int>(i) == label ? 1.0 : 0.0;
    entropy -= p[i] * log_p;
    residual += (p[i] - y) * log_p;
  }
  return {entropy, residual};
}

std::vector<Index> sharpening_nodes(const GraphBundle& bundle, UnlabeledSet set) {
  return set == UnlabeledSet::all_non_train ? bundle.unlabeled_nodes() : bundle.test_and_extra_nodes();
}

LossReport LossNodes::report(const ValueGraph& g, const TSConfig& cfg) const {
  LossReport r;
  r.total = g.scalar(total);
  r.supervised = g.scalar(supervised);
  if (unlabeled_entropy) r.unlabeled_entropy = g.scalar(*unlabeled_entropy);
  if (labeled_entropy) r.labeled_entropy = g.scalar(*labeled_entropy);
  r.lambda_unlabeled = cfg.lambda_unlabeled;
  r.lambda_labeled = cfg.lambda_labeled;
  return r;
}

LossNodes build_supervised_loss(ValueGraph& g, NodeId probs, const GraphBundle& bundle) {
  const auto& labeled = bundle.labeled_nodes();
  if (labeled.empty()) throw InvalidArgument("objective: labeled set V_L is empty");
  const auto labels = bundle.labels_of(labeled);
  const NodeId ce = g.mean_nll(probs, labeled, labels);
  return LossNodes{ce, ce, std::nullopt, std::nullopt};
}

LossNodes build_ts_loss(ValueGraph& g, NodeId probs, const GraphBundle& bundle, const TSConfig& cfg) {
  LossNodes nodes = build_supervised_loss(g, probs, bundle);
  if (!cfg.sharpening_enabled()) return nodes;

  std::vector<std::pair<double, NodeId>> terms{{1.0, nodes.supervised}};
  if (cfg.lambda_unlabeled != 0.0) {
    const auto unlabeled = sharpening_nodes(bundle, cfg.unlabeled_set);
    if (unlabeled.empty()) throw InvalidArgument("objective: unlabeled set is empty but lambda_unlabeled != 0");
    nodes.unlabeled_entropy = g.mean_entropy(probs, unlabeled, cfg.order);
    terms.emplace_back(cfg.lambda_unlabeled, *nodes.unlabeled_entropy);
  }
  if (cfg.lambda_labeled != 0.0) {
    nodes.labeled_entropy = g.mean_entropy(probs, bundle.labeled_nodes(), cfg.order);
    terms.emplace_back(cfg.lambda_labeled, *nodes.labeled_entropy);
  }
  nodes.total = g.weighted_sum(terms);
  return nodes;
}

LossReport ts_objective(const Matrix& probs, const GraphBundle& bundle, const TSConfig& cfg) {
  if (probs.rows() != bundle.num_nodes) {
    throw InvalidArgument("ts_objective: " + std::to_string(probs.rows()) + " probability rows for " +
                          std::to_string(bundle.num_nodes) + " nodes");
  }
  for (Index r = 0; r < probs.rows(); ++r) {
    require_simplex(std::span<const double>(probs.row(r).data(), static_cast<std::size_t>(probs.cols())),
                    "ts_objective row " + std::to_string(r));
  }
  ValueGraph g;
  const NodeId p = g.constant_ref(probs);
  return build_ts_loss(g, p, bundle, cfg).report(g, cfg);
}

}  // namespace tsg
