#include "tsg/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

namespace tsg {

std::string to_string(Metric m) { return m == Metric::accuracy ? "accuracy" : "auc"; }

Metric parse_metric(const std::string& s) {
  if (s == "accuracy") return Metric::accuracy;
  if (s == "auc" || s == "roc_auc") return Metric::roc_auc;
  throw InvalidArgument("unknown metric '" + s + "' (expected accuracy or auc)");
}

double accuracy(std::span<const int> predicted, std::span<const int> labels, std::span<const Index> mask) {
  if (mask.empty()) throw InvalidArgument("accuracy: empty mask");
  std::size_t correct = 0;
  for (Index v : mask) {
    const auto i = static_cast<std::size_t>(v);
    if (i >= predicted.size() || i >= labels.size()) throw InvalidArgument("accuracy: node out of range");
    if (labels[i] < 0) throw InvalidArgument("accuracy: node " + std::to_string(v) + " is unlabeled");
    if (predicted[i] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(mask.size());
}

double roc_auc(std::span<const double> scores, std::span<const int> labels, std::span<const Index> mask) {
  std::vector<double> pos, neg;
  for (Index v : mask) {
    const auto i = static_cast<std::size_t>(v);
    if (i >= scores.size() || i >= labels.size()) throw InvalidArgument("roc_auc: node out of range");
    if (labels[i] == 1) {
      pos.push_back(scores[i]);
    } else if (labels[i] == 0) {
      neg.push_back(scores[i]);
    } else {
      throw InvalidArgument("roc_auc: node " + std::to_string(v) + " is not binary-labeled");
    }
  }
  if (pos.empty() || neg.empty()) throw InvalidArgument("roc_auc: mask holds a single class");

  // Sort negatives once; for each positive count negatives strictly below
  // and equal to it. Integer counts keep the result exact.
  std::sort(neg.begin(), neg.end());
  std::size_t wins = 0;
  std::size_t ties = 0;
  for (double s : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), s);
    const auto hi = std::upper_bound(neg.begin(), neg.end(), s);
    wins += static_cast<std::size_t>(lo - neg.begin());
    ties += static_cast<std::size_t>(hi - lo);
  }
  const double pairs = static_cast<double>(pos.size()) * static_cast<double>(neg.size());
  return (static_cast<double>(2 * wins + ties) / 2.0) / pairs;
}

double evaluate_metric(Metric metric, const Matrix& probs, std::span<const int> labels, std::span<const Index> mask) {
  if (metric == Metric::accuracy) return accuracy(argmax_rows(probs), labels, mask);
  if (probs.cols() != 2) throw InvalidArgument("roc_auc: requires exactly 2 classes");
  std::vector<double> scores(static_cast<std::size_t>(probs.rows()));
  for (Index r = 0; r < probs.rows(); ++r) scores[static_cast<std::size_t>(r)] = probs(r, 1);
  return roc_auc(scores, labels, mask);
}

double glass_delta(double acc_lambda, double acc_0, double sigma_0) {
  if (!(sigma_0 > 0.0)) {
    throw InvalidArgument("glass_delta: baseline std is " + std::to_string(sigma_0) +
                          "; report the raw difference instead");
  }
  return (acc_lambda - acc_0) / sigma_0;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  if (std::adjacent_find(values.begin(), values.end(), std::not_equal_to<>()) == values.end()) {
    // Constant input: summing would leave a rounding residue in the std.
    out.mean = values.front();
    out.std_defined = values.size() >= 2;
    return out;
  }
  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
    out.std_defined = true;
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InvalidArgument("quantile: empty input");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

QuantileSummary summarize(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  return {quantile(v, 0.5), quantile(v, 0.25), quantile(v, 0.75)};
}

SweepStats sweep_aggregate(const std::vector<SweepPoint>& cells) {
  if (cells.empty()) throw InvalidArgument("sweep_aggregate: no cells");
  SweepStats stats;
  std::set<double> lambdas;
  for (const auto& c : cells) {
    lambdas.insert(c.lambda);
    if (std::find(stats.datasets.begin(), stats.datasets.end(), c.dataset) == stats.datasets.end()) {
      stats.datasets.push_back(c.dataset);
    }
    stats.points[c.lambda][c.dataset] = c;
  }
  if (!lambdas.contains(0.0)) throw InvalidArgument("sweep_aggregate: the lambda = 0 baseline is missing");
  stats.lambdas.assign(lambdas.begin(), lambdas.end());

  const auto& baseline = stats.points.at(0.0);
  for (auto& [lambda, row] : stats.points) {
    std::vector<double> deltas;
    for (auto& [name, point] : row) {
      const auto base = baseline.find(name);
      if (base == baseline.end()) {
        throw InvalidArgument("sweep_aggregate: dataset '" + name + "' has no lambda = 0 cell");
      }
      // A zero-variance baseline leaves delta undefined; such datasets drop
      // out of the cross-dataset summary at every lambda.
      if (base->second.std > 0.0) {
        point.delta = glass_delta(point.mean, base->second.mean, base->second.std);
        deltas.push_back(point.delta);
      } else {
        point.delta = std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (deltas.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      stats.across_datasets[lambda] = {nan, nan, nan};
    } else {
      stats.across_datasets[lambda] = summarize(deltas);
    }
  }
  return stats;
}

}  // namespace tsg
