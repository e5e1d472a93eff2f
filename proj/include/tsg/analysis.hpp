#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsg/dense.hpp"

namespace tsg {

enum class Metric { accuracy, roc_auc };

std::string to_string(Metric m);
Metric parse_metric(const std::string& s);

/// Fraction of masked nodes whose prediction equals the label.
double accuracy(std::span<const int> predicted, std::span<const int> labels, std::span<const Index> mask);

/// Pair-counting ROC-AUC: (wins + ties / 2) / (positives * negatives).
/// Labels must be 0/1 and both classes must occur in the mask.
double roc_auc(std::span<const double> scores, std::span<const int> labels, std::span<const Index> mask);

/// Metric from a probability matrix: accuracy uses argmax (lowest index on
/// ties); roc_auc scores nodes by the class-1 probability.
double evaluate_metric(Metric metric, const Matrix& probs, std::span<const int> labels, std::span<const Index> mask);

/// (acc_lambda - acc_0) / sigma_0.
double glass_delta(double acc_lambda, double acc_0, double sigma_0);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;     // sample standard deviation (n - 1)
  bool std_defined = false;
};

MeanStd mean_std(std::span<const double> values);

/// Linear interpolation between order statistics at position q * (n - 1).
double quantile(std::vector<double> values, double q);

struct QuantileSummary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

QuantileSummary summarize(std::span<const double> values);

/// Glass's delta of one dataset at one lambda.
struct SweepPoint {
  std::string dataset;
  double lambda = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double delta = 0.0;  // NaN when the dataset's baseline std is 0
};

struct SweepStats {
  std::vector<double> lambdas;                       // ascending, contains 0
  std::vector<std::string> datasets;                 // in first-seen order
  std::map<double, std::map<std::string, SweepPoint>> points;
  std::map<double, QuantileSummary> across_datasets;
};

/// Per-dataset Glass's delta against each dataset's lambda = 0 cell, then
/// median and interquartile range across datasets at every lambda.
SweepStats sweep_aggregate(const std::vector<SweepPoint>& cells);

}  // namespace tsg
