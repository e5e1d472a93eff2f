#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tsg/analysis.hpp"
#include "tsg/graph_data.hpp"
#include "tsg/models.hpp"
#include "tsg/objectives.hpp"

namespace tsg {

struct TrainConfig {
  int epochs = 1000;
  double lr = 1e-3;
  double weight_decay = 5e-4;
  Metric metric = Metric::accuracy;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool record_trajectories = true;

  void validate() const;
};

/// Mean Shannon entropy on labeled and unlabeled (V \ V_L) nodes.
struct EntropySnapshot {
  int epoch = 0;
  double labeled = 0.0;     // H_L
  double unlabeled = 0.0;   // H_U
  double gap = 0.0;         // H_L - H_U
};

EntropySnapshot entropy_snapshot(const Matrix& probs, const GraphBundle& bundle, int epoch = 0);

struct EpochRecord {
  int epoch = 0;
  LossReport loss;
  double val_metric = 0.0;
  double test_metric = 0.0;
  std::optional<EntropySnapshot> entropy;
};

struct Divergence {
  int epoch = 0;
  std::optional<LossReport> last_finite;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;       // argmax val metric, earliest on ties
  double best_val = 0.0;
  double test_metric = 0.0;  // test metric at best_epoch
  std::uint64_t params_digest = 0;
  std::optional<Divergence> divergence;

  bool ok() const { return !divergence.has_value(); }
};

/// 64-bit FNV-1a over the raw bytes of every trainable tensor, in order.
std::uint64_t params_digest(const Model& model);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Full-batch training with the sharpening objective. Each epoch runs a
/// train-mode forward, the loss, a reverse pass and an Adam step, then an
/// eval-mode forward for metrics and the entropy snapshot. A non-finite
/// loss ends the run; the record then carries a Divergence.
RunRecord train_run(const GraphBundle& bundle, const ArchConfig& arch, const TSConfig& ts,
                    const TrainConfig& train, std::uint64_t seed);
RunRecord train_run(const GraphBundle& bundle, const GraphOperators& ops, const ArchConfig& arch,
                    const TSConfig& ts, const TrainConfig& train, std::uint64_t seed);

/// Same loop with the plain cross-entropy objective and no sharpening code.
RunRecord train_supervised_run(const GraphBundle& bundle, const GraphOperators& ops, const ArchConfig& arch,
                               const TrainConfig& train, std::uint64_t seed);

struct SeedAggregate {
  MeanStd test;                          // over successful seeds
  std::vector<RunRecord> runs;           // sorted by seed
  std::vector<std::uint64_t> failed_seeds;

  bool partial() const { return !failed_seeds.empty(); }
};

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Mean/std over the successful runs; runs are sorted by seed first.
SeedAggregate aggregate_runs(std::vector<RunRecord> runs);

/// Runs every seed in train.seeds (up to `jobs` at a time) and aggregates
/// the test metric with a sample standard deviation.
SeedAggregate multi_seed_eval(const GraphBundle& bundle, const ArchConfig& arch, const TSConfig& ts,
                              const TrainConfig& train, int jobs = 1);

}  // namespace tsg
