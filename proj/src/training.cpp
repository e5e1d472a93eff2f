#include "tsg/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <thread>

#include "tsg/adam.hpp"
#include "tsg/rng.hpp"

namespace tsg {

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (!(lr > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("train: weight decay must be >= 0");
  if (seeds.empty()) throw InvalidArgument("train: seed list is empty");
}

EntropySnapshot entropy_snapshot(const Matrix& probs, const GraphBundle& bundle, int epoch) {
  const auto& labeled = bundle.labeled_nodes();
  if (labeled.empty()) throw InvalidArgument("entropy_snapshot: labeled set V_L is empty");
  const auto unlabeled = bundle.unlabeled_nodes();
  auto mean_entropy = [&](const std::vector<Index>& nodes) {
    if (nodes.empty()) return 0.0;
    double total = 0.0;
    for (Index v : nodes) total += shannon_entropy(probs.row(v));
    return total / static_cast<double>(nodes.size());
  };
  EntropySnapshot s;
  s.epoch = epoch;
  s.labeled = mean_entropy(labeled);
  s.unlabeled = mean_entropy(unlabeled);
  s.gap = s.labeled - s.unlabeled;
  return s;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t params_digest(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Matrix* m : model.trainable()) {
    h = fnv1a(m->data(), static_cast<std::size_t>(m->size()) * sizeof(double), h);
  }
  return h;
}

namespace {

using LossBuilder = std::function<LossNodes(ValueGraph&, NodeId)>;

void check_inputs(const GraphBundle& bundle, const ArchConfig& arch, const TrainConfig& train) {
  arch.validate();
  train.validate();
  if (arch.num_classes != bundle.num_classes) {
    throw InvalidArgument("train: arch has " + std::to_string(arch.num_classes) + " classes, bundle has " +
                          std::to_string(bundle.num_classes));
  }
  if (bundle.split.train.empty() || bundle.split.val.empty() || bundle.split.test.empty()) {
    throw InvalidArgument("train: train, val and test splits must all be nonempty");
  }
}

RunRecord run_loop(const GraphBundle& bundle, const GraphOperators& ops, const ArchConfig& arch,
                   const TrainConfig& train, std::uint64_t seed, const TSConfig& report_cfg,
                   const LossBuilder& build_loss) {
  check_inputs(bundle, arch, train);

  RunRecord record;
  record.seed = seed;
  Model model = init_model(arch, bundle.num_features(), seed);
  AdamState adam;
  const AdamConfig adam_cfg{.lr = train.lr, .weight_decay = train.weight_decay};
  std::optional<LossReport> last_finite;

  for (int epoch = 0; epoch < train.epochs; ++epoch) {
    LossReport report;
    {
      ValueGraph g;
      const ForwardOptions opt{Mode::train, derive_seed({seed, static_cast<std::uint64_t>(epoch), 0xd7})};
      const auto fwd = forward(g, model, ops, bundle.features, opt);
      if (!g.value(fwd.logits).allFinite()) {
        record.divergence = Divergence{epoch, last_finite};
        break;
      }
      const NodeId probs = g.row_softmax(fwd.logits);
      const LossNodes loss = build_loss(g, probs);
      report = loss.report(g, report_cfg);
      if (!std::isfinite(report.total)) {
        record.divergence = Divergence{epoch, last_finite};
        break;
      }
      g.backward(loss.total);

      auto params = model.trainable();
      std::vector<Matrix> grads;
      grads.reserve(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Matrix& gi = g.grad(fwd.params[i]);
        grads.push_back(gi.size() > 0 ? gi : Matrix::Zero(params[i]->rows(), params[i]->cols()));
      }
      adam_step(params, grads, adam, adam_cfg);
    }
    last_finite = report;

    ValueGraph g;
    const auto fwd = forward(g, model, ops, bundle.features, ForwardOptions{Mode::eval, 0});
    if (!g.value(fwd.logits).allFinite()) {
      record.divergence = Divergence{epoch, last_finite};
      break;
    }
    const Matrix probs = tsg::row_softmax(g.value(fwd.logits));

    EpochRecord er;
    er.epoch = epoch;
    er.loss = report;
    er.val_metric = evaluate_metric(train.metric, probs, bundle.labels, bundle.split.val);
    er.test_metric = evaluate_metric(train.metric, probs, bundle.labels, bundle.split.test);
    if (train.record_trajectories) er.entropy = entropy_snapshot(probs, bundle, epoch);
    record.epochs.push_back(std::move(er));
  }

  for (const auto& er : record.epochs) {
    if (record.best_epoch < 0 || er.val_metric > record.best_val) {
      record.best_epoch = er.epoch;
      record.best_val = er.val_metric;
      record.test_metric = er.test_metric;
    }
  }
  record.params_digest = params_digest(model);
  return record;
}

}  // namespace

RunRecord train_run(const GraphBundle& bundle, const GraphOperators& ops, const ArchConfig& arch,
                    const TSConfig& ts, const TrainConfig& train, std::uint64_t seed) {
  return run_loop(bundle, ops, arch, train, seed, ts,
                  [&](ValueGraph& g, NodeId probs) { return build_ts_loss(g, probs, bundle, ts); });
}

RunRecord train_run(const GraphBundle& bundle, const ArchConfig& arch, const TSConfig& ts,
                    const TrainConfig& train, std::uint64_t seed) {
  const GraphOperators ops(bundle);
  return train_run(bundle, ops, arch, ts, train, seed);
}

RunRecord train_supervised_run(const GraphBundle& bundle, const GraphOperators& ops, const ArchConfig& arch,
                               const TrainConfig& train, std::uint64_t seed) {
  return run_loop(bundle, ops, arch, train, seed, TSConfig::supervised(),
                  [&](ValueGraph& g, NodeId probs) { return build_supervised_loss(g, probs, bundle); });
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), std::max<std::size_t>(n, 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SeedAggregate aggregate_runs(std::vector<RunRecord> runs) {
  std::sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
  SeedAggregate agg;
  std::vector<double> metrics;
  for (auto& run : runs) {
    if (run.ok()) {
      metrics.push_back(run.test_metric);
    } else {
      agg.failed_seeds.push_back(run.seed);
    }
    agg.runs.push_back(std::move(run));
  }
  agg.test = mean_std(metrics);
  return agg;
}

SeedAggregate multi_seed_eval(const GraphBundle& bundle, const ArchConfig& arch, const TSConfig& ts,
                              const TrainConfig& train, int jobs) {
  check_inputs(bundle, arch, train);
  const GraphOperators ops(bundle);
  std::vector<RunRecord> runs(train.seeds.size());
  parallel_for(runs.size(), jobs,
               [&](std::size_t i) { runs[i] = train_run(bundle, ops, arch, ts, train, train.seeds[i]); });
  return aggregate_runs(std::move(runs));
}

}  // namespace tsg
