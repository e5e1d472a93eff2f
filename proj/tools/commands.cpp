#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "tsg/analysis.hpp"
#include "tsg/io.hpp"
#include "tsg/report.hpp"

namespace tsg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

nlohmann::json to_json(const RunSpec& s) {
  json arch{{"backbone", to_string(s.arch.backbone)}, {"layers", s.arch.layers},
            {"hidden", s.arch.hidden},               {"dropout", s.arch.dropout},
            {"norm", to_string(s.arch.norm)},        {"residual", s.arch.residual},
            {"num_classes", s.arch.num_classes}};
  json ts{{"lambda_unlabeled", s.ts.lambda_unlabeled},
          {"lambda_labeled", s.ts.lambda_labeled},
          {"q", static_cast<int>(s.ts.order)},
          {"unlabeled_set", to_string(s.ts.unlabeled_set)},
          {"variant", s.supervised_only ? std::string("supervised") : s.ts.variant_label()}};
  json train{{"epochs", s.train.epochs},
             {"lr", s.train.lr},
             {"weight_decay", s.train.weight_decay},
             {"metric", to_string(s.train.metric)},
             {"seeds", s.train.seeds},
             {"record_trajectories", s.train.record_trajectories}};
  return json{{"data", s.data}, {"arch", arch},        {"ts", ts},
              {"train", train}, {"out", s.out},         {"jobs", s.jobs},
              {"supervised_only", s.supervised_only}};
}

RunSpec run_spec_from_json(const nlohmann::json& j) {
  RunSpec s;
  try {
    s.data = j.value("data", s.data);
    s.out = j.value("out", s.out);
    s.jobs = j.value("jobs", s.jobs);
    s.supervised_only = j.value("supervised_only", false);
    if (j.contains("arch")) {
      const auto& a = j.at("arch");
      if (a.contains("backbone")) s.arch.backbone = parse_backbone(a.at("backbone").get<std::string>());
      s.arch.layers = a.value("layers", s.arch.layers);
      s.arch.hidden = a.value("hidden", s.arch.hidden);
      s.arch.dropout = a.value("dropout", s.arch.dropout);
      if (a.contains("norm")) s.arch.norm = parse_normalization(a.at("norm").get<std::string>());
      s.arch.residual = a.value("residual", s.arch.residual);
      s.arch.num_classes = a.value("num_classes", s.arch.num_classes);
    }
    if (j.contains("ts")) {
      const auto& t = j.at("ts");
      s.ts.lambda_unlabeled = t.value("lambda_unlabeled", s.ts.lambda_unlabeled);
      s.ts.lambda_labeled = t.value("lambda_labeled", -s.ts.lambda_unlabeled);
      const int q = t.value("q", 2);
      if (q != 1 && q != 2) throw InvalidArgument("run spec: q must be 1 or 2");
      s.ts.order = static_cast<EntropyOrder>(q);
      if (t.contains("unlabeled_set")) s.ts.unlabeled_set = parse_unlabeled_set(t.at("unlabeled_set").get<std::string>());
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      s.train.epochs = t.value("epochs", s.train.epochs);
      s.train.lr = t.value("lr", s.train.lr);
      s.train.weight_decay = t.value("weight_decay", s.train.weight_decay);
      if (t.contains("metric")) s.train.metric = parse_metric(t.at("metric").get<std::string>());
      if (t.contains("seeds")) s.train.seeds = t.at("seeds").get<std::vector<std::uint64_t>>();
      s.train.record_trajectories = t.value("record_trajectories", s.train.record_trajectories);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("run spec: ") + e.what());
  }
  return s;
}

std::vector<double> parse_lambda_grid(const std::string& text) {
  double v[3];
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    const auto colon = text.find(':', pos);
    if ((k < 2) != (colon != std::string::npos)) throw InvalidArgument("lambda grid must be start:stop:step");
    const std::string part = text.substr(pos, k < 2 ? colon - pos : std::string::npos);
    char* end = nullptr;
    v[k] = std::strtod(part.c_str(), &end);
    if (part.empty() || *end != '\0') throw InvalidArgument("lambda grid: cannot parse '" + part + "'");
    pos = colon + 1;
  }
  const double start = v[0], stop = v[1], step = v[2];
  if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step) || !(step > 0.0) || stop < start) {
    throw InvalidArgument("lambda grid needs finite start <= stop and step > 0");
  }
  const double count = std::floor((stop - start) / step + 1e-9) + 1.0;
  if (count > 10000) throw InvalidArgument("lambda grid has more than 10000 points");

  // Round away accumulated binary noise so 0 lands on exactly 0.
  auto clean = [](double x) {
    const double r = std::round(x * 1e12) / 1e12;
    return r == 0.0 ? 0.0 : r;
  };
  std::vector<double> grid;
  for (int i = 0; i < static_cast<int>(count); ++i) grid.push_back(clean(start + i * step));
  if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) grid.push_back(0.0);
  std::sort(grid.begin(), grid.end());
  return grid;
}

std::uint64_t bundle_digest(const GraphBundle& b) {
  std::uint64_t h = fnv1a(&b.num_nodes, sizeof b.num_nodes);
  h = fnv1a(&b.num_classes, sizeof b.num_classes, h);
  for (const auto& [u, v] : b.edges) {
    h = fnv1a(&u, sizeof u, h);
    h = fnv1a(&v, sizeof v, h);
  }
  h = fnv1a(b.features.data(), static_cast<std::size_t>(b.features.size()) * sizeof(double), h);
  h = fnv1a(b.labels.data(), b.labels.size() * sizeof(int), h);
  for (const auto* list : {&b.split.train, &b.split.val, &b.split.test}) {
    const std::uint64_t n = list->size();
    h = fnv1a(&n, sizeof n, h);
    h = fnv1a(list->data(), list->size() * sizeof(Index), h);
  }
  return h;
}

namespace {

// Options shared by train, sweep and ablate. Values are only applied to
// the RunSpec when the flag was actually given, so a --config file can
// supply the rest.
struct SharedFlags {
  std::string config, data, model, norm, unlabeled_set, metric, out;
  int layers = 0, hidden = 0, epochs = 0, q = 2, seeds = 5, jobs = 1;
  std::uint64_t seed_base = 0;
  double dropout = 0, lambda = 0, lambda_labeled = 0, lr = 0, wd = 0;
  bool residual = false;
  std::map<std::string, CLI::Option*> opt;

  void add(CLI::App* app, bool with_config) {
    if (with_config) opt["config"] = app->add_option("--config", config, "Run spec JSON; flags override it");
    opt["data"] = app->add_option("--data", data, "Bundle directory");
    opt["model"] = app->add_option("--model", model, "mlp, gcn or sage")->check(CLI::IsMember({"mlp", "gcn", "sage"}));
    opt["layers"] = app->add_option("--layers", layers);
    opt["hidden"] = app->add_option("--hidden", hidden);
    opt["dropout"] = app->add_option("--dropout", dropout);
    opt["norm"] = app->add_option("--norm", norm)->check(CLI::IsMember({"none", "layer", "batch"}));
    opt["residual"] = app->add_flag("--residual", residual);
    opt["lambda"] = app->add_option("--lambda", lambda, "Sharpening coefficient on unlabeled nodes");
    opt["lambda-labeled"] = app->add_option("--lambda-labeled", lambda_labeled, "Labeled coefficient (default -lambda)");
    opt["q"] = app->add_option("--q", q, "Entropy order")->check(CLI::IsMember({1, 2}));
    opt["unlabeled-set"] =
        app->add_option("--unlabeled-set", unlabeled_set)->check(CLI::IsMember({"all", "test-only"}));
    opt["epochs"] = app->add_option("--epochs", epochs);
    opt["lr"] = app->add_option("--lr", lr);
    opt["wd"] = app->add_option("--wd", wd);
    opt["metric"] = app->add_option("--metric", metric)->check(CLI::IsMember({"accuracy", "auc"}));
    opt["seeds"] = app->add_option("--seeds", seeds, "Number of seeds");
    opt["seed-base"] = app->add_option("--seed-base", seed_base, "First seed");
    opt["jobs"] = app->add_option("--jobs", jobs, "Parallel runs");
    opt["out"] = app->add_option("--out", out, "Output directory");
    // repeated flags: the last one wins, so wrappers can append overrides
    for (auto& [name, o] : opt) {
      if (name != "residual") o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  bool given(const std::string& name) const {
    const auto it = opt.find(name);
    return it != opt.end() && it->second->count() > 0;
  }

  RunSpec resolve() const {
    RunSpec s;
    if (given("config")) s = run_spec_from_json(parse_json_file(config));
    if (given("data")) s.data = data;
    if (given("model")) s.arch.backbone = parse_backbone(model);
    if (given("layers")) s.arch.layers = layers;
    if (given("hidden")) s.arch.hidden = hidden;
    if (given("dropout")) s.arch.dropout = dropout;
    if (given("norm")) s.arch.norm = parse_normalization(norm);
    if (given("residual")) s.arch.residual = residual;
    if (given("lambda")) {
      s.ts.lambda_unlabeled = lambda;
      s.ts.lambda_labeled = -lambda;
    }
    if (given("lambda-labeled")) s.ts.lambda_labeled = lambda_labeled;
    if (given("q")) s.ts.order = static_cast<EntropyOrder>(q);
    if (given("unlabeled-set")) s.ts.unlabeled_set = parse_unlabeled_set(unlabeled_set);
    if (given("epochs")) s.train.epochs = epochs;
    if (given("lr")) s.train.lr = lr;
    if (given("wd")) s.train.weight_decay = wd;
    if (given("metric")) s.train.metric = parse_metric(metric);
    if (given("seeds") || given("seed-base")) {
      if (given("seeds") && seeds < 1) throw InvalidArgument("--seeds must be >= 1");
      const std::uint64_t base = given("seed-base") ? seed_base : (s.train.seeds.empty() ? 0 : s.train.seeds.front());
      const std::size_t n = given("seeds") ? static_cast<std::size_t>(seeds) : s.train.seeds.size();
      s.train.seeds.clear();
      for (std::size_t i = 0; i < n; ++i) s.train.seeds.push_back(base + i);
    }
    if (given("jobs")) s.jobs = jobs;
    if (given("out")) s.out = out;
    if (s.jobs < 1) throw InvalidArgument("--jobs must be >= 1");
    return s;
  }

  static json parse_json_file(const std::string& path) {
    try {
      return json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw InvalidArgument(path + ": " + e.what());
    }
  }
};

void check_deterministic_env(std::ostream& err) {
  const char* v = std::getenv("TSG_DETERMINISTIC");
  if (v != nullptr && std::string(v) != "1") {
    err << "warning: TSG_DETERMINISTIC=" << v << " ignored; summation order is always fixed\n";
  }
}

std::string bundle_summary(const GraphBundle& b) {
  std::ostringstream s;
  s << "nodes=" << b.num_nodes << " edges=" << b.edges.size() << " features=" << b.num_features()
    << " classes=" << b.num_classes << " train=" << b.split.train.size() << " val=" << b.split.val.size()
    << " test=" << b.split.test.size() << " extra=" << b.extra_nodes().size();
  return s.str();
}

GraphBundle load_for(RunSpec& spec) {
  if (spec.data.empty()) throw InvalidArgument("--data is required");
  GraphBundle b = load_bundle(spec.data);
  spec.arch.num_classes = b.num_classes;
  spec.arch.validate();
  spec.train.validate();
  return b;
}

std::string seed_stem(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

json aggregate_json(const SeedAggregate& agg, const RunSpec& spec) {
  json runs = json::array();
  std::vector<double> metrics;
  for (const auto& r : agg.runs) {
    runs.push_back({{"seed", r.seed},
                    {"status", r.ok() ? "ok" : "diverged"},
                    {"best_epoch", r.best_epoch},
                    {"test_metric", r.test_metric},
                    {"params_digest", hex64(r.params_digest)}});
  }
  return json{{"variant", spec.supervised_only ? std::string("supervised") : spec.ts.variant_label()},
              {"metric", to_string(spec.train.metric)},
              {"mean", agg.test.mean},
              {"std", agg.test.std},
              {"std_defined", agg.test.std_defined},
              {"partial", agg.partial()},
              {"failed_seeds", agg.failed_seeds},
              {"runs", runs}};
}

void write_run_files(const SeedAggregate& agg, const RunSpec& spec) {
  const fs::path out(spec.out);
  for (const auto& r : agg.runs) {
    write_file_atomic(out / "runs" / (seed_stem(r.seed) + ".jsonl"), epochs_jsonl(r));
    write_file_atomic(out / "runs" / (seed_stem(r.seed) + ".json"), run_summary_json(r));
  }
  write_table(entropy_table(agg.runs), out / "entropy");
  write_file_atomic(out / "summary.json", aggregate_json(agg, spec).dump(2) + "\n");
}

SeedAggregate evaluate(const GraphBundle& bundle, const RunSpec& spec) {
  if (!spec.supervised_only) return multi_seed_eval(bundle, spec.arch, spec.ts, spec.train, spec.jobs);
  const GraphOperators ops(bundle);
  std::vector<RunRecord> runs(spec.train.seeds.size());
  parallel_for(runs.size(), spec.jobs, [&](std::size_t i) {
    runs[i] = train_supervised_run(bundle, ops, spec.arch, spec.train, spec.train.seeds[i]);
  });
  return aggregate_runs(std::move(runs));
}

void report_divergence(const SeedAggregate& agg, std::ostream& err) {
  for (const auto& r : agg.runs) {
    if (r.divergence) err << "error: seed " << r.seed << " diverged at epoch " << r.divergence->epoch << "\n";
  }
}

// ---- gen-csbm -------------------------------------------------------------

struct GenFlags {
  CsbmParams params;
  Index val = 0, test = 0;
  std::string out;
  CLI::Option* val_opt = nullptr;
  CLI::Option* test_opt = nullptr;
};

int cmd_gen_csbm(GenFlags& f, std::ostream& out) {
  if (f.val_opt->count()) f.params.val_size = f.val;
  if (f.test_opt->count()) f.params.test_size = f.test;
  const GraphBundle b = gen_csbm(f.params);
  save_bundle(b, f.out);
  const GraphBundle check = load_bundle(f.out);
  out << "wrote " << f.out << ": " << bundle_summary(check) << "\n";
  return kExitOk;
}

// ---- train ----------------------------------------------------------------

int cmd_train(RunSpec spec, std::ostream& out, std::ostream& err) {
  const GraphBundle bundle = load_for(spec);
  out << to_json(spec).dump(2) << "\n";
  write_file_atomic(fs::path(spec.out) / "spec.json", to_json(spec).dump(2) + "\n");
  const SeedAggregate agg = evaluate(bundle, spec);
  write_run_files(agg, spec);
  out << spec.ts.variant_label() << " " << to_string(spec.train.metric) << " mean=" << format_double(agg.test.mean)
      << " std=" << format_double(agg.test.std) << " over " << agg.runs.size() - agg.failed_seeds.size()
      << " seeds\n";
  if (agg.partial()) {
    report_divergence(agg, err);
    return kExitDiverged;
  }
  return kExitOk;
}

// ---- sweep ----------------------------------------------------------------

std::string lambda_tag(double lambda) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "lambda_%.12g", lambda);
  return buf;
}

struct SweepDataset {
  std::string name;
  std::string path;
  GraphBundle bundle;
  std::optional<GraphOperators> ops;
  std::uint64_t digest = 0;
};

int cmd_sweep(RunSpec spec, const std::string& grid_text, std::vector<std::string> dataset_paths, bool resume,
              std::ostream& out, std::ostream& err) {
  const std::vector<double> grid = parse_lambda_grid(grid_text);
  if (dataset_paths.empty()) dataset_paths.push_back(spec.data);
  if (dataset_paths.front().empty()) throw InvalidArgument("sweep needs --data or --datasets");

  std::vector<SweepDataset> sets;
  for (const auto& path : dataset_paths) {
    SweepDataset d;
    d.path = path;
    d.name = fs::path(path).lexically_normal().filename().string();
    if (d.name.empty()) d.name = fs::path(path).lexically_normal().parent_path().filename().string();
    for (const auto& other : sets) {
      if (other.name == d.name) d.name += "-" + std::to_string(sets.size());
    }
    d.bundle = load_bundle(path);
    d.ops.emplace(d.bundle);
    d.digest = bundle_digest(d.bundle);
    sets.push_back(std::move(d));
  }
  spec.data = dataset_paths.front();
  spec.arch.num_classes = sets.front().bundle.num_classes;
  spec.arch.validate();
  spec.train.validate();

  json echo = to_json(spec);
  echo["lambdas"] = grid;
  echo["datasets"] = dataset_paths;
  echo["resume"] = resume;
  out << echo.dump(2) << "\n";
  const fs::path root(spec.out);
  write_file_atomic(root / "spec.json", echo.dump(2) + "\n");

  struct Cell {
    std::size_t dataset, lambda;
    std::uint64_t seed;
    fs::path file;
    std::uint64_t key = 0;
    std::optional<RunRecord> record;
    double metric = 0.0;
    bool ok = false;
    bool reused = false;
  };
  std::vector<Cell> cells;
  for (std::size_t d = 0; d < sets.size(); ++d) {
    for (std::size_t l = 0; l < grid.size(); ++l) {
      for (std::uint64_t seed : spec.train.seeds) {
        Cell c{d, l, seed, root / "cells" / sets[d].name / lambda_tag(grid[l]) / (seed_stem(seed) + ".json")};
        RunSpec cell_spec = spec;
        cell_spec.data.clear();
        cell_spec.out.clear();
        cell_spec.jobs = 1;
        cell_spec.arch.num_classes = sets[d].bundle.num_classes;
        cell_spec.ts = TSConfig::symmetric(grid[l], spec.ts.order);
        cell_spec.ts.unlabeled_set = spec.ts.unlabeled_set;
        cell_spec.train.seeds = {seed};
        const std::string key_text = to_json(cell_spec).dump() + hex64(sets[d].digest);
        c.key = fnv1a(key_text.data(), key_text.size());
        cells.push_back(std::move(c));
      }
    }
  }

  if (resume) {
    for (auto& c : cells) {
      if (!fs::exists(c.file)) continue;
      try {
        const json j = json::parse(read_file(c.file));
        if (j.at("cell_digest").get<std::string>() == hex64(c.key) && j.at("status") == "ok") {
          c.metric = j.at("test_metric").get<double>();
          c.ok = c.reused = true;
        }
      } catch (const json::exception&) {
        // unreadable cell: rerun it
      }
    }
  }

  parallel_for(cells.size(), spec.jobs, [&](std::size_t i) {
    Cell& c = cells[i];
    if (c.reused) return;
    const auto& set = sets[c.dataset];
    ArchConfig arch = spec.arch;
    arch.num_classes = set.bundle.num_classes;
    TSConfig ts = TSConfig::symmetric(grid[c.lambda], spec.ts.order);
    ts.unlabeled_set = spec.ts.unlabeled_set;
    RunRecord r = train_run(set.bundle, *set.ops, arch, ts, spec.train, c.seed);
    json j = json::parse(run_summary_json(r));
    j["cell_digest"] = hex64(c.key);
    j["dataset"] = set.name;
    j["lambda"] = grid[c.lambda];
    write_file_atomic(c.file, j.dump() + "\n");
    c.metric = r.test_metric;
    c.ok = r.ok();
  });

  std::vector<SweepPoint> points;
  Table cell_rows{{"dataset", "lambda", "mean", "std", "seeds_ok", "seeds_failed"}, {}};
  bool diverged = false;
  std::size_t reused = 0;
  for (std::size_t d = 0; d < sets.size(); ++d) {
    for (std::size_t l = 0; l < grid.size(); ++l) {
      std::vector<double> metrics;
      std::int64_t failed = 0;
      for (const auto& c : cells) {
        if (c.dataset != d || c.lambda != l) continue;
        reused += c.reused ? 1 : 0;
        if (c.ok) {
          metrics.push_back(c.metric);
        } else {
          ++failed;
          err << "error: " << sets[d].name << " lambda=" << grid[l] << " seed " << c.seed << " diverged\n";
        }
      }
      diverged = diverged || failed > 0;
      const MeanStd ms = mean_std(metrics);
      points.push_back({sets[d].name, grid[l], ms.mean, ms.std, 0.0});
      cell_rows.rows.push_back({sets[d].name, grid[l], ms.mean, ms.std, static_cast<std::int64_t>(metrics.size()),
                                failed});
    }
  }
  write_table(cell_rows, root / "cells");
  const SweepStats stats = sweep_aggregate(points);
  write_table(sweep_table(stats), root / "sweep");
  out << "sweep: " << grid.size() << " lambdas x " << sets.size() << " datasets x " << spec.train.seeds.size()
      << " seeds";
  if (resume) out << " (" << reused << " cells reused)";
  out << "\n";
  return diverged ? kExitDiverged : kExitOk;
}

// ---- ablate ---------------------------------------------------------------

inline constexpr double kOffsets[] = {-0.10, -0.05, 0.0, 0.05, 0.10};

int cmd_ablate(RunSpec spec, const std::string& variant, std::ostream& out, std::ostream& err) {
  static const std::vector<std::string> kBatteries{"labeled-off", "offset", "shannon", "test-only"};
  if (variant != "all" && std::find(kBatteries.begin(), kBatteries.end(), variant) == kBatteries.end()) {
    throw InvalidArgument("unknown --variant '" + variant + "'");
  }
  const GraphBundle bundle = load_for(spec);
  const double lambda = spec.ts.lambda_unlabeled;
  const TSConfig reference = TSConfig::symmetric(lambda, EntropyOrder::tsallis2);

  struct Planned {
    std::string battery, setting;
    TSConfig cfg;
  };
  std::vector<Planned> plan;
  auto wants = [&](const char* b) { return variant == "all" || variant == b; };
  if (wants("labeled-off")) plan.push_back({"labeled-off", "lambda_labeled=0", {lambda, 0.0}});
  if (wants("offset")) {
    // The same offset is added to both coefficients, so their difference
    // stays at 2 * lambda.
    for (double o : kOffsets) {
      char setting[32];
      std::snprintf(setting, sizeof setting, "offset=%+.2f", o);
      plan.push_back({"offset", setting, {lambda + o, -lambda + o}});
    }
  }
  if (wants("shannon")) plan.push_back({"shannon", "q=1", TSConfig::symmetric(lambda, EntropyOrder::shannon)});
  if (wants("test-only")) {
    TSConfig c = reference;
    c.unlabeled_set = UnlabeledSet::test_and_extra;
    plan.push_back({"test-only", "unlabeled_set=test-only", c});
  }

  json echo = to_json(spec);
  echo["variant"] = variant;
  json cfgs = json::array();
  for (const auto& p : plan) {
    cfgs.push_back({{"battery", p.battery},
                    {"setting", p.setting},
                    {"lambda_unlabeled", p.cfg.lambda_unlabeled},
                    {"lambda_labeled", p.cfg.lambda_labeled},
                    {"q", static_cast<int>(p.cfg.order)},
                    {"unlabeled_set", to_string(p.cfg.unlabeled_set)}});
  }
  echo["cells"] = cfgs;
  out << echo.dump(2) << "\n";
  const fs::path root(spec.out);
  write_file_atomic(root / "spec.json", echo.dump(2) + "\n");

  bool diverged = false;
  auto run_cell = [&](const TSConfig& cfg) {
    const SeedAggregate agg = multi_seed_eval(bundle, spec.arch, cfg, spec.train, spec.jobs);
    if (agg.partial()) {
      report_divergence(agg, err);
      diverged = true;
    }
    return agg.test;
  };
  const MeanStd ref = run_cell(reference);
  std::vector<AblationCell> cells{{"reference", "symmetric", reference, ref, ref}};
  for (const auto& p : plan) cells.push_back({p.battery, p.setting, p.cfg, run_cell(p.cfg), ref});
  write_table(ablation_table(cells), root / "ablation");
  out << "ablation: " << cells.size() - 1 << " cells against the symmetric reference at lambda=" << lambda << "\n";
  return diverged ? kExitDiverged : kExitOk;
}

// ---- report ---------------------------------------------------------------

MeanStd read_aggregate(const fs::path& dir) {
  const json j = json::parse(read_file(dir / "summary.json"));
  return {j.at("mean").get<double>(), j.at("std").get<double>(), j.at("std_defined").get<bool>()};
}

std::vector<json> read_jsonl(const fs::path& file) {
  std::vector<json> rows;
  std::istringstream in(read_file(file));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) rows.push_back(json::parse(line));
  }
  return rows;
}

double number_or_nan(const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); }

int cmd_report(const std::string& kind, const std::vector<std::string>& inputs,
               const std::vector<std::string>& baselines, const std::vector<std::string>& treatments,
               std::vector<std::string> labels, const std::string& out_dir, std::ostream& out) {
  const fs::path root(out_dir);
  try {
    if (kind == "cell_table") {
      if (treatments.empty()) throw InvalidArgument("cell_table needs --treatment directories");
      std::vector<CellInput> cells;
      for (std::size_t i = 0; i < treatments.size(); ++i) {
        CellInput c;
        c.label = i < labels.size() ? labels[i] : fs::path(treatments[i]).filename().string();
        if (i < baselines.size()) c.baseline = read_aggregate(baselines[i]);
        c.treatment = read_aggregate(treatments[i]);
        cells.push_back(std::move(c));
      }
      write_table(cell_table(cells), root / "cell_table");
    } else if (kind == "sweep_csv") {
      std::vector<SweepPoint> points;
      for (const auto& dir : inputs) {
        for (const auto& row : read_jsonl(fs::path(dir) / "cells.jsonl")) {
          points.push_back({row.at("dataset").get<std::string>(), row.at("lambda").get<double>(),
                            number_or_nan(row.at("mean")), number_or_nan(row.at("std")), 0.0});
        }
      }
      write_table(sweep_table(sweep_aggregate(points)), root / "sweep");
    } else if (kind == "entropy_csv") {
      std::vector<RunRecord> runs;
      for (const auto& dir : inputs) {
        for (const auto& entry : fs::directory_iterator(fs::path(dir) / "runs")) {
          if (entry.path().extension() != ".jsonl") continue;
          RunRecord r;
          for (const auto& row : read_jsonl(entry.path())) {
            r.seed = row.at("seed").get<std::uint64_t>();
            EpochRecord e;
            e.epoch = row.at("epoch").get<int>();
            if (row.contains("H_L")) {
              e.entropy = EntropySnapshot{e.epoch, number_or_nan(row.at("H_L")), number_or_nan(row.at("H_U")),
                                          number_or_nan(row.at("dH"))};
            }
            r.epochs.push_back(std::move(e));
          }
          runs.push_back(std::move(r));
        }
      }
      std::sort(runs.begin(), runs.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
      write_table(entropy_table(runs), root / "entropy");
    } else if (kind == "ablation_delta") {
      std::vector<AblationCell> cells;
      for (const auto& dir : inputs) {
        for (const auto& row : read_jsonl(fs::path(dir) / "ablation.jsonl")) {
          AblationCell c;
          c.battery = row.at("battery").get<std::string>();
          c.setting = row.at("setting").get<std::string>();
          c.config.lambda_unlabeled = row.at("lambda_unlabeled").get<double>();
          c.config.lambda_labeled = row.at("lambda_labeled").get<double>();
          c.config.order = static_cast<EntropyOrder>(row.at("q").get<int>());
          c.config.unlabeled_set = parse_unlabeled_set(row.at("unlabeled_set").get<std::string>());
          c.result = {number_or_nan(row.at("mean")), number_or_nan(row.at("std")), true};
          c.reference = MeanStd{number_or_nan(row.at("reference_mean")), number_or_nan(row.at("reference_std")), true};
          cells.push_back(std::move(c));
        }
      }
      write_table(ablation_table(cells), root / "ablation");
    } else {
      throw InvalidArgument("unknown report kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("report: malformed input: ") + e.what());
  }
  out << "wrote " << kind << " to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transductive sharpening experiments"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-csbm", "Generate a two-class CSBM bundle");
  gen_cmd->add_option("--n-per-class", gen.params.nodes_per_class);
  gen_cmd->add_option("--p-in", gen.params.p_in);
  gen_cmd->add_option("--p-out", gen.params.p_out);
  gen_cmd->add_option("--mu", gen.params.mu);
  gen_cmd->add_option("--sigma", gen.params.sigma);
  gen_cmd->add_option("--dim", gen.params.dim);
  gen_cmd->add_option("--seed", gen.params.seed);
  gen.val_opt = gen_cmd->add_option("--val", gen.val, "Validation size (default scales with N)");
  gen.test_opt = gen_cmd->add_option("--test", gen.test, "Test size (default scales with N)");
  gen_cmd->add_option("--out", gen.out)->required();

  SharedFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Train over several seeds and aggregate");
  train_flags.add(train_cmd, true);
  bool supervised_only = false;
  train_cmd->add_flag("--supervised-only", supervised_only, "Use the plain cross-entropy loop");

  SharedFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "Lambda sweep with Glass's delta against lambda = 0");
  sweep_flags.add(sweep_cmd, true);
  std::string grid;
  std::vector<std::string> datasets;
  bool resume = false;
  sweep_cmd->add_option("--lambdas", grid, "start:stop:step")->required();
  sweep_cmd->add_option("--datasets", datasets, "Bundle directories");
  sweep_cmd->add_flag("--resume", resume, "Reuse finished cells whose digest matches");

  SharedFlags ablate_flags;
  auto* ablate_cmd = app.add_subcommand("ablate", "Variant batteries against symmetric Tsallis");
  ablate_flags.add(ablate_cmd, true);
  std::string variant = "all";
  ablate_cmd->add_option("--variant", variant, "all, labeled-off, offset, shannon or test-only");

  auto* report_cmd = app.add_subcommand("report", "Rebuild report tables from stored outputs");
  std::string kind, report_out;
  std::vector<std::string> inputs, baselines, treatments, labels;
  report_cmd->add_option("--kind", kind)
      ->required()
      ->check(CLI::IsMember({"cell_table", "sweep_csv", "entropy_csv", "ablation_delta"}));
  report_cmd->add_option("--in", inputs, "Sweep, train or ablate output directories");
  report_cmd->add_option("--baseline", baselines, "Baseline train output directories");
  report_cmd->add_option("--treatment", treatments, "Treatment train output directories");
  report_cmd->add_option("--label", labels, "Row labels for cell_table");
  report_cmd->add_option("--out", report_out)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    check_deterministic_env(err);
    if (gen_cmd->parsed()) return cmd_gen_csbm(gen, out);
    if (train_cmd->parsed()) {
      RunSpec spec = train_flags.resolve();
      if (supervised_only) spec.supervised_only = true;
      return cmd_train(std::move(spec), out, err);
    }
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_flags.resolve(), grid, datasets, resume, out, err);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_flags.resolve(), variant, out, err);
    if (report_cmd->parsed()) return cmd_report(kind, inputs, baselines, treatments, labels, report_out, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace tsg::cli
