#include "tsg/report.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "tsg/io.hpp"

namespace tsg {

namespace {

std::string csv_field(const Field& f) {
  if (const auto* s = std::get_if<std::string>(&f)) {
    if (s->find_first_of(",\"\n") == std::string::npos) return *s;
    std::string quoted = "\"";
    for (char c : *s) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
    return quoted + "\"";
  }
  if (const auto* d = std::get_if<double>(&f)) return format_double(*d);
  if (const auto* i = std::get_if<std::int64_t>(&f)) return std::to_string(*i);
  return std::get<bool>(f) ? "true" : "false";
}

std::string json_field(const Field& f) {
  if (const auto* s = std::get_if<std::string>(&f)) return nlohmann::json(*s).dump();
  if (const auto* d = std::get_if<double>(&f)) return std::isfinite(*d) ? format_double(*d) : "null";
  return csv_field(f);
}

std::string json_number(double v) { return std::isfinite(v) ? format_double(v) : "null"; }

std::string loss_json(const LossReport& r) {
  return "{\"total\":" + json_number(r.total) + ",\"supervised\":" + json_number(r.supervised) +
         ",\"unlabeled_entropy\":" + json_number(r.unlabeled_entropy) +
         ",\"labeled_entropy\":" + json_number(r.labeled_entropy) +
         ",\"lambda_unlabeled\":" + json_number(r.lambda_unlabeled) +
         ",\"lambda_labeled\":" + json_number(r.lambda_labeled) + "}";
}

}  // namespace

std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + csv_field(t.header[i]);
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
    out += '\n';
  }
  return out;
}

std::string to_jsonl(const Table& t) {
  std::string out;
  for (const auto& row : t.rows) {
    out += '{';
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += (i ? "," : "") + nlohmann::json(t.header[i]).dump() + ":" + json_field(row[i]);
    }
    out += "}\n";
  }
  return out;
}

void write_table(const Table& t, const std::filesystem::path& stem) {
  auto csv = stem;
  csv += ".csv";
  auto jsonl = stem;
  jsonl += ".jsonl";
  write_file_atomic(csv, to_csv(t));
  write_file_atomic(jsonl, to_jsonl(t));
}

bool cell_significant(double delta, double treatment_std) { return std::abs(delta) > treatment_std; }

Table cell_table(const std::vector<CellInput>& cells) {
  Table t{{"label", "baseline_mean", "baseline_std", "treatment_mean", "treatment_std", "delta", "significant"}, {}};
  for (const auto& c : cells) {
    if (!c.baseline) throw InvalidArgument("cell_table: '" + c.label + "' has no matched baseline");
    const double delta = c.treatment.mean - c.baseline->mean;
    t.rows.push_back({c.label, c.baseline->mean, c.baseline->std, c.treatment.mean, c.treatment.std, delta,
                      cell_significant(delta, c.treatment.std)});
  }
  return t;
}

Table sweep_table(const SweepStats& stats) {
  Table t;
  t.header.push_back("lambda");
  for (const auto& d : stats.datasets) t.header.push_back("delta_" + d);
  for (const char* h : {"median", "q25", "q75"}) t.header.push_back(h);
  const double nan = std::nan("");
  for (double lambda : stats.lambdas) {
    std::vector<Field> row{lambda};
    const auto& points = stats.points.at(lambda);
    for (const auto& d : stats.datasets) {
      const auto it = points.find(d);
      row.emplace_back(it == points.end() ? nan : it->second.delta);
    }
    const auto& q = stats.across_datasets.at(lambda);
    row.insert(row.end(), {q.median, q.q25, q.q75});
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table entropy_table(const std::vector<RunRecord>& runs) {
  Table t{{"run", "epoch", "H_L", "H_U", "dH"}, {}};
  for (const auto& run : runs) {
    for (const auto& e : run.epochs) {
      if (!e.entropy) continue;
      t.rows.push_back({static_cast<std::int64_t>(run.seed), static_cast<std::int64_t>(e.epoch), e.entropy->labeled,
                        e.entropy->unlabeled, e.entropy->gap});
    }
  }
  return t;
}

double combined_std(double a, double b) { return std::sqrt(a * a + b * b); }

Table ablation_table(const std::vector<AblationCell>& cells) {
  Table t{{"battery", "setting", "lambda_unlabeled", "lambda_labeled", "q", "unlabeled_set", "mean", "std",
           "reference_mean", "reference_std", "delta", "combined_std", "significant"},
          {}};
  for (const auto& c : cells) {
    if (!c.reference) throw InvalidArgument("ablation_table: '" + c.setting + "' has no reference cell");
    const double delta = c.result.mean - c.reference->mean;
    const double comb = combined_std(c.result.std, c.reference->std);
    t.rows.push_back({c.battery, c.setting, c.config.lambda_unlabeled, c.config.lambda_labeled,
                      static_cast<std::int64_t>(c.config.order), to_string(c.config.unlabeled_set), c.result.mean,
                      c.result.std, c.reference->mean, c.reference->std, delta, comb, std::abs(delta) > comb});
  }
  return t;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string epochs_jsonl(const RunRecord& run) {
  std::string out;
  for (const auto& e : run.epochs) {
    out += "{\"seed\":" + std::to_string(run.seed) + ",\"epoch\":" + std::to_string(e.epoch) +
           ",\"loss\":" + loss_json(e.loss) + ",\"val_metric\":" + json_number(e.val_metric) +
           ",\"test_metric\":" + json_number(e.test_metric);
    if (e.entropy) {
      out += ",\"H_L\":" + json_number(e.entropy->labeled) + ",\"H_U\":" + json_number(e.entropy->unlabeled) +
             ",\"dH\":" + json_number(e.entropy->gap);
    }
    out += "}\n";
  }
  return out;
}

std::string run_summary_json(const RunRecord& run) {
  std::string out = "{\"seed\":" + std::to_string(run.seed) + ",\"epochs\":" + std::to_string(run.epochs.size()) +
                    ",\"best_epoch\":" + std::to_string(run.best_epoch) +
                    ",\"best_val\":" + json_number(run.best_val) + ",\"test_metric\":" + json_number(run.test_metric) +
                    ",\"params_digest\":\"" + hex64(run.params_digest) + "\",\"status\":";
  if (run.divergence) {
    out += "\"diverged\",\"diverged_at\":" + std::to_string(run.divergence->epoch) + ",\"last_finite_loss\":" +
           (run.divergence->last_finite ? loss_json(*run.divergence->last_finite) : std::string("null"));
  } else {
    out += "\"ok\"";
  }
  return out + "}\n";
}

}  // namespace tsg
