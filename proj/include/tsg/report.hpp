#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tsg/analysis.hpp"
#include "tsg/objectives.hpp"
#include "tsg/training.hpp"

namespace tsg {

using Field = std::variant<std::string, double, std::int64_t, bool>;

/// A header plus rows; rendered as CSV and as JSONL with the same content.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<Field>> rows;
};

std::string to_csv(const Table& t);
std::string to_jsonl(const Table& t);

/// Writes <stem>.csv and <stem>.jsonl atomically.
void write_table(const Table& t, const std::filesystem::path& stem);

struct CellInput {
  std::string label;
  std::optional<MeanStd> baseline;
  MeanStd treatment;
};

/// delta = treatment - baseline; significant when |delta| > treatment std.
bool cell_significant(double delta, double treatment_std);
Table cell_table(const std::vector<CellInput>& cells);

/// lambda, delta_<dataset>..., median, q25, q75.
Table sweep_table(const SweepStats& stats);

/// run, epoch, H_L, H_U, dH for every recorded snapshot.
Table entropy_table(const std::vector<RunRecord>& runs);

struct AblationCell {
  std::string battery;   // labeled-off, offset, shannon, test-only
  std::string setting;   // e.g. "offset=-0.05"
  TSConfig config;
  MeanStd result;
  std::optional<MeanStd> reference;  // symmetric Tsallis at the same lambda
};

double combined_std(double a, double b);
Table ablation_table(const std::vector<AblationCell>& cells);

std::string hex64(std::uint64_t v);

/// One JSON object per epoch.
std::string epochs_jsonl(const RunRecord& run);
/// Seed, selection, digest and divergence info; no per-epoch data.
std::string run_summary_json(const RunRecord& run);

}  // namespace tsg
