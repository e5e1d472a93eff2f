#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsg/graph_data.hpp"
#include "tsg/models.hpp"
#include "tsg/objectives.hpp"
#include "tsg/training.hpp"

namespace tsg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDiverged = 3;

// Everything needed to relaunch a run. num_classes is filled in from the
// bundle when the run spec is resolved.
struct RunSpec {
  std::string data;
  ArchConfig arch;
  TSConfig ts = TSConfig::symmetric(kUniversalLambda);
  TrainConfig train;
  std::string out = "out";
  int jobs = 1;
  bool supervised_only = false;
};

nlohmann::json to_json(const RunSpec& spec);
RunSpec run_spec_from_json(const nlohmann::json& j);

// start:stop:step, both ends inclusive, lambda = 0 always present.
std::vector<double> parse_lambda_grid(const std::string& text);

// FNV-1a over the bundle's graph, features, labels and split.
std::uint64_t bundle_digest(const GraphBundle& bundle);

// Entry point shared by the executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsg::cli
