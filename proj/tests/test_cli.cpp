#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "support.hpp"
#include "tsg/io.hpp"

using namespace tsg;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

json load_json(const fs::path& p) { return json::parse(read_file(p)); }

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// Overlapping classes so seeds disagree and the baseline std is nonzero.
fs::path hard_bundle() {
  static const fs::path dir = [] {
    const fs::path d = test::scratch("hard");
    const auto r = invoke({"gen-csbm", "--n-per-class", "80", "--p-in", "0.04", "--p-out", "0.03", "--mu", "0.8",
                        "--dim", "8", "--seed", "5", "--out", (d / "csbm").string()});
    REQUIRE(r.code == 0);
    return d / "csbm";
  }();
  return dir;
}

std::vector<std::string> small_run(const fs::path& data, const fs::path& out) {
  return {"--data", data.string(), "--model", "gcn", "--layers", "1", "--hidden", "16", "--epochs", "20",
          "--lr", "0.01", "--seeds", "3", "--out", out.string()};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_SUITE("gen-csbm") {
  TEST_CASE("round trip and byte-identical regeneration") {
    const fs::path d = test::scratch("gen");
    const std::vector<std::string> args{"gen-csbm", "--n-per-class", "50", "--seed", "3"};
    auto r1 = invoke(cat(args, {"--out", (d / "a").string()}));
    auto r2 = invoke(cat(args, {"--out", (d / "b").string()}));
    REQUIRE(r1.code == 0);
    REQUIRE(r2.code == 0);
    CHECK(r1.out.find("nodes=100") != std::string::npos);
    for (const char* f : {"meta.json", "edges.csv", "features.csv", "labels.csv", "splits.json"}) {
      CHECK(read_file(d / "a" / f) == read_file(d / "b" / f));
    }
    const GraphBundle b = load_bundle(d / "a");
    CHECK(b.num_nodes == 100);
    CHECK(b.num_classes == 2);
    CHECK(b.split.train.size() == 40);
  }

  TEST_CASE("infeasible split exits 2") {
    const fs::path d = test::scratch("gen-bad");
    const auto r = invoke({"gen-csbm", "--n-per-class", "10", "--out", (d / "x").string()});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("infeasible") != std::string::npos);
  }
}

TEST_SUITE("train") {
  TEST_CASE("writes one record per seed and an aggregate") {
    const fs::path out = test::scratch("train") / "out";
    const auto r = invoke(cat({"train"}, small_run(hard_bundle(), out)));
    REQUIRE(r.code == 0);
    const json s = load_json(out / "summary.json");
    CHECK(s.at("runs").size() == 3);
    CHECK(s.at("variant") == "symmetric");
    CHECK_FALSE(s.at("partial").get<bool>());
    for (int seed = 0; seed < 3; ++seed) {
      const std::string stem = "seed-" + std::to_string(seed);
      CHECK(count_lines(read_file(out / "runs" / (stem + ".jsonl"))) == 20);
      CHECK(load_json(out / "runs" / (stem + ".json")).at("status") == "ok");
    }
    CHECK(count_lines(read_file(out / "entropy.csv")) == 1 + 3 * 20);
    CHECK(fs::exists(out / "entropy.jsonl"));
  }

  TEST_CASE("lambda 0 matches the supervised-only loop byte for byte") {
    const fs::path d = test::scratch("train-zero");
    REQUIRE(invoke(cat({"train", "--lambda", "0"}, small_run(hard_bundle(), d / "ts"))).code == 0);
    REQUIRE(invoke(cat({"train", "--supervised-only"}, small_run(hard_bundle(), d / "sup"))).code == 0);
    json ts = load_json(d / "ts" / "summary.json"), sup = load_json(d / "sup" / "summary.json");
    CHECK(ts.at("runs") == sup.at("runs"));
    CHECK(ts.at("mean") == sup.at("mean"));
    for (int seed = 0; seed < 3; ++seed) {
      const std::string f = "seed-" + std::to_string(seed) + ".json";
      CHECK(read_file(d / "ts" / "runs" / f) == read_file(d / "sup" / "runs" / f));
    }
  }

  TEST_CASE("labeled coefficient override is recorded") {
    const fs::path out = test::scratch("train-loff") / "out";
    REQUIRE(invoke(cat({"train", "--lambda-labeled", "0", "--seeds", "1"}, small_run(hard_bundle(), out))).code == 0);
    const json spec = load_json(out / "spec.json");
    CHECK(spec.at("ts").at("variant") == "labeled-off");
    CHECK(spec.at("ts").at("lambda_labeled") == 0.0);
  }

  TEST_CASE("echoed spec reruns to identical outputs") {
    const fs::path d = test::scratch("train-config");
    REQUIRE(invoke(cat({"train", "--q", "1"}, small_run(hard_bundle(), d / "first"))).code == 0);
    const auto r = invoke({"train", "--config", (d / "first" / "spec.json").string(), "--out", (d / "second").string()});
    REQUIRE(r.code == 0);
    CHECK(read_file(d / "first" / "summary.json") == read_file(d / "second" / "summary.json"));
    CHECK(read_file(d / "first" / "entropy.csv") == read_file(d / "second" / "entropy.csv"));
  }

  TEST_CASE("bad bundle exits 2 with the offending file") {
    const fs::path d = test::scratch("train-bad");
    fs::copy(test::data_dir() / "toy4", d / "toy4");
    write_file_atomic(d / "toy4" / "labels.csv", "0\n0\n7\n1\n");
    const auto r = invoke({"train", "--data", (d / "toy4").string(), "--out", (d / "out").string()});
    CHECK(r.code == cli::kExitUsage);
    CHECK(r.err.find("labels.csv:3") != std::string::npos);
    CHECK(invoke({"train", "--data", (d / "missing").string()}).code == cli::kExitUsage);
    CHECK(invoke({"train", "--model", "transformer"}).code == cli::kExitUsage);
  }

  TEST_CASE("divergence exits 3 and is recorded") {
    const fs::path out = test::scratch("train-div") / "out";
    const auto r = invoke({"train", "--data", hard_bundle().string(), "--layers", "3", "--hidden", "32", "--epochs",
                        "30", "--lr", "1e300", "--seeds", "2", "--out", out.string()});
    CHECK(r.code == cli::kExitDiverged);
    CHECK(r.err.find("diverged") != std::string::npos);
    const json s = load_json(out / "summary.json");
    CHECK(s.at("partial").get<bool>());
    CHECK(load_json(out / "runs" / "seed-0.json").at("status") == "diverged");
  }
}

TEST_SUITE("sweep") {
  TEST_CASE("grid parsing") {
    const auto g = cli::parse_lambda_grid("-0.5:2.0:0.25");
    CHECK(g.size() == 11);
    CHECK(std::count(g.begin(), g.end(), 0.0) == 1);
    CHECK(g.front() == -0.5);
    CHECK(g.back() == 2.0);
    CHECK(cli::parse_lambda_grid("0.1:0.3:0.1").size() == 4);
    CHECK_THROWS_AS(cli::parse_lambda_grid("1:0:0.1"), InvalidArgument);
    CHECK_THROWS_AS(cli::parse_lambda_grid("0:1:0"), InvalidArgument);
    CHECK_THROWS_AS(cli::parse_lambda_grid("0:1"), InvalidArgument);
    CHECK_THROWS_AS(cli::parse_lambda_grid("a:b:c"), InvalidArgument);
    const fs::path d = test::scratch("sweep-bad");
    CHECK(invoke({"sweep", "--data", hard_bundle().string(), "--lambdas", "0:1", "--out", d.string()}).code ==
          cli::kExitUsage);
  }

  TEST_CASE("single dataset median is its own delta; resume reuses cells") {
    const fs::path out = test::scratch("sweep") / "out";
    const auto args = cat({"sweep", "--lambdas", "0:0.5:0.5"}, small_run(hard_bundle(), out));
    const auto first = invoke(args);
    REQUIRE(first.code == 0);
    const std::string name = hard_bundle().filename().string();
    const auto rows = read_file(out / "sweep.jsonl");
    std::istringstream in(rows);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      const json j = json::parse(line);
      REQUIRE_FALSE(j.at("median").is_null());
      CHECK(j.at("median") == j.at("delta_" + name));
      if (j.at("lambda") == 0.0) CHECK(j.at("median") == 0.0);
      ++n;
    }
    CHECK(n == 2);
    CHECK(fs::exists(out / "cells" / name / "lambda_0.5" / "seed-2.json"));

    const std::string before = read_file(out / "sweep.csv");
    const auto again = invoke(cat(args, {"--resume"}));
    REQUIRE(again.code == 0);
    CHECK(again.out.find("(6 cells reused)") != std::string::npos);
    CHECK(read_file(out / "sweep.csv") == before);

    // A different epoch count changes every cell digest.
    auto changed = cat(args, {"--resume"});
    changed.push_back("--epochs");
    changed.push_back("5");
    const auto fresh = invoke(changed);
    REQUIRE(fresh.code == 0);
    CHECK(fresh.out.find("(0 cells reused)") != std::string::npos);
  }
}

TEST_SUITE("ablate") {
  TEST_CASE("offset battery has five cells plus the reference") {
    const fs::path out = test::scratch("ablate-offset") / "out";
    REQUIRE(invoke(cat({"ablate", "--variant", "offset", "--seeds", "2"}, small_run(hard_bundle(), out))).code == 0);
    const std::string jsonl = read_file(out / "ablation.jsonl");
    CHECK(count_lines(jsonl) == 6);
    std::istringstream in(jsonl);
    std::string line;
    std::getline(in, line);
    CHECK(json::parse(line).at("battery") == "reference");
    std::vector<double> diffs;
    while (std::getline(in, line)) {
      const json j = json::parse(line);
      CHECK(j.at("battery") == "offset");
      diffs.push_back(j.at("lambda_unlabeled").get<double>() - j.at("lambda_labeled").get<double>());
    }
    for (double d : diffs) CHECK(d == doctest::Approx(0.5));
  }

  TEST_CASE("variant metadata") {
    const fs::path d = test::scratch("ablate-meta");
    REQUIRE(invoke(cat({"ablate", "--variant", "test-only", "--seeds", "1"}, small_run(hard_bundle(), d / "t"))).code ==
            0);
    json cells = load_json(d / "t" / "spec.json").at("cells");
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].at("unlabeled_set") == "test-only");
    REQUIRE(invoke(cat({"ablate", "--variant", "shannon", "--seeds", "1"}, small_run(hard_bundle(), d / "s"))).code == 0);
    cells = load_json(d / "s" / "spec.json").at("cells");
    CHECK(cells[0].at("q") == 1);
    CHECK(invoke(cat({"ablate", "--variant", "bogus"}, small_run(hard_bundle(), d / "b"))).code == cli::kExitUsage);
  }
}

TEST_SUITE("report") {
  TEST_CASE("tables rebuild from stored outputs") {
    const fs::path d = test::scratch("report");
    REQUIRE(invoke(cat({"train", "--lambda", "0"}, small_run(hard_bundle(), d / "base"))).code == 0);
    REQUIRE(invoke(cat({"train"}, small_run(hard_bundle(), d / "ts"))).code == 0);
    REQUIRE(invoke(cat({"sweep", "--lambdas", "0:0.25:0.25"}, small_run(hard_bundle(), d / "sweep"))).code == 0);

    REQUIRE(invoke({"report", "--kind", "cell_table", "--baseline", (d / "base").string(), "--treatment",
                 (d / "ts").string(), "--label", "csbm", "--out", (d / "r").string()})
                .code == 0);
    const std::string cells = read_file(d / "r" / "cell_table.csv");
    CHECK(cells.rfind("label,baseline_mean", 0) == 0);
    CHECK(cells.find("\ncsbm,") != std::string::npos);

    REQUIRE(invoke({"report", "--kind", "sweep_csv", "--in", (d / "sweep").string(), "--out", (d / "r").string()})
                .code == 0);
    CHECK(read_file(d / "r" / "sweep.csv") == read_file(d / "sweep" / "sweep.csv"));

    REQUIRE(invoke({"report", "--kind", "entropy_csv", "--in", (d / "ts").string(), "--out", (d / "r").string()})
                .code == 0);
    CHECK(read_file(d / "r" / "entropy.csv") == read_file(d / "ts" / "entropy.csv"));

    const auto missing = invoke({"report", "--kind", "cell_table", "--treatment", (d / "ts").string(), "--out",
                              (d / "r2").string()});
    CHECK(missing.code == cli::kExitUsage);
    CHECK(missing.err.find("baseline") != std::string::npos);
  }

  TEST_CASE("ablation deltas rebuild") {
    const fs::path d = test::scratch("report-ablate");
    REQUIRE(invoke(cat({"ablate", "--variant", "labeled-off", "--seeds", "2"}, small_run(hard_bundle(), d / "a"))).code ==
            0);
    REQUIRE(invoke({"report", "--kind", "ablation_delta", "--in", (d / "a").string(), "--out", (d / "r").string()})
                .code == 0);
    CHECK(read_file(d / "r" / "ablation.csv") == read_file(d / "a" / "ablation.csv"));
  }
}

TEST_CASE("help exits 0, unknown command exits 2") {
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"frobnicate"}).code == cli::kExitUsage);
  CHECK(invoke({}).code == cli::kExitUsage);
}
