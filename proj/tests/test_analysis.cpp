#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "support.hpp"
#include "tsg/io.hpp"
#include "tsg/report.hpp"
#include "tsg/training.hpp"

using namespace tsg;

namespace {

// Mann-Whitney U over every (positive, negative) pair.
double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

std::vector<Index> all_nodes(std::size_t n) {
  std::vector<Index> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = static_cast<Index>(i);
  return m;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("accuracy examples") {
    const std::vector<int> y{0, 1, 1, 0};
    CHECK(accuracy(y, y, all_nodes(4)) == 1.0);
    const std::vector<int> pred{0, 1, 0, 0};
    CHECK(accuracy(pred, y, all_nodes(4)) == 0.75);
    CHECK_THROWS_AS(accuracy(pred, y, {}), InvalidArgument);
    const std::vector<int> unknown{0, -1, 1, 0};
    CHECK_THROWS_AS(accuracy(pred, unknown, all_nodes(4)), InvalidArgument);
  }

  TEST_CASE("uniform logits predict class 0") {
    const std::vector<int> y{0, 0, 0, 1, 1, 0, 1, 0};
    const Matrix p = row_softmax(Matrix::Zero(8, 2));
    CHECK(evaluate_metric(Metric::accuracy, p, y, all_nodes(8)) == 5.0 / 8.0);
  }

  TEST_CASE("roc_auc examples") {
    const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
    const std::vector<int> y{0, 0, 1, 1};
    CHECK(roc_auc(s, y, all_nodes(4)) == 0.75);
    const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
    CHECK(roc_auc(sep, y, all_nodes(4)) == 1.0);
    const std::vector<double> flat(4, 0.3);
    CHECK(roc_auc(flat, y, all_nodes(4)) == 0.5);
    const std::vector<int> single{1, 1, 1, 1};
    CHECK_THROWS_AS(roc_auc(s, single, all_nodes(4)), InvalidArgument);
  }

  TEST_CASE("roc_auc equals brute-force Mann-Whitney on random small inputs") {
    Rng rng(13);
    for (int t = 0; t < 2000; ++t) {
      const std::size_t n = 2 + rng.below(11);
      std::vector<double> s(n);
      std::vector<int> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng.below(5)) / 4.0;  // coarse grid forces ties
        y[i] = static_cast<int>(rng.below(2));
      }
      y[0] = 0;
      y[1] = 1;
      REQUIRE(roc_auc(s, y, all_nodes(n)) == brute_auc(s, y));
    }
  }
}

TEST_SUITE("glass delta") {
  TEST_CASE("table arithmetic") {
    CHECK(std::abs(glass_delta(85.74, 84.54, 0.86) - 1.3953) < 1e-3);
    CHECK(std::abs(glass_delta(75.18, 72.68, 0.43) - 5.814) < 1e-3);
    CHECK(glass_delta(80.0, 80.0, 1.0) == 0.0);
    try {
      glass_delta(1.0, 0.5, 0.0);
      FAIL("expected rejection");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("raw difference") != std::string::npos);
    }
  }

  TEST_CASE("antisymmetric and scale free") {
    Rng rng(3);
    for (int t = 0; t < 1000; ++t) {
      const double a = rng.uniform() * 100, b = rng.uniform() * 100, s = 0.1 + rng.uniform() * 5;
      const double k = 0.01 + rng.uniform() * 10;
      CHECK(glass_delta(a, b, s) == -glass_delta(b, a, s));
      CHECK(glass_delta(b + k * (a - b), b, k * s) == doctest::Approx(glass_delta(a, b, s)).epsilon(1e-9));
    }
  }
}

TEST_SUITE("aggregation") {
  TEST_CASE("quantiles by linear interpolation") {
    const std::vector<double> three{3, 1, 2};
    auto q = summarize(three);
    CHECK(q.median == 2.0);
    CHECK(q.q25 == 1.5);
    CHECK(q.q75 == 2.5);
    const std::vector<double> one{4.2};
    q = summarize(one);
    CHECK(q.median == 4.2);
    CHECK(q.q25 == 4.2);
    CHECK(q.q75 == 4.2);
    const std::vector<double> four{-1, 0, 1, 2};
    CHECK(summarize(four).median == 0.5);
    CHECK_THROWS_AS(quantile({}, 0.5), InvalidArgument);
  }

  TEST_CASE("mean and sample std") {
    const std::vector<double> v{80, 82};
    const auto ms = mean_std(v);
    CHECK(ms.mean == 81.0);
    CHECK(std::abs(ms.std - std::sqrt(2.0)) < 1e-15);
  }

  TEST_CASE("sweep aggregate") {
    std::vector<SweepPoint> cells{{"a", 0.0, 80, 2, 0}, {"a", 0.5, 84, 1, 0}, {"b", 0.0, 70, 1, 0},
                                  {"b", 0.5, 71, 1, 0}, {"c", 0.0, 60, 4, 0}, {"c", 0.5, 58, 3, 0}};
    const SweepStats s = sweep_aggregate(cells);
    CHECK(s.lambdas == std::vector<double>{0.0, 0.5});
    CHECK(s.points.at(0.5).at("a").delta == 2.0);
    CHECK(s.points.at(0.5).at("b").delta == 1.0);
    CHECK(s.points.at(0.5).at("c").delta == -0.5);
    CHECK(s.across_datasets.at(0.5).median == 1.0);
    CHECK(s.across_datasets.at(0.5).q25 == 0.25);
    CHECK(s.across_datasets.at(0.5).q75 == 1.5);
    CHECK(s.across_datasets.at(0.0).median == 0.0);

    std::vector<SweepPoint> shuffled{cells[5], cells[2], cells[0], cells[3], cells[4], cells[1]};
    const SweepStats t = sweep_aggregate(shuffled);
    CHECK(t.across_datasets.at(0.5).median == s.across_datasets.at(0.5).median);
    CHECK(t.across_datasets.at(0.5).q25 == s.across_datasets.at(0.5).q25);

    CHECK_THROWS_AS(sweep_aggregate({}), InvalidArgument);
    CHECK_THROWS_AS(sweep_aggregate({{"a", 0.5, 1, 1, 0}}), InvalidArgument);
    CHECK_THROWS_AS(sweep_aggregate({{"a", 0.0, 1, 1, 0}, {"b", 0.5, 1, 1, 0}}), InvalidArgument);

    const SweepStats flat = sweep_aggregate({{"a", 0.0, 1, 0, 0}, {"a", 0.5, 1, 0, 0}});
    CHECK(std::isnan(flat.points.at(0.5).at("a").delta));
    CHECK(std::isnan(flat.across_datasets.at(0.5).median));
  }
}

TEST_SUITE("reports") {
  TEST_CASE("cell table flags |delta| above the treatment std") {
    const Table t = cell_table({{"cora-gcn", MeanStd{84.54, 0.86, true}, MeanStd{85.74, 0.54, true}},
                                {"same", MeanStd{70, 1, true}, MeanStd{70, 1, true}}});
    REQUIRE(t.rows.size() == 2);
    CHECK(std::abs(std::get<double>(t.rows[0][5]) - 1.20) < 1e-12);
    CHECK(std::get<bool>(t.rows[0][6]));
    CHECK(std::get<double>(t.rows[1][5]) == 0.0);
    CHECK_FALSE(std::get<bool>(t.rows[1][6]));
    CHECK_THROWS_AS(cell_table({{"orphan", std::nullopt, MeanStd{1, 0, true}}}), InvalidArgument);
  }

  TEST_CASE("significance re-derived from per-seed metrics") {
    const std::vector<double> base{0.80, 0.82, 0.81, 0.79, 0.80}, treat{0.83, 0.84, 0.82, 0.85, 0.83};
    const MeanStd b = mean_std(base), t = mean_std(treat);
    const Table table = cell_table({{"x", b, t}});
    double mb = 0, mt = 0;
    for (int i = 0; i < 5; ++i) {
      mb += base[static_cast<std::size_t>(i)] / 5;
      mt += treat[static_cast<std::size_t>(i)] / 5;
    }
    double var = 0;
    for (double v : treat) var += (v - mt) * (v - mt) / 4;
    CHECK(std::get<bool>(table.rows[0][6]) == (std::abs(mt - mb) > std::sqrt(var)));
  }

  TEST_CASE("csv and jsonl rendering") {
    Table t{{"name", "x", "n", "flag"}, {{std::string("a,b"), 0.1, std::int64_t{3}, true}}};
    CHECK(to_csv(t) == "name,x,n,flag\n\"a,b\",0.10000000000000001,3,true\n");
    CHECK(to_jsonl(t) == "{\"name\":\"a,b\",\"x\":0.10000000000000001,\"n\":3,\"flag\":true}\n");
    Table nan{{"x"}, {{std::nan("")}}};
    CHECK(to_jsonl(nan) == "{\"x\":null}\n");
  }

  TEST_CASE("sweep table columns") {
    const SweepStats s = sweep_aggregate({{"a", 0.0, 80, 2, 0}, {"a", 1.0, 84, 1, 0}});
    const Table t = sweep_table(s);
    CHECK(t.header == std::vector<std::string>{"lambda", "delta_a", "median", "q25", "q75"});
    CHECK(std::get<double>(t.rows[1][1]) == 2.0);
    CHECK(std::get<double>(t.rows[1][2]) == 2.0);
  }

  TEST_CASE("ablation table combines stds") {
    const Table t = ablation_table({{"offset", "offset=+0.05", TSConfig{0.3, -0.2}, MeanStd{0.80, 0.03, true},
                                     MeanStd{0.84, 0.04, true}}});
    CHECK(std::get<double>(t.rows[0][11]) == doctest::Approx(0.05));
    CHECK_FALSE(std::get<bool>(t.rows[0][12]));
    CHECK_THROWS_AS(ablation_table({{"x", "y", TSConfig{}, MeanStd{}, std::nullopt}}), InvalidArgument);
  }

  TEST_CASE("golden files from a fixed 2-seed csbm run") {
    CsbmParams p = test::easy_csbm_params(11);
    p.nodes_per_class = 60;
    p.mu = 1.0;
    p.p_in = 0.05;
    p.p_out = 0.02;
    const GraphBundle b = gen_csbm(p);
    ArchConfig a = test::one_layer_gcn();
    TrainConfig train;
    train.epochs = 25;
    train.lr = 0.01;
    train.seeds = {0, 1};
    const auto base = multi_seed_eval(b, a, TSConfig::supervised(), train);
    const auto ts = multi_seed_eval(b, a, TSConfig::symmetric(0.25), train);
    const std::string cells = to_csv(cell_table({{"csbm-gcn", base.test, ts.test}}));
    const std::string entropy = to_csv(entropy_table(ts.runs));
    std::string summaries;
    for (const auto& r : ts.runs) summaries += run_summary_json(r);

    const auto dir = test::golden_dir();
    const char* update = std::getenv("TSG_UPDATE_GOLDEN");
    if (update != nullptr && std::string(update) == "1") {
      write_file_atomic(dir / "cell_table.csv", cells);
      write_file_atomic(dir / "entropy.csv", entropy);
      write_file_atomic(dir / "summaries.jsonl", summaries);
    }
    CHECK(read_file(dir / "cell_table.csv") == cells);
    CHECK(read_file(dir / "entropy.csv") == entropy);
    CHECK(read_file(dir / "summaries.jsonl") == summaries);
  }
}
