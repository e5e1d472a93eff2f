#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tsg/grad_check.hpp"

using namespace tsg;

namespace {

// Two nodes: a is labeled class 0, b is in the test split.
GraphBundle two_node_bundle() {
  GraphBundle b;
  b.num_nodes = 2;
  b.num_classes = 2;
  b.features = Matrix::Zero(2, 1);
  b.labels = {0, 1};
  b.split = Split{{0}, {}, {1}};
  return b;
}

RowVector random_simplex(Rng& rng, Index c, bool interior) {
  RowVector p(c);
  for (Index i = 0; i < c; ++i) p(i) = interior ? 0.01 + rng.uniform() : -std::log(1.0 - rng.uniform());
  return p / p.sum();
}

std::span<const double> as_span(const RowVector& p) { return {p.data(), static_cast<std::size_t>(p.size())}; }

// Independent evaluation of the sharpening objective straight from the
// definition, without the computation graph.
double oracle_total(const Matrix& p, const GraphBundle& b, const TSConfig& cfg) {
  auto mean_over = [&](const std::vector<Index>& nodes, auto f) {
    double s = 0.0;
    for (Index v : nodes) s += f(v);
    return nodes.empty() ? 0.0 : s / static_cast<double>(nodes.size());
  };
  auto entropy = [&](Index v) {
    double s = 0.0;
    for (Index c = 0; c < p.cols(); ++c) {
      const double x = p(v, c);
      s += cfg.order == EntropyOrder::tsallis2 ? -x * x : (x > 0 ? -x * std::log(x) : 0.0);
    }
    return cfg.order == EntropyOrder::tsallis2 ? 1.0 + s : s;
  };
  const auto& lab = b.labeled_nodes();
  const double ce = mean_over(lab, [&](Index v) { return -std::log(p(v, b.labels[static_cast<std::size_t>(v)])); });
  const auto u = cfg.unlabeled_set == UnlabeledSet::all_non_train ? b.unlabeled_nodes() : b.test_and_extra_nodes();
  return ce + cfg.lambda_unlabeled * mean_over(u, entropy) + cfg.lambda_labeled * mean_over(lab, entropy);
}

}  // namespace

TEST_SUITE("cross entropy") {
  TEST_CASE("examples") {
    Matrix p(2, 2);
    p << 1, 0, 0.5, 0.5;
    const std::vector<Index> mask{0, 1};
    const std::vector<int> y{0, 1};
    const auto ce = supervised_ce(p, y, mask);
    CHECK(ce.sum == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(ce.mean == doctest::Approx(std::log(2.0) / 2).epsilon(1e-15));

    Matrix q(1, 2);
    q << 0.8, 0.2;
    const std::vector<Index> one{0};
    const std::vector<int> y0{0};
    CHECK(std::abs(supervised_ce(q, y0, one).sum - 0.2231435513142097) < 1e-15);

    const std::vector<int> unknown{kUnknownLabel};
    CHECK_THROWS_AS(supervised_ce(q, unknown, one), InvalidArgument);
  }

  TEST_CASE("clamps zero probabilities") {
    Matrix p(1, 2);
    p << 1, 0;
    const std::vector<Index> mask{0};
    const std::vector<int> y{1};
    CHECK(supervised_ce(p, y, mask).sum == doctest::Approx(-std::log(1e-12)));
  }
}

TEST_SUITE("entropy") {
  TEST_CASE("examples") {
    const std::vector<double> onehot{0, 1, 0}, uniform{0.25, 0.25, 0.25, 0.25}, p64{0.6, 0.4}, half{0.5, 0.5};
    CHECK(entropy_R(onehot, EntropyOrder::tsallis2) == 0.0);
    CHECK(entropy_R(uniform, EntropyOrder::tsallis2) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(std::abs(entropy_R(p64, EntropyOrder::tsallis2) - 0.48) < 1e-15);
    CHECK(std::abs(entropy_R(half, EntropyOrder::shannon) - std::log(2.0)) < 1e-15);
    CHECK(entropy_R(onehot, EntropyOrder::shannon) == 0.0);
  }

  TEST_CASE("off-simplex input is rejected") {
    const std::vector<double> heavy{0.6, 0.5}, negative{1.1, -0.1};
    CHECK_THROWS_AS(entropy_R(heavy, EntropyOrder::tsallis2), InvalidArgument);
    CHECK_THROWS_AS(entropy_R(negative, EntropyOrder::shannon), InvalidArgument);
    const std::vector<double> close{0.5, 0.5 + 5e-10};
    CHECK_NOTHROW(entropy_R(close, EntropyOrder::tsallis2));
  }

  TEST_CASE("bounds over 10^4 random rows") {
    Rng rng(4);
    for (int t = 0; t < 10000; ++t) {
      const Index c = 2 + static_cast<Index>(rng.below(9));
      const RowVector p = random_simplex(rng, c, false);
      const double s2 = entropy_R(as_span(p), EntropyOrder::tsallis2);
      const double h = entropy_R(as_span(p), EntropyOrder::shannon);
      REQUIRE(s2 >= 0.0);
      REQUIRE(s2 <= 1.0 - 1.0 / static_cast<double>(c) + 1e-15);
      REQUIRE(h >= 0.0);
      REQUIRE(h <= std::log(static_cast<double>(c)) + 1e-14);
    }
    for (Index c = 2; c <= 10; ++c) {
      const RowVector u = RowVector::Constant(c, 1.0 / static_cast<double>(c));
      CHECK(entropy_R(as_span(u), EntropyOrder::shannon) == doctest::Approx(std::log(static_cast<double>(c))));
    }
  }
}

TEST_SUITE("decomposition") {
  TEST_CASE("examples") {
    const std::vector<double> half{0.5, 0.5};
    const auto [h, r] = ce_decomposition(half, 0);
    CHECK(std::abs(h - std::log(2.0)) < 1e-15);
    CHECK(std::abs(r) < 1e-15);

    const double eps = 1e-3;
    const std::vector<double> soft{1 - eps, eps};
    const auto [h2, r2] = ce_decomposition(soft, 0);
    CHECK(std::abs(h2 + r2 + std::log(1 - eps)) < 1e-12);
  }

  TEST_CASE("boundary rows are rejected") {
    const std::vector<double> edge{1.0, 0.0};
    CHECK_THROWS_AS(ce_decomposition(edge, 0), InvalidArgument);
    const std::vector<double> ok{0.3, 0.7};
    CHECK_THROWS_AS(ce_decomposition(ok, 2), InvalidArgument);
  }

  TEST_CASE("identity over 10^4 random interior rows") {
    Rng rng(5);
    for (int t = 0; t < 10000; ++t) {
      const Index c = 2 + static_cast<Index>(rng.below(9));
      const RowVector p = random_simplex(rng, c, true);
      const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(c)));
      const auto [h, r] = ce_decomposition(as_span(p), y);
      REQUIRE(std::abs(h + r + std::log(p(y))) <= 1e-9);
    }
  }
}

TEST_SUITE("ts objective") {
  TEST_CASE("two-node worked example") {
    const GraphBundle b = two_node_bundle();
    Matrix p(2, 2);
    p << 0.8, 0.2, 0.6, 0.4;
    const LossReport r = ts_objective(p, b, TSConfig::symmetric(0.25));
    const double oracle = -std::log(0.8) + 0.25 * (1 - 0.36 - 0.16) - 0.25 * (1 - 0.64 - 0.04);
    CHECK(std::abs(r.total - oracle) < 1e-15);
    CHECK(std::abs(r.total - 0.263144) < 1e-6);
    CHECK(r.lambda_unlabeled == 0.25);
    CHECK(r.lambda_labeled == -0.25);
    CHECK(std::abs(r.unlabeled_entropy - 0.48) < 1e-15);
    CHECK(std::abs(r.labeled_entropy - 0.32) < 1e-15);
  }

  TEST_CASE("zero coefficients collapse to cross entropy") {
    const GraphBundle b = two_node_bundle();
    Matrix p(2, 2);
    p << 0.8, 0.2, 0.6, 0.4;
    const LossReport r = ts_objective(p, b, TSConfig::supervised());
    CHECK(r.total == r.supervised);
    CHECK(r.unlabeled_entropy == 0.0);
    CHECK(r.labeled_entropy == 0.0);

    ValueGraph g;
    const NodeId pn = g.constant(p);
    const LossNodes nodes = build_ts_loss(g, pn, b, TSConfig::supervised());
    CHECK(nodes.total.index == nodes.supervised.index);
    CHECK_FALSE(nodes.unlabeled_entropy.has_value());
  }

  TEST_CASE("report identity and oracle agreement on 10^3 random inputs") {
    Rng rng(6);
    for (int t = 0; t < 1000; ++t) {
      const GraphBundle b = test::random_bundle(12, 1, 3, 0.0, static_cast<std::uint64_t>(t));
      Matrix p(12, 3);
      for (Index v = 0; v < 12; ++v) p.row(v) = random_simplex(rng, 3, true);
      TSConfig cfg{4 * rng.uniform() - 2, 4 * rng.uniform() - 2,
                   rng.bernoulli(0.5) ? EntropyOrder::shannon : EntropyOrder::tsallis2,
                   rng.bernoulli(0.5) ? UnlabeledSet::all_non_train : UnlabeledSet::test_and_extra};
      const LossReport r = ts_objective(p, b, cfg);
      const double recombined =
          r.supervised + r.lambda_unlabeled * r.unlabeled_entropy + r.lambda_labeled * r.labeled_entropy;
      REQUIRE(std::abs(r.total - recombined) <= 1e-12);
      REQUIRE(std::abs(r.total - oracle_total(p, b, cfg)) <= 1e-12);
    }
  }

  TEST_CASE("total grows with lambda_U when unlabeled entropy is positive") {
    const GraphBundle b = test::random_bundle(12, 1, 2, 0.0, 3);
    Rng rng(7);
    Matrix p(12, 2);
    for (Index v = 0; v < 12; ++v) p.row(v) = random_simplex(rng, 2, true);
    double prev = -1e300;
    for (double lam = -1.0; lam <= 1.0; lam += 0.25) {
      const double t = ts_objective(p, b, TSConfig{lam, -0.25}).total;
      CHECK(t > prev);
      prev = t;
    }
  }

  TEST_CASE("errors") {
    GraphBundle b = two_node_bundle();
    Matrix p(2, 2);
    p << 0.8, 0.2, 0.6, 0.4;
    Matrix bad = p;
    bad(1, 0) = 0.7;
    CHECK_THROWS_AS(ts_objective(bad, b, TSConfig::symmetric(0.25)), InvalidArgument);

    GraphBundle no_test = b;
    no_test.split.test.clear();
    no_test.split.val = {1};
    // Restricted set without test/extra nodes is empty.
    TSConfig restricted = TSConfig::symmetric(0.25);
    restricted.unlabeled_set = UnlabeledSet::test_and_extra;
    CHECK_THROWS_AS(ts_objective(p, no_test, restricted), InvalidArgument);
    restricted.lambda_unlabeled = 0.0;
    CHECK_NOTHROW(ts_objective(p, no_test, restricted));

    GraphBundle unlabeled = b;
    unlabeled.split.train.clear();
    CHECK_THROWS_AS(ts_objective(p, unlabeled, TSConfig::supervised()), InvalidArgument);
  }

  TEST_CASE("variant labels") {
    CHECK(TSConfig::supervised().variant_label() == "supervised");
    CHECK(TSConfig::symmetric(0.25).variant_label() == "symmetric");
    CHECK(TSConfig{0.25, 0.0}.variant_label() == "labeled-off");
    CHECK(TSConfig{0.30, -0.20}.variant_label() == "offset");
    CHECK(TSConfig::symmetric(0.25, EntropyOrder::shannon).variant_label() == "shannon");
    TSConfig t = TSConfig::symmetric(0.25);
    t.unlabeled_set = UnlabeledSet::test_and_extra;
    CHECK(t.variant_label() == "test-only");
    CHECK(parse_unlabeled_set("test-only") == UnlabeledSet::test_and_extra);
    CHECK_THROWS_AS(parse_unlabeled_set("val"), InvalidArgument);
  }

  TEST_CASE("gradient with respect to logits on every variant axis") {
    const GraphBundle b = test::random_bundle(12, 1, 3, 0.0, 8);
    Rng rng(9);
    Matrix z(12, 3);
    for (Index i = 0; i < z.size(); ++i) z.data()[i] = rng.normal();
    TSConfig test_only = TSConfig::symmetric(0.25);
    test_only.unlabeled_set = UnlabeledSet::test_and_extra;
    const std::vector<TSConfig> variants{TSConfig::symmetric(0.25),
                                         TSConfig::symmetric(0.25, EntropyOrder::shannon),
                                         TSConfig{0.25, 0.0},
                                         TSConfig{0.30, -0.20},
                                         TSConfig{0.20, -0.30},
                                         test_only,
                                         TSConfig::symmetric(-0.5)};
    for (const auto& cfg : variants) {
      ScalarFunction fn = [&](std::span<const Matrix> args, std::vector<Matrix>* grads) {
        ValueGraph g;
        const NodeId zi = g.parameter(args[0]);
        const LossNodes loss = build_ts_loss(g, g.row_softmax(zi), b, cfg);
        if (grads) {
          g.backward(loss.total);
          *grads = {g.grad(zi)};
        }
        return g.scalar(loss.total);
      };
      CAPTURE(cfg.variant_label());
      CHECK(grad_check(fn, {z}).max_relative_error <= 1e-4);
    }
  }
}
