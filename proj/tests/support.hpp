#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include "tsg/graph_data.hpp"
#include "tsg/models.hpp"
#include "tsg/objectives.hpp"
#include "tsg/rng.hpp"

namespace tsg::test {

inline std::filesystem::path data_dir() { return TSG_TEST_DATA_DIR; }
inline std::filesystem::path golden_dir() { return TSG_TEST_GOLDEN_DIR; }

// Fresh scratch directory under the build tree, removed on construction.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(TSG_TEST_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Small random graph: balanced labels, 2 train nodes per class, a few val
// and test nodes and at least one node in no split.
inline GraphBundle random_bundle(Index n, Index d, int classes, double edge_p, std::uint64_t seed) {
  Rng rng(seed);
  GraphBundle b;
  b.num_nodes = n;
  b.num_classes = classes;
  for (Index v = 0; v < n; ++v) b.labels.push_back(static_cast<int>(v % classes));
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      if (rng.bernoulli(edge_p)) b.edges.emplace_back(u, v);
    }
  }
  b.features.resize(n, d);
  for (Index v = 0; v < n; ++v) {
    for (Index j = 0; j < d; ++j) b.features(v, j) = rng.normal() + 0.5 * b.labels[static_cast<std::size_t>(v)];
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  rng.shuffle(order);
  std::vector<int> taken(static_cast<std::size_t>(classes), 0);
  std::vector<Index> rest;
  for (Index v : order) {
    auto& t = taken[static_cast<std::size_t>(b.labels[static_cast<std::size_t>(v)])];
    if (t < 2) {
      b.split.train.push_back(v);
      ++t;
    } else {
      rest.push_back(v);
    }
  }
  const std::size_t val = rest.size() / 3;
  const std::size_t test = rest.size() / 3;
  b.split.val.assign(rest.begin(), rest.begin() + static_cast<long>(val));
  b.split.test.assign(rest.begin() + static_cast<long>(val), rest.begin() + static_cast<long>(val + test));
  for (auto* list : {&b.split.train, &b.split.val, &b.split.test}) std::sort(list->begin(), list->end());
  b.validate();
  return b;
}

// Relabels node v as perm[v] everywhere.
inline GraphBundle permute_bundle(const GraphBundle& b, const std::vector<Index>& perm) {
  GraphBundle p = b;
  for (auto& [u, v] : p.edges) {
    Index a = perm[static_cast<std::size_t>(u)];
    Index c = perm[static_cast<std::size_t>(v)];
    if (a > c) std::swap(a, c);
    u = a;
    v = c;
  }
  std::sort(p.edges.begin(), p.edges.end());
  for (Index v = 0; v < b.num_nodes; ++v) {
    const auto pv = perm[static_cast<std::size_t>(v)];
    p.features.row(pv) = b.features.row(v);
    p.labels[static_cast<std::size_t>(pv)] = b.labels[static_cast<std::size_t>(v)];
  }
  for (auto* list : {&p.split.train, &p.split.val, &p.split.test}) {
    for (auto& v : *list) v = perm[static_cast<std::size_t>(v)];
    std::sort(list->begin(), list->end());
  }
  return p;
}

// The easy two-block fixture used by the training properties.
inline CsbmParams easy_csbm_params(std::uint64_t seed = 7) {
  CsbmParams p;
  p.nodes_per_class = 500;
  p.p_in = 0.1;
  p.p_out = 0.01;
  p.mu = 4.0;
  p.sigma = 1.0;
  p.dim = 16;
  p.seed = seed;
  return p;
}

inline ArchConfig one_layer_gcn() {
  ArchConfig a;
  a.backbone = Backbone::gcn;
  a.layers = 1;
  a.hidden = 64;
  a.dropout = 0.5;
  a.num_classes = 2;
  return a;
}

}  // namespace tsg::test
