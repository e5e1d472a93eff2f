#include "tsg/graph_data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tsg/rng.hpp"

namespace tsg {

namespace {

std::string id(Index v) { return std::to_string(v); }

// 0 = in no list, 1 = train, 2 = val, 3 = test.
std::vector<int> membership(const GraphBundle& b) {
  std::vector<int> m(static_cast<std::size_t>(b.num_nodes), 0);
  const std::vector<Index>* lists[] = {&b.split.train, &b.split.val, &b.split.test};
  const char* names[] = {"train", "val", "test"};
  for (int k = 0; k < 3; ++k) {
    for (Index v : *lists[k]) {
      if (v < 0 || v >= b.num_nodes) {
        throw InvalidArgument(std::string("split: ") + names[k] + " node " + id(v) + " out of range");
      }
      auto& slot = m[static_cast<std::size_t>(v)];
      if (slot != 0) {
        throw InvalidArgument(std::string("split: node ") + id(v) + " appears in both " +
                              names[slot - 1] + " and " + names[k]);
      }
      slot = k + 1;
    }
  }
  return m;
}

std::vector<Index> select(const GraphBundle& b, auto&& keep) {
  const auto m = membership(b);
  std::vector<Index> out;
  for (Index v = 0; v < b.num_nodes; ++v) {
    if (keep(m[static_cast<std::size_t>(v)])) out.push_back(v);
  }
  return out;
}

}  // namespace

void GraphBundle::validate() const {
  if (num_nodes < 0) throw InvalidArgument("bundle: negative node count");
  if (num_classes < 1) throw InvalidArgument("bundle: class count must be >= 1");
  if (features.rows() != num_nodes) {
    throw InvalidArgument("bundle: features have " + id(features.rows()) + " rows for " + id(num_nodes) + " nodes");
  }
  if (!features.allFinite()) throw InvalidArgument("bundle: non-finite feature value");
  if (static_cast<Index>(labels.size()) != num_nodes) {
    throw InvalidArgument("bundle: " + id(static_cast<Index>(labels.size())) + " labels for " + id(num_nodes) + " nodes");
  }
  for (Index v = 0; v < num_nodes; ++v) {
    const int y = labels[static_cast<std::size_t>(v)];
    if (y != kUnknownLabel && (y < 0 || y >= num_classes)) {
      throw InvalidArgument("bundle: node " + id(v) + " label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
  }
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto [u, v] = edges[k];
    if (u < 0 || v >= num_nodes || u >= v) {
      throw InvalidArgument("bundle: edge (" + id(u) + ", " + id(v) + ") must satisfy 0 <= src < dst < N");
    }
    if (k > 0 && edges[k - 1] >= edges[k]) {
      throw InvalidArgument("bundle: edges unsorted or duplicated at (" + id(u) + ", " + id(v) + ")");
    }
  }
  const auto m = membership(*this);
  for (Index v = 0; v < num_nodes; ++v) {
    if (m[static_cast<std::size_t>(v)] != 0 && labels[static_cast<std::size_t>(v)] == kUnknownLabel) {
      throw InvalidArgument("bundle: split node " + id(v) + " has no label");
    }
  }
}

std::vector<Index> GraphBundle::unlabeled_nodes() const {
  return select(*this, [](int m) { return m != 1; });
}

std::vector<Index> GraphBundle::extra_nodes() const {
  return select(*this, [](int m) { return m == 0; });
}

std::vector<Index> GraphBundle::test_and_extra_nodes() const {
  return select(*this, [](int m) { return m == 0 || m == 3; });
}

std::vector<int> GraphBundle::labels_of(std::span<const Index> nodes) const {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (Index v : nodes) out.push_back(labels.at(static_cast<std::size_t>(v)));
  return out;
}

std::vector<Index> GraphBundle::degrees() const {
  std::vector<Index> deg(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& [u, v] : edges) {
    ++deg[static_cast<std::size_t>(u)];
    ++deg[static_cast<std::size_t>(v)];
  }
  return deg;
}

Csr gcn_normalize(const GraphBundle& bundle) {
  const auto deg = bundle.degrees();
  auto scale = [&](Index u, Index v) {
    return 1.0 / std::sqrt(static_cast<double>(deg[static_cast<std::size_t>(u)] + 1) *
                           static_cast<double>(deg[static_cast<std::size_t>(v)] + 1));
  };
  std::vector<Triplet<double>> entries;
  entries.reserve(bundle.edges.size() * 2 + static_cast<std::size_t>(bundle.num_nodes));
  for (const auto& [u, v] : bundle.edges) {
    entries.push_back({u, v, scale(u, v)});
    entries.push_back({v, u, scale(v, u)});
  }
  for (Index v = 0; v < bundle.num_nodes; ++v) entries.push_back({v, v, scale(v, v)});
  return Csr::from_triplets(bundle.num_nodes, bundle.num_nodes, std::move(entries));
}

Csr neighbor_mean_operator(const GraphBundle& bundle) {
  const auto deg = bundle.degrees();
  std::vector<Triplet<double>> entries;
  entries.reserve(bundle.edges.size() * 2);
  for (const auto& [u, v] : bundle.edges) {
    entries.push_back({u, v, 1.0 / static_cast<double>(deg[static_cast<std::size_t>(u)])});
    entries.push_back({v, u, 1.0 / static_cast<double>(deg[static_cast<std::size_t>(v)])});
  }
  return Csr::from_triplets(bundle.num_nodes, bundle.num_nodes, std::move(entries));
}

Matrix neighbor_mean(const GraphBundle& bundle, const Matrix& h) {
  if (h.rows() != bundle.num_nodes) {
    throw InvalidArgument("neighbor_mean: h has " + id(h.rows()) + " rows for " + id(bundle.num_nodes) + " nodes");
  }
  return spmm(neighbor_mean_operator(bundle), h);
}

Split make_planetoid_split(std::span<const int> labels, int num_classes, const PlanetoidSizes& sizes,
                           std::uint64_t seed) {
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] == kUnknownLabel) continue;
    if (labels[v] < 0 || labels[v] >= num_classes) {
      throw InvalidArgument("planetoid split: node " + std::to_string(v) + " has label " + std::to_string(labels[v]));
    }
    by_class[static_cast<std::size_t>(labels[v])].push_back(static_cast<Index>(v));
  }

  std::string shortfall;
  Index labeled = 0;
  for (int c = 0; c < num_classes; ++c) {
    const auto n = static_cast<Index>(by_class[static_cast<std::size_t>(c)].size());
    labeled += n;
    if (n < sizes.per_class) {
      shortfall += " class " + std::to_string(c) + " has " + id(n) + ";";
    }
  }
  const Index needed = static_cast<Index>(sizes.per_class) * num_classes + sizes.val + sizes.test;
  if (!shortfall.empty() || needed > labeled) {
    std::string counts;
    for (int c = 0; c < num_classes; ++c) {
      counts += (c ? ", " : "") + id(static_cast<Index>(by_class[static_cast<std::size_t>(c)].size()));
    }
    throw InvalidArgument("planetoid split infeasible: need " + std::to_string(sizes.per_class) +
                          " train per class + " + id(sizes.val) + " val + " + id(sizes.test) +
                          " test, per-class labeled counts are [" + counts + "]");
  }

  Rng rng(seed);
  Split split;
  std::vector<Index> rest;
  for (auto& members : by_class) {
    rng.shuffle(members);
    split.train.insert(split.train.end(), members.begin(), members.begin() + sizes.per_class);
    rest.insert(rest.end(), members.begin() + sizes.per_class, members.end());
  }
  std::sort(rest.begin(), rest.end());
  rng.shuffle(rest);
  split.val.assign(rest.begin(), rest.begin() + sizes.val);
  split.test.assign(rest.begin() + sizes.val, rest.begin() + sizes.val + sizes.test);
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

GraphBundle gen_csbm(const CsbmParams& p) {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(p.p_in) || !in_unit(p.p_out)) throw InvalidArgument("csbm: edge probabilities must lie in [0, 1]");
  if (!(p.mu >= 0.0) || !(p.sigma >= 0.0)) throw InvalidArgument("csbm: mu and sigma must be >= 0");
  if (p.dim < 1) throw InvalidArgument("csbm: feature dimension must be >= 1");
  if (p.nodes_per_class < kMinNodesPerClass) {
    throw InvalidArgument("csbm: split infeasible with " + id(p.nodes_per_class) +
                          " nodes per class; the default split needs at least " + id(kMinNodesPerClass) +
                          " (20 train per class plus val/test)");
  }

  GraphBundle b;
  b.num_classes = 2;
  b.num_nodes = 2 * p.nodes_per_class;
  b.labels.resize(static_cast<std::size_t>(b.num_nodes));
  for (Index v = 0; v < b.num_nodes; ++v) b.labels[static_cast<std::size_t>(v)] = v < p.nodes_per_class ? 0 : 1;

  Rng edge_rng(derive_seed({p.seed, 1}));
  for (Index u = 0; u < b.num_nodes; ++u) {
    for (Index v = u + 1; v < b.num_nodes; ++v) {
      const bool same = b.labels[static_cast<std::size_t>(u)] == b.labels[static_cast<std::size_t>(v)];
      if (edge_rng.bernoulli(same ? p.p_in : p.p_out)) b.edges.emplace_back(u, v);
    }
  }

  Rng feature_rng(derive_seed({p.seed, 2}));
  const double along_u = 0.5 * p.mu / std::sqrt(static_cast<double>(p.dim));
  b.features.resize(b.num_nodes, p.dim);
  for (Index v = 0; v < b.num_nodes; ++v) {
    const double sign = b.labels[static_cast<std::size_t>(v)] == 0 ? 1.0 : -1.0;
    for (Index j = 0; j < p.dim; ++j) b.features(v, j) = sign * along_u + p.sigma * feature_rng.normal();
  }

  const Index remaining = b.num_nodes - 2 * 20;
  PlanetoidSizes sizes;
  sizes.val = p.val_size.value_or(std::min<Index>(500, remaining / 3));
  sizes.test = p.test_size.value_or(std::min<Index>(1000, remaining / 2));
  b.split = make_planetoid_split(b.labels, b.num_classes, sizes, derive_seed({p.seed, 3}));
  b.validate();
  return b;
}

}  // namespace tsg
