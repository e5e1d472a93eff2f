#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tsg/dense.hpp"
#include "tsg/sparse.hpp"

namespace tsg {

inline constexpr int kUnknownLabel = -1;

/// Node ids of the three split lists, each ascending. Nodes in none of
/// them form the "extra" set.
struct Split {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

/// Undirected attributed graph with a labeled/unlabeled partition.
/// The labeled set is the train list; every other node is unlabeled.
struct GraphBundle {
  Index num_nodes = 0;
  int num_classes = 0;
  std::vector<std::pair<Index, Index>> edges;  // (u, v) with u < v, sorted, no duplicates
  Matrix features;                             // num_nodes x d
  std::vector<int> labels;                     // class id or kUnknownLabel
  Split split;

  Index num_features() const { return features.cols(); }

  /// Throws InvalidArgument on the first violated invariant.
  void validate() const;

  const std::vector<Index>& labeled_nodes() const { return split.train; }
  /// V \ V_L, ascending.
  std::vector<Index> unlabeled_nodes() const;
  /// Nodes in no split list, ascending.
  std::vector<Index> extra_nodes() const;
  /// V \ (V_L u val), ascending.
  std::vector<Index> test_and_extra_nodes() const;
  std::vector<int> labels_of(std::span<const Index> nodes) const;
  std::vector<Index> degrees() const;
};

/// Reads a bundle directory (meta.json, edges.csv, features.csv,
/// labels.csv, splits.json). Errors are DataError with file:line context.
GraphBundle load_bundle(const std::filesystem::path& dir);

/// Writes a bundle directory; floats use 17 significant digits.
void save_bundle(const GraphBundle& bundle, const std::filesystem::path& dir);

/// D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I.
Csr gcn_normalize(const GraphBundle& bundle);

/// Row v averages the neighbours of v; isolated nodes get an empty row.
Csr neighbor_mean_operator(const GraphBundle& bundle);

Matrix neighbor_mean(const GraphBundle& bundle, const Matrix& h);

struct PlanetoidSizes {
  int per_class = 20;
  Index val = 500;
  Index test = 1000;
};

/// Class-balanced train set plus uniformly drawn val/test sets from the
/// remaining labeled nodes. Deterministic in `seed`.
Split make_planetoid_split(std::span<const int> labels, int num_classes, const PlanetoidSizes& sizes,
                           std::uint64_t seed);

/// Two-class contextual stochastic block model.
struct CsbmParams {
  Index nodes_per_class = 500;
  double p_in = 0.1;
  double p_out = 0.01;
  Index dim = 16;
  double mu = 4.0;      // distance between the two class means
  double sigma = 1.0;   // per-coordinate feature noise
  std::uint64_t seed = 0;
  // Split sizes; when unset they scale with the node count (see gen_csbm).
  std::optional<Index> val_size;
  std::optional<Index> test_size;
};

inline constexpr Index kMinNodesPerClass = 25;

/// Class c in {0, 1} gets mean (+mu/2, -mu/2)[c] * u with u = 1/sqrt(d).
/// Default split: 20 train per class; of the remaining R nodes,
/// min(500, R/3) go to val and min(1000, R/2) to test; the rest stay extra.
GraphBundle gen_csbm(const CsbmParams& params);

}  // namespace tsg
