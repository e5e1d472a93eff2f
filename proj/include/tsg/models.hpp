#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsg/dense.hpp"
#include "tsg/graph_data.hpp"
#include "tsg/sparse.hpp"
#include "tsg/value_graph.hpp"

namespace tsg {

enum class Backbone { mlp, gcn, sage };
enum class Normalization { none, layer, batch };

struct ArchConfig {
  Backbone backbone = Backbone::gcn;
  int layers = 2;
  int hidden = 64;
  double dropout = 0.5;
  Normalization norm = Normalization::none;
  bool residual = false;
  int num_classes = 2;

  void validate() const;
};

std::string to_string(Backbone b);
std::string to_string(Normalization n);
Backbone parse_backbone(const std::string& s);
Normalization parse_normalization(const std::string& s);

/// One layer's weights. `neighbor_weight` is used by SAGE only; `gamma`
/// and `beta` exist on hidden layers when a normalization is configured.
struct LayerParams {
  Matrix weight;
  Matrix neighbor_weight;
  Matrix bias;
  Matrix gamma;
  Matrix beta;
  BatchStats stats;
};

struct Model {
  ArchConfig config;
  std::vector<LayerParams> layers;

  /// Trainable tensors in a fixed order (per layer: weight, neighbor
  /// weight, bias, gamma, beta; absent ones skipped).
  std::vector<Matrix*> trainable();
  std::vector<const Matrix*> trainable() const;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases and beta zero,
/// gamma one. Deterministic in seed.
Model init_model(const ArchConfig& config, Index feature_dim, std::uint64_t seed);

/// Graph-side inputs that stay fixed for a bundle.
struct GraphOperators {
  SparseOp gcn;
  SparseOp neighbor_mean;

  explicit GraphOperators(const GraphBundle& bundle)
      : gcn(gcn_normalize(bundle)), neighbor_mean(neighbor_mean_operator(bundle)) {}
};

struct ForwardOptions {
  Mode mode = Mode::eval;
  std::uint64_t dropout_seed = 0;  // mixed with the layer index per dropout site
};

struct ForwardResult {
  NodeId logits;
  std::vector<NodeId> params;  // parallel to Model::trainable()
};

ForwardResult forward_mlp(ValueGraph& g, Model& model, const Matrix& x, const ForwardOptions& opt);
ForwardResult forward_gcn(ValueGraph& g, Model& model, const SparseOp& adj, const Matrix& x,
                          const ForwardOptions& opt);
ForwardResult forward_sage(ValueGraph& g, Model& model, const SparseOp& mean_op, const Matrix& x,
                           const ForwardOptions& opt);

/// Dispatches on model.config.backbone.
ForwardResult forward(ValueGraph& g, Model& model, const GraphOperators& ops, const Matrix& x,
                      const ForwardOptions& opt);

/// Eager evaluation of the logits, discarding the computation record.
Matrix predict_logits(Model& model, const GraphOperators& ops, const Matrix& x, const ForwardOptions& opt);

}  // namespace tsg
