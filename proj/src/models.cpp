#include "tsg/models.hpp"

#include <cmath>

#include "tsg/rng.hpp"

namespace tsg {

void ArchConfig::validate() const {
  if (layers < 1) throw InvalidArgument("arch: layers must be >= 1");
  if (hidden < 1) throw InvalidArgument("arch: hidden dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("arch: dropout must lie in [0, 1)");
  if (num_classes < 1) throw InvalidArgument("arch: class count must be >= 1");
}

std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::mlp: return "mlp";
    case Backbone::gcn: return "gcn";
    case Backbone::sage: return "sage";
  }
  return "?";
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::layer: return "layer";
    case Normalization::batch: return "batch";
  }
  return "?";
}

Backbone parse_backbone(const std::string& s) {
  if (s == "mlp") return Backbone::mlp;
  if (s == "gcn") return Backbone::gcn;
  if (s == "sage") return Backbone::sage;
  throw InvalidArgument("unknown backbone '" + s + "' (expected mlp, gcn or sage)");
}

Normalization parse_normalization(const std::string& s) {
  if (s == "none") return Normalization::none;
  if (s == "layer") return Normalization::layer;
  if (s == "batch") return Normalization::batch;
  throw InvalidArgument("unknown normalization '" + s + "' (expected none, layer or batch)");
}

namespace {

template <typename Layer, typename Out>
void collect(Layer& layer, Out& out) {
  for (auto* m : {&layer.weight, &layer.neighbor_weight, &layer.bias, &layer.gamma, &layer.beta}) {
    if (m->size() > 0) out.push_back(m);
  }
}

Matrix uniform_fan_in(Index rows, Index cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix w(rows, cols);
  for (Index k = 0; k < w.size(); ++k) {
    double v = (2.0 * rng.uniform() - 1.0) * bound;
    while (v == -bound) v = (2.0 * rng.uniform() - 1.0) * bound;
    w.data()[k] = v;
  }
  return w;
}

enum class Aggregation { none, sparse, self_and_neighbors };

ForwardResult run_layers(ValueGraph& g, Model& model, const SparseOp* op, Aggregation agg, const Matrix& x,
                         const ForwardOptions& opt) {
  const auto& cfg = model.config;
  if (static_cast<int>(model.layers.size()) != cfg.layers) {
    throw InvalidArgument("forward: model has " + std::to_string(model.layers.size()) + " layers, config says " +
                          std::to_string(cfg.layers));
  }
  if (x.cols() != model.layers.front().weight.rows()) {
    throw InvalidArgument("forward: features have " + std::to_string(x.cols()) + " columns, model expects " +
                          std::to_string(model.layers.front().weight.rows()));
  }
  if (op && op->forward.cols != x.rows()) {
    throw InvalidArgument("forward: operator is " + std::to_string(op->forward.rows) + "x" +
                          std::to_string(op->forward.cols) + " but features have " + std::to_string(x.rows()) + " rows");
  }

  ForwardResult result;
  NodeId h = g.constant_ref(x);
  for (int l = 0; l < cfg.layers; ++l) {
    LayerParams& layer = model.layers[static_cast<std::size_t>(l)];
    const bool last = l == cfg.layers - 1;

    const NodeId w = g.parameter(layer.weight);
    result.params.push_back(w);
    std::optional<NodeId> w_nbr;
    if (agg == Aggregation::self_and_neighbors) {
      w_nbr = g.parameter(layer.neighbor_weight);
      result.params.push_back(*w_nbr);
    }
    const NodeId b = g.parameter(layer.bias);
    result.params.push_back(b);
    std::optional<NodeId> gamma, beta;
    if (layer.gamma.size() > 0) {
      gamma = g.parameter(layer.gamma);
      beta = g.parameter(layer.beta);
      result.params.push_back(*gamma);
      result.params.push_back(*beta);
    }

    NodeId z;
    switch (agg) {
      case Aggregation::none:
        z = g.matmul(h, w);
        break;
      case Aggregation::sparse:
        z = g.matmul(g.spmm(*op, h), w);
        break;
      case Aggregation::self_and_neighbors:
        z = g.add(g.matmul(h, w), g.matmul(g.spmm(*op, h), *w_nbr));
        break;
    }
    z = g.add_row(z, b);
    if (last) {
      result.logits = z;
      break;
    }
    if (cfg.residual && l > 0 && g.value(h).cols() == g.value(z).cols()) z = g.add(z, h);
    if (cfg.norm == Normalization::layer) {
      z = g.layer_norm(z, *gamma, *beta);
    } else if (cfg.norm == Normalization::batch) {
      z = g.batch_norm(z, *gamma, *beta, layer.stats, opt.mode);
    }
    z = g.relu(z);
    z = g.dropout(z, cfg.dropout, derive_seed({opt.dropout_seed, static_cast<std::uint64_t>(l)}), opt.mode);
    h = z;
  }
  return result;
}

}  // namespace

std::vector<Matrix*> Model::trainable() {
  std::vector<Matrix*> out;
  for (auto& layer : layers) collect(layer, out);
  return out;
}

std::vector<const Matrix*> Model::trainable() const {
  std::vector<const Matrix*> out;
  for (const auto& layer : layers) collect(layer, out);
  return out;
}

Model init_model(const ArchConfig& config, Index feature_dim, std::uint64_t seed) {
  config.validate();
  if (feature_dim < 1) throw InvalidArgument("init_model: feature dimension must be >= 1");
  Rng rng(derive_seed({seed, 0x1417}));
  Model model;
  model.config = config;
  Index in = feature_dim;
  for (int l = 0; l < config.layers; ++l) {
    const bool last = l == config.layers - 1;
    const Index out = last ? config.num_classes : config.hidden;
    LayerParams layer;
    layer.weight = uniform_fan_in(in, out, rng);
    if (config.backbone == Backbone::sage) layer.neighbor_weight = uniform_fan_in(in, out, rng);
    layer.bias = Matrix::Zero(1, out);
    if (!last && config.norm != Normalization::none) {
      layer.gamma = Matrix::Ones(1, out);
      layer.beta = Matrix::Zero(1, out);
    }
    model.layers.push_back(std::move(layer));
    in = out;
  }
  return model;
}

ForwardResult forward_mlp(ValueGraph& g, Model& model, const Matrix& x, const ForwardOptions& opt) {
  return run_layers(g, model, nullptr, Aggregation::none, x, opt);
}

ForwardResult forward_gcn(ValueGraph& g, Model& model, const SparseOp& adj, const Matrix& x,
                          const ForwardOptions& opt) {
  return run_layers(g, model, &adj, Aggregation::sparse, x, opt);
}

ForwardResult forward_sage(ValueGraph& g, Model& model, const SparseOp& mean_op, const Matrix& x,
                           const ForwardOptions& opt) {
  return run_layers(g, model, &mean_op, Aggregation::self_and_neighbors, x, opt);
}

ForwardResult forward(ValueGraph& g, Model& model, const GraphOperators& ops, const Matrix& x,
                      const ForwardOptions& opt) {
  switch (model.config.backbone) {
    case Backbone::mlp: return forward_mlp(g, model, x, opt);
    case Backbone::gcn: return forward_gcn(g, model, ops.gcn, x, opt);
    case Backbone::sage: return forward_sage(g, model, ops.neighbor_mean, x, opt);
  }
  throw InvalidArgument("forward: unknown backbone");
}

Matrix predict_logits(Model& model, const GraphOperators& ops, const Matrix& x, const ForwardOptions& opt) {
  ValueGraph g;
  const auto fwd = forward(g, model, ops, x, opt);
  return g.value(fwd.logits);
}

}  // namespace tsg
