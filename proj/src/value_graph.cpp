#include "tsg/value_graph.hpp"

#include <string>

namespace tsg {

namespace {

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

// Standardized-activation backward shared by layer norm (per row) and
// batch norm (per column): dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat)).
template <typename Vec, typename XhatVec>
void standardize_backward(const Vec& dxhat, const XhatVec& xhat, double inv, Vec& dx) {
  const double mean_d = dxhat.mean();
  const double mean_dx = dxhat.cwiseProduct(xhat).mean();
  dx = inv * (dxhat.array() - mean_d - xhat.array() * mean_dx).matrix();
}

}  // namespace

NodeId ValueGraph::push(Node node) {
  nodes_.push_back(std::move(node));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Matrix& ValueGraph::val(std::uint32_t i) const {
  const auto& n = nodes_[i];
  return n.borrowed ? *n.borrowed : n.value;
}

const Matrix& ValueGraph::value(NodeId id) const { return val(id.index); }

double ValueGraph::scalar(NodeId id) const {
  const auto& v = val(id.index);
  if (v.rows() != 1 || v.cols() != 1) {
    throw InvalidArgument("value_graph: node is " + shape_of(v) + ", not a scalar");
  }
  return v(0, 0);
}

const Matrix& ValueGraph::grad(NodeId id) const { return nodes_[id.index].grad; }

Matrix& ValueGraph::grad_slot(std::uint32_t i) {
  auto& n = nodes_[i];
  if (n.grad.size() == 0) {
    const auto& v = val(i);
    n.grad = Matrix::Zero(v.rows(), v.cols());
  }
  return n.grad;
}

NodeId ValueGraph::constant(Matrix value) {
  Node n;
  n.kind = Kind::constant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId ValueGraph::constant_ref(const Matrix& value) {
  Node n;
  n.kind = Kind::constant;
  n.borrowed = &value;
  return push(std::move(n));
}

NodeId ValueGraph::parameter(const Matrix& value) {
  Node n;
  n.kind = Kind::parameter;
  n.borrowed = &value;
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId ValueGraph::matmul(NodeId a, NodeId b) {
  const auto& x = val(a.index);
  const auto& y = val(b.index);
  if (x.cols() != y.rows()) {
    throw InvalidArgument("matmul: shape mismatch " + shape_of(x) + " * " + shape_of(y));
  }
  Node n;
  n.kind = Kind::matmul;
  n.in[0] = a.index;
  n.in[1] = b.index;
  n.needs_grad = nodes_[a.index].needs_grad || nodes_[b.index].needs_grad;
  n.value.noalias() = x * y;
  return push(std::move(n));
}

NodeId ValueGraph::add(NodeId a, NodeId b) {
  const auto& x = val(a.index);
  const auto& y = val(b.index);
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw InvalidArgument("add: shape mismatch " + shape_of(x) + " + " + shape_of(y));
  }
  Node n;
  n.kind = Kind::add;
  n.in[0] = a.index;
  n.in[1] = b.index;
  n.needs_grad = nodes_[a.index].needs_grad || nodes_[b.index].needs_grad;
  n.value = x + y;
  return push(std::move(n));
}

NodeId ValueGraph::add_row(NodeId a, NodeId row) {
  const auto& x = val(a.index);
  const auto& r = val(row.index);
  if (r.rows() != 1 || r.cols() != x.cols()) {
    throw InvalidArgument("add_row: expected 1x" + std::to_string(x.cols()) + " row, got " + shape_of(r));
  }
  Node n;
  n.kind = Kind::add_row;
  n.in[0] = a.index;
  n.in[1] = row.index;
  n.needs_grad = nodes_[a.index].needs_grad || nodes_[row.index].needs_grad;
  n.value = x.rowwise() + r.row(0);
  return push(std::move(n));
}

NodeId ValueGraph::spmm(const SparseOp& op, NodeId a) {
  Node n;
  n.kind = Kind::spmm;
  n.in[0] = a.index;
  n.op = &op;
  n.needs_grad = nodes_[a.index].needs_grad;
  n.value = tsg::spmm(op.forward, val(a.index));
  return push(std::move(n));
}

NodeId ValueGraph::relu(NodeId a) {
  Node n;
  n.kind = Kind::relu;
  n.in[0] = a.index;
  n.needs_grad = nodes_[a.index].needs_grad;
  n.value = tsg::relu(val(a.index));
  return push(std::move(n));
}

NodeId ValueGraph::dropout(NodeId a, double rate, std::uint64_t seed, Mode mode) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw InvalidArgument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::eval || rate == 0.0) return a;
  const auto& x = val(a.index);
  Node n;
  n.kind = Kind::dropout;
  n.in[0] = a.index;
  n.needs_grad = nodes_[a.index].needs_grad;
  n.saved = dropout_mask(x.rows(), x.cols(), rate, seed);
  n.value = x.cwiseProduct(n.saved);
  return push(std::move(n));
}

NodeId ValueGraph::layer_norm(NodeId a, NodeId gamma, NodeId beta, double eps) {
  const auto& x = val(a.index);
  const auto& g = val(gamma.index);
  const auto& b = val(beta.index);
  if (g.rows() != 1 || g.cols() != x.cols() || b.rows() != 1 || b.cols() != x.cols()) {
    throw InvalidArgument("layer_norm: affine parameters must be 1x" + std::to_string(x.cols()));
  }
  Node n;
  n.kind = Kind::layer_norm;
  n.in[0] = a.index;
  n.in[1] = gamma.index;
  n.in[2] = beta.index;
  n.needs_grad = nodes_[a.index].needs_grad || nodes_[gamma.index].needs_grad ||
                 nodes_[beta.index].needs_grad;
  n.saved.resize(x.rows(), x.cols());
  n.aux.resize(x.rows(), 1);
  for (Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double inv = 1.0 / std::sqrt(var + eps);
    n.aux(r, 0) = inv;
    n.saved.row(r) = (x.row(r).array() - mean) * inv;
  }
  n.value = (n.saved.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  return push(std::move(n));
}

NodeId ValueGraph::batch_norm(NodeId a, NodeId gamma, NodeId beta, BatchStats& stats, Mode mode,
                              double eps) {
  const auto& x = val(a.index);
  const auto& g = val(gamma.index);
  const auto& b = val(beta.index);
  if (g.rows() != 1 || g.cols() != x.cols() || b.rows() != 1 || b.cols() != x.cols()) {
    throw InvalidArgument("batch_norm: affine parameters must be 1x" + std::to_string(x.cols()));
  }
  Node n;
  n.kind = Kind::batch_norm;
  n.in[0] = a.index;
  n.in[1] = gamma.index;
  n.in[2] = beta.index;
  n.needs_grad = nodes_[a.index].needs_grad || nodes_[gamma.index].needs_grad ||
                 nodes_[beta.index].needs_grad;
  NormMoments<double> moments;
  if (mode == Mode::eval && stats.moments) {
    if (stats.moments->mean.cols() != x.cols()) {
      throw InvalidArgument("batch_norm: stored statistics do not match input width");
    }
    moments = *stats.moments;
    n.frozen_stats = true;
  } else {
    moments = column_moments(x, eps);
    if (mode == Mode::train) stats.moments = moments;
  }
  n.aux = moments.inv_std;
  n.saved = (x.rowwise() - moments.mean).array().rowwise() * moments.inv_std.array();
  n.value = (n.saved.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  return push(std::move(n));
}

NodeId ValueGraph::row_softmax(NodeId logits) {
  Node n;
  n.kind = Kind::softmax;
  n.in[0] = logits.index;
  n.needs_grad = nodes_[logits.index].needs_grad;
  n.value = tsg::row_softmax(val(logits.index));
  return push(std::move(n));
}

void ValueGraph::check_rows(const char* who, const Matrix& probs, std::span<const Index> rows) const {
  if (rows.empty()) throw InvalidArgument(std::string(who) + ": empty row set");
  for (auto r : rows) {
    if (r < 0 || r >= probs.rows()) {
      throw InvalidArgument(std::string(who) + ": row " + std::to_string(r) + " out of range");
    }
  }
}

NodeId ValueGraph::mean_nll(NodeId probs, std::span<const Index> rows, std::span<const int> labels) {
  const auto& p = val(probs.index);
  check_rows("mean_nll", p, rows);
  if (labels.size() != rows.size()) throw InvalidArgument("mean_nll: rows/labels length mismatch");
  Node n;
  n.kind = Kind::mean_nll;
  n.in[0] = probs.index;
  n.needs_grad = nodes_[probs.index].needs_grad;
  n.rows.assign(rows.begin(), rows.end());
  n.labels.assign(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (labels[k] < 0 || labels[k] >= p.cols()) {
      throw InvalidArgument("mean_nll: node " + std::to_string(rows[k]) + " has no valid label");
    }
    total -= clamped_log(p(rows[k], labels[k]));
  }
  n.value = Matrix::Constant(1, 1, total / static_cast<double>(rows.size()));
  return push(std::move(n));
}

NodeId ValueGraph::mean_entropy(NodeId probs, std::span<const Index> rows, EntropyOrder order) {
  const auto& p = val(probs.index);
  check_rows("mean_entropy", p, rows);
  Node n;
  n.kind = Kind::mean_entropy;
  n.in[0] = probs.index;
  n.needs_grad = nodes_[probs.index].needs_grad;
  n.rows.assign(rows.begin(), rows.end());
  n.order = order;
  double total = 0.0;
  for (auto r : rows) total += entropy_value(p.row(r), order);
  n.value = Matrix::Constant(1, 1, total / static_cast<double>(rows.size()));
  return push(std::move(n));
}

NodeId ValueGraph::weighted_sum(std::span<const std::pair<double, NodeId>> terms) {
  if (terms.empty()) throw InvalidArgument("weighted_sum: no terms");
  Node n;
  n.kind = Kind::weighted_sum;
  double total = 0.0;
  for (const auto& [coef, id] : terms) {
    total += coef * scalar(id);
    n.coefficients.push_back(coef);
    n.operands.push_back(id.index);
    n.needs_grad = n.needs_grad || nodes_[id.index].needs_grad;
  }
  n.value = Matrix::Constant(1, 1, total);
  return push(std::move(n));
}

void ValueGraph::backward(NodeId loss) {
  const auto& lv = val(loss.index);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw InvalidArgument("backward: loss must be 1x1, got " + shape_of(lv));
  }
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad_slot(loss.index)(0, 0) = 1.0;

  for (std::uint32_t i = loss.index + 1; i-- > 0;) {
    // Inputs always precede i, so grad_slot() never touches n itself.
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    const Matrix& g = n.grad;
    auto wants = [&](std::uint32_t j) { return nodes_[j].needs_grad; };

    switch (n.kind) {
      case Kind::constant:
      case Kind::parameter:
        break;
      case Kind::matmul:
        if (wants(n.in[0])) grad_slot(n.in[0]).noalias() += g * val(n.in[1]).transpose();
        if (wants(n.in[1])) grad_slot(n.in[1]).noalias() += val(n.in[0]).transpose() * g;
        break;
      case Kind::add:
        if (wants(n.in[0])) grad_slot(n.in[0]) += g;
        if (wants(n.in[1])) grad_slot(n.in[1]) += g;
        break;
      case Kind::add_row:
        if (wants(n.in[0])) grad_slot(n.in[0]) += g;
        if (wants(n.in[1])) grad_slot(n.in[1]) += g.colwise().sum();
        break;
      case Kind::spmm:
        if (wants(n.in[0])) grad_slot(n.in[0]) += tsg::spmm(n.op->adjoint, g);
        break;
      case Kind::relu: {
        const auto& x = val(n.in[0]);
        grad_slot(n.in[0]) += (x.array() > 0.0).select(g, 0.0).matrix();
        break;
      }
      case Kind::dropout:
        grad_slot(n.in[0]) += g.cwiseProduct(n.saved);
        break;
      case Kind::layer_norm: {
        const auto& gamma = val(n.in[1]);
        if (wants(n.in[1])) grad_slot(n.in[1]) += g.cwiseProduct(n.saved).colwise().sum();
        if (wants(n.in[2])) grad_slot(n.in[2]) += g.colwise().sum();
        if (wants(n.in[0])) {
          Matrix dxhat = g.array().rowwise() * gamma.row(0).array();
          Matrix& dx = grad_slot(n.in[0]);
          RowVector row_dx;
          for (Index r = 0; r < g.rows(); ++r) {
            RowVector d = dxhat.row(r);
            standardize_backward(d, n.saved.row(r), n.aux(r, 0), row_dx);
            dx.row(r) += row_dx;
          }
        }
        break;
      }
      case Kind::batch_norm: {
        const auto& gamma = val(n.in[1]);
        if (wants(n.in[1])) grad_slot(n.in[1]) += g.cwiseProduct(n.saved).colwise().sum();
        if (wants(n.in[2])) grad_slot(n.in[2]) += g.colwise().sum();
        if (wants(n.in[0])) {
          Matrix dxhat = g.array().rowwise() * gamma.row(0).array();
          Matrix& dx = grad_slot(n.in[0]);
          if (n.frozen_stats) {
            dx += (dxhat.array().rowwise() * n.aux.row(0).array()).matrix();
          } else {
            Eigen::VectorXd col_dx;
            for (Index c = 0; c < g.cols(); ++c) {
              Eigen::VectorXd d = dxhat.col(c);
              standardize_backward(d, n.saved.col(c), n.aux(0, c), col_dx);
              dx.col(c) += col_dx;
            }
          }
        }
        break;
      }
      case Kind::softmax: {
        const Matrix& p = n.value;
        const Eigen::VectorXd inner = g.cwiseProduct(p).rowwise().sum();
        grad_slot(n.in[0]) += (p.array() * (g.colwise() - inner).array()).matrix();
        break;
      }
      case Kind::mean_nll: {
        const auto& p = val(n.in[0]);
        const double scale = g(0, 0) / static_cast<double>(n.rows.size());
        Matrix& dp = grad_slot(n.in[0]);
        for (std::size_t k = 0; k < n.rows.size(); ++k) {
          const double pk = p(n.rows[k], n.labels[k]);
          if (pk >= kProbabilityFloor) dp(n.rows[k], n.labels[k]) -= scale / pk;
        }
        break;
      }
      case Kind::mean_entropy: {
        const auto& p = val(n.in[0]);
        const double scale = g(0, 0) / static_cast<double>(n.rows.size());
        Matrix& dp = grad_slot(n.in[0]);
        for (auto r : n.rows) {
          for (Index c = 0; c < p.cols(); ++c) dp(r, c) += scale * entropy_partial(p(r, c), n.order);
        }
        break;
      }
      case Kind::weighted_sum:
        for (std::size_t k = 0; k < n.operands.size(); ++k) {
          if (wants(n.operands[k])) grad_slot(n.operands[k])(0, 0) += n.coefficients[k] * g(0, 0);
        }
        break;
    }
  }
}

}  // namespace tsg
