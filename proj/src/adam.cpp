#include "tsg/adam.hpp"

#include <cmath>
#include <string>

namespace tsg {

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& config) {
  if (!(config.lr > 0.0)) throw InvalidArgument("adam: learning rate must be positive");
  if (params.size() != grads.size()) throw InvalidArgument("adam: params/grads count mismatch");
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw InvalidArgument("adam: state holds " + std::to_string(state.first_moment.size()) +
                          " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& p = *params[i];
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols() ||
        state.first_moment[i].rows() != p.rows() || state.first_moment[i].cols() != p.cols()) {
      throw InvalidArgument("adam: shape mismatch at parameter " + std::to_string(i));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    const Matrix& g = grads[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    const auto m_hat = m.array() / correction1;
    const auto v_hat = v.array() / correction2;
    p.array() -= config.lr * config.weight_decay * p.array() +
                 config.lr * m_hat / (v_hat.sqrt() + config.epsilon);
  }
}

}  // namespace tsg
