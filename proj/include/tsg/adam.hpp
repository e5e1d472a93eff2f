#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tsg/dense.hpp"

namespace tsg {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-4;  // decoupled: p <- p - lr * wd * p
};

struct AdamState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::int64_t step = 0;
};

/// One bias-corrected Adam update with decoupled weight decay. Moments
/// are allocated on the first call. Throws on lr <= 0 or shape mismatch.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace tsg
