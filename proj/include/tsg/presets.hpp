#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsg/models.hpp"

namespace tsg {

/// A published per-dataset configuration: architecture (minus the class
/// count, which comes from the bundle), optimizer settings and lambda*.
struct Preset {
  std::string dataset;
  Backbone backbone = Backbone::gcn;
  bool residual = false;
  Normalization norm = Normalization::none;
  double dropout = 0.5;
  int layers = 2;
  int hidden = 64;
  double lr = 1e-3;
  int epochs = 500;
  double lambda_star = 0.0;
  double weight_decay = 5e-4;
};

const std::vector<Preset>& presets();

/// Case-insensitive lookup by (backbone, dataset). MLP has a single
/// dataset-independent entry under the name "any".
std::optional<Preset> find_preset(Backbone backbone, const std::string& dataset);

ArchConfig preset_arch(const Preset& p, int num_classes);

}  // namespace tsg
