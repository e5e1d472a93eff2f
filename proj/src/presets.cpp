#include "tsg/presets.hpp"

#include <algorithm>
#include <cctype>

namespace tsg {

namespace {

using enum Normalization;

Preset row(const char* name, Backbone b, bool res, Normalization norm, double dropout, int layers, int hidden,
           double lr, int epochs, double lambda) {
  return Preset{name, b, res, norm, dropout, layers, hidden, lr, epochs, lambda, 5e-4};
}

std::vector<Preset> build() {
  constexpr auto gcn = Backbone::gcn;
  constexpr auto sage = Backbone::sage;
  return {
      row("cora", gcn, false, none, 0.7, 3, 512, 0.001, 500, 1.35),
      row("citeseer", gcn, false, none, 0.5, 2, 512, 0.001, 500, 0.15),
      row("pubmed", gcn, false, none, 0.7, 2, 256, 0.005, 500, 0.3),
      row("computer", gcn, false, layer, 0.5, 3, 512, 0.001, 1000, 0.65),
      row("photo", gcn, true, layer, 0.5, 6, 256, 0.001, 1000, 0.35),
      row("cs", gcn, true, layer, 0.3, 2, 512, 0.001, 1500, 0.6),
      row("physics", gcn, true, layer, 0.3, 2, 64, 0.001, 1500, 0.25),
      row("wikics", gcn, false, layer, 0.5, 3, 256, 0.001, 1000, 0.8),
      row("squirrel", gcn, true, batch, 0.7, 4, 256, 0.01, 500, 0.45),
      row("chameleon", gcn, false, none, 0.2, 5, 512, 0.005, 200, 0.25),
      row("amazon-ratings", gcn, true, batch, 0.5, 4, 512, 0.001, 2500, 0.5),
      row("roman-empire", gcn, true, batch, 0.5, 9, 512, 0.001, 2500, 0.3),
      row("minesweeper", gcn, true, batch, 0.2, 12, 64, 0.01, 2000, 0.1),

      row("cora", sage, false, none, 0.7, 3, 256, 0.001, 500, 0.65),
      row("citeseer", sage, false, none, 0.2, 3, 512, 0.001, 500, 0.05),
      row("pubmed", sage, false, none, 0.7, 4, 512, 0.005, 500, 1.65),
      row("computer", sage, false, layer, 0.3, 4, 64, 0.001, 1000, 0.4),
      row("photo", sage, true, layer, 0.2, 6, 64, 0.001, 1000, 0.45),
      row("cs", sage, true, layer, 0.5, 2, 512, 0.001, 1500, 0.05),
      row("physics", sage, true, batch, 0.7, 2, 64, 0.001, 1500, 0.25),
      row("wikics", sage, false, layer, 0.7, 2, 256, 0.001, 1000, 1.55),
      row("squirrel", sage, true, batch, 0.7, 3, 256, 0.01, 500, 0.75),
      row("chameleon", sage, true, batch, 0.7, 4, 256, 0.01, 200, 0.15),
      row("amazon-ratings", sage, true, batch, 0.5, 9, 512, 0.001, 2500, 0.9),
      row("roman-empire", sage, false, batch, 0.3, 9, 256, 0.001, 2500, 0.35),
      row("minesweeper", sage, true, batch, 0.2, 15, 64, 0.01, 2000, 0.4),

      // MLP: one configuration for every dataset, no published lambda*; use the universal one.
      row("any", Backbone::mlp, false, none, 0.5, 3, 512, 0.001, 1000, 0.25),
  };
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = build();
  return table;
}

std::optional<Preset> find_preset(Backbone backbone, const std::string& dataset) {
  const std::string key = backbone == Backbone::mlp ? "any" : lower(dataset);
  for (const auto& p : presets()) {
    if (p.backbone == backbone && p.dataset == key) return p;
  }
  return std::nullopt;
}

ArchConfig preset_arch(const Preset& p, int num_classes) {
  ArchConfig a;
  a.backbone = p.backbone;
  a.layers = p.layers;
  a.hidden = p.hidden;
  a.dropout = p.dropout;
  a.norm = p.norm;
  a.residual = p.residual;
  a.num_classes = num_classes;
  return a;
}

}  // namespace tsg
