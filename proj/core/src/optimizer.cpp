#include "metaviewer/optimizer.hpp"

#include <cmath>

#include <fmt/format.h>

namespace metaviewer {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::plain_gd ? "plain-gd" : "adaptive-moment"; }

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "plain-gd" || name == "sgd") return OptimizerKind::plain_gd;
  if (name == "adaptive-moment" || name == "adam") return OptimizerKind::adam;
  throw std::invalid_argument(fmt::format("unknown optimizer '{}'", name));
}

void Optimizer::step(ParamGroup& group, const GradMap& grads) {
  for (auto& [name, value] : group) {
    const std::string id = group.param_id(name);
    auto git = grads.find(id);
    if (git != grads.end() && git->second.shape() != value.shape()) {
      throw ShapeError(fmt::format("Optimizer: gradient {} for parameter {} of shape {}", shape_string(git->second.shape()), id,
                                   shape_string(value.shape())));
    }
    if (kind_ == OptimizerKind::plain_gd) {
      if (git == grads.end()) continue;
      const Tensor& g = git->second;
      for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr_ * g[i];
      continue;
    }
    auto [sit, fresh] = state_.try_emplace(id);
    Moments& s = sit->second;
    if (fresh) {
      s.m = Tensor(value.shape(), 0.0);
      s.v = Tensor(value.shape(), 0.0);
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = git == grads.end() ? 0.0 : git->second[i];
      s.m[i] = kBeta1 * s.m[i] + (1.0 - kBeta1) * g;
      s.v[i] = kBeta2 * s.v[i] + (1.0 - kBeta2) * g * g;
      value[i] -= lr_ * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + kEpsilon);
    }
  }
}

}  // namespace metaviewer
