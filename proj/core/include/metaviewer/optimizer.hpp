#pragma once

#include <map>
#include <string>

#include "metaviewer/params.hpp"

namespace metaviewer {

enum class OptimizerKind { plain_gd, adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& name);

/// First-order optimizer keyed by parameter id, so state follows a parameter
/// across steps as long as its group keeps the same prefix.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr) : kind_(kind), lr_(lr) {}

  /// Parameters of `group` missing from `grads` see a zero gradient.
  void step(ParamGroup& group, const GradMap& grads);

  OptimizerKind kind() const { return kind_; }
  double learning_rate() const { return lr_; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

 private:
  struct Moments {
    Tensor m, v;
    long t = 0;
  };

  OptimizerKind kind_;
  double lr_;
  std::map<std::string, Moments, std::less<>> state_;
};

}  // namespace metaviewer
