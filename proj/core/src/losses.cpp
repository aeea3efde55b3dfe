#include "metaviewer/losses.hpp"

#include <fmt/format.h>

#include "metaviewer/ops.hpp"

namespace metaviewer {

std::string to_string(OuterVariant v) { return v == OuterVariant::mver_r ? "mver-r" : "mver-c"; }

OuterVariant outer_variant_from_string(const std::string& name) {
  if (name == "mver-r") return OuterVariant::mver_r;
  if (name == "mver-c") return OuterVariant::mver_c;
  throw std::invalid_argument(fmt::format("unknown outer variant '{}' (expected mver-r or mver-c)", name));
}

void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw std::invalid_argument(fmt::format("LossConfig: temperature {} must be > 0", temperature));
}

Var rec_loss(const Var& x, const Var& x_rec) {
  if (x.shape() != x_rec.shape()) {
    throw ShapeError(fmt::format("rec_loss: shapes {} and {} differ", shape_string(x.shape()), shape_string(x_rec.shape())));
  }
  if (x.value().rank() != 2 || x.shape()[0] == 0) {
    throw ShapeError(fmt::format("rec_loss: expected a non-empty (rows, features) matrix, got {}", shape_string(x.shape())));
  }
  return ops::divide(ops::squared_error(x, x_rec), static_cast<double>(x.shape()[0]));
}

Var contrastive_loss(const Var& a, const Var& b, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("contrastive_loss: temperature must be > 0");
  if (a.shape() != b.shape() || a.value().rank() != 2) {
    throw ShapeError(fmt::format("contrastive_loss: shapes {} and {}", shape_string(a.shape()), shape_string(b.shape())));
  }
  const std::size_t n = a.shape()[0];
  if (n < 2) throw ShapeError(fmt::format("contrastive_loss: need at least 2 rows, got {}", n));

  const Var same = ops::exp(ops::divide(ops::cosine_similarity(a, a), temperature));
  const Var cross = ops::exp(ops::divide(ops::cosine_similarity(a, b), temperature));
  const Var positive = ops::diag(cross);
  const Var denom = ops::add(ops::sub(ops::sum_axis(same, 1), ops::diag(same)), ops::sum_axis(cross, 1));
  const Var log_ratio = ops::sub(ops::log(positive), ops::log(denom));
  return ops::scale(ops::mean(log_ratio), -1.0);
}

namespace {

void check_views(const char* op, std::span<const Var> targets, std::span<const Var> reconstructions) {
  if (targets.empty() || targets.size() != reconstructions.size()) {
    throw std::invalid_argument(fmt::format("{}: {} targets for {} reconstructions", op, targets.size(), reconstructions.size()));
  }
}

}  // namespace

Var outer_loss_mver_r(std::span<const Var> targets, std::span<const Var> reconstructions) {
  check_views("outer_loss_mver_r", targets, reconstructions);
  Var total = rec_loss(targets[0], reconstructions[0]);
  for (std::size_t v = 1; v < targets.size(); ++v) total = ops::add(total, rec_loss(targets[v], reconstructions[v]));
  return total;
}

Var outer_loss_mver_c(std::span<const Var> targets, std::span<const Var> reconstructions,
                      std::span<const Var> representations, double temperature, std::optional<Var> unified) {
  check_views("outer_loss_mver_c", targets, reconstructions);
  if (representations.size() != targets.size()) {
    throw std::invalid_argument(fmt::format("outer_loss_mver_c: {} representations for {} views", representations.size(),
                                            targets.size()));
  }
  std::vector<Var> reps(representations.begin(), representations.end());
  if (unified) reps.push_back(*unified);
  Var total = outer_loss_mver_r(targets, reconstructions);
  for (std::size_t a = 0; a < reps.size(); ++a) {
    for (std::size_t b = 0; b < reps.size(); ++b) {
      if (a != b) total = ops::add(total, contrastive_loss(reps[a], reps[b], temperature));
    }
  }
  return total;
}

Var outer_loss(const LossConfig& cfg, std::span<const Var> targets, std::span<const Var> reconstructions,
               std::span<const Var> representations, std::optional<Var> unified) {
  if (cfg.variant == OuterVariant::mver_r) return outer_loss_mver_r(targets, reconstructions);
  return outer_loss_mver_c(targets, reconstructions, representations, cfg.temperature,
                           cfg.include_h ? unified : std::nullopt);
}

}  // namespace metaviewer
