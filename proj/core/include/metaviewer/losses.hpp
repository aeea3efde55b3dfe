#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metaviewer/autodiff.hpp"

namespace metaviewer {

enum class OuterVariant { mver_r, mver_c };

std::string to_string(OuterVariant v);
OuterVariant outer_variant_from_string(const std::string& name);

struct LossConfig {
  OuterVariant variant = OuterVariant::mver_r;
  double temperature = 0.5;
  /// Lets the unified representation H join the contrastive pair set as an
  /// extra view.
  bool include_h = false;

  void validate() const;
};

/// ||X - X_rec||_F^2 divided by the row count.
Var rec_loss(const Var& x, const Var& x_rec);

/// Cross-view contrastive term for views (a, b) over N aligned rows:
///   -1/N sum_i log( e^{s(a_i,b_i)/t} /
///                   (sum_{j != i} e^{s(a_i,a_j)/t} + sum_j e^{s(a_i,b_j)/t}) )
/// with s the cosine similarity. Needs N >= 2.
Var contrastive_loss(const Var& a, const Var& b, double temperature);

/// Sum of per-view rec_loss.
Var outer_loss_mver_r(std::span<const Var> targets, std::span<const Var> reconstructions);

/// MVer-R plus contrastive_loss over every ordered pair of distinct
/// representations; `unified`, when given, joins as an additional view.
Var outer_loss_mver_c(std::span<const Var> targets, std::span<const Var> reconstructions,
                      std::span<const Var> representations, double temperature,
                      std::optional<Var> unified = std::nullopt);

/// Dispatch on cfg.variant. `unified` is used only by MVer-C with include_h.
Var outer_loss(const LossConfig& cfg, std::span<const Var> targets, std::span<const Var> reconstructions,
               std::span<const Var> representations, std::optional<Var> unified = std::nullopt);

}  // namespace metaviewer
