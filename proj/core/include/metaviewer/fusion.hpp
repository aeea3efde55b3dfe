#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metaviewer/data.hpp"
#include "metaviewer/model.hpp"
#include "metaviewer/trainer.hpp"

namespace metaviewer {

enum class FusionKind { sum, max, concat, linear, c_conv, metaviewer };

std::string to_string(FusionKind k);
FusionKind fusion_from_string(const std::string& name);
bool is_trainable(FusionKind k);
/// sum, max, concat, linear, c-conv, metaviewer.
const std::vector<FusionKind>& all_fusion_kinds();

/// A fusion baseline (or MetaViewer itself) together with the embedders and
/// heads it was trained with. `params.meta` holds the fusion parameters and
/// is empty for the fixed rules.
///
/// Concat sizes its embedders at rep_dim / V so the concatenation has
/// roughly the same width as everybody else's H.
struct FusionModel {
  FusionKind kind = FusionKind::metaviewer;
  ModelConfig model;
  ModelParams params;

  std::size_t embed_dim() const;
  std::size_t output_dim() const;
};

FusionModel init_fusion(FusionKind kind, const ModelConfig& model, std::uint64_t seed);

/// Applies the fusion rule to per-view embeddings. `fusion` is the bound
/// `params.meta` of the model (ignored by the fixed rules).
Var fuse(FusionKind kind, const BoundGroup& fusion, std::span<const Var> z, Activation act);

/// Vector-level convenience for the fixed rules: fuse(sum|max|concat, ...)
/// over rank-1 tensors.
Tensor fuse_fixed(FusionKind kind, const std::vector<Tensor>& z);

/// Frozen representation of a batch, unavailable views zero-filled.
Tensor fusion_represent(const FusionModel& m, const std::vector<Tensor>& views, const std::vector<std::uint8_t>* mask = nullptr);

/// Sum over views of rec_loss(x^v, r_v(H)). Rows whose view is unavailable
/// do not contribute to that view's term. When `grads` is non-null it
/// receives gradients over the fusion, embedder and head groups.
double specific_to_uniform_loss(const FusionModel& m, const std::vector<Tensor>& views, const std::vector<std::uint8_t>* mask,
                                GradMap* grads = nullptr, std::vector<double>* per_view = nullptr);

struct FusionTrainResult {
  FusionModel model;
  std::vector<double> loss_history;
};

/// Joint training of embedders, fusion and heads on the reconstruction
/// objective above. For FusionKind::metaviewer this runs the bi-level
/// trainer instead. Uses cfg's epochs, batch size, outer learning rate,
/// optimizer and seed. EpochRecord::inner_loss_per_view carries the
/// per-view reconstruction terms.
FusionTrainResult train_specific_to_uniform(const MultiViewDataset& ds, FusionKind kind, const ModelConfig& model,
                                            const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct MseReport {
  std::vector<double> per_view;
  double total = 0.0;
};

/// Per-view mean (over entities) squared reconstruction error of r_v(H) on
/// the selected split, and their sum.
MseReport mse_report(const FusionModel& m, const MultiViewDataset& ds, Split which = Split::test);

}  // namespace metaviewer
