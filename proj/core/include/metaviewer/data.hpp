#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "metaviewer/tensor.hpp"

namespace metaviewer {

enum class Split : std::uint8_t { train, val, test };

/// N entities described by V views. `views[v]` is an (N, d_v) matrix.
/// `mask`, when present, is row-major N x V availability; unavailable
/// entries keep whatever values the file held and are ignored downstream.
struct MultiViewDataset {
  std::string name;
  std::vector<Tensor> views;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<std::uint8_t>> mask;
  /// Empty until split_train_val_test assigns tags.
  std::vector<Split> split;

  std::size_t size() const { return views.empty() ? 0 : views.front().dim(0); }
  std::size_t view_count() const { return views.size(); }
  std::vector<std::size_t> view_dims() const;
  bool available(std::size_t entity, std::size_t view) const;
  bool complete(std::size_t entity) const;

  std::vector<std::size_t> indices(Split which) const;
  /// Entities in the given order, tags and mask carried along.
  MultiViewDataset subset(const std::vector<std::size_t>& rows) const;

  /// Throws std::invalid_argument on any structural inconsistency.
  void validate() const;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads `manifest.json` (or the manifest inside a directory).
MultiViewDataset load_dataset(const std::filesystem::path& manifest_or_dir);
/// Writes manifest.json plus one CSV per view (and labels/mask when present).
void write_dataset(const MultiViewDataset& ds, const std::filesystem::path& dir);

/// Per-feature min-max scaling with statistics from the train split (all
/// entities when no split is assigned). Constant features map to 0; values
/// outside the train range are clamped into [0, 1].
MultiViewDataset normalize_minmax(MultiViewDataset ds);

/// 60/20/20 with largest-remainder rounding. Stratified by label when labels
/// exist. Requires N >= 5.
MultiViewDataset split_train_val_test(MultiViewDataset ds, std::uint64_t seed);

/// Row positions of a batch divided into support and query. Support rows are
/// per view because incomplete batches contribute different entities to each
/// view; query rows are shared and entity-aligned across views.
struct MetaSplitIndices {
  std::vector<std::vector<std::size_t>> support;
  std::vector<std::size_t> query;
};

/// Support/query sample matrices per view.
struct MetaSplit {
  std::vector<Tensor> support;
  std::vector<Tensor> query;
};

/// round-half-up(ratio * batch) rows to support (clamped so both sides keep
/// at least one), the rest to query, chosen uniformly at random.
MetaSplitIndices meta_split(std::size_t batch_size, std::size_t views, double support_ratio, std::mt19937_64& rng);
std::size_t support_count(std::size_t batch_size, double support_ratio);

/// Complete entities form the query; each view's support holds the
/// incomplete entities that have that view. `mask` is row-major B x V.
MetaSplitIndices meta_split_incomplete(const std::vector<std::uint8_t>& mask, std::size_t views);

/// Materializes the index split against batch view matrices.
MetaSplit materialize(const std::vector<Tensor>& batch_views, const MetaSplitIndices& idx);

/// Class-conditioned generator with one shared latent and independent
/// view-private latents. Each view is a fixed random linear map of
/// [shared, noise_scale * private] plus 0.1 * noise_scale Gaussian
/// observation noise, then min-max scaled per feature.
struct SynthSpec {
  std::size_t n = 600;
  std::size_t views = 2;
  std::size_t shared_dim = 4;
  std::size_t private_dim = 8;
  /// One entry per view, or a single entry used for every view.
  std::vector<std::size_t> observed_dims{20};
  double noise_scale = 1.0;
  std::size_t classes = 3;
  /// Scale of the class means in the shared latent.
  double class_separation = 3.0;
  /// Within-class standard deviation of the shared latent.
  double class_spread = 0.5;
  std::uint64_t seed = 0;

  std::size_t observed_dim(std::size_t v) const;
  void validate() const;
};

MultiViewDataset synth_generate(const SynthSpec& spec);

/// Drop each (entity, view) entry with probability `missing_rate`, keeping
/// at least one view per entity. Adds an availability mask.
MultiViewDataset drop_views(MultiViewDataset ds, double missing_rate, std::uint64_t seed);

}  // namespace metaviewer
