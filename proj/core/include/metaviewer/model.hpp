#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "metaviewer/autodiff.hpp"
#include "metaviewer/params.hpp"

namespace metaviewer {

enum class Activation { relu, tanh, identity };

Var activate(const Var& x, Activation act);
std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct ModelConfig {
  std::size_t views = 2;
  std::vector<std::size_t> input_dims;
  /// Embedding length d. Must equal rep_dim so the same-padded conv maps
  /// length-d channels straight onto H.
  std::size_t embed_dim = 256;
  std::size_t rep_dim = 256;
  /// Embedder hidden widths, input side first. Heads mirror them.
  std::vector<std::size_t> embed_hidden{1024};
  std::size_t kernel_width = 3;
  std::size_t conv_channels = 32;
  /// Conv layers in the meta-learner; only the first one sees views as channels.
  std::size_t meta_depth = 1;
  Activation activation = Activation::relu;

  void validate() const;
};

/// Meta parameters omega, plus phi_v = (embedder f_v, head r_v) per view.
struct ModelParams {
  ParamGroup meta;
  std::vector<ParamGroup> embed;
  std::vector<ParamGroup> head;

  bool all_finite() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Fully connected stack fc0..fc{n-1} over `dims` (dims.size() - 1 layers).
ParamGroup init_mlp(GroupTag tag, std::string prefix, const std::vector<std::size_t>& dims, std::mt19937_64& rng);
/// conv0 (views -> channels), conv1.. (channels -> channels).
ParamGroup init_meta_learner(const ModelConfig& cfg, std::mt19937_64& rng);
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

std::vector<std::size_t> embedder_dims(const ModelConfig& cfg, std::size_t view, std::size_t out_dim);
std::vector<std::size_t> head_dims(const ModelConfig& cfg, std::size_t view, std::size_t in_dim);

/// ReLU between layers, linear output. x is (B, in).
Var mlp_forward(const BoundGroup& layers, const Var& x);

/// z^v = f_v(x^v): (B, d_x^v) -> (B, d).
Var embed(const BoundGroup& phi_f, const Var& x);

/// H = mean over output channels of act(conv(stack(z^1..z^V))). Each z is (B, d).
Var fuse_meta(const BoundGroup& omega, std::span<const Var> z, Activation act);

/// theta_bv: the view-v kernel slice of conv0, the shared conv0 bias, and
/// value copies of any deeper layers. Detached: fresh ids, no graph link to omega.
ParamGroup init_base_from_meta(const ParamGroup& omega, std::size_t view);
/// Attached variant: the slices are graph ops on the bound omega, so
/// gradients flow back into it.
BoundGroup attach_base_from_meta(const BoundGroup& omega, std::size_t view);

/// Single-view pass through a base-learner: z (B, d) -> h (B, d_h).
Var base_forward(const BoundGroup& theta, const Var& z, Activation act);

/// x_rec^v = r_v(h): (B, d_h) -> (B, d_x^v).
Var reconstruct(const BoundGroup& phi_r, const Var& h);

/// Unified representation of a batch of entities, one (B, d_h) matrix.
/// Unavailable views (mask row-major B x V, 0 = missing) enter as zero
/// channels.
Tensor represent(const ModelConfig& cfg, const ModelParams& params, const std::vector<Tensor>& views,
                 const std::vector<std::uint8_t>* mask = nullptr);

/// Number of consecutive "<stem>{i}.<suffix>" entries starting at 0.
std::size_t layer_count(const ParamGroup& group, const std::string& stem, const std::string& suffix);
std::size_t layer_count(const BoundGroup& group, const std::string& stem, const std::string& suffix);

}  // namespace metaviewer
