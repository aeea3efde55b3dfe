#include "metaviewer/model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "metaviewer/ops.hpp"

namespace metaviewer {

Var activate(const Var& x, Activation act) {
  switch (act) {
    case Activation::relu: return ops::relu(x);
    case Activation::tanh: return ops::tanh(x);
    case Activation::identity: return x;
  }
  return x;
}

std::string to_string(Activation act) {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "relu";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument(fmt::format("unknown activation '{}'", name));
}

void ModelConfig::validate() const {
  if (views < 1) throw std::invalid_argument("ModelConfig: views must be >= 1");
  if (input_dims.size() != views) {
    throw std::invalid_argument(fmt::format("ModelConfig: {} input dims for {} views", input_dims.size(), views));
  }
  for (std::size_t d : input_dims) {
    if (d < 1) throw std::invalid_argument("ModelConfig: input dims must be >= 1");
  }
  if (embed_dim != rep_dim) {
    throw std::invalid_argument(fmt::format("ModelConfig: embed_dim {} must equal rep_dim {}", embed_dim, rep_dim));
  }
  if (rep_dim < 1) throw std::invalid_argument("ModelConfig: rep_dim must be >= 1");
  if (kernel_width % 2 == 0) throw std::invalid_argument(fmt::format("ModelConfig: kernel width {} must be odd", kernel_width));
  if (conv_channels < 1) throw std::invalid_argument("ModelConfig: conv_channels must be >= 1");
  if (meta_depth < 1) throw std::invalid_argument("ModelConfig: meta_depth must be >= 1");
  for (std::size_t w : embed_hidden) {
    if (w < 1) throw std::invalid_argument("ModelConfig: hidden widths must be >= 1");
  }
}

bool ModelParams::all_finite() const {
  if (!meta.all_finite()) return false;
  for (const auto& g : embed) {
    if (!g.all_finite()) return false;
  }
  for (const auto& g : head) {
    if (!g.all_finite()) return false;
  }
  return true;
}

namespace {

Tensor uniform(Shape shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return t;
}

}  // namespace

ParamGroup init_mlp(GroupTag tag, std::string prefix, const std::vector<std::size_t>& dims, std::mt19937_64& rng) {
  ParamGroup g(std::move(tag), std::move(prefix));
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    g.add(fmt::format("fc{}.weight", l), uniform(Shape{dims[l], dims[l + 1]}, bound, rng));
    g.add(fmt::format("fc{}.bias", l), uniform(Shape{dims[l + 1]}, bound, rng));
  }
  return g;
}

ParamGroup init_meta_learner(const ModelConfig& cfg, std::mt19937_64& rng) {
  ParamGroup g(GroupTag{GroupKind::meta, std::nullopt}, "meta");
  for (std::size_t l = 0; l < cfg.meta_depth; ++l) {
    const std::size_t cin = l == 0 ? cfg.views : cfg.conv_channels;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cin * cfg.kernel_width));
    g.add(fmt::format("conv{}.kernel", l), uniform(Shape{cfg.conv_channels, cin, cfg.kernel_width}, bound, rng));
    g.add(fmt::format("conv{}.bias", l), uniform(Shape{cfg.conv_channels}, bound, rng));
  }
  return g;
}

std::vector<std::size_t> embedder_dims(const ModelConfig& cfg, std::size_t view, std::size_t out_dim) {
  std::vector<std::size_t> dims{cfg.input_dims.at(view)};
  dims.insert(dims.end(), cfg.embed_hidden.begin(), cfg.embed_hidden.end());
  dims.push_back(out_dim);
  return dims;
}

std::vector<std::size_t> head_dims(const ModelConfig& cfg, std::size_t view, std::size_t in_dim) {
  std::vector<std::size_t> dims{in_dim};
  dims.insert(dims.end(), cfg.embed_hidden.rbegin(), cfg.embed_hidden.rend());
  dims.push_back(cfg.input_dims.at(view));
  return dims;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.meta = init_meta_learner(cfg, rng);
  for (std::size_t v = 0; v < cfg.views; ++v) {
    p.embed.push_back(init_mlp(GroupTag{GroupKind::embed, v}, fmt::format("embed{}", v), embedder_dims(cfg, v, cfg.embed_dim), rng));
  }
  for (std::size_t v = 0; v < cfg.views; ++v) {
    p.head.push_back(init_mlp(GroupTag{GroupKind::head, v}, fmt::format("head{}", v), head_dims(cfg, v, cfg.rep_dim), rng));
  }
  return p;
}

std::size_t layer_count(const ParamGroup& group, const std::string& stem, const std::string& suffix) {
  std::size_t n = 0;
  while (group.contains(fmt::format("{}{}.{}", stem, n, suffix))) ++n;
  return n;
}

std::size_t layer_count(const BoundGroup& group, const std::string& stem, const std::string& suffix) {
  std::size_t n = 0;
  while (group.contains(fmt::format("{}{}.{}", stem, n, suffix))) ++n;
  return n;
}

Var mlp_forward(const BoundGroup& layers, const Var& x) {
  const std::size_t n = layer_count(layers, "fc", "weight");
  if (n == 0) throw std::invalid_argument("mlp_forward: no layers");
  const std::size_t in = layers["fc0.weight"].shape()[0];
  if (x.value().rank() != 2 || x.shape()[1] != in) {
    throw ShapeError(fmt::format("mlp_forward: input {} does not match first layer width {}", shape_string(x.shape()), in));
  }
  Var h = x;
  for (std::size_t l = 0; l < n; ++l) {
    h = ops::affine(h, layers[fmt::format("fc{}.weight", l)], layers[fmt::format("fc{}.bias", l)]);
    if (l + 1 < n) h = ops::relu(h);
  }
  return h;
}

Var embed(const BoundGroup& phi_f, const Var& x) { return mlp_forward(phi_f, x); }

Var reconstruct(const BoundGroup& phi_r, const Var& h) { return mlp_forward(phi_r, h); }

namespace {

Var conv_stack(const BoundGroup& params, Var x, Activation act) {
  const std::size_t depth = layer_count(params, "conv", "kernel");
  if (depth == 0) throw std::invalid_argument("conv stack: no conv layers");
  for (std::size_t l = 0; l < depth; ++l) {
    x = activate(ops::channel_conv1d(x, params[fmt::format("conv{}.kernel", l)], params[fmt::format("conv{}.bias", l)]), act);
  }
  return ops::mean_axis(x, 1);
}

}  // namespace

Var fuse_meta(const BoundGroup& omega, std::span<const Var> z, Activation act) {
  const std::size_t views = omega["conv0.kernel"].shape()[1];
  if (z.size() != views) {
    throw std::invalid_argument(fmt::format("fuse_meta: {} embeddings for a meta-learner over {} views", z.size(), views));
  }
  std::vector<Var> channels;
  for (const Var& zv : z) {
    if (zv.value().rank() != 2) throw ShapeError(fmt::format("fuse_meta: embedding shape {}", shape_string(zv.shape())));
    channels.push_back(ops::reshape(zv, Shape{zv.shape()[0], 1, zv.shape()[1]}));
  }
  return conv_stack(omega, ops::concat(channels, 1), act);
}

ParamGroup init_base_from_meta(const ParamGroup& omega, std::size_t view) {
  const Tensor& k0 = omega.at("conv0.kernel");
  const std::size_t cout = k0.dim(0), cin = k0.dim(1), width = k0.dim(2);
  if (view >= cin) throw std::out_of_range(fmt::format("init_base_from_meta: view {} of {}", view, cin));
  ParamGroup theta(GroupTag{GroupKind::base, view}, fresh_prefix(fmt::format("base{}", view)));
  Tensor slice(Shape{cout, 1, width});
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t j = 0; j < width; ++j) slice[o * width + j] = k0[(o * cin + view) * width + j];
  }
  theta.add("conv0.kernel", std::move(slice));
  for (const auto& [name, value] : omega) {
    if (name != "conv0.kernel") theta.add(name, value);
  }
  return theta;
}

BoundGroup attach_base_from_meta(const BoundGroup& omega, std::size_t view) {
  const Var k0 = omega["conv0.kernel"];
  if (view >= k0.shape()[1]) throw std::out_of_range(fmt::format("attach_base_from_meta: view {} of {}", view, k0.shape()[1]));
  BoundGroup theta;
  theta.set("conv0.kernel", ops::slice(k0, 1, view, 1));
  for (const auto& [name, var] : omega.vars()) {
    if (name != "conv0.kernel") theta.set(name, var);
  }
  return theta;
}

Var base_forward(const BoundGroup& theta, const Var& z, Activation act) {
  if (z.value().rank() != 2) throw ShapeError(fmt::format("base_forward: embedding shape {}", shape_string(z.shape())));
  if (theta["conv0.kernel"].shape()[1] != 1) {
    throw ShapeError(fmt::format("base_forward: kernel {} is not single-channel", shape_string(theta["conv0.kernel"].shape())));
  }
  return conv_stack(theta, ops::reshape(z, Shape{z.shape()[0], 1, z.shape()[1]}), act);
}

Tensor represent(const ModelConfig& cfg, const ModelParams& params, const std::vector<Tensor>& views,
                 const std::vector<std::uint8_t>* mask) {
  if (views.size() != cfg.views) {
    throw std::invalid_argument(fmt::format("represent: model expects {} views, got {}", cfg.views, views.size()));
  }
  Tape tape;
  const BoundGroup omega = tape.bind_frozen(params.meta);
  std::vector<Var> z;
  for (std::size_t v = 0; v < cfg.views; ++v) {
    Var zv = embed(tape.bind_frozen(params.embed[v]), tape.constant(views[v]));
    if (mask) {
      Tensor keep(zv.shape(), 1.0);
      const std::size_t b = zv.shape()[0], d = zv.shape()[1];
      for (std::size_t i = 0; i < b; ++i) {
        if ((*mask)[i * cfg.views + v] == 0) {
          for (std::size_t c = 0; c < d; ++c) keep[i * d + c] = 0.0;
        }
      }
      zv = ops::mul(zv, tape.constant(std::move(keep)));
    }
    z.push_back(zv);
  }
  return fuse_meta(omega, z, cfg.activation).value();
}

}  // namespace metaviewer
