#include "metaviewer/fusion.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "metaviewer/ops.hpp"
#include "metaviewer/optimizer.hpp"

namespace metaviewer {

std::string to_string(FusionKind k) {
  switch (k) {
    case FusionKind::sum: return "sum";
    case FusionKind::max: return "max";
    case FusionKind::concat: return "concat";
    case FusionKind::linear: return "linear";
    case FusionKind::c_conv: return "c-conv";
    case FusionKind::metaviewer: return "metaviewer";
  }
  return "?";
}

FusionKind fusion_from_string(const std::string& name) {
  for (FusionKind k : all_fusion_kinds()) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument(fmt::format("unknown fusion kind '{}'", name));
}

bool is_trainable(FusionKind k) { return k == FusionKind::linear || k == FusionKind::c_conv || k == FusionKind::metaviewer; }

const std::vector<FusionKind>& all_fusion_kinds() {
  static const std::vector<FusionKind> kinds{FusionKind::sum,    FusionKind::max,    FusionKind::concat,
                                             FusionKind::linear, FusionKind::c_conv, FusionKind::metaviewer};
  return kinds;
}

std::size_t FusionModel::embed_dim() const {
  return kind == FusionKind::concat ? model.rep_dim / model.views : model.embed_dim;
}

std::size_t FusionModel::output_dim() const {
  return kind == FusionKind::concat ? embed_dim() * model.views : model.rep_dim;
}

FusionModel init_fusion(FusionKind kind, const ModelConfig& model, std::uint64_t seed) {
  model.validate();
  FusionModel m;
  m.kind = kind;
  m.model = model;
  if (kind == FusionKind::metaviewer || kind == FusionKind::c_conv) {
    m.params = init_params(model, seed);
    return m;
  }
  if (kind == FusionKind::concat && model.rep_dim < model.views) {
    throw std::invalid_argument(fmt::format("init_fusion: concat needs rep_dim >= views ({} < {})", model.rep_dim, model.views));
  }
  std::mt19937_64 rng(seed);
  const std::size_t d = m.embed_dim();
  if (kind == FusionKind::linear) {
    m.params.meta = init_mlp(GroupTag{GroupKind::meta, std::nullopt}, "meta", {model.views * d, model.rep_dim}, rng);
  } else {
    m.params.meta = ParamGroup(GroupTag{GroupKind::meta, std::nullopt}, "meta");
  }
  for (std::size_t v = 0; v < model.views; ++v) {
    m.params.embed.push_back(init_mlp(GroupTag{GroupKind::embed, v}, fmt::format("embed{}", v), embedder_dims(model, v, d), rng));
  }
  for (std::size_t v = 0; v < model.views; ++v) {
    m.params.head.push_back(
        init_mlp(GroupTag{GroupKind::head, v}, fmt::format("head{}", v), head_dims(model, v, m.output_dim()), rng));
  }
  return m;
}

Var fuse(FusionKind kind, const BoundGroup& fusion, std::span<const Var> z, Activation act) {
  if (z.empty()) throw std::invalid_argument("fuse: no views");
  switch (kind) {
    case FusionKind::sum: {
      Var h = z[0];
      for (std::size_t v = 1; v < z.size(); ++v) h = ops::add(h, z[v]);
      return h;
    }
    case FusionKind::max: {
      Var h = z[0];
      for (std::size_t v = 1; v < z.size(); ++v) h = ops::maximum(h, z[v]);
      return h;
    }
    case FusionKind::concat:
      return ops::concat(z, z[0].value().rank() - 1);
    case FusionKind::linear:
      return ops::affine(ops::concat(z, 1), fusion["fc0.weight"], fusion["fc0.bias"]);
    case FusionKind::c_conv:
    case FusionKind::metaviewer:
      return fuse_meta(fusion, z, act);
  }
  throw std::invalid_argument("fuse: unknown kind");
}

Tensor fuse_fixed(FusionKind kind, const std::vector<Tensor>& z) {
  if (is_trainable(kind)) throw std::invalid_argument(fmt::format("fuse_fixed: {} has parameters", to_string(kind)));
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : z) vars.push_back(tape.constant(t));
  return fuse(kind, BoundGroup{}, vars, Activation::identity).value();
}

namespace {

Tensor mask_column(const std::vector<std::uint8_t>& mask, std::size_t views, std::size_t view, std::size_t rows,
                   std::size_t width) {
  Tensor keep({rows, width}, 1.0);
  for (std::size_t i = 0; i < rows; ++i) {
    if (mask[i * views + view] == 0) {
      for (std::size_t c = 0; c < width; ++c) keep[i * width + c] = 0.0;
    }
  }
  return keep;
}

struct StuGraph {
  Var loss;
  std::vector<Var> per_view;
};

StuGraph build_stu(Tape& tape, const FusionModel& m, const std::vector<Tensor>& views, const std::vector<std::uint8_t>* mask,
                   bool frozen) {
  const std::size_t nv = m.model.views;
  if (views.size() != nv) throw std::invalid_argument(fmt::format("fusion: model expects {} views, got {}", nv, views.size()));
  auto bind = [&](const ParamGroup& g) { return frozen ? tape.bind_frozen(g) : tape.bind(g); };
  const BoundGroup fusion = is_trainable(m.kind) ? bind(m.params.meta) : BoundGroup{};
  std::vector<Var> xs, zs;
  for (std::size_t v = 0; v < nv; ++v) {
    xs.push_back(tape.constant(views[v]));
    Var z = embed(bind(m.params.embed[v]), xs.back());
    if (mask) z = ops::mul(z, tape.constant(mask_column(*mask, nv, v, z.shape()[0], z.shape()[1])));
    zs.push_back(z);
  }
  const Var h = fuse(m.kind, fusion, zs, m.model.activation);
  StuGraph g;
  for (std::size_t v = 0; v < nv; ++v) {
    const Var rec = reconstruct(bind(m.params.head[v]), h);
    std::size_t avail = xs[v].shape()[0];
    if (mask) {
      avail = 0;
      for (std::size_t i = 0; i < xs[v].shape()[0]; ++i) avail += (*mask)[i * nv + v] != 0 ? 1 : 0;
    }
    Var term;
    if (avail == xs[v].shape()[0]) {
      term = rec_loss(xs[v], rec);
    } else if (avail == 0) {
      term = tape.constant(Tensor::scalar(0.0));
    } else {
      const Var diff = ops::mul(ops::sub(xs[v], rec), tape.constant(mask_column(*mask, nv, v, rec.shape()[0], rec.shape()[1])));
      term = ops::divide(ops::sum(ops::mul(diff, diff)), static_cast<double>(avail));
    }
    g.per_view.push_back(term);
    g.loss = v == 0 ? term : ops::add(g.loss, term);
  }
  return g;
}

std::vector<const ParamGroup*> trainable_groups(const FusionModel& m) {
  std::vector<const ParamGroup*> groups;
  if (is_trainable(m.kind)) groups.push_back(&m.params.meta);
  for (const auto& g : m.params.embed) groups.push_back(&g);
  for (const auto& g : m.params.head) groups.push_back(&g);
  return groups;
}

}  // namespace

Tensor fusion_represent(const FusionModel& m, const std::vector<Tensor>& views, const std::vector<std::uint8_t>* mask) {
  if (m.kind == FusionKind::metaviewer || m.kind == FusionKind::c_conv) return represent(m.model, m.params, views, mask);
  if (views.size() != m.model.views) {
    throw std::invalid_argument(fmt::format("fusion_represent: model expects {} views, got {}", m.model.views, views.size()));
  }
  Tape tape;
  const BoundGroup fusion = tape.bind_frozen(m.params.meta);
  std::vector<Var> zs;
  for (std::size_t v = 0; v < views.size(); ++v) {
    Var z = embed(tape.bind_frozen(m.params.embed[v]), tape.constant(views[v]));
    if (mask) z = ops::mul(z, tape.constant(mask_column(*mask, views.size(), v, z.shape()[0], z.shape()[1])));
    zs.push_back(z);
  }
  return fuse(m.kind, fusion, zs, m.model.activation).value();
}

double specific_to_uniform_loss(const FusionModel& m, const std::vector<Tensor>& views, const std::vector<std::uint8_t>* mask,
                                GradMap* grads, std::vector<double>* per_view) {
  Tape tape;
  const StuGraph g = build_stu(tape, m, views, mask, grads == nullptr);
  if (per_view) {
    per_view->clear();
    for (const Var& t : g.per_view) per_view->push_back(t.value().item());
  }
  if (grads) *grads = tape.backward(g.loss, trainable_groups(m));
  return g.loss.value().item();
}

FusionTrainResult train_specific_to_uniform(const MultiViewDataset& ds, FusionKind kind, const ModelConfig& model,
                                            const TrainConfig& cfg, const EpochCallback& on_epoch) {
  FusionTrainResult result;
  if (kind == FusionKind::metaviewer) {
    TrainState st = train(ds, model, cfg, on_epoch);
    result.model.kind = kind;
    result.model.model = model;
    result.model.params = std::move(st.params);
    result.loss_history = std::move(st.loss_history);
    return result;
  }
  cfg.validate();
  if (ds.view_count() != model.views || ds.view_dims() != model.input_dims) {
    throw std::invalid_argument(fmt::format("train_specific_to_uniform: dataset has {} views, model expects {}", ds.view_count(),
                                            model.views));
  }
  const std::vector<std::size_t> rows = ds.indices(Split::train);
  if (rows.empty()) throw std::invalid_argument("train_specific_to_uniform: empty train split");

  FusionModel m = init_fusion(kind, model, init_seed(cfg.seed));
  std::mt19937_64 rng(batch_seed(cfg.seed));
  Optimizer optimizer(cfg.optimizer, cfg.outer_lr);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.inner_loss_per_view.assign(model.views, 0.0);
    const auto batches = make_batches(rows, cfg.batch_size, rng);
    for (const auto& batch : batches) {
      std::vector<Tensor> views;
      for (const Tensor& x : ds.views) views.push_back(x.gather_rows(batch));
      std::vector<std::uint8_t> mask;
      if (ds.mask) {
        for (std::size_t i : batch) {
          for (std::size_t v = 0; v < model.views; ++v) mask.push_back((*ds.mask)[i * model.views + v]);
        }
      }
      GradMap grads;
      std::vector<double> per_view;
      double loss = 0.0;
      try {
        loss = specific_to_uniform_loss(m, views, ds.mask ? &mask : nullptr, &grads, &per_view);
      } catch (const NonFiniteError& e) {
        throw TrainingDiverged(e.what());
      }
      if (!std::isfinite(loss)) throw TrainingDiverged(fmt::format("{} loss non-finite at epoch {}", to_string(kind), epoch));
      if (is_trainable(kind)) optimizer.step(m.params.meta, grads);
      for (auto& g : m.params.embed) optimizer.step(g, grads);
      for (auto& g : m.params.head) optimizer.step(g, grads);
      if (!m.params.all_finite()) throw TrainingDiverged(fmt::format("{} parameters non-finite at epoch {}", to_string(kind), epoch));
      rec.outer_loss += loss;
      for (std::size_t v = 0; v < model.views; ++v) rec.inner_loss_per_view[v] += per_view[v];
    }
    const double nb = static_cast<double>(batches.size());
    rec.outer_loss /= nb;
    for (double& l : rec.inner_loss_per_view) l /= nb;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.loss_history.push_back(rec.outer_loss);
    if (on_epoch) on_epoch(rec);
  }
  result.model = std::move(m);
  return result;
}

MseReport mse_report(const FusionModel& m, const MultiViewDataset& ds, Split which) {
  const std::vector<std::size_t> rows = ds.indices(which);
  MseReport r;
  r.per_view.assign(m.model.views, 0.0);
  if (rows.empty()) return r;
  const MultiViewDataset sub = ds.subset(rows);
  const std::vector<std::uint8_t>* mask = sub.mask ? &*sub.mask : nullptr;
  const Tensor h = fusion_represent(m, sub.views, mask);
  Tape tape;
  const Var hv = tape.constant(h);
  for (std::size_t v = 0; v < m.model.views; ++v) {
    const Tensor rec = reconstruct(tape.bind_frozen(m.params.head[v]), hv).value();
    const Tensor& x = sub.views[v];
    const std::size_t width = x.dim(1);
    double sq = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < x.dim(0); ++i) {
      if (!sub.available(i, v)) continue;
      ++count;
      for (std::size_t c = 0; c < width; ++c) {
        const double e = x[i * width + c] - rec[i * width + c];
        sq += e * e;
      }
    }
    r.per_view[v] = count == 0 ? 0.0 : sq / static_cast<double>(count);
    r.total += r.per_view[v];
  }
  return r;
}

}  // namespace metaviewer
