#include "metaviewer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "metaviewer/ops.hpp"

namespace metaviewer {

std::string to_string(MetaGradMode m) { return m == MetaGradMode::first_order ? "first-order" : "exact-t1"; }

MetaGradMode meta_grad_from_string(const std::string& name) {
  if (name == "first-order") return MetaGradMode::first_order;
  if (name == "exact-t1") return MetaGradMode::exact_t1;
  throw std::invalid_argument(fmt::format("unknown meta-gradient mode '{}' (expected first-order or exact-t1)", name));
}

void TrainConfig::validate() const {
  if (!(inner_lr >= 0.0) || !(outer_lr > 0.0)) {
    throw std::invalid_argument(fmt::format("TrainConfig: inner_lr {} must be >= 0 and outer_lr {} > 0", inner_lr, outer_lr));
  }
  if (meta_grad == MetaGradMode::exact_t1 && inner_steps != 1) {
    throw std::invalid_argument(fmt::format("TrainConfig: exact-t1 meta-gradients need inner_steps = 1, got {}", inner_steps));
  }
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
  if (!(support_ratio > 0.0 && support_ratio < 1.0)) {
    throw std::invalid_argument(fmt::format("TrainConfig: support_ratio {} not in (0, 1)", support_ratio));
  }
  loss.validate();
}

std::uint64_t init_seed(std::uint64_t seed) { return seed * 0x9E3779B97F4A7C15ULL + 1; }
std::uint64_t batch_seed(std::uint64_t seed) { return seed * 0xBF58476D1CE4E5B9ULL + 2; }

// ---------------------------------------------------------------------------
// inner level

double inner_loss(const Tensor& support, const ParamGroup& theta, const ParamGroup& embed, const ParamGroup& head,
                  Activation act, GradMap* grads) {
  Tape tape;
  const BoundGroup th = tape.bind(theta);
  const BoundGroup fe = tape.bind(embed);
  const BoundGroup hr = tape.bind(head);
  const Var s = tape.constant(support);
  const Var rec = reconstruct(hr, base_forward(th, metaviewer::embed(fe, s), act));
  const Var loss = rec_loss(s, rec);
  if (grads) *grads = tape.backward(loss, {&theta, &embed, &head});
  return loss.value().item();
}

namespace {

void descend(ParamGroup& group, const GradMap& grads, double lr) {
  for (auto& [name, value] : group) {
    auto it = grads.find(group.param_id(name));
    if (it == grads.end()) continue;
    for (std::size_t i = 0; i < value.size(); ++i) value[i] -= lr * it->second[i];
  }
}

}  // namespace

ViewAdaptation adapt_view(const Tensor& support, const ParamGroup& omega, std::size_t view, const ParamGroup& embed,
                          const ParamGroup& head, std::size_t steps, double lr, Activation act) {
  ViewAdaptation a;
  a.view = view;
  a.steps = steps;
  a.support = support;
  a.theta0 = init_base_from_meta(omega, view);
  a.embed0 = copy_detached(embed);
  a.head0 = copy_detached(head);
  a.theta = a.theta0;
  a.embed = a.embed0;
  a.head = a.head0;
  if (support.dim(0) == 0) {
    if (steps > 0) throw std::invalid_argument(fmt::format("inner_update: view {} has an empty support set", view));
    return a;
  }
  for (std::size_t t = 0; t < steps; ++t) {
    GradMap g;
    const double loss = inner_loss(support, a.theta, a.embed, a.head, act, &g);
    if (t == 0) a.initial_loss = loss;
    descend(a.theta, g, lr);
    descend(a.embed, g, lr);
    descend(a.head, g, lr);
  }
  if (steps == 0) a.initial_loss = inner_loss(support, a.theta, a.embed, a.head, act);
  return a;
}

InnerResult inner_update(const MetaSplit& split, const ModelParams& params, std::size_t steps, double lr, Activation act) {
  InnerResult r;
  for (std::size_t v = 0; v < split.support.size(); ++v) {
    const std::size_t view_steps = split.support[v].dim(0) == 0 ? 0 : steps;
    r.views.push_back(adapt_view(split.support[v], params.meta, v, params.embed[v], params.head[v], view_steps, lr, act));
  }
  return r;
}

ParamGroup fd_hvp(const GradientField& grad, const ParamGroup& at, const ParamGroup& direction) {
  double norm_sq = 0.0;
  double at_inf = 0.0;
  for (const auto& [name, u] : direction) {
    for (double x : u.values()) norm_sq += x * x;
    at_inf = std::max(at_inf, at.at(name).max_abs());
  }
  ParamGroup out(at.tag(), at.prefix());
  const double norm = std::sqrt(norm_sq);
  if (norm == 0.0) {
    for (const auto& [name, u] : direction) out.add(name, Tensor(u.shape(), 0.0));
    return out;
  }
  const double eps = 1e-4 * (1.0 + at_inf);
  ParamGroup plus = at;
  ParamGroup minus = at;
  for (const auto& [name, u] : direction) {
    Tensor& p = plus.at(name);
    Tensor& m = minus.at(name);
    for (std::size_t i = 0; i < u.size(); ++i) {
      p[i] += eps * u[i] / norm;
      m[i] -= eps * u[i] / norm;
    }
  }
  const ParamGroup gp = grad(plus);
  const ParamGroup gm = grad(minus);
  for (const auto& [name, u] : direction) {
    Tensor hv = gp.at(name) - gm.at(name);
    hv *= norm / (2.0 * eps);
    if (!hv.all_finite()) throw NonFiniteError(fmt::format("fd_hvp: non-finite product for {} (eps {})", name, eps));
    out.add(name, std::move(hv));
  }
  return out;
}

ParamGroup one_step_meta_gradient(const GradientField& inner_grad, const ParamGroup& theta0, const ParamGroup& outer_grad,
                                  double lr) {
  const ParamGroup hv = fd_hvp(inner_grad, theta0, outer_grad);
  ParamGroup out = outer_grad;
  for (auto& [name, t] : out) {
    const Tensor& h = hv.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] -= lr * h[i];
  }
  return out;
}

namespace {

GradientField inner_theta_gradient(const ViewAdaptation& a, Activation act) {
  return [&a, act](const ParamGroup& theta) {
    GradMap g;
    inner_loss(a.support, theta, a.embed0, a.head0, act, &g);
    ParamGroup out(theta.tag(), theta.prefix());
    for (const auto& [name, _] : theta) out.add(name, gradient_of(g, theta, name));
    return out;
  };
}

}  // namespace

ParamGroup inner_hvp(const ViewAdaptation& a, const ParamGroup& direction, Activation act) {
  if (a.support.dim(0) == 0) {
    ParamGroup out(a.theta0.tag(), a.theta0.prefix());
    for (const auto& [name, u] : direction) out.add(name, Tensor(u.shape(), 0.0));
    return out;
  }
  try {
    return fd_hvp(inner_theta_gradient(a, act), a.theta0, direction);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(fmt::format("inner_hvp: view {}: {}", a.view, e.what()));
  }
}

// ---------------------------------------------------------------------------
// outer level

namespace {

struct OuterGraph {
  Var loss;
  std::vector<const ParamGroup*> groups;
};

OuterGraph build_outer(Tape& tape, const MetaSplit& split, const ModelParams& params, const InnerResult& inner,
                       const LossConfig& loss_cfg, Activation act) {
  const std::size_t views = split.query.size();
  if (inner.views.size() != views || params.embed.size() != views) {
    throw std::invalid_argument(fmt::format("meta_gradient: {} query views, {} adapted views, {} embedders", views,
                                            inner.views.size(), params.embed.size()));
  }
  const bool use_h = loss_cfg.variant == OuterVariant::mver_c && loss_cfg.include_h;
  OuterGraph g;
  std::vector<Var> targets, recs, reps, zs;
  for (std::size_t v = 0; v < views; ++v) {
    const BoundGroup fe = tape.bind(params.embed[v]);
    const BoundGroup hr = tape.bind(params.head[v]);
    const BoundGroup th = tape.bind(inner.views[v].theta);
    const Var q = tape.constant(split.query[v]);
    const Var z = embed(fe, q);
    const Var h = base_forward(th, z, act);
    targets.push_back(q);
    zs.push_back(z);
    reps.push_back(h);
    recs.push_back(reconstruct(hr, h));
    g.groups.push_back(&params.embed[v]);
    g.groups.push_back(&params.head[v]);
    g.groups.push_back(&inner.views[v].theta);
  }
  std::optional<Var> unified;
  if (use_h) {
    unified = fuse_meta(tape.bind(params.meta), zs, act);
    g.groups.push_back(&params.meta);
  }
  g.loss = outer_loss(loss_cfg, targets, recs, reps, unified);
  return g;
}

void add_into(GradMap& grads, const std::string& id, const Tensor& value) {
  auto [it, fresh] = grads.try_emplace(id, value);
  if (!fresh) it->second += value;
}

// Maps a theta-shaped gradient onto omega's layout: conv0's kernel slice
// goes to channel `view`; every other entry is shared and accumulates.
void scatter_to_meta(GradMap& grads, const ParamGroup& omega, std::size_t view, const ParamGroup& theta_grad) {
  for (const auto& [name, g] : theta_grad) {
    if (name != "conv0.kernel") {
      add_into(grads, omega.param_id(name), g);
      continue;
    }
    const Tensor& k0 = omega.at("conv0.kernel");
    const std::size_t cout = k0.dim(0), cin = k0.dim(1), width = k0.dim(2);
    Tensor full(k0.shape(), 0.0);
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t j = 0; j < width; ++j) full[(o * cin + view) * width + j] = g[o * width + j];
    }
    add_into(grads, omega.param_id(name), full);
  }
}

}  // namespace

MetaGradient meta_gradient(const MetaSplit& split, const ModelParams& params, const InnerResult& inner, MetaGradMode mode,
                           double inner_lr, const LossConfig& loss_cfg, Activation act) {
  Tape tape;
  const OuterGraph g = build_outer(tape, split, params, inner, loss_cfg, act);
  const GradMap all = tape.backward(g.loss, g.groups);

  MetaGradient out;
  out.outer_loss = g.loss.value().item();
  auto keep = [&](const ParamGroup& group) {
    for (const auto& [name, _] : group) {
      auto it = all.find(group.param_id(name));
      if (it != all.end()) out.grads.emplace(it->first, it->second);
    }
  };
  keep(params.meta);
  for (std::size_t v = 0; v < params.embed.size(); ++v) {
    keep(params.embed[v]);
    keep(params.head[v]);
  }

  for (const ViewAdaptation& a : inner.views) {
    ParamGroup g_theta(a.theta.tag(), a.theta.prefix());
    for (const auto& [name, _] : a.theta) g_theta.add(name, gradient_of(all, a.theta, name));
    if (mode == MetaGradMode::exact_t1 && a.steps == 1) {
      const ParamGroup hv = inner_hvp(a, g_theta, act);
      for (auto& [name, t] : g_theta) {
        const Tensor& h = hv.at(name);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] -= inner_lr * h[i];
      }
    } else if (mode == MetaGradMode::exact_t1 && a.steps > 1) {
      throw std::invalid_argument("meta_gradient: exact-t1 needs a single inner step");
    }
    scatter_to_meta(out.grads, params.meta, a.view, g_theta);
  }
  return out;
}

double outer_loss_value(const MetaSplit& split, const ModelParams& params, const InnerResult& inner, const LossConfig& loss_cfg,
                        Activation act) {
  Tape tape;
  return build_outer(tape, split, params, inner, loss_cfg, act).loss.value().item();
}

void outer_update(ModelParams& params, const GradMap& grads, Optimizer& optimizer) {
  optimizer.step(params.meta, grads);
  for (auto& g : params.embed) optimizer.step(g, grads);
  for (auto& g : params.head) optimizer.step(g, grads);
}

// ---------------------------------------------------------------------------
// training loop

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> rows, std::size_t batch_size,
                                                   std::mt19937_64& rng) {
  std::shuffle(rows.begin(), rows.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < rows.size(); i += batch_size) {
    const std::size_t end = std::min(rows.size(), i + batch_size);
    std::vector<std::size_t> b(rows.begin() + static_cast<std::ptrdiff_t>(i), rows.begin() + static_cast<std::ptrdiff_t>(end));
    if (!batches.empty() && 2 * b.size() < batch_size) {
      batches.back().insert(batches.back().end(), b.begin(), b.end());
    } else {
      batches.push_back(std::move(b));
    }
  }
  return batches;
}

StepResult bilevel_step(ModelParams& params, Optimizer& optimizer, const std::vector<Tensor>& batch_views,
                        const std::vector<std::uint8_t>* batch_mask, const ModelConfig& model, const TrainConfig& cfg,
                        std::mt19937_64& rng) {
  StepResult r;
  const std::size_t views = batch_views.size();
  const std::size_t b = batch_views.front().dim(0);
  if (b < 2) return r;

  MetaSplitIndices idx;
  bool split_incomplete = false;
  if (batch_mask) {
    std::size_t complete = 0;
    for (std::size_t i = 0; i < b; ++i) {
      bool all = true;
      for (std::size_t v = 0; v < views; ++v) all = all && (*batch_mask)[i * views + v] != 0;
      complete += all ? 1 : 0;
    }
    if (complete == 0) return r;
    split_incomplete = complete < b;
  }
  idx = split_incomplete ? meta_split_incomplete(*batch_mask, views) : meta_split(b, views, cfg.support_ratio, rng);
  const std::size_t min_query = cfg.loss.variant == OuterVariant::mver_c ? 2 : 1;
  if (idx.query.size() < min_query) return r;

  const MetaSplit split = materialize(batch_views, idx);
  try {
    const InnerResult inner = inner_update(split, params, cfg.inner_steps, cfg.inner_lr, model.activation);
    const MetaGradient mg = meta_gradient(split, params, inner, cfg.meta_grad, cfg.inner_lr, cfg.loss, model.activation);
    if (!std::isfinite(mg.outer_loss)) throw TrainingDiverged("outer loss is non-finite");
    outer_update(params, mg.grads, optimizer);
    if (!params.all_finite()) throw TrainingDiverged("parameters became non-finite after the outer update");
    r.applied = true;
    r.outer_loss = mg.outer_loss;
    for (const ViewAdaptation& a : inner.views) r.inner_loss_per_view.push_back(a.initial_loss);
  } catch (const NonFiniteError& e) {
    throw TrainingDiverged(e.what());
  } catch (const std::domain_error&) {
    // A representation row collapsed to zero, so the contrastive cosine is
    // undefined on this batch. Nothing has been stepped yet; skip it.
    return StepResult{};
  }
  return r;
}

TrainState train(const MultiViewDataset& ds, const ModelConfig& model, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  model.validate();
  if (ds.view_count() != model.views || ds.view_dims() != model.input_dims) {
    throw std::invalid_argument(fmt::format("train: dataset has {} views, model expects {}", ds.view_count(), model.views));
  }
  const std::vector<std::size_t> rows = ds.indices(Split::train);
  if (rows.empty()) throw std::invalid_argument("train: empty train split");

  TrainState st{init_params(model, init_seed(cfg.seed)), 0, std::mt19937_64(batch_seed(cfg.seed)), {}};
  Optimizer optimizer(cfg.optimizer, cfg.outer_lr);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.inner_loss_per_view.assign(model.views, 0.0);
    std::size_t applied = 0;
    for (const auto& batch : make_batches(rows, cfg.batch_size, st.rng)) {
      std::vector<Tensor> views;
      for (const Tensor& m : ds.views) views.push_back(m.gather_rows(batch));
      std::vector<std::uint8_t> mask;
      if (ds.mask) {
        for (std::size_t i : batch) {
          for (std::size_t v = 0; v < model.views; ++v) mask.push_back((*ds.mask)[i * model.views + v]);
        }
      }
      const StepResult r = bilevel_step(st.params, optimizer, views, ds.mask ? &mask : nullptr, model, cfg, st.rng);
      if (!r.applied) {
        ++rec.skipped_batches;
        continue;
      }
      ++applied;
      rec.outer_loss += r.outer_loss;
      for (std::size_t v = 0; v < model.views; ++v) rec.inner_loss_per_view[v] += r.inner_loss_per_view[v];
    }
    if (applied == 0) throw std::invalid_argument(fmt::format("train: epoch {} had no usable batch", epoch));
    rec.outer_loss /= static_cast<double>(applied);
    for (double& l : rec.inner_loss_per_view) l /= static_cast<double>(applied);
    if (!std::isfinite(rec.outer_loss)) throw TrainingDiverged(fmt::format("outer loss non-finite at epoch {}", epoch));
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    st.epoch = epoch;
    st.loss_history.push_back(rec.outer_loss);
    if (on_epoch) on_epoch(rec);
  }
  return st;
}

}  // namespace metaviewer
