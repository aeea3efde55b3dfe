#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include <metaviewer/trainer.hpp>

#include "support/oracles.hpp"

namespace mv = metaviewer;

namespace {

mv::ModelConfig tiny_model(std::size_t d = 4) {
  mv::ModelConfig cfg;
  cfg.views = 2;
  cfg.input_dims = {3, 5};
  cfg.embed_dim = cfg.rep_dim = d;
  cfg.embed_hidden = {6};
  cfg.conv_channels = 3;
  cfg.kernel_width = 3;
  return cfg;
}

mv::MetaSplit tiny_split(const mv::ModelConfig& cfg, std::size_t batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<mv::Tensor> views;
  for (std::size_t d : cfg.input_dims) views.push_back(oracle::random_tensor({batch, d}, rng, 0.0, 1.0));
  const auto idx = mv::meta_split(batch, cfg.views, 0.5, rng);
  return mv::materialize(views, idx);
}

mv::MultiViewDataset synthetic(std::size_t n, std::uint64_t seed) {
  mv::SynthSpec spec;
  spec.n = n;
  spec.observed_dims = {8};
  spec.seed = seed;
  return mv::normalize_minmax(mv::split_train_val_test(mv::synth_generate(spec), seed));
}

mv::ModelConfig synthetic_model() {
  mv::ModelConfig cfg;
  cfg.views = 2;
  cfg.input_dims = {8, 8};
  cfg.embed_dim = cfg.rep_dim = 8;
  cfg.embed_hidden = {16};
  cfg.conv_channels = 4;
  return cfg;
}

mv::TrainConfig quick_train(std::size_t epochs) {
  mv::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 32;
  cfg.outer_lr = 1e-2;
  cfg.seed = 3;
  return cfg;
}

mv::GradMap restrict_to(const mv::GradMap& grads, const mv::ParamGroup& group) {
  mv::GradMap out;
  for (const auto& [name, _] : group) out.emplace(group.param_id(name), mv::gradient_of(grads, group, name));
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST(TrainConfig, DefaultsAndValidation) {
  mv::TrainConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.outer_lr, 1e-3);
  EXPECT_DOUBLE_EQ(cfg.inner_lr, 1e-2);
  EXPECT_EQ(cfg.inner_steps, 1u);
  EXPECT_EQ(cfg.batch_size, 256u);
  EXPECT_EQ(cfg.epochs, 2000u);
  EXPECT_EQ(cfg.meta_grad, mv::MetaGradMode::exact_t1);
  EXPECT_EQ(cfg.optimizer, mv::OptimizerKind::adam);
  cfg.validate();
  cfg.inner_steps = 5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.meta_grad = mv::MetaGradMode::first_order;
  cfg.validate();
  cfg.outer_lr = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  EXPECT_EQ(mv::meta_grad_from_string("exact-t1"), mv::MetaGradMode::exact_t1);
  EXPECT_EQ(mv::to_string(mv::MetaGradMode::first_order), "first-order");
}

TEST(InnerUpdate, OneDimensionalToyStep) {
  // L(theta) = (theta - 3)^2 from theta = 0 with lr 0.1.
  mv::ParamGroup theta(mv::GroupTag{mv::GroupKind::base, 0}, "t");
  theta.add("x", mv::Tensor::scalar(0.0));
  mv::Optimizer gd(mv::OptimizerKind::plain_gd, 0.1);
  gd.step(theta, {{"t.x", mv::Tensor::scalar(2.0 * (0.0 - 3.0))}});
  EXPECT_NEAR(theta.at("x").item(), 0.6, 1e-15);
}

TEST(InnerUpdate, ZeroStepsReturnsStartingPoint) {
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 1);
  const auto split = tiny_split(cfg, 6, 2);
  const auto r = mv::inner_update(split, p, 0, 0.01, cfg.activation);
  for (std::size_t v = 0; v < 2; ++v) {
    const auto slice = mv::init_base_from_meta(p.meta, v);
    for (const auto& [name, t] : slice) EXPECT_EQ(r.views[v].theta.at(name), t);
    for (const auto& [name, t] : p.embed[v]) EXPECT_EQ(r.views[v].embed.at(name), t);
    for (const auto& [name, t] : p.head[v]) EXPECT_EQ(r.views[v].head.at(name), t);
  }
}

TEST(InnerUpdate, ZeroLearningRateLeavesParametersUnchanged) {
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 1);
  const auto r = mv::inner_update(tiny_split(cfg, 6, 2), p, 5, 0.0, cfg.activation);
  for (const auto& a : r.views) {
    EXPECT_EQ(a.theta, a.theta0);
    EXPECT_EQ(a.embed, a.embed0);
    EXPECT_EQ(a.head, a.head0);
  }
}

TEST(InnerUpdate, SingleStepIsPlainGradientDescent) {
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 4);
  const auto split = tiny_split(cfg, 8, 5);
  const double lr = 0.05;
  const auto r = mv::inner_update(split, p, 1, lr, cfg.activation);
  for (const auto& a : r.views) {
    mv::GradMap g;
    const double loss = mv::inner_loss(a.support, a.theta0, a.embed0, a.head0, cfg.activation, &g);
    EXPECT_DOUBLE_EQ(loss, a.initial_loss);
    for (const mv::ParamGroup* pair : {&a.theta0, &a.embed0, &a.head0}) {
      const mv::ParamGroup& after = pair == &a.theta0 ? a.theta : pair == &a.embed0 ? a.embed : a.head;
      for (const auto& [name, t0] : *pair) {
        const mv::Tensor expected = t0 - mv::gradient_of(g, *pair, name) * lr;
        const mv::Tensor& got = after.at(name);
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-15);
      }
    }
  }
}

TEST(InnerUpdate, NeverMutatesOuterParameters) {
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 1);
  const mv::ModelParams before = p;
  mv::inner_update(tiny_split(cfg, 6, 2), p, 10, 0.5, cfg.activation);
  EXPECT_EQ(p, before);
}

TEST(InnerUpdate, EmptySupportRejectedWhenStepping) {
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 1);
  EXPECT_THROW(mv::adapt_view(mv::Tensor({0, 3}), p.meta, 0, p.embed[0], p.head[0], 1, 0.1, cfg.activation),
               std::invalid_argument);
  EXPECT_NO_THROW(mv::adapt_view(mv::Tensor({0, 3}), p.meta, 0, p.embed[0], p.head[0], 0, 0.1, cfg.activation));
}

TEST(InnerUpdate, ViewOrderDoesNotMatter) {
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 8);
  const auto split = tiny_split(cfg, 10, 9);
  const auto joint = mv::inner_update(split, p, 3, 0.1, cfg.activation);
  for (std::size_t v : {1u, 0u}) {
    const auto alone = mv::adapt_view(split.support[v], p.meta, v, p.embed[v], p.head[v], 3, 0.1, cfg.activation);
    for (const auto& [name, t] : alone.theta) EXPECT_EQ(joint.views[v].theta.at(name), t);
    for (const auto& [name, t] : alone.embed) EXPECT_EQ(joint.views[v].embed.at(name), t);
  }
}

TEST(MetaGradient, QuadraticToyMatchesClosedForm) {
  // L_in(theta) = 1/2 (theta - b)^2, theta0 = omega, one step of size beta;
  // L_out(theta*) = 1/2 (theta* - c)^2. Then
  // dL/domega = (1 - beta) ((1 - beta) omega + beta b - c).
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const double beta = std::uniform_real_distribution<double>(0.01, 0.9)(rng);
    const mv::Tensor omega = oracle::random_tensor({5}, rng, -3, 3);
    const mv::Tensor b = oracle::random_tensor({5}, rng, -3, 3);
    const mv::Tensor c = oracle::random_tensor({5}, rng, -3, 3);
    mv::ParamGroup theta0(mv::GroupTag{mv::GroupKind::base, 0}, "q");
    theta0.add("w", omega);

    const mv::GradientField inner_grad = [&](const mv::ParamGroup& th) {
      mv::ParamGroup g(th.tag(), th.prefix());
      g.add("w", th.at("w") - b);
      return g;
    };
    mv::ParamGroup theta_star = theta0;
    theta_star.at("w") -= inner_grad(theta0).at("w") * beta;
    mv::ParamGroup outer_grad(theta0.tag(), theta0.prefix());
    outer_grad.add("w", theta_star.at("w") - c);

    const mv::ParamGroup got = mv::one_step_meta_gradient(inner_grad, theta0, outer_grad, beta);
    mv::GradMap closed, mine;
    mv::Tensor expected(omega.shape());
    for (std::size_t i = 0; i < 5; ++i) expected[i] = (1 - beta) * ((1 - beta) * omega[i] + beta * b[i] - c[i]);
    closed.emplace("w", expected);
    mine.emplace("w", got.at("w"));
    EXPECT_LE(mv::relative_error(mine, closed), 1e-6) << "trial " << trial;
  }
}

TEST(MetaGradient, HvpOfQuadraticFormMatchesMatrixProduct) {
  std::mt19937_64 rng(13);
  const mv::Tensor a = oracle::random_tensor({4, 4}, rng);
  mv::Tensor sym({4, 4});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) sym[i * 4 + j] = a[i * 4 + j] + a[j * 4 + i];
  }
  const mv::GradientField grad = [&](const mv::ParamGroup& th) {
    // gradient of 1/2 x^T S x + sum(x^3)/3 is S x + x^2
    mv::Tensor g({4}, 0.0);
    const mv::Tensor& x = th.at("x");
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) g[i] += sym[i * 4 + j] * x[j];
      g[i] += x[i] * x[i];
    }
    mv::ParamGroup out(th.tag(), th.prefix());
    out.add("x", g);
    return out;
  };
  mv::ParamGroup at(mv::GroupTag{mv::GroupKind::base, 0}, "h");
  at.add("x", oracle::random_tensor({4}, rng));
  mv::ParamGroup u(at.tag(), at.prefix());
  u.add("x", oracle::random_tensor({4}, rng));
  const mv::Tensor hv = mv::fd_hvp(grad, at, u).at("x");
  for (std::size_t i = 0; i < 4; ++i) {
    double expected = 2.0 * at.at("x")[i] * u.at("x")[i];
    for (std::size_t j = 0; j < 4; ++j) expected += sym[i * 4 + j] * u.at("x")[j];
    EXPECT_NEAR(hv[i], expected, 1e-7);
  }
}

TEST(MetaGradient, ZeroInnerRateMakesModesCoincide) {
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 2);
  const auto split = tiny_split(cfg, 6, 3);
  const auto inner = mv::inner_update(split, p, 1, 0.0, cfg.activation);
  const mv::LossConfig loss;
  const auto fo = mv::meta_gradient(split, p, inner, mv::MetaGradMode::first_order, 0.0, loss, cfg.activation);
  const auto ex = mv::meta_gradient(split, p, inner, mv::MetaGradMode::exact_t1, 0.0, loss, cfg.activation);
  EXPECT_EQ(fo.grads, ex.grads);
  EXPECT_EQ(fo.outer_loss, ex.outer_loss);
}

TEST(MetaGradient, ExactModeRejectsSeveralSteps) {
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 2);
  const auto split = tiny_split(cfg, 6, 3);
  const auto inner = mv::inner_update(split, p, 2, 0.1, cfg.activation);
  EXPECT_THROW(mv::meta_gradient(split, p, inner, mv::MetaGradMode::exact_t1, 0.1, {}, cfg.activation), std::invalid_argument);
}

namespace {

double bilevel_objective(const mv::MetaSplit& split, const mv::ModelParams& p, double beta, const mv::LossConfig& loss,
                         mv::Activation act) {
  return mv::outer_loss_value(split, p, mv::inner_update(split, p, 1, beta, act), loss, act);
}

struct PipelineCheck {
  double exact_error;
  double first_order_error;
};

PipelineCheck whole_pipeline_check(const mv::LossConfig& loss, mv::Activation act, std::uint64_t seed) {
  auto cfg = tiny_model(4);
  cfg.activation = act;
  const mv::ModelParams p = mv::init_params(cfg, seed);
  const auto split = tiny_split(cfg, 6, seed + 100);
  const double beta = 0.5;

  const auto inner = mv::inner_update(split, p, 1, beta, act);
  const auto exact = mv::meta_gradient(split, p, inner, mv::MetaGradMode::exact_t1, beta, loss, act);
  const auto first = mv::meta_gradient(split, p, inner, mv::MetaGradMode::first_order, beta, loss, act);

  const mv::GradMap numeric = mv::finite_diff_grad(
      [&](std::span<const mv::ParamGroup> gs) {
        mv::ModelParams q = p;
        q.meta = gs[0];
        return bilevel_objective(split, q, beta, loss, act);
      },
      {p.meta}, 1e-5);
  return {mv::relative_error(restrict_to(exact.grads, p.meta), numeric),
          mv::relative_error(restrict_to(first.grads, p.meta), numeric)};
}

}  // namespace

TEST(MetaGradient, ExactOneStepMatchesWholePipelineFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    for (auto act : {mv::Activation::relu, mv::Activation::tanh}) {
      const auto check = whole_pipeline_check(mv::LossConfig{}, act, seed);
      EXPECT_LE(check.exact_error, 1e-3) << "seed " << seed << " " << mv::to_string(act);
      // The check has teeth: dropping the curvature term is visibly wrong.
      EXPECT_GT(check.first_order_error, 10.0 * check.exact_error) << "seed " << seed;
    }
  }
}

TEST(MetaGradient, ExactOneStepMatchesFiniteDifferencesUnderContrastiveObjective) {
  mv::LossConfig loss;
  loss.variant = mv::OuterVariant::mver_c;
  for (bool include_h : {false, true}) {
    loss.include_h = include_h;
    const auto check = whole_pipeline_check(loss, mv::Activation::tanh, 7);
    EXPECT_LE(check.exact_error, 1e-3) << "include_h " << include_h;
  }
}

TEST(MetaGradient, EmbedderAndHeadGradientsMatchFiniteDifferences) {
  const auto cfg = tiny_model();
  const mv::ModelParams p = mv::init_params(cfg, 5);
  const auto split = tiny_split(cfg, 6, 6);
  const auto inner = mv::inner_update(split, p, 1, 0.3, cfg.activation);
  const auto mg = mv::meta_gradient(split, p, inner, mv::MetaGradMode::exact_t1, 0.3, {}, cfg.activation);
  for (std::size_t v = 0; v < 2; ++v) {
    const mv::GradMap numeric = mv::finite_diff_grad(
        [&](std::span<const mv::ParamGroup> gs) {
          mv::ModelParams q = p;
          q.embed[v] = gs[0];
          q.head[v] = gs[1];
          // The adapted base-learners stay fixed: phi_v reaches the outer
          // loss only directly, never through theta*.
          return mv::outer_loss_value(split, q, inner, {}, cfg.activation);
        },
        {p.embed[v], p.head[v]}, 1e-6);
    mv::GradMap analytic = restrict_to(mg.grads, p.embed[v]);
    analytic.merge(restrict_to(mg.grads, p.head[v]));
    EXPECT_LE(mv::relative_error(analytic, numeric), 1e-5) << "view " << v;
  }
}

TEST(MetaGradient, ZeroStepObjectiveIsTheBasePathReconstruction) {
  // With T = 0 the outer loss is sum_v rec(Q^v, r_v(b_v(f_v(Q^v)))) with
  // theta = omega's slice, computed here from the pieces directly.
  const auto cfg = tiny_model();
  const auto p = mv::init_params(cfg, 6);
  const auto split = tiny_split(cfg, 8, 1);
  const auto inner = mv::inner_update(split, p, 0, 0.1, cfg.activation);
  const auto mg = mv::meta_gradient(split, p, inner, mv::MetaGradMode::first_order, 0.1, {}, cfg.activation);
  double expected = 0.0;
  for (std::size_t v = 0; v < 2; ++v) {
    mv::Tape t;
    const auto theta = mv::init_base_from_meta(p.meta, v);
    const mv::Var q = t.constant(split.query[v]);
    const mv::Var z = mv::embed(t.bind_frozen(p.embed[v]), q);
    const mv::Var h = mv::base_forward(t.bind_frozen(theta), z, cfg.activation);
    const mv::Tensor rec = mv::reconstruct(t.bind_frozen(p.head[v]), h).value();
    double s = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) s += (rec[i] - split.query[v][i]) * (rec[i] - split.query[v][i]);
    expected += s / static_cast<double>(split.query[v].dim(0));
  }
  EXPECT_NEAR(mg.outer_loss, expected, 1e-12);
}

TEST(OuterUpdate, PlainGradientDescentStep) {
  const auto cfg = tiny_model();
  mv::ModelParams p = mv::init_params(cfg, 1);
  const mv::ModelParams before = p;
  mv::GradMap grads;
  const std::string id = p.meta.param_id("conv0.bias");
  grads.emplace(id, mv::Tensor({3}, 2.0));
  mv::Optimizer gd(mv::OptimizerKind::plain_gd, 0.25);
  mv::outer_update(p, grads, gd);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(p.meta.at("conv0.bias")[i], before.meta.at("conv0.bias")[i] - 0.5);
  EXPECT_EQ(p.meta.at("conv0.kernel"), before.meta.at("conv0.kernel"));
  EXPECT_EQ(p.embed, before.embed);
}

TEST(OuterUpdate, ZeroGradientsLeaveParametersUnchanged) {
  const auto cfg = tiny_model();
  for (auto kind : {mv::OptimizerKind::plain_gd, mv::OptimizerKind::adam}) {
    mv::ModelParams p = mv::init_params(cfg, 1);
    const mv::ModelParams before = p;
    mv::Optimizer opt(kind, 0.1);
    mv::outer_update(p, {}, opt);
    EXPECT_EQ(p, before);
  }
}

TEST(OuterUpdate, AdamFirstStepMovesByLearningRate) {
  mv::ParamGroup g(mv::GroupTag{mv::GroupKind::meta, std::nullopt}, "m");
  g.add("x", mv::Tensor::vector({1.0, -1.0}));
  mv::Optimizer adam(mv::OptimizerKind::adam, 0.01);
  adam.step(g, {{"m.x", mv::Tensor::vector({3.0, -0.2})}});
  // Bias-corrected first step is lr * g / (|g| + eps').
  EXPECT_NEAR(g.at("x")[0], 1.0 - 0.01 * 3.0 / (3.0 + 1e-8), 1e-12);
  EXPECT_NEAR(g.at("x")[1], -1.0 + 0.01 * 0.2 / (0.2 + 1e-8), 1e-12);
}

TEST(MakeBatches, FoldsShortTail) {
  std::mt19937_64 rng(0);
  std::vector<std::size_t> rows(70);
  std::iota(rows.begin(), rows.end(), 0);
  const auto b = mv::make_batches(rows, 32, rng);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].size(), 32u);
  EXPECT_EQ(b[1].size(), 38u);
  std::vector<std::size_t> all;
  for (const auto& x : b) all.insert(all.end(), x.begin(), x.end());
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, rows);
  const auto c = mv::make_batches(std::vector<std::size_t>(rows.begin(), rows.begin() + 50), 32, rng);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[1].size(), 18u);
}

TEST(Train, IdenticalSeedsGiveIdenticalRuns) {
  const auto ds = synthetic(120, 1);
  const auto model = synthetic_model();
  const auto a = mv::train(ds, model, quick_train(10));
  const auto b = mv::train(ds, model, quick_train(10));
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(a.params, b.params);
  auto other = quick_train(10);
  other.seed = 4;
  EXPECT_NE(mv::train(ds, model, other).loss_history, a.loss_history);
}

TEST(Train, OuterLossFallsOnSyntheticData) {
  const auto ds = synthetic(300, 2);
  const auto model = synthetic_model();
  std::vector<double> first, last;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto cfg = quick_train(200);
    cfg.seed = seed;
    const auto state = mv::train(ds, model, cfg);
    const auto& h = state.loss_history;
    ASSERT_EQ(h.size(), 200u);
    EXPECT_LT(h.back(), h.front()) << "seed " << seed;
    first.push_back(median(std::vector<double>(h.begin(), h.begin() + 20)));
    last.push_back(median(std::vector<double>(h.end() - 20, h.end())));
  }
  EXPECT_LT(median(last), median(first));
}

TEST(Train, CallbackSeesEveryEpoch) {
  const auto ds = synthetic(80, 3);
  std::vector<mv::EpochRecord> records;
  mv::train(ds, synthetic_model(), quick_train(4), [&](const mv::EpochRecord& r) { records.push_back(r); });
  ASSERT_EQ(records.size(), 4u);
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(records[e].epoch, e + 1);
    EXPECT_TRUE(std::isfinite(records[e].outer_loss));
    EXPECT_EQ(records[e].inner_loss_per_view.size(), 2u);
  }
}

TEST(Train, IncompleteViewsUseTheIncompleteSplit) {
  auto ds = synthetic(200, 4);
  ds = mv::drop_views(ds, 0.3, 9);
  auto cfg = quick_train(20);
  cfg.loss.variant = mv::OuterVariant::mver_c;
  const auto state = mv::train(ds, synthetic_model(), cfg);
  for (double x : state.loss_history) EXPECT_TRUE(std::isfinite(x));
  EXPECT_TRUE(state.params.all_finite());
}

TEST(Train, DivergenceIsReported) {
  const auto ds = synthetic(80, 5);
  auto cfg = quick_train(50);
  cfg.optimizer = mv::OptimizerKind::plain_gd;
  cfg.outer_lr = 1e12;
  EXPECT_THROW(mv::train(ds, synthetic_model(), cfg), mv::TrainingDiverged);
}

TEST(Train, ModelDatasetMismatchRejected) {
  const auto ds = synthetic(80, 5);
  auto model = synthetic_model();
  model.input_dims = {8, 9};
  EXPECT_THROW(mv::train(ds, model, quick_train(1)), std::invalid_argument);
}

TEST(Seeds, InitAndBatchStreamsDiffer) {
  EXPECT_NE(mv::init_seed(0), mv::batch_seed(0));
  EXPECT_NE(mv::init_seed(1), mv::init_seed(2));
}
