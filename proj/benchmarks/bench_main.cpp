#include <benchmark/benchmark.h>

#include <random>

#include <metaviewer/data.hpp>
#include <metaviewer/evaluation.hpp>
#include <metaviewer/model.hpp>
#include <metaviewer/ops.hpp>
#include <metaviewer/optimizer.hpp>
#include <metaviewer/trainer.hpp>

namespace mv = metaviewer;

namespace {

mv::Tensor uniform(mv::Shape shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  mv::Tensor t(shape, 0.0);
  for (double& x : t.values()) x = u(rng);
  return t;
}

// Batch x views x d input against a C_out x views x k kernel.
void BM_ChannelConvForward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(1);
  const mv::Tensor x = uniform({batch, 2, d}, rng), k = uniform({32, 2, 3}, rng), b = uniform({32}, rng);
  for (auto _ : state) {
    mv::Tape tape;
    benchmark::DoNotOptimize(mv::ops::channel_conv1d(tape.constant(x), tape.constant(k), tape.constant(b)).value());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch));
}
BENCHMARK(BM_ChannelConvForward)->Args({64, 16})->Args({256, 256});

void BM_ChannelConvBackward(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(2);
  mv::ParamGroup g(mv::GroupTag{mv::GroupKind::meta, std::nullopt}, "meta");
  g.add("k", uniform({32, 2, 3}, rng));
  g.add("b", uniform({32}, rng));
  const mv::Tensor x = uniform({batch, 2, d}, rng);
  for (auto _ : state) {
    mv::Tape tape;
    const auto p = tape.bind(g);
    const mv::Var y = mv::ops::channel_conv1d(tape.constant(x), p["k"], p["b"]);
    benchmark::DoNotOptimize(tape.backward(mv::ops::sum(y), {&g}));
  }
}
BENCHMARK(BM_ChannelConvBackward)->Args({64, 16})->Args({256, 256});

// One full bi-level step (split, inner update, meta-gradient, Adam) on a batch.
void BM_BilevelStep(benchmark::State& state) {
  mv::ModelConfig model;
  model.views = 2;
  model.input_dims = {20, 20};
  model.embed_dim = model.rep_dim = 16;
  model.embed_hidden = {32};
  model.conv_channels = 8;
  mv::TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.meta_grad = state.range(0) ? mv::MetaGradMode::exact_t1 : mv::MetaGradMode::first_order;
  std::mt19937_64 rng(3);
  const std::vector<mv::Tensor> views{uniform({64, 20}, rng), uniform({64, 20}, rng)};
  mv::ModelParams params = mv::init_params(model, 4);
  mv::Optimizer opt(cfg.optimizer, cfg.outer_lr);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mv::bilevel_step(params, opt, views, nullptr, model, cfg, rng));
  }
}
BENCHMARK(BM_BilevelStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_KMeans(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  const mv::Tensor x = uniform({n, 16}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(mv::kmeans(x, 3, 7, {10, 300}));
}
BENCHMARK(BM_KMeans)->Arg(120)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
