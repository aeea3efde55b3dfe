// Acceptance runner: one PASS/FAIL line per criterion. Exit status is 0 only
// when every criterion passes. Pass criterion numbers as arguments to run a
// subset, e.g. `acceptance 1 5`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <metaviewer/evaluation.hpp>
#include <metaviewer/fusion.hpp>
#include <metaviewer/losses.hpp>
#include <metaviewer/model.hpp>
#include <metaviewer/ops.hpp>
#include <metaviewer/serialization.hpp>
#include <metaviewer/trainer.hpp>
#include <mvcli/cli.hpp>

#include "support/oracles.hpp"
#include "support/primitives.hpp"

namespace mv = metaviewer;
namespace ops = metaviewer::ops;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double budget_seconds;
  std::function<Outcome()> run;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

mv::GradMap restrict_to(const mv::GradMap& grads, const mv::ParamGroup& group) {
  mv::GradMap out;
  for (const auto& [name, _] : group) out.emplace(group.param_id(name), mv::gradient_of(grads, group, name));
  return out;
}

// ---------------------------------------------------------------- 1

Outcome autodiff_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  const auto catalogue = oracle::primitive_catalogue();
  for (const auto& prim : catalogue) {
    for (int trial = 0; trial < 100; ++trial) {
      const double err = oracle::op_gradcheck(prim.op, prim.inputs(rng), rng);
      if (!(err <= worst)) {
        worst = err;
        worst_name = prim.name;
      }
      ++cases;
    }
  }
  return {worst <= 1e-4, fmt::format("{} primitives, {} cases, max rel-err {:.2e} ({})", catalogue.size(), cases, worst,
                                     worst_name)};
}

// ---------------------------------------------------------------- 2

// L_in(θ) = ½ θᵀAθ − bᵀθ with A symmetric positive definite, one step of
// size β, and L_out(θ*) = ½ ‖θ* − c‖². Then dL_out/dθ⁰ = (I − βA)(θ* − c).
double quadratic_toy_error(std::mt19937_64& rng) {
  const std::size_t n = 6;
  const mv::Tensor m = oracle::random_tensor({n, n}, rng);
  mv::Tensor a({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) a[i * n + j] += m[k * n + i] * m[k * n + j];
    }
    a[i * n + i] += 0.5;
  }
  const mv::Tensor b = oracle::random_tensor({n}, rng, -2, 2);
  const mv::Tensor c = oracle::random_tensor({n}, rng, -2, 2);
  const double beta = std::uniform_real_distribution<double>(0.01, 0.3)(rng);

  auto matvec = [&](const mv::Tensor& x) {
    mv::Tensor y({n}, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) y[i] += a[i * n + j] * x[j];
    }
    return y;
  };
  const mv::GradientField inner_grad = [&](const mv::ParamGroup& th) {
    mv::ParamGroup g(th.tag(), th.prefix());
    g.add("w", matvec(th.at("w")) - b);
    return g;
  };

  mv::ParamGroup theta0(mv::GroupTag{mv::GroupKind::base, 0}, "toy");
  theta0.add("w", oracle::random_tensor({n}, rng, -2, 2));
  const mv::Tensor theta_star = theta0.at("w") - inner_grad(theta0).at("w") * beta;
  const mv::Tensor residual = theta_star - c;
  mv::ParamGroup outer_grad(theta0.tag(), theta0.prefix());
  outer_grad.add("w", residual);

  const mv::ParamGroup got = mv::one_step_meta_gradient(inner_grad, theta0, outer_grad, beta);
  const mv::Tensor expected = residual - matvec(residual) * beta;
  mv::GradMap lhs, rhs;
  lhs.emplace("w", got.at("w"));
  rhs.emplace("w", expected);
  return mv::relative_error(lhs, rhs);
}

Outcome bilevel_quadratic_toy() {
  std::mt19937_64 rng(202);
  std::vector<double> errs;
  for (int trial = 0; trial < 100; ++trial) errs.push_back(quadratic_toy_error(rng));
  const double worst = max_of(errs);
  return {worst <= 1e-6, fmt::format("100 random SPD quadratics, max rel-err {:.2e}", worst)};
}

mv::ModelConfig tiny_bilevel_model(mv::Activation act) {
  mv::ModelConfig cfg;
  cfg.views = 2;
  cfg.input_dims = {3, 5};
  cfg.embed_dim = cfg.rep_dim = 4;
  cfg.embed_hidden = {6};
  cfg.conv_channels = 3;
  cfg.kernel_width = 3;
  cfg.activation = act;
  return cfg;
}

double pipeline_error(const mv::LossConfig& loss, mv::Activation act, std::uint64_t seed) {
  const auto cfg = tiny_bilevel_model(act);
  const mv::ModelParams p = mv::init_params(cfg, seed);
  std::mt19937_64 rng(seed + 100);
  std::vector<mv::Tensor> views;
  for (std::size_t d : cfg.input_dims) views.push_back(oracle::random_tensor({6, d}, rng, 0.0, 1.0));
  const auto split = mv::materialize(views, mv::meta_split(6, cfg.views, 0.5, rng));
  const double beta = 0.5;

  const auto inner = mv::inner_update(split, p, 1, beta, act);
  const auto exact = mv::meta_gradient(split, p, inner, mv::MetaGradMode::exact_t1, beta, loss, act);
  const mv::GradMap numeric = mv::finite_diff_grad(
      [&](std::span<const mv::ParamGroup> gs) {
        mv::ModelParams q = p;
        q.meta = gs[0];
        return mv::outer_loss_value(split, q, mv::inner_update(split, q, 1, beta, act), loss, act);
      },
      {p.meta}, 1e-5);
  return mv::relative_error(restrict_to(exact.grads, p.meta), numeric);
}

Outcome bilevel_full_model() {
  mv::LossConfig contrastive;
  contrastive.variant = mv::OuterVariant::mver_c;
  std::vector<double> errs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    errs.push_back(pipeline_error(mv::LossConfig{}, mv::Activation::relu, seed));
    errs.push_back(pipeline_error(mv::LossConfig{}, mv::Activation::tanh, seed));
    // relu at d=4 can zero a whole embedding row, where cosine similarity is undefined
    errs.push_back(pipeline_error(contrastive, mv::Activation::tanh, seed));
  }
  const double worst = max_of(errs);
  return {worst <= 1e-3,
          fmt::format("V=2, d=d_h=4, B=6, T=1; {} cases (5 seeds; MVer-R relu/tanh, MVer-C tanh), max rel-err {:.2e}",
                      errs.size(), worst)};
}

// ---------------------------------------------------------------- 3

Outcome subnetwork_identity() {
  std::mt19937_64 rng(303);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  double tiling = 0.0, additivity = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t views = pick(2, 5), cout = pick(1, 6), width = 2 * pick(0, 2) + 1, d = pick(3, 9), rows = pick(1, 4);
    mv::ParamGroup omega(mv::GroupTag{mv::GroupKind::meta, std::nullopt}, "meta");
    omega.add("conv0.kernel", oracle::random_tensor({cout, views, width}, rng));
    omega.add("conv0.bias", oracle::random_tensor({cout}, rng));
    const mv::Tensor& k = omega.at("conv0.kernel");
    const mv::Tensor& bias = omega.at("conv0.bias");

    mv::Tape tape;
    const mv::Tensor x = oracle::random_tensor({rows, views, d}, rng);
    const mv::Tensor full = ops::channel_conv1d(tape.constant(x), tape.constant(k), tape.constant(bias)).value();
    mv::Tensor sum(full.shape(), 0.0);
    for (std::size_t v = 0; v < views; ++v) {
      const mv::ParamGroup theta = mv::init_base_from_meta(omega, v);
      const mv::Tensor& slice = theta.at("conv0.kernel");
      for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t j = 0; j < width; ++j) {
          tiling = std::max(tiling, std::abs(slice[o * width + j] - k[(o * views + v) * width + j]));
        }
      }
      const mv::Var xv = ops::slice(tape.constant(x), 1, v, 1);
      sum += ops::channel_conv1d(xv, tape.constant(slice), tape.constant(theta.at("conv0.bias"))).value();
    }
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t i = 0; i < d; ++i) {
          const std::size_t at = (r * cout + o) * d + i;
          const double rhs = sum[at] - (static_cast<double>(views) - 1.0) * bias[o];
          additivity = std::max(additivity, std::abs(full[at] - rhs));
        }
      }
    }
  }
  return {tiling <= 1e-10 && additivity <= 1e-10,
          fmt::format("100 draws, max tiling error {:.2e}, max additivity error {:.2e}", tiling, additivity)};
}

// ---------------------------------------------------------------- 4

Outcome meta_split_invariants() {
  std::mt19937_64 rng(404);
  std::size_t complete_cases = 0, violations = 0;
  for (int r = 1; r <= 9; ++r) {
    const double rho = r / 10.0;
    for (std::size_t b = 2; b <= 256; ++b) {
      const std::size_t views = 1 + b % 4;
      const auto s = mv::meta_split(b, views, rho, rng);
      const std::size_t expected = std::clamp<std::size_t>((static_cast<std::size_t>(r) * b + 5) / 10, 1, b - 1);
      bool ok = s.support.size() == views && s.query.size() == b - expected;
      for (std::size_t v = 0; v < views && ok; ++v) {
        std::set<std::size_t> all(s.query.begin(), s.query.end());
        for (std::size_t i : s.support[v]) ok = ok && all.insert(i).second;
        ok = ok && s.support[v].size() == expected && all.size() == b && *all.rbegin() == b - 1;
      }
      ++complete_cases;
      if (!ok) ++violations;
    }
  }

  std::size_t mask_cases = 0;
  std::bernoulli_distribution keep(0.6);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t b = 4 + trial % 60, views = 2 + trial % 3;
    std::vector<std::uint8_t> mask(b * views);
    for (auto& m : mask) m = keep(rng) ? 1 : 0;
    for (std::size_t i = 0; i < b; ++i) {
      // every entity keeps at least one view
      if (std::none_of(mask.begin() + i * views, mask.begin() + (i + 1) * views, [](auto m) { return m != 0; })) {
        mask[i * views + i % views] = 1;
      }
    }
    std::fill(mask.begin(), mask.begin() + views, 1);
    mask[views] = 0;
    mask[views + 1] = 1;
    const auto s = mv::meta_split_incomplete(mask, views);
    std::vector<std::size_t> complete;
    std::vector<std::vector<std::size_t>> support(views);
    for (std::size_t i = 0; i < b; ++i) {
      const auto row = mask.begin() + i * views;
      if (std::all_of(row, row + views, [](auto m) { return m != 0; })) {
        complete.push_back(i);
      } else {
        for (std::size_t v = 0; v < views; ++v) {
          if (mask[i * views + v]) support[v].push_back(i);
        }
      }
    }
    ++mask_cases;
    if (s.query != complete || s.support != support) ++violations;
  }
  return {violations == 0, fmt::format("{} complete-view splits (rho 0.1..0.9, B 2..256), {} randomized masks, {} violations",
                                       complete_cases, mask_cases, violations)};
}

// ---------------------------------------------------------------- 5

// Direct evaluation of the InfoNCE term anchored on the rows of `a`: the
// positive is b_i, negatives are the other rows of a and of b.
double contrastive_by_hand(const mv::Tensor& a, const mv::Tensor& b, double tau) {
  const std::size_t n = a.dim(0), d = a.dim(1);
  auto row = [&](const mv::Tensor& t, std::size_t i) {
    std::vector<double> r(d);
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += t[i * d + j] * t[i * d + j];
    for (std::size_t j = 0; j < d; ++j) r[j] = t[i * d + j] / std::sqrt(norm);
    return r;
  };
  auto sim = [&](const std::vector<double>& x, const std::vector<double>& y) {
    return std::inner_product(x.begin(), x.end(), y.begin(), 0.0) / tau;
  };
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ai = row(a, i);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      denom += std::exp(sim(ai, row(b, j)));
      if (j != i) denom += std::exp(sim(ai, row(a, j)));
    }
    total += -(sim(ai, row(b, i)) - std::log(denom));
  }
  return total / static_cast<double>(n);
}

Outcome contrastive_properties() {
  mv::Tape t;
  auto loss = [&](const mv::Tensor& a, const mv::Tensor& b, double tau) {
    return mv::contrastive_loss(t.constant(a), t.constant(b), tau).value().item();
  };
  std::vector<std::string> failed;

  const mv::Tensor eye = mv::Tensor::matrix({{1, 0}, {0, 1}});
  const double e = std::exp(1.0);
  const double closed = std::log((e + 2.0) / e);
  const double got = loss(eye, eye, 1.0);
  if (std::abs(got - closed) > 1e-12 || std::abs(contrastive_by_hand(eye, eye, 1.0) - closed) > 1e-12) failed.push_back("hand value");

  std::mt19937_64 rng(505);
  double scale_err = 0.0, perm_err = 0.0, limit_err = 0.0, loop_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + trial % 6;
    const mv::Tensor a = oracle::random_tensor({n, 4}, rng, 0.1, 1.0);
    const mv::Tensor b = oracle::random_tensor({n, 4}, rng, -1.0, 1.0);
    const double base = loss(a, b, 0.5);
    loop_err = std::max(loop_err, std::abs(base - contrastive_by_hand(a, b, 0.5)));
    scale_err = std::max(scale_err, std::abs(base - loss(a * 3.7, b * 0.2, 0.5)));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    perm_err = std::max(perm_err, std::abs(base - loss(a.gather_rows(perm), b.gather_rows(perm), 0.5)));
    limit_err = std::max(limit_err, std::abs(loss(a, b, 1e6) - std::log(2.0 * static_cast<double>(n) - 1.0)));
  }
  if (loop_err > 1e-12) failed.push_back("loop reference");
  if (scale_err > 1e-12) failed.push_back("scale invariance");
  if (perm_err > 1e-12) failed.push_back("permutation invariance");
  if (limit_err > 1e-3) failed.push_back("large-temperature limit");
  return {failed.empty(),
          fmt::format("N_Q=2 value {:.6f} (closed form log((e+2)/e) = {:.6f}); scale err {:.1e}, permutation err {:.1e}, "
                      "limit err {:.1e}{}",
                      got, closed, scale_err, perm_err, limit_err,
                      failed.empty() ? "" : fmt::format("; failed: {}", fmt::join(failed, ", ")))};
}

// ---------------------------------------------------------------- 6

Outcome metric_oracles() {
  std::mt19937_64 rng(606);
  std::vector<std::string> failed;

  double acc_perm = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + trial % 5, n = 30 + trial % 40;
    std::vector<std::size_t> a(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng() % k;
      y[i] = static_cast<int>(rng() % k);
    }
    std::vector<std::size_t> relabel(k);
    std::iota(relabel.begin(), relabel.end(), 0);
    std::shuffle(relabel.begin(), relabel.end(), rng);
    std::vector<std::size_t> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = relabel[a[i]];
    acc_perm = std::max(acc_perm, std::abs(mv::clustering_accuracy(a, y) - mv::clustering_accuracy(b, y)));
    if (k <= 5) acc_perm = std::max(acc_perm, std::abs(mv::clustering_accuracy(a, y) - oracle::brute_force_acc(a, y, k)));
  }
  if (acc_perm > 1e-12) failed.push_back("ACC permutation invariance");

  double ari_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> a(100);
    std::vector<int> y(100);
    for (std::size_t i = 0; i < 100; ++i) {
      a[i] = rng() % 3;
      y[i] = static_cast<int>(rng() % 3);
    }
    ari_sum += mv::adjusted_rand_index(a, y);
  }
  const double ari_mean = ari_sum / 200.0;
  if (!(std::abs(ari_mean) < 0.05)) failed.push_back("ARI null mean");

  double nmi_asym = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> a(50), b(50);
    std::vector<int> ai(50), bi(50);
    for (std::size_t i = 0; i < 50; ++i) {
      a[i] = rng() % 4;
      b[i] = rng() % 3;
      ai[i] = static_cast<int>(a[i]);
      bi[i] = static_cast<int>(b[i]);
    }
    nmi_asym = std::max(nmi_asym, std::abs(mv::normalized_mutual_info(a, bi) - mv::normalized_mutual_info(b, ai)));
  }
  if (nmi_asym > 1e-12) failed.push_back("NMI symmetry");

  // Every pair of labellings of 4 points with ids in {0,1,2}.
  double ari_err = 0.0;
  std::size_t cases = 0;
  for (int ca = 0; ca < 81; ++ca) {
    for (int cb = 0; cb < 81; ++cb) {
      std::vector<std::size_t> a(4);
      std::vector<int> b(4);
      for (int i = 0, x = ca, z = cb; i < 4; ++i, x /= 3, z /= 3) {
        a[i] = static_cast<std::size_t>(x % 3);
        b[i] = z % 3;
      }
      ari_err = std::max(ari_err, std::abs(mv::adjusted_rand_index(a, b) - oracle::brute_force_ari(a, b)));
      ++cases;
    }
  }
  if (ari_err > 1e-12) failed.push_back("4-point ARI");

  return {failed.empty(), fmt::format("ACC relabel/brute-force err {:.1e}; ARI null mean {:+.4f} (200 draws, N=100); NMI "
                                      "asymmetry {:.1e}; {} four-point ARI cases, max err {:.1e}{}",
                                      acc_perm, ari_mean, nmi_asym, cases, ari_err,
                                      failed.empty() ? "" : fmt::format("; failed: {}", fmt::join(failed, ", ")))};
}

// ---------------------------------------------------------------- 7, 8

// Three classes in a 4-d shared latent, 16 private dimensions per view and
// noise at three times the latent scale, observed through 20 mixed features.
mvcli::RunConfig synthetic_setup() {
  mvcli::RunConfig cfg;
  cfg.synthetic.n = 600;
  cfg.synthetic.views = 2;
  cfg.synthetic.classes = 3;
  cfg.synthetic.shared_dim = 4;
  cfg.synthetic.private_dim = 16;
  cfg.synthetic.observed_dims = {20};
  cfg.synthetic.noise_scale = 3.0;
  cfg.synthetic.class_separation = 4.0;
  cfg.synthetic.class_spread = 0.5;
  cfg.synthetic.seed = 7;

  cfg.model.embed_dim = cfg.model.rep_dim = 16;
  cfg.model.embed_hidden = {32};
  cfg.model.conv_channels = 8;
  cfg.model.kernel_width = 3;

  cfg.train.epochs = 300;
  cfg.train.batch_size = 64;
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.eval.kmeans_restarts = 10;
  return cfg;
}

struct FusionTable {
  std::map<std::string, std::vector<double>> acc;
  std::vector<std::string> errors;
  double seconds = 0.0;
};

const FusionTable& fusion_table() {
  static const FusionTable table = [] {
    FusionTable t;
    const auto t0 = std::chrono::steady_clock::now();
    auto collect = [&](const mvcli::RunConfig& cfg, const std::string& rename) {
      for (const auto& row : mvcli::compare_fusions(cfg)) {
        if (row.seed == "median") continue;
        const std::string name = row.point == "metaviewer" ? rename : row.point;
        if (row.status != "ok") {
          t.errors.push_back(fmt::format("{} seed {}: {}", name, row.seed, row.status));
          continue;
        }
        t.acc[name].push_back(row.metrics.at("ACC"));
      }
    };
    mvcli::RunConfig cfg = synthetic_setup();
    cfg.eval.classification = false;
    collect(cfg, "mver-r");
    cfg.fusions = {mv::FusionKind::metaviewer};
    cfg.train.loss.variant = mv::OuterVariant::mver_c;
    collect(cfg, "mver-c");
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return t;
  }();
  return table;
}

std::string medians_line(const FusionTable& t) {
  std::vector<std::string> parts;
  for (const char* k : {"sum", "max", "concat", "linear", "c-conv", "mver-r", "mver-c"}) {
    const auto it = t.acc.find(k);
    parts.push_back(it == t.acc.end() || it->second.empty() ? fmt::format("{} n/a", k)
                                                            : fmt::format("{} {:.3f}", k, median(it->second)));
  }
  return fmt::format("median test ACC over 5 seeds: {}", fmt::join(parts, ", "));
}

double median_acc(const FusionTable& t, const std::string& kind) {
  const auto it = t.acc.find(kind);
  return it == t.acc.end() || it->second.size() != 5 ? std::nan("") : median(it->second);
}

Outcome end_to_end_synthetic() {
  const FusionTable& t = fusion_table();
  const double r = median_acc(t, "mver-r"), c = median_acc(t, "mver-c"), concat = median_acc(t, "concat");
  const bool a = r >= concat, b = c >= r - 0.02;
  return {a && b && t.errors.empty(),
          fmt::format("MVer-R {:.3f} vs concat {:.3f} [{}]; MVer-C {:.3f} vs MVer-R - 0.02 [{}]; {}{}", r, concat,
                      a ? "ok" : "fails", c, b ? "ok" : "fails", medians_line(t),
                      t.errors.empty() ? "" : fmt::format("; errors: {}", fmt::join(t.errors, "; ")))};
}

Outcome fusion_comparison() {
  const FusionTable& t = fusion_table();
  std::vector<std::string> losses;
  for (const char* trainable : {"linear", "c-conv", "mver-r"}) {
    for (const char* fixed : {"sum", "max", "concat"}) {
      if (!(median_acc(t, trainable) >= median_acc(t, fixed))) losses.push_back(fmt::format("{} < {}", trainable, fixed));
    }
  }
  return {losses.empty() && t.errors.empty(),
          fmt::format("metaviewer entry is MVer-R; {}; {}", losses.empty() ? "every trainable >= every fixed rule"
                                                                          : fmt::format("{}", fmt::join(losses, ", ")),
                      medians_line(t))};
}

// ---------------------------------------------------------------- 9

Outcome ablation_stability() {
  mvcli::RunConfig cfg = synthetic_setup();
  cfg.sweep.inner_steps = {1, 5, 10, 15};
  cfg.eval.clustering = false;
  const auto rows = mvcli::sweep(cfg, "inner-steps");
  std::vector<double> medians;
  std::vector<std::string> parts, errors;
  for (std::size_t t : cfg.sweep.inner_steps) {
    std::vector<double> acc;
    for (const auto& row : rows) {
      if (row.point != std::to_string(t) || row.seed == "median") continue;
      if (row.status != "ok") {
        errors.push_back(fmt::format("T={} seed {}: {}", t, row.seed, row.status));
        continue;
      }
      acc.push_back(row.metrics.at("cls_ACC"));
    }
    medians.push_back(acc.empty() ? std::nan("") : median(acc));
    parts.push_back(fmt::format("T={} {:.3f}", t, medians.back()));
  }
  const double range = max_of(medians) - *std::min_element(medians.begin(), medians.end());
  return {errors.empty() && range <= 0.10,
          fmt::format("median classification ACC {}; range {:.3f}{}", fmt::join(parts, ", "), range,
                      errors.empty() ? "" : fmt::format("; errors: {}", fmt::join(errors, "; ")))};
}

// ---------------------------------------------------------------- 10

Outcome determinism() {
  const mvcli::RunConfig cfg = synthetic_setup();
  auto once = [&] {
    const auto ds = mvcli::prepare_dataset(cfg, 3);
    mv::TrainConfig tc = cfg.train;
    tc.seed = 3;
    const auto trained = mv::train_specific_to_uniform(ds, mv::FusionKind::metaviewer, mvcli::resolve_model(cfg, ds), tc);
    std::string reports;
    for (const auto& r : mvcli::evaluate_model(trained.model, ds, cfg.eval, 3, "run")) reports += mv::to_json(r);
    return std::make_tuple(trained.loss_history, reports, mv::checkpoint_to_json(trained.model));
  };
  const auto [loss1, report1, ck1] = once();
  const auto [loss2, report2, ck2] = once();
  const bool same = loss1 == loss2 && report1 == report2 && ck1 == ck2;
  return {same, fmt::format("{} epochs: loss history {}, eval reports {}, checkpoints {}", loss1.size(),
                            loss1 == loss2 ? "identical" : "differ", report1 == report2 ? "identical" : "differ",
                            ck1 == ck2 ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "autodiff oracle", 30, autodiff_oracle},
      {2, "bi-level gradient oracle (a) quadratic toy", 60, bilevel_quadratic_toy},
      {2, "bi-level gradient oracle (b) full tiny model", 60, bilevel_full_model},
      {3, "sub-network identity", 5, subnetwork_identity},
      {4, "meta-split invariants", 5, meta_split_invariants},
      {5, "contrastive loss", 5, contrastive_properties},
      {6, "metric oracles", 30, metric_oracles},
      {7, "end-to-end synthetic", 600, end_to_end_synthetic},
      {8, "fusion comparison", 600, fusion_comparison},
      {9, "ablation stability", 600, ablation_stability},
      {10, "determinism", 120, determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, fmt::format("threw: {}", e.what())};
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // 7 and 8 share one set of training runs; both are timed against it.
    if (c.id == 7 || c.id == 8) seconds = fusion_table().seconds;
    const bool in_budget = seconds < c.budget_seconds;
    const bool pass = out.pass && in_budget;
    if (!pass) ++failures;
    std::printf("%s criterion %d %s: %s (%.1f s, budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                out.detail.c_str(), seconds, c.budget_seconds, in_budget ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
