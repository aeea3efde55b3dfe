#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "metaviewer/data.hpp"
#include "metaviewer/losses.hpp"
#include "metaviewer/model.hpp"
#include "metaviewer/optimizer.hpp"

namespace metaviewer {

/// How the outer gradient of omega accounts for the inner step.
///  - first_order: dL/dtheta* is mapped straight back onto omega's slices.
///  - exact_t1: the single inner step is differentiated, (I - beta H) g,
///    with H the inner-loss Hessian over theta applied by finite differences.
enum class MetaGradMode { first_order, exact_t1 };

std::string to_string(MetaGradMode m);
MetaGradMode meta_grad_from_string(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 2000;
  std::size_t batch_size = 256;
  double support_ratio = 0.5;
  std::size_t inner_steps = 1;
  double inner_lr = 1e-2;
  double outer_lr = 1e-3;
  MetaGradMode meta_grad = MetaGradMode::exact_t1;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;
};

/// Inner-level outcome for one view: the starting point (omega slice and the
/// detached copies of phi_v) and the adapted values after `steps` updates.
struct ViewAdaptation {
  std::size_t view = 0;
  std::size_t steps = 0;
  Tensor support;
  ParamGroup theta0, embed0, head0;
  ParamGroup theta, embed, head;
  /// Inner loss at the starting point.
  double initial_loss = 0.0;
};

struct InnerResult {
  std::vector<ViewAdaptation> views;
};

/// L_inner^v(theta, phi~) on `support`. When `grads` is non-null it receives
/// the gradient over all three groups.
double inner_loss(const Tensor& support, const ParamGroup& theta, const ParamGroup& embed, const ParamGroup& head,
                  Activation act, GradMap* grads = nullptr);

/// `steps` joint plain-gradient steps on (theta_bv, phi~_v), starting from
/// omega's view slice and detached copies of phi_v.
ViewAdaptation adapt_view(const Tensor& support, const ParamGroup& omega, std::size_t view, const ParamGroup& embed,
                          const ParamGroup& head, std::size_t steps, double lr, Activation act);

/// adapt_view for every view. A view whose support is empty gets zero steps.
InnerResult inner_update(const MetaSplit& split, const ModelParams& params, std::size_t steps, double lr, Activation act);

/// Gradient of some scalar over the entries of a group, keyed by local name.
using GradientField = std::function<ParamGroup(const ParamGroup&)>;

/// H u by central differences of `grad` at `at`, stepping
/// eps = 1e-4 (1 + ||at||_inf) along u / ||u|| and rescaling by ||u||.
/// Throws NonFiniteError naming eps when the product is not finite.
ParamGroup fd_hvp(const GradientField& grad, const ParamGroup& at, const ParamGroup& direction);

/// Gradient through one plain step theta* = theta0 - lr * grad(theta0):
/// (I - lr H) g, with g the outer gradient at theta* and H from fd_hvp.
ParamGroup one_step_meta_gradient(const GradientField& inner_grad, const ParamGroup& theta0, const ParamGroup& outer_grad,
                                  double lr);

/// H_v u for the inner loss of `adaptation` at its starting point, over
/// theta only. `direction` is shaped like theta (local names).
ParamGroup inner_hvp(const ViewAdaptation& adaptation, const ParamGroup& direction, Activation act);

struct MetaGradient {
  GradMap grads;
  double outer_loss = 0.0;
};

/// Outer loss on the query through the adapted base-learners, and gradients
/// for omega and every phi_v.
MetaGradient meta_gradient(const MetaSplit& split, const ModelParams& params, const InnerResult& inner, MetaGradMode mode,
                           double inner_lr, const LossConfig& loss, Activation act);

/// Outer loss value only (no gradients).
double outer_loss_value(const MetaSplit& split, const ModelParams& params, const InnerResult& inner, const LossConfig& loss,
                        Activation act);

/// Steps omega and every phi_v.
void outer_update(ModelParams& params, const GradMap& grads, Optimizer& optimizer);

struct EpochRecord {
  std::size_t epoch = 0;
  double outer_loss = 0.0;
  std::vector<double> inner_loss_per_view;
  double wall_ms = 0.0;
  /// Batches that produced no update (unsplittable, or a zero-norm
  /// representation row under the contrastive objective).
  std::size_t skipped_batches = 0;
};

struct TrainState {
  ModelParams params;
  std::size_t epoch = 0;
  std::mt19937_64 rng;
  std::vector<double> loss_history;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shuffled mini-batches over `rows`. A tail shorter than half a batch is
/// folded into the previous batch.
std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> rows, std::size_t batch_size,
                                                   std::mt19937_64& rng);

/// One bi-level step on a batch: meta-split, inner update, meta-gradient,
/// outer update. Returns false (and leaves params untouched) when the batch
/// cannot be split into a usable support/query pair.
struct StepResult {
  bool applied = false;
  double outer_loss = 0.0;
  std::vector<double> inner_loss_per_view;
};
StepResult bilevel_step(ModelParams& params, Optimizer& optimizer, const std::vector<Tensor>& batch_views,
                        const std::vector<std::uint8_t>* batch_mask, const ModelConfig& model, const TrainConfig& cfg,
                        std::mt19937_64& rng);

TrainState train(const MultiViewDataset& ds, const ModelConfig& model, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// std::mt19937_64 seeds for parameter init and for batching, both derived
/// from a run seed.
std::uint64_t init_seed(std::uint64_t seed);
std::uint64_t batch_seed(std::uint64_t seed);

}  // namespace metaviewer
