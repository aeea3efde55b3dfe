#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <metaviewer/data.hpp>
#include <metaviewer/evaluation.hpp>
#include <metaviewer/fusion.hpp>
#include <metaviewer/model.hpp>
#include <metaviewer/trainer.hpp>

namespace mvcli {

struct EvalOptions {
  bool clustering = true;
  bool classification = true;
  /// Rows clustered: "train", "val", "test" or "all".
  std::string cluster_split = "test";
  std::size_t kmeans_restarts = 50;
  /// Cluster count when the dataset has no labels (0 = use label count).
  std::size_t clusters = 0;
};

struct SweepGrid {
  std::vector<double> split_ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::vector<std::size_t> inner_steps{0, 1, 5, 10, 15};
  std::vector<std::size_t> depths{1, 2, 3};
  std::vector<std::size_t> channels{16, 32, 64};
  std::vector<std::size_t> kernels{1, 3, 5};
};

/// Everything one command needs. `model.views` / `model.input_dims` are
/// filled from the dataset when left empty.
struct RunConfig {
  std::optional<std::filesystem::path> dataset;
  metaviewer::SynthSpec synthetic;
  /// Fraction of (entity, view) entries dropped after generation (synthetic only).
  double missing_rate = 0.0;
  metaviewer::ModelConfig model;
  metaviewer::TrainConfig train;
  std::vector<metaviewer::FusionKind> fusions = metaviewer::all_fusion_kinds();
  EvalOptions eval;
  SweepGrid sweep;
  /// Seeds for sweep and compare-fusions. Empty means {train.seed}.
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "mv_out";

  std::vector<std::uint64_t> effective_seeds() const;
};

class CliError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string to_json(const RunConfig& cfg);

/// Loads (or generates) the dataset, assigns the 60/20/20 split with
/// `split_seed`, and min-max normalizes.
metaviewer::MultiViewDataset prepare_dataset(const RunConfig& cfg, std::uint64_t split_seed);

/// cfg.model with views/input dims taken from the dataset, validated.
metaviewer::ModelConfig resolve_model(const RunConfig& cfg, const metaviewer::MultiViewDataset& ds);

/// Clustering / classification reports for a trained model.
std::vector<metaviewer::EvalReport> evaluate_model(const metaviewer::FusionModel& m, const metaviewer::MultiViewDataset& ds,
                                                   const EvalOptions& opts, std::uint64_t seed, const std::string& source);

/// Row of a sweep or fusion-comparison table.
struct ResultRow {
  std::string point;
  std::string seed;
  std::string status = "ok";
  std::map<std::string, double> metrics;
};

/// Full train + evaluate for one fusion kind at one seed.
ResultRow run_point(const RunConfig& cfg, metaviewer::FusionKind kind, std::uint64_t seed, const std::string& point);

/// Per-point median rows, appended after the per-seed rows of each point.
std::vector<ResultRow> with_medians(const std::vector<ResultRow>& rows);

std::vector<ResultRow> compare_fusions(const RunConfig& cfg);
/// kind: split-ratio, inner-steps, arch.
std::vector<ResultRow> sweep(const RunConfig& cfg, const std::string& kind);

std::string to_csv(const std::vector<ResultRow>& rows, const std::vector<std::string>& metric_columns,
                   const std::string& point_header);

/// Median metric value over the ok rows (seed != "median") of `point`.
double median_metric(const std::vector<ResultRow>& rows, const std::string& point, const std::string& metric);

/// Command-line entry; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace mvcli
