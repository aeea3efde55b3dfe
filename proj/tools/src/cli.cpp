#include "mvcli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>

#include <fmt/format.h>

#include <metaviewer/serialization.hpp>

#include "CLI11.hpp"
#include "json.hpp"

namespace mvcli {

namespace mv = metaviewer;
using nlohmann::json;

std::vector<std::uint64_t> RunConfig::effective_seeds() const {
  return seeds.empty() ? std::vector<std::uint64_t>{train.seed} : seeds;
}

// ---------------------------------------------------------------------------
// config

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw CliError(fmt::format("run config: bad value for '{}': {}", key, e.what()));
  }
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* what) {
  for (const auto& [key, _] : j.items()) {
    if (!allowed.count(key)) throw CliError(fmt::format("{}: unknown key '{}'", what, key));
  }
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CliError(fmt::format("run config: {}", e.what()));
  }
  if (!j.is_object()) throw CliError("run config: expected a JSON object");
  reject_unknown(j, {"dataset", "synthetic", "missing_rate", "model", "train", "fusions", "eval", "sweep", "seeds", "output_dir"},
                 "run config");
  RunConfig c;
  if (auto it = j.find("dataset"); it != j.end() && !it->is_null()) c.dataset = it->get<std::string>();
  if (auto it = j.find("synthetic"); it != j.end()) c.synthetic = mv::synth_spec_from_json(it->dump());
  read(j, "missing_rate", c.missing_rate);
  if (auto it = j.find("model"); it != j.end()) c.model = mv::model_config_from_json(it->dump(), false);
  if (auto it = j.find("train"); it != j.end()) c.train = mv::train_config_from_json(it->dump());
  if (auto it = j.find("fusions"); it != j.end()) {
    c.fusions.clear();
    for (const auto& f : *it) c.fusions.push_back(mv::fusion_from_string(f.get<std::string>()));
  }
  if (auto it = j.find("eval"); it != j.end()) {
    reject_unknown(*it, {"clustering", "classification", "cluster_split", "kmeans_restarts", "clusters"}, "eval options");
    read(*it, "clustering", c.eval.clustering);
    read(*it, "classification", c.eval.classification);
    read(*it, "cluster_split", c.eval.cluster_split);
    read(*it, "kmeans_restarts", c.eval.kmeans_restarts);
    read(*it, "clusters", c.eval.clusters);
  }
  if (auto it = j.find("sweep"); it != j.end()) {
    reject_unknown(*it, {"split_ratios", "inner_steps", "depths", "channels", "kernels"}, "sweep grid");
    read(*it, "split_ratios", c.sweep.split_ratios);
    read(*it, "inner_steps", c.sweep.inner_steps);
    read(*it, "depths", c.sweep.depths);
    read(*it, "channels", c.sweep.channels);
    read(*it, "kernels", c.sweep.kernels);
  }
  read(j, "seeds", c.seeds);
  if (auto it = j.find("output_dir"); it != j.end()) c.output_dir = it->get<std::string>();

  static const std::set<std::string> splits{"train", "val", "test", "all"};
  if (!splits.count(c.eval.cluster_split)) throw CliError(fmt::format("eval options: unknown split '{}'", c.eval.cluster_split));
  if (c.eval.kmeans_restarts == 0) throw CliError("eval options: kmeans_restarts must be >= 1");
  if (!(c.missing_rate >= 0.0 && c.missing_rate < 1.0)) throw CliError("run config: missing_rate must be in [0, 1)");
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw CliError(fmt::format("config file {} does not exist", path.string()));
  return run_config_from_json(mv::read_text_file(path));
}

std::string to_json(const RunConfig& c) {
  json j;
  j["dataset"] = c.dataset ? json(c.dataset->string()) : json(nullptr);
  j["synthetic"] = json::parse(mv::to_json(c.synthetic));
  j["missing_rate"] = c.missing_rate;
  j["model"] = json::parse(mv::to_json(c.model));
  j["train"] = json::parse(mv::to_json(c.train));
  j["fusions"] = json::array();
  for (auto k : c.fusions) j["fusions"].push_back(mv::to_string(k));
  j["eval"] = {{"clustering", c.eval.clustering},
               {"classification", c.eval.classification},
               {"cluster_split", c.eval.cluster_split},
               {"kmeans_restarts", c.eval.kmeans_restarts},
               {"clusters", c.eval.clusters}};
  j["sweep"] = {{"split_ratios", c.sweep.split_ratios},
                {"inner_steps", c.sweep.inner_steps},
                {"depths", c.sweep.depths},
                {"channels", c.sweep.channels},
                {"kernels", c.sweep.kernels}};
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.string();
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// data / model / evaluation

mv::MultiViewDataset prepare_dataset(const RunConfig& cfg, std::uint64_t split_seed) {
  mv::MultiViewDataset ds;
  if (cfg.dataset) {
    if (!std::filesystem::exists(*cfg.dataset)) throw CliError(fmt::format("dataset {} does not exist", cfg.dataset->string()));
    ds = mv::load_dataset(*cfg.dataset);
  } else {
    ds = mv::synth_generate(cfg.synthetic);
    if (cfg.missing_rate > 0.0) ds = mv::drop_views(std::move(ds), cfg.missing_rate, cfg.synthetic.seed + 1);
  }
  return mv::normalize_minmax(mv::split_train_val_test(std::move(ds), split_seed));
}

mv::ModelConfig resolve_model(const RunConfig& cfg, const mv::MultiViewDataset& ds) {
  mv::ModelConfig m = cfg.model;
  if (m.input_dims.empty()) {
    m.views = ds.view_count();
    m.input_dims = ds.view_dims();
  }
  if (m.views != ds.view_count() || m.input_dims != ds.view_dims()) {
    throw CliError(fmt::format("model expects {} views with dims [{}], dataset has {} views with dims [{}]", m.views,
                               fmt::join(m.input_dims, ","), ds.view_count(), fmt::join(ds.view_dims(), ",")));
  }
  m.validate();
  return m;
}

namespace {

std::vector<std::size_t> rows_of(const mv::MultiViewDataset& ds, const std::string& which) {
  if (which == "all") {
    std::vector<std::size_t> rows(ds.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return rows;
  }
  if (which == "train") return ds.indices(mv::Split::train);
  if (which == "val") return ds.indices(mv::Split::val);
  return ds.indices(mv::Split::test);
}

mv::Tensor represent_rows(const mv::FusionModel& m, const mv::MultiViewDataset& ds, const std::vector<std::size_t>& rows) {
  const mv::MultiViewDataset sub = ds.subset(rows);
  return mv::fusion_represent(m, sub.views, sub.mask ? &*sub.mask : nullptr);
}

std::vector<int> labels_of(const mv::MultiViewDataset& ds, const std::vector<std::size_t>& rows) {
  std::vector<int> y;
  for (std::size_t r : rows) y.push_back((*ds.labels)[r]);
  return y;
}

}  // namespace

std::vector<mv::EvalReport> evaluate_model(const mv::FusionModel& m, const mv::MultiViewDataset& ds, const EvalOptions& opts,
                                           std::uint64_t seed, const std::string& source) {
  if (m.model.views != ds.view_count() || m.model.input_dims != ds.view_dims()) {
    throw CliError(fmt::format("model expects {} views with dims [{}], dataset has {} views with dims [{}]", m.model.views,
                               fmt::join(m.model.input_dims, ","), ds.view_count(), fmt::join(ds.view_dims(), ",")));
  }
  std::vector<mv::EvalReport> reports;
  if (opts.clustering) {
    const std::vector<std::size_t> rows = rows_of(ds, opts.cluster_split);
    if (rows.empty()) throw CliError(fmt::format("no entities in the '{}' split to cluster", opts.cluster_split));
    std::size_t k = opts.clusters;
    if (ds.labels && k == 0) k = std::set<int>(ds.labels->begin(), ds.labels->end()).size();
    if (k == 0) throw CliError("clustering without labels needs eval.clusters > 0");
    const mv::KMeansResult km = mv::kmeans(represent_rows(m, ds, rows), k, seed, {opts.kmeans_restarts, 300});
    mv::EvalReport r{"clustering", {{"inertia", km.inertia}}, seed, source};
    if (ds.labels) {
      const mv::ClusteringMetrics c = mv::clustering_metrics(km.assignments, labels_of(ds, rows));
      r.metrics["ACC"] = c.acc;
      r.metrics["NMI"] = c.nmi;
      r.metrics["ARI"] = c.ari;
    }
    reports.push_back(std::move(r));
  }
  if (opts.classification && ds.labels) {
    const auto train_rows = ds.indices(mv::Split::train);
    const auto test_rows = ds.indices(mv::Split::test);
    if (!train_rows.empty() && !test_rows.empty()) {
      const mv::ClassificationMetrics c = mv::train_linear_classifier(
          represent_rows(m, ds, train_rows), labels_of(ds, train_rows), represent_rows(m, ds, test_rows), labels_of(ds, test_rows));
      for (int u : c.unseen_classes) std::cerr << fmt::format("warning: class {} appears in test but not in train\n", u);
      reports.push_back({"classification", {{"ACC", c.accuracy}, {"precision", c.precision}, {"F", c.f_score}}, seed, source});
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// experiments

ResultRow run_point(const RunConfig& cfg, mv::FusionKind kind, std::uint64_t seed, const std::string& point) {
  ResultRow row{point, std::to_string(seed), "ok", {}};
  try {
    const mv::MultiViewDataset ds = prepare_dataset(cfg, seed);
    const mv::ModelConfig model = resolve_model(cfg, ds);
    mv::TrainConfig tc = cfg.train;
    tc.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const mv::FusionTrainResult trained = mv::train_specific_to_uniform(ds, kind, model, tc);
    row.metrics["train_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.metrics["final_loss"] = trained.loss_history.empty() ? 0.0 : trained.loss_history.back();
    for (const mv::EvalReport& r : evaluate_model(trained.model, ds, cfg.eval, seed, mv::to_string(kind))) {
      const std::string prefix = r.task == "classification" ? "cls_" : "";
      for (const auto& [name, value] : r.metrics) row.metrics[prefix + name] = value;
    }
    row.metrics["MSE"] = mv::mse_report(trained.model, ds, mv::Split::test).total;
  } catch (const std::exception& e) {
    row.status = fmt::format("error: {}", e.what());
    row.metrics.clear();
  }
  return row;
}

std::vector<ResultRow> with_medians(const std::vector<ResultRow>& rows) {
  std::vector<ResultRow> out;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.point) == order.end()) order.push_back(r.point);
  }
  for (const auto& point : order) {
    std::map<std::string, std::vector<double>> values;
    std::size_t ok = 0;
    for (const auto& r : rows) {
      if (r.point != point) continue;
      out.push_back(r);
      if (r.status != "ok") continue;
      ++ok;
      for (const auto& [k, v] : r.metrics) values[k].push_back(v);
    }
    ResultRow med{point, "median", ok > 0 ? "ok" : "failed", {}};
    for (auto& [k, v] : values) {
      std::sort(v.begin(), v.end());
      const std::size_t n = v.size();
      med.metrics[k] = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
    out.push_back(std::move(med));
  }
  return out;
}

double median_metric(const std::vector<ResultRow>& rows, const std::string& point, const std::string& metric) {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.point != point || r.seed == "median" || r.status != "ok") continue;
    auto it = r.metrics.find(metric);
    if (it != r.metrics.end()) v.push_back(it->second);
  }
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<ResultRow> compare_fusions(const RunConfig& cfg) {
  std::vector<ResultRow> rows;
  for (mv::FusionKind kind : cfg.fusions) {
    for (std::uint64_t seed : cfg.effective_seeds()) rows.push_back(run_point(cfg, kind, seed, mv::to_string(kind)));
  }
  return with_medians(rows);
}

std::vector<ResultRow> sweep(const RunConfig& cfg, const std::string& kind) {
  std::vector<std::pair<std::string, RunConfig>> points;
  if (kind == "split-ratio") {
    for (double rho : cfg.sweep.split_ratios) {
      RunConfig c = cfg;
      c.train.support_ratio = rho;
      points.emplace_back(fmt::format("{}", rho), c);
    }
  } else if (kind == "inner-steps") {
    for (std::size_t t : cfg.sweep.inner_steps) {
      RunConfig c = cfg;
      c.train.inner_steps = t;
      if (t != 1) c.train.meta_grad = mv::MetaGradMode::first_order;
      points.emplace_back(std::to_string(t), c);
    }
  } else if (kind == "arch") {
    for (std::size_t depth : cfg.sweep.depths) {
      for (std::size_t ch : cfg.sweep.channels) {
        for (std::size_t k : cfg.sweep.kernels) {
          RunConfig c = cfg;
          c.model.meta_depth = depth;
          c.model.conv_channels = ch;
          c.model.kernel_width = k;
          points.emplace_back(fmt::format("depth{}-ch{}-k{}", depth, ch, k), c);
        }
      }
    }
  } else {
    throw CliError(fmt::format("unknown sweep kind '{}' (expected split-ratio, inner-steps or arch)", kind));
  }
  if (points.empty()) throw CliError(fmt::format("sweep '{}': empty grid", kind));
  std::vector<ResultRow> rows;
  for (const auto& [label, c] : points) {
    for (std::uint64_t seed : c.effective_seeds()) rows.push_back(run_point(c, mv::FusionKind::metaviewer, seed, label));
  }
  return with_medians(rows);
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + "\"";
}

}  // namespace

std::string to_csv(const std::vector<ResultRow>& rows, const std::vector<std::string>& metric_columns,
                   const std::string& point_header) {
  std::string out = fmt::format("{},seed,status", point_header);
  for (const auto& m : metric_columns) out += "," + m;
  out += "\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{}", csv_field(r.point), r.seed, csv_field(r.status));
    for (const auto& m : metric_columns) {
      auto it = r.metrics.find(m);
      out += it == r.metrics.end() ? std::string(",") : fmt::format(",{:.6f}", it->second);
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// command line

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> variant;
  std::optional<std::size_t> inner_steps;
  std::optional<double> support_ratio;
  std::optional<std::string> meta_grad;
};

void add_common(CLI::App* cmd, Overrides& o, bool training_flags) {
  cmd->add_option("--config", o.config, "JSON config file")->required();
  cmd->add_option("--seed", o.seed, "Run seed (overrides the config)");
  cmd->add_option("--out", o.out, "Output directory");
  if (!training_flags) return;
  cmd->add_option("--variant", o.variant, "Outer objective")->check(CLI::IsMember({"mver-r", "mver-c"}));
  cmd->add_option("--inner-steps", o.inner_steps, "Inner-level steps T");
  cmd->add_option("--support-ratio", o.support_ratio, "Support fraction of each batch");
  cmd->add_option("--meta-grad", o.meta_grad, "Meta-gradient mode")->check(CLI::IsMember({"first-order", "exact-t1"}));
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.seed) {
    cfg.train.seed = *o.seed;
    cfg.seeds = {*o.seed};
  }
  if (o.out) cfg.output_dir = *o.out;
  if (o.variant) cfg.train.loss.variant = mv::outer_variant_from_string(*o.variant);
  if (o.support_ratio) cfg.train.support_ratio = *o.support_ratio;
  if (o.inner_steps) {
    cfg.train.inner_steps = *o.inner_steps;
    if (*o.inner_steps != 1 && !o.meta_grad && cfg.train.meta_grad == mv::MetaGradMode::exact_t1) {
      std::cerr << fmt::format("note: --inner-steps {} uses first-order meta-gradients\n", *o.inner_steps);
      cfg.train.meta_grad = mv::MetaGradMode::first_order;
    }
  }
  if (o.meta_grad) cfg.train.meta_grad = mv::meta_grad_from_string(*o.meta_grad);
  cfg.train.validate();
  return cfg;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw CliError(fmt::format("cannot create output directory {}: {}", dir.string(), ec.message()));
}

int cmd_gen_data(const Overrides& o, double missing_rate) {
  mv::SynthSpec spec = mv::synth_spec_from_json(mv::read_text_file(o.config));
  if (o.seed) spec.seed = *o.seed;
  spec.validate();
  const std::filesystem::path out = o.out.value_or("synthetic_data");
  mv::MultiViewDataset ds = mv::synth_generate(spec);
  if (missing_rate > 0.0) ds = mv::drop_views(std::move(ds), missing_rate, spec.seed + 1);
  ensure_dir(out);
  mv::write_dataset(ds, out);
  mv::write_text_file(out / "spec.json", mv::to_json(spec) + "\n");
  std::cout << fmt::format("wrote {} entities x {} views to {}\n", ds.size(), ds.view_count(), out.string());
  return 0;
}

int cmd_train(const Overrides& o, const std::string& fusion) {
  const RunConfig cfg = resolve(o);
  const mv::FusionKind kind = mv::fusion_from_string(fusion);
  const mv::MultiViewDataset ds = prepare_dataset(cfg, cfg.train.seed);
  const mv::ModelConfig model = resolve_model(cfg, ds);
  std::string log;
  const std::optional<std::string> tag = kind == mv::FusionKind::metaviewer ? std::nullopt : std::optional(fusion);
  const mv::FusionTrainResult result = mv::train_specific_to_uniform(ds, kind, model, cfg.train, [&](const mv::EpochRecord& r) {
    log += mv::log_line(r, tag) + "\n";
  });
  // Outputs are only written once training has succeeded.
  ensure_dir(cfg.output_dir);
  RunConfig echo = cfg;
  echo.model = model;
  mv::write_text_file(cfg.output_dir / "config.json", to_json(echo) + "\n");
  mv::write_text_file(cfg.output_dir / "train_log.jsonl", log);
  mv::save_checkpoint(result.model, cfg.output_dir / "checkpoint.json");
  std::cout << fmt::format("trained {} for {} epochs, final outer loss {:.6f}; outputs in {}\n", fusion, cfg.train.epochs,
                           result.loss_history.empty() ? 0.0 : result.loss_history.back(), cfg.output_dir.string());
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& checkpoint, const std::optional<std::string>& dataset,
             const std::optional<std::string>& tasks) {
  RunConfig cfg = resolve(o);
  if (dataset) cfg.dataset = *dataset;
  if (tasks) {
    cfg.eval.clustering = tasks->find("clustering") != std::string::npos;
    cfg.eval.classification = tasks->find("classification") != std::string::npos;
  }
  if (!std::filesystem::exists(checkpoint)) throw CliError(fmt::format("checkpoint {} does not exist", checkpoint));
  const mv::FusionModel m = mv::load_checkpoint(checkpoint);
  const mv::MultiViewDataset ds = prepare_dataset(cfg, cfg.train.seed);
  const auto reports = evaluate_model(m, ds, cfg.eval, cfg.train.seed, checkpoint);
  const std::string text = mv::to_json(reports) + "\n";
  ensure_dir(cfg.output_dir);
  mv::write_text_file(cfg.output_dir / "eval_report.json", text);
  std::cout << text;
  return 0;
}

const std::vector<std::string> kMetricColumns{"ACC", "NMI", "ARI", "MSE", "cls_ACC", "cls_precision", "cls_F", "final_loss"};

int cmd_sweep(const Overrides& o, const std::string& kind) {
  const RunConfig cfg = resolve(o);
  prepare_dataset(cfg, cfg.train.seed);  // fail before any training on a bad dataset
  const auto rows = sweep(cfg, kind);
  ensure_dir(cfg.output_dir);
  const std::string header = kind == "split-ratio" ? "support_ratio" : kind == "inner-steps" ? "inner_steps" : "arch";
  const std::string csv = to_csv(rows, kMetricColumns, header);
  mv::write_text_file(cfg.output_dir / fmt::format("sweep_{}.csv", kind), csv);
  mv::write_text_file(cfg.output_dir / "config.json", to_json(cfg) + "\n");
  std::cout << csv;
  return 0;
}

int cmd_compare(const Overrides& o) {
  const RunConfig cfg = resolve(o);
  const mv::MultiViewDataset ds = prepare_dataset(cfg, cfg.train.seed);
  if (!ds.labels) throw CliError("compare-fusions needs a labelled dataset");
  const auto rows = compare_fusions(cfg);
  ensure_dir(cfg.output_dir);
  const std::string csv = to_csv(rows, {"ACC", "NMI", "ARI", "MSE"}, "fusion");
  mv::write_text_file(cfg.output_dir / "fusions.csv", csv);
  mv::write_text_file(cfg.output_dir / "config.json", to_json(cfg) + "\n");
  std::cout << csv;
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-view representation learning with a bi-level meta-learned fusion"};
  app.require_subcommand(1);

  Overrides gen_o, train_o, eval_o, sweep_o, cmp_o;
  double missing_rate = 0.0;
  std::string fusion = "metaviewer", checkpoint, sweep_kind;
  std::optional<std::string> dataset, tasks;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multi-view dataset");
  add_common(gen, gen_o, false);
  gen->add_option("--missing-rate", missing_rate, "Fraction of (entity, view) entries to drop")->check(CLI::Range(0.0, 0.99));

  auto* tr = app.add_subcommand("train", "Train a model and write checkpoint + log");
  add_common(tr, train_o, true);
  tr->add_option("--fusion", fusion, "Fusion kind (metaviewer runs the bi-level trainer)");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(ev, eval_o, false);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  ev->add_option("--dataset", dataset, "Dataset directory or manifest (overrides the config)");
  ev->add_option("--tasks", tasks, "Comma-separated: clustering,classification");

  auto* sw = app.add_subcommand("sweep", "Ablation sweep");
  add_common(sw, sweep_o, true);
  sw->add_option("--kind", sweep_kind, "split-ratio, inner-steps or arch")
      ->required()
      ->check(CLI::IsMember({"split-ratio", "inner-steps", "arch"}));

  auto* cmp = app.add_subcommand("compare-fusions", "Compare fusion strategies");
  add_common(cmp, cmp_o, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_o, missing_rate);
    if (tr->parsed()) return cmd_train(train_o, fusion);
    if (ev->parsed()) return cmd_eval(eval_o, checkpoint, dataset, tasks);
    if (sw->parsed()) return cmd_sweep(sweep_o, sweep_kind);
    if (cmp->parsed()) return cmd_compare(cmp_o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace mvcli
