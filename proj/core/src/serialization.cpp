#include "metaviewer/serialization.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace metaviewer {

using nlohmann::json;

namespace {

json parse(std::string_view text, const char* what) {
  try {
    json j = json::parse(text.begin(), text.end());
    if (!j.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", what));
    return j;
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", what, e.what()));
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", what, key));
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: bad value for '{}': {}", what, key, e.what()));
  }
}

template <class Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(fmt::format("{}: {}", what, e.what()));
  }
}

json model_json(const ModelConfig& c) {
  return {{"views", c.views},
          {"input_dims", c.input_dims},
          {"embed_dim", c.embed_dim},
          {"rep_dim", c.rep_dim},
          {"embed_hidden", c.embed_hidden},
          {"kernel_width", c.kernel_width},
          {"conv_channels", c.conv_channels},
          {"meta_depth", c.meta_depth},
          {"activation", to_string(c.activation)}};
}

ModelConfig model_from(const json& j, bool validate) {
  const char* what = "model config";
  reject_unknown(j,
                 {"views", "input_dims", "embed_dim", "rep_dim", "embed_hidden", "kernel_width", "conv_channels", "meta_depth",
                  "activation"},
                 what);
  ModelConfig c;
  read(j, "views", c.views, what);
  read(j, "input_dims", c.input_dims, what);
  read(j, "embed_dim", c.embed_dim, what);
  read(j, "rep_dim", c.rep_dim, what);
  read(j, "embed_hidden", c.embed_hidden, what);
  read(j, "kernel_width", c.kernel_width, what);
  read(j, "conv_channels", c.conv_channels, what);
  read(j, "meta_depth", c.meta_depth, what);
  std::string act = to_string(c.activation);
  read(j, "activation", act, what);
  guarded(what, [&] {
    c.activation = activation_from_string(act);
    if (validate) c.validate();
    return 0;
  });
  return c;
}

json loss_json(const LossConfig& c) {
  return {{"variant", to_string(c.variant)}, {"temperature", c.temperature}, {"include_h", c.include_h}};
}

LossConfig loss_from(const json& j) {
  const char* what = "loss config";
  reject_unknown(j, {"variant", "temperature", "include_h"}, what);
  LossConfig c;
  std::string variant = to_string(c.variant);
  read(j, "variant", variant, what);
  read(j, "temperature", c.temperature, what);
  read(j, "include_h", c.include_h, what);
  guarded(what, [&] {
    c.variant = outer_variant_from_string(variant);
    c.validate();
    return 0;
  });
  return c;
}

json train_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"support_ratio", c.support_ratio},
          {"inner_steps", c.inner_steps},
          {"inner_lr", c.inner_lr},
          {"outer_lr", c.outer_lr},
          {"meta_grad", to_string(c.meta_grad)},
          {"optimizer", to_string(c.optimizer)},
          {"seed", c.seed},
          {"loss", loss_json(c.loss)}};
}

TrainConfig train_from(const json& j) {
  const char* what = "train config";
  reject_unknown(j, {"epochs", "batch_size", "support_ratio", "inner_steps", "inner_lr", "outer_lr", "meta_grad", "optimizer", "seed", "loss"},
                 what);
  TrainConfig c;
  read(j, "epochs", c.epochs, what);
  read(j, "batch_size", c.batch_size, what);
  read(j, "support_ratio", c.support_ratio, what);
  read(j, "inner_steps", c.inner_steps, what);
  read(j, "inner_lr", c.inner_lr, what);
  read(j, "outer_lr", c.outer_lr, what);
  read(j, "seed", c.seed, what);
  std::string mg = to_string(c.meta_grad), opt = to_string(c.optimizer);
  if (!j.contains("meta_grad") && c.inner_steps != 1) mg = to_string(MetaGradMode::first_order);
  read(j, "meta_grad", mg, what);
  read(j, "optimizer", opt, what);
  if (auto it = j.find("loss"); it != j.end()) c.loss = loss_from(*it);
  guarded(what, [&] {
    c.meta_grad = meta_grad_from_string(mg);
    c.optimizer = optimizer_from_string(opt);
    c.validate();
    return 0;
  });
  return c;
}

json synth_json(const SynthSpec& s) {
  return {{"n", s.n},
          {"views", s.views},
          {"shared_dim", s.shared_dim},
          {"private_dim", s.private_dim},
          {"observed_dims", s.observed_dims},
          {"noise_scale", s.noise_scale},
          {"classes", s.classes},
          {"class_separation", s.class_separation},
          {"class_spread", s.class_spread},
          {"seed", s.seed}};
}

SynthSpec synth_from(const json& j) {
  const char* what = "synthetic spec";
  reject_unknown(j,
                 {"n", "views", "shared_dim", "private_dim", "observed_dims", "noise_scale", "classes", "class_separation",
                  "class_spread", "seed"},
                 what);
  SynthSpec s;
  read(j, "n", s.n, what);
  read(j, "views", s.views, what);
  read(j, "shared_dim", s.shared_dim, what);
  read(j, "private_dim", s.private_dim, what);
  read(j, "observed_dims", s.observed_dims, what);
  read(j, "noise_scale", s.noise_scale, what);
  read(j, "classes", s.classes, what);
  read(j, "class_separation", s.class_separation, what);
  read(j, "class_spread", s.class_spread, what);
  read(j, "seed", s.seed, what);
  guarded(what, [&] {
    s.validate();
    return 0;
  });
  return s;
}

json group_json(const ParamGroup& g) {
  json params = json::object();
  for (const auto& [name, t] : g) {
    params[name] = {{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
  }
  json view = g.tag().view ? json(*g.tag().view) : json(nullptr);
  return {{"kind", g.tag().to_string()}, {"view", view}, {"prefix", g.prefix()}, {"params", params}};
}

ParamGroup group_from(const json& j, GroupTag tag) {
  ParamGroup g(tag, j.at("prefix").get<std::string>());
  for (const auto& [name, p] : j.at("params").items()) {
    g.add(name, Tensor(p.at("shape").get<Shape>(), p.at("values").get<std::vector<double>>()));
  }
  return g;
}

}  // namespace

std::string to_json(const ModelConfig& cfg) { return model_json(cfg).dump(2); }
std::string to_json(const LossConfig& cfg) { return loss_json(cfg).dump(2); }
std::string to_json(const TrainConfig& cfg) { return train_json(cfg).dump(2); }
std::string to_json(const SynthSpec& spec) { return synth_json(spec).dump(2); }

ModelConfig model_config_from_json(std::string_view text, bool validate) {
  return model_from(parse(text, "model config"), validate);
}
LossConfig loss_config_from_json(std::string_view text) { return loss_from(parse(text, "loss config")); }
TrainConfig train_config_from_json(std::string_view text) { return train_from(parse(text, "train config")); }
SynthSpec synth_spec_from_json(std::string_view text) { return synth_from(parse(text, "synthetic spec")); }

std::string checkpoint_to_json(const FusionModel& m) {
  json groups = json::array();
  groups.push_back(group_json(m.params.meta));
  for (const auto& g : m.params.embed) groups.push_back(group_json(g));
  for (const auto& g : m.params.head) groups.push_back(group_json(g));
  json j = {{"format", "metaviewer-checkpoint"},
            {"version", 1},
            {"fusion", to_string(m.kind)},
            {"model", model_json(m.model)},
            {"groups", groups}};
  return j.dump();
}

FusionModel checkpoint_from_json(std::string_view text) {
  const json j = parse(text, "checkpoint");
  try {
    if (j.value("format", "") != "metaviewer-checkpoint") throw ConfigError("checkpoint: missing or wrong 'format' field");
    FusionModel m;
    m.kind = fusion_from_string(j.at("fusion").get<std::string>());
    m.model = model_from(j.at("model"), true);
    m.params.embed.resize(m.model.views);
    m.params.head.resize(m.model.views);
    std::vector<bool> seen_embed(m.model.views, false), seen_head(m.model.views, false);
    bool seen_meta = false;
    for (const json& g : j.at("groups")) {
      const std::string kind = g.at("kind").get<std::string>();
      if (kind == "meta") {
        m.params.meta = group_from(g, GroupTag{GroupKind::meta, std::nullopt});
        seen_meta = true;
        continue;
      }
      const std::size_t v = g.at("view").get<std::size_t>();
      if (v >= m.model.views) throw ConfigError(fmt::format("checkpoint: group {} has view {} of {}", kind, v, m.model.views));
      if (kind.rfind("embed", 0) == 0) {
        m.params.embed[v] = group_from(g, GroupTag{GroupKind::embed, v});
        seen_embed[v] = true;
      } else if (kind.rfind("head", 0) == 0) {
        m.params.head[v] = group_from(g, GroupTag{GroupKind::head, v});
        seen_head[v] = true;
      } else {
        throw ConfigError(fmt::format("checkpoint: unexpected group kind '{}'", kind));
      }
    }
    for (std::size_t v = 0; v < m.model.views; ++v) {
      if (!seen_embed[v] || !seen_head[v]) throw ConfigError(fmt::format("checkpoint: view {} lacks an embedder or head", v));
    }
    if (!seen_meta) throw ConfigError("checkpoint: no meta group");
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const FusionModel& m, const std::filesystem::path& path) { write_text_file(path, checkpoint_to_json(m)); }

FusionModel load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(read_text_file(path)); }

std::string log_line(const EpochRecord& rec, const std::optional<std::string>& fusion) {
  json j = {{"epoch", rec.epoch}, {"outer_loss", rec.outer_loss}, {"inner_loss_per_view", rec.inner_loss_per_view}, {"wall_ms", rec.wall_ms},
           {"skipped_batches", rec.skipped_batches}};
  if (fusion) j["fusion"] = *fusion;
  return j.dump();
}

namespace {

json report_json(const EvalReport& r) {
  return {{"task", r.task}, {"metrics", r.metrics}, {"seed", r.seed}, {"source", r.source}};
}

}  // namespace

std::string to_json(const EvalReport& report) { return report_json(report).dump(2); }

std::string to_json(const std::vector<EvalReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  return json{{"reports", arr}}.dump(2);
}

EvalReport eval_report_from_json(std::string_view text) {
  const json j = parse(text, "eval report");
  try {
    EvalReport r;
    r.task = j.at("task").get<std::string>();
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.source = j.at("source").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("eval report: {}", e.what()));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

}  // namespace metaviewer
