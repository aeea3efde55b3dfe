#include "metaviewer/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace metaviewer {
namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> MultiViewDataset::view_dims() const {
  std::vector<std::size_t> dims;
  for (const Tensor& v : views) dims.push_back(v.dim(1));
  return dims;
}

bool MultiViewDataset::available(std::size_t entity, std::size_t view) const {
  return !mask || (*mask)[entity * view_count() + view] != 0;
}

bool MultiViewDataset::complete(std::size_t entity) const {
  for (std::size_t v = 0; v < view_count(); ++v) {
    if (!available(entity, v)) return false;
  }
  return true;
}

std::vector<std::size_t> MultiViewDataset::indices(Split which) const {
  std::vector<std::size_t> out;
  if (split.empty()) {
    if (which == Split::train) {
      out.resize(size());
      std::iota(out.begin(), out.end(), std::size_t{0});
    }
    return out;
  }
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

MultiViewDataset MultiViewDataset::subset(const std::vector<std::size_t>& rows) const {
  MultiViewDataset out;
  out.name = name;
  for (const Tensor& v : views) out.views.push_back(v.gather_rows(rows));
  if (labels) {
    std::vector<int> l;
    for (std::size_t r : rows) l.push_back((*labels)[r]);
    out.labels = std::move(l);
  }
  if (mask) {
    std::vector<std::uint8_t> m;
    for (std::size_t r : rows) {
      for (std::size_t v = 0; v < view_count(); ++v) m.push_back((*mask)[r * view_count() + v]);
    }
    out.mask = std::move(m);
  }
  if (!split.empty()) {
    for (std::size_t r : rows) out.split.push_back(split[r]);
  }
  return out;
}

void MultiViewDataset::validate() const {
  if (views.empty()) throw std::invalid_argument("dataset: no views");
  const std::size_t n = size();
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].rank() != 2 || views[v].dim(0) != n) {
      throw std::invalid_argument(fmt::format("dataset: view {} has shape {}, expected {} rows", v,
                                              shape_string(views[v].shape()), n));
    }
  }
  if (labels && labels->size() != n) {
    throw std::invalid_argument(fmt::format("dataset: {} labels for {} entities", labels->size(), n));
  }
  if (mask && mask->size() != n * views.size()) {
    throw std::invalid_argument(fmt::format("dataset: mask has {} entries, expected {}", mask->size(), n * views.size()));
  }
  if (!split.empty() && split.size() != n) {
    throw std::invalid_argument(fmt::format("dataset: {} split tags for {} entities", split.size(), n));
  }
}

// ---------------------------------------------------------------------------
// CSV io

namespace {

std::vector<std::vector<double>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(fmt::format("cannot open {}", path.string()));
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double value = 0.0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc() || !std::isfinite(value)) {
        throw DatasetError(fmt::format("{}:{}: unparseable field near '{}'", path.string(), lineno,
                                       std::string(p, std::min<std::size_t>(16, static_cast<std::size_t>(end - p)))));
      }
      row.push_back(value);
      p = next;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') throw DatasetError(fmt::format("{}:{}: expected ',' separator", path.string(), lineno));
      ++p;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_rows(const fs::path& path, const Tensor& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DatasetError(fmt::format("cannot write {}", path.string()));
  const std::size_t cols = m.dim(1);
  std::string line;
  for (std::size_t r = 0; r < m.dim(0); ++r) {
    line.clear();
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) line += ',';
      line += fmt::format("{:.17g}", m.at(r, c));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw DatasetError(fmt::format("write failed for {}", path.string()));
}

}  // namespace

MultiViewDataset load_dataset(const fs::path& manifest_or_dir) {
  const fs::path manifest = fs::is_directory(manifest_or_dir) ? manifest_or_dir / "manifest.json" : manifest_or_dir;
  std::ifstream in(manifest);
  if (!in) throw DatasetError(fmt::format("cannot open manifest {}", manifest.string()));
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DatasetError(fmt::format("{}: {}", manifest.string(), e.what()));
  }
  const fs::path root = manifest.parent_path();

  MultiViewDataset ds;
  ds.name = j.value("name", std::string("dataset"));
  if (!j.contains("views") || !j["views"].is_array() || j["views"].empty()) {
    throw DatasetError(fmt::format("{}: 'views' must be a non-empty array", manifest.string()));
  }
  for (std::size_t v = 0; v < j["views"].size(); ++v) {
    const json& jv = j["views"][v];
    const fs::path file = root / jv.at("file").get<std::string>();
    const auto rows = read_csv(file);
    const std::size_t dim = jv.contains("dim") ? jv["dim"].get<std::size_t>() : (rows.empty() ? 0 : rows[0].size());
    Tensor m(Shape{rows.size(), dim});
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != dim) {
        throw DatasetError(fmt::format("{}: row {} has {} fields, expected {}", file.string(), r + 1, rows[r].size(), dim));
      }
      std::copy(rows[r].begin(), rows[r].end(), m.data() + r * dim);
    }
    if (!ds.views.empty() && m.dim(0) != ds.views.front().dim(0)) {
      throw DatasetError(fmt::format("view {} ({}) has {} rows, view 0 has {}", v, file.string(), m.dim(0),
                                     ds.views.front().dim(0)));
    }
    ds.views.push_back(std::move(m));
  }
  const std::size_t n = ds.size();
  if (j.contains("labels_file") && !j["labels_file"].is_null()) {
    const fs::path file = root / j["labels_file"].get<std::string>();
    const auto rows = read_csv(file);
    if (rows.size() != n) throw DatasetError(fmt::format("{}: {} labels for {} entities", file.string(), rows.size(), n));
    std::vector<int> labels;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != 1 || rows[r][0] != std::floor(rows[r][0]) || rows[r][0] < 0) {
        throw DatasetError(fmt::format("{}: row {} is not a non-negative integer label", file.string(), r + 1));
      }
      labels.push_back(static_cast<int>(rows[r][0]));
    }
    ds.labels = std::move(labels);
  }
  if (j.contains("mask_file") && !j["mask_file"].is_null()) {
    const fs::path file = root / j["mask_file"].get<std::string>();
    const auto rows = read_csv(file);
    if (rows.size() != n) throw DatasetError(fmt::format("{}: {} mask rows for {} entities", file.string(), rows.size(), n));
    std::vector<std::uint8_t> mask;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != ds.view_count()) {
        throw DatasetError(fmt::format("{}: row {} has {} entries, expected {}", file.string(), r + 1, rows[r].size(),
                                       ds.view_count()));
      }
      for (double b : rows[r]) {
        if (b != 0.0 && b != 1.0) throw DatasetError(fmt::format("{}: row {} has non 0/1 value", file.string(), r + 1));
        mask.push_back(b != 0.0 ? 1 : 0);
      }
    }
    ds.mask = std::move(mask);
  }
  ds.validate();
  return ds;
}

void write_dataset(const MultiViewDataset& ds, const fs::path& dir) {
  ds.validate();
  fs::create_directories(dir);
  json manifest;
  manifest["name"] = ds.name;
  manifest["views"] = json::array();
  for (std::size_t v = 0; v < ds.view_count(); ++v) {
    const std::string file = fmt::format("view{}.csv", v);
    write_rows(dir / file, ds.views[v]);
    manifest["views"].push_back({{"file", file}, {"dim", ds.views[v].dim(1)}});
  }
  if (ds.labels) {
    Tensor l(Shape{ds.size(), 1});
    for (std::size_t i = 0; i < ds.size(); ++i) l[i] = (*ds.labels)[i];
    write_rows(dir / "labels.csv", l);
    manifest["labels_file"] = "labels.csv";
  }
  if (ds.mask) {
    Tensor m(Shape{ds.size(), ds.view_count()});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (*ds.mask)[i];
    write_rows(dir / "mask.csv", m);
    manifest["mask_file"] = "mask.csv";
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) throw DatasetError(fmt::format("write failed for {}", (dir / "manifest.json").string()));
}

// ---------------------------------------------------------------------------

MultiViewDataset normalize_minmax(MultiViewDataset ds) {
  ds.validate();
  std::vector<std::size_t> fit_rows = ds.indices(Split::train);
  for (std::size_t v = 0; v < ds.view_count(); ++v) {
    Tensor& m = ds.views[v];
    const std::size_t cols = m.dim(1);
    std::vector<double> lo(cols, std::numeric_limits<double>::infinity());
    std::vector<double> hi(cols, -std::numeric_limits<double>::infinity());
    for (std::size_t r : fit_rows) {
      if (!ds.available(r, v)) continue;
      for (std::size_t c = 0; c < cols; ++c) {
        lo[c] = std::min(lo[c], m.at(r, c));
        hi[c] = std::max(hi[c], m.at(r, c));
      }
    }
    for (std::size_t r = 0; r < m.dim(0); ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        double& x = m.at(r, c);
        const double range = hi[c] - lo[c];
        if (!std::isfinite(range) || range <= 0.0) {
          x = 0.0;
        } else {
          x = std::clamp((x - lo[c]) / range, 0.0, 1.0);
        }
      }
    }
  }
  return ds;
}

MultiViewDataset split_train_val_test(MultiViewDataset ds, std::uint64_t seed) {
  ds.validate();
  const std::size_t n = ds.size();
  if (n < 5) throw std::invalid_argument(fmt::format("split_train_val_test: need at least 5 entities, got {}", n));

  // Largest-remainder totals for 6:2:2.
  const double fractions[3] = {0.6, 0.2, 0.2};
  std::size_t totals[3];
  double rema[3];
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const double exact = fractions[s] * static_cast<double>(n);
    totals[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rema[s] = exact - static_cast<double>(totals[s]);
    assigned += totals[s];
  }
  while (assigned < n) {
    int best = 0;
    for (int s = 1; s < 3; ++s) {
      if (rema[s] > rema[best] + 1e-12) best = s;
    }
    ++totals[best];
    rema[best] = -1.0;
    ++assigned;
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  if (ds.labels) {
    const auto& labels = *ds.labels;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return labels[a] < labels[b]; });
  }

  // Walk the (class-grouped) order and hand each position to the split that
  // lags furthest behind its quota, which spreads every split evenly over
  // every class run.
  ds.split.assign(n, Split::train);
  std::size_t given[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    int best = -1;
    double best_deficit = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < 3; ++s) {
      if (given[s] >= totals[s]) continue;
      const double deficit = static_cast<double>(totals[s]) * static_cast<double>(i + 1) / static_cast<double>(n) -
                             static_cast<double>(given[s]);
      if (deficit > best_deficit) {
        best_deficit = deficit;
        best = s;
      }
    }
    ++given[best];
    ds.split[order[i]] = static_cast<Split>(best);
  }
  return ds;
}

// ---------------------------------------------------------------------------
// meta-split

std::size_t support_count(std::size_t batch_size, double support_ratio) {
  if (!(support_ratio > 0.0 && support_ratio < 1.0)) {
    throw std::invalid_argument(fmt::format("meta_split: support ratio {} not in (0, 1)", support_ratio));
  }
  if (batch_size < 2) throw std::invalid_argument(fmt::format("meta_split: batch of {} cannot feed both sides", batch_size));
  const auto rounded = static_cast<std::size_t>(std::floor(support_ratio * static_cast<double>(batch_size) + 0.5 + 1e-9));
  return std::clamp<std::size_t>(rounded, 1, batch_size - 1);
}

MetaSplitIndices meta_split(std::size_t batch_size, std::size_t views, double support_ratio, std::mt19937_64& rng) {
  const std::size_t ns = support_count(batch_size, support_ratio);
  std::vector<std::size_t> perm(batch_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> support(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(ns));
  std::vector<std::size_t> query(perm.begin() + static_cast<std::ptrdiff_t>(ns), perm.end());
  std::sort(support.begin(), support.end());
  std::sort(query.begin(), query.end());
  MetaSplitIndices out;
  out.support.assign(views, support);
  out.query = std::move(query);
  return out;
}

MetaSplitIndices meta_split_incomplete(const std::vector<std::uint8_t>& mask, std::size_t views) {
  if (views == 0 || mask.size() % views != 0) {
    throw std::invalid_argument(fmt::format("meta_split_incomplete: mask of {} entries for {} views", mask.size(), views));
  }
  const std::size_t b = mask.size() / views;
  MetaSplitIndices out;
  out.support.resize(views);
  bool any_incomplete = false;
  for (std::size_t i = 0; i < b; ++i) {
    bool complete = true;
    for (std::size_t v = 0; v < views; ++v) complete = complete && mask[i * views + v] != 0;
    if (complete) {
      out.query.push_back(i);
      continue;
    }
    any_incomplete = true;
    for (std::size_t v = 0; v < views; ++v) {
      if (mask[i * views + v] != 0) out.support[v].push_back(i);
    }
  }
  if (out.query.empty()) throw std::invalid_argument("meta_split_incomplete: batch has no entity with all views");
  if (!any_incomplete) {
    throw std::invalid_argument("meta_split_incomplete: batch has no incomplete entity; use meta_split");
  }
  return out;
}

MetaSplit materialize(const std::vector<Tensor>& batch_views, const MetaSplitIndices& idx) {
  if (idx.support.size() != batch_views.size()) {
    throw std::invalid_argument(fmt::format("materialize: {} support lists for {} views", idx.support.size(), batch_views.size()));
  }
  MetaSplit out;
  for (std::size_t v = 0; v < batch_views.size(); ++v) {
    out.support.push_back(batch_views[v].gather_rows(idx.support[v]));
    out.query.push_back(batch_views[v].gather_rows(idx.query));
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic data

std::size_t SynthSpec::observed_dim(std::size_t v) const {
  return observed_dims.size() == 1 ? observed_dims[0] : observed_dims.at(v);
}

void SynthSpec::validate() const {
  if (n < 1 || views < 1 || shared_dim < 1 || classes < 1) {
    throw std::invalid_argument("SynthSpec: n, views, shared_dim and classes must be >= 1");
  }
  if (observed_dims.empty() || (observed_dims.size() != 1 && observed_dims.size() != views)) {
    throw std::invalid_argument(fmt::format("SynthSpec: observed_dims needs 1 or {} entries, got {}", views, observed_dims.size()));
  }
  for (std::size_t d : observed_dims) {
    if (d < 1) throw std::invalid_argument("SynthSpec: observed dims must be >= 1");
  }
  if (!(noise_scale >= 0.0) || !(class_spread >= 0.0) || !(class_separation >= 0.0)) {
    throw std::invalid_argument("SynthSpec: noise_scale, class_spread and class_separation must be >= 0");
  }
}

MultiViewDataset synth_generate(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Class means are drawn first so the geometry does not depend on N.
  Tensor means(Shape{spec.classes, spec.shared_dim});
  for (double& m : means.values()) m = spec.class_separation * normal(rng);

  std::vector<Tensor> mixing;
  for (std::size_t v = 0; v < spec.views; ++v) {
    const std::size_t cols = spec.shared_dim + spec.private_dim;
    Tensor m(Shape{spec.observed_dim(v), cols});
    const double s = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& x : m.values()) x = s * normal(rng);
    mixing.push_back(std::move(m));
  }

  std::vector<int> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) labels[i] = static_cast<int>(i % spec.classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  MultiViewDataset ds;
  ds.name = "synthetic";
  for (std::size_t v = 0; v < spec.views; ++v) ds.views.emplace_back(Shape{spec.n, spec.observed_dim(v)});

  std::vector<double> latent(spec.shared_dim + spec.private_dim);
  std::vector<double> shared(spec.shared_dim);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t k = 0; k < spec.shared_dim; ++k) {
      shared[k] = means.at(static_cast<std::size_t>(labels[i]), k) + spec.class_spread * normal(rng);
    }
    for (std::size_t v = 0; v < spec.views; ++v) {
      std::copy(shared.begin(), shared.end(), latent.begin());
      for (std::size_t k = 0; k < spec.private_dim; ++k) latent[spec.shared_dim + k] = spec.noise_scale * normal(rng);
      Tensor& out = ds.views[v];
      const Tensor& m = mixing[v];
      for (std::size_t r = 0; r < out.dim(1); ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < latent.size(); ++c) acc += m.at(r, c) * latent[c];
        out.at(i, r) = acc + 0.1 * spec.noise_scale * normal(rng);
      }
    }
  }
  ds.labels = std::move(labels);
  return normalize_minmax(std::move(ds));
}

MultiViewDataset drop_views(MultiViewDataset ds, double missing_rate, std::uint64_t seed) {
  ds.validate();
  const std::size_t n = ds.size();
  const std::size_t vc = ds.view_count();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, vc - 1);
  std::vector<std::uint8_t> mask(n * vc, 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t kept = 0;
    for (std::size_t v = 0; v < vc; ++v) {
      if (unif(rng) < missing_rate) mask[i * vc + v] = 0;
      kept += mask[i * vc + v];
    }
    if (kept == 0) mask[i * vc + pick(rng)] = 1;
  }
  ds.mask = std::move(mask);
  return ds;
}

}  // namespace metaviewer
