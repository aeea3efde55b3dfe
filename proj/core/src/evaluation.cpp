#include "metaviewer/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

namespace metaviewer {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double e = a[j] - b[j];
    s += e * e;
  }
  return s;
}

void seed_plus_plus(const Tensor& x, std::size_t k, std::mt19937_64& rng, Tensor& centroids) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t chosen = pick(rng);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy_n(x.data() + chosen * d, d, centroids.data() + c * d);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(x.data() + i * d, centroids.data() + c * d, d));
      total += best[i];
    }
    if (c + 1 == k) break;
    if (total <= 0.0) {
      chosen = pick(rng);
      continue;
    }
    const double target = unit(rng) * total;
    double acc = 0.0;
    chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      acc += best[i];
      if (acc > target && best[i] > 0.0) {
        chosen = i;
        break;
      }
    }
  }
}

KMeansResult lloyd(const Tensor& x, std::size_t k, Tensor centroids, std::size_t max_iterations) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  std::vector<std::size_t> assign(n, k);
  std::vector<double> dist(n, 0.0);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = sq_dist(x.data() + i * d, centroids.data() + c * d, d);
        if (dd < bd) {
          bd = dd;
          arg = c;
        }
      }
      dist[i] = bd;
      if (assign[i] != arg) {
        assign[i] = arg;
        changed = true;
      }
    }
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) ++count[assign[i]];
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      // re-seed from the point farthest from its own centroid
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (count[assign[i]] > 1 && dist[i] > fd) {
          fd = dist[i];
          far = i;
        }
      }
      --count[assign[far]];
      assign[far] = c;
      count[c] = 1;
      dist[far] = 0.0;
      changed = true;
    }
    if (!changed && it > 0) break;
    centroids.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) centroids[assign[i] * d + j] += x[i * d + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) centroids[c * d + j] /= static_cast<double>(count[c]);
    }
  }
  KMeansResult r;
  r.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) r.inertia += sq_dist(x.data() + i * d, centroids.data() + assign[i] * d, d);
  r.assignments = std::move(assign);
  r.centroids = std::move(centroids);
  return r;
}

}  // namespace

KMeansResult kmeans(const Tensor& x, std::size_t k, std::uint64_t seed, const KMeansConfig& cfg) {
  if (x.rank() != 2) throw ShapeError(fmt::format("kmeans: expected a matrix, got {}", shape_string(x.shape())));
  if (k == 0 || x.dim(0) < k) throw std::invalid_argument(fmt::format("kmeans: k = {} with {} rows", k, x.dim(0)));
  if (cfg.restarts == 0) throw std::invalid_argument("kmeans: restarts must be >= 1");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    Tensor centroids({k, x.dim(1)}, 0.0);
    seed_plus_plus(x, k, rng, centroids);
    KMeansResult cand = lloyd(x, k, std::move(centroids), cfg.max_iterations);
    if (cand.inertia < best.inertia) best = std::move(cand);
  }
  return best;
}

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost.front().size();
  if (m < n) throw std::invalid_argument(fmt::format("hungarian: {} rows exceed {} columns", n, m));
  // Potentials formulation, 1-based with a sentinel column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> out(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = j - 1;
  }
  return out;
}

namespace {

/// Contingency table between two labelings with ids compacted to 0..k-1.
struct Contingency {
  std::vector<std::vector<double>> table;
  std::vector<double> rows, cols;
  double n = 0.0;
};

template <class A, class B>
Contingency contingency(const std::vector<A>& a, const std::vector<B>& b) {
  if (a.size() != b.size()) throw std::invalid_argument(fmt::format("metrics: {} assignments for {} labels", a.size(), b.size()));
  std::map<A, std::size_t> ia;
  std::map<B, std::size_t> ib;
  for (const A& x : a) ia.try_emplace(x, ia.size());
  for (const B& y : b) ib.try_emplace(y, ib.size());
  Contingency c;
  c.table.assign(ia.size(), std::vector<double>(ib.size(), 0.0));
  c.rows.assign(ia.size(), 0.0);
  c.cols.assign(ib.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t r = ia[a[i]], k = ib[b[i]];
    c.table[r][k] += 1.0;
    c.rows[r] += 1.0;
    c.cols[k] += 1.0;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / n) * std::log(c / n);
  }
  return h;
}

double pairs(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

double clustering_accuracy(const std::vector<std::size_t>& assignments, const std::vector<int>& labels) {
  const Contingency c = contingency(assignments, labels);
  if (c.n == 0.0) throw std::invalid_argument("clustering_accuracy: empty input");
  const std::size_t r = c.rows.size(), k = c.cols.size();
  const std::size_t side = std::max(r, k);
  std::vector<std::vector<double>> cost(side, std::vector<double>(side, 0.0));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < k; ++j) cost[i][j] = -c.table[i][j];
  }
  const std::vector<std::size_t> match = hungarian(cost);
  double hit = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (match[i] < k) hit += c.table[i][match[i]];
  }
  return hit / c.n;
}

double normalized_mutual_info(const std::vector<std::size_t>& a, const std::vector<int>& b) {
  const Contingency c = contingency(a, b);
  if (c.n == 0.0) throw std::invalid_argument("normalized_mutual_info: empty input");
  const double ha = entropy(c.rows, c.n), hb = entropy(c.cols, c.n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  if (ha == 0.0 || hb == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    for (std::size_t j = 0; j < c.cols.size(); ++j) {
      const double nij = c.table[i][j];
      if (nij > 0.0) mi += (nij / c.n) * std::log(c.n * nij / (c.rows[i] * c.cols[j]));
    }
  }
  return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<int>& b) {
  const Contingency c = contingency(a, b);
  if (c.n == 0.0) throw std::invalid_argument("adjusted_rand_index: empty input");
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& row : c.table) {
    for (double nij : row) index += pairs(nij);
  }
  for (double x : c.rows) sa += pairs(x);
  for (double y : c.cols) sb += pairs(y);
  const double total = pairs(c.n);
  const double expected = total > 0.0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

ClusteringMetrics clustering_metrics(const std::vector<std::size_t>& assignments, const std::vector<int>& labels) {
  return {clustering_accuracy(assignments, labels), normalized_mutual_info(assignments, labels),
          adjusted_rand_index(assignments, labels)};
}

ClassificationMetrics classification_metrics(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size() || truth.empty()) {
    throw std::invalid_argument(fmt::format("classification_metrics: {} labels for {} predictions", truth.size(), predicted.size()));
  }
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(predicted.begin(), predicted.end());
  ClassificationMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) correct += truth[i] == predicted[i] ? 1 : 0;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  for (int c : classes) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (predicted[i] == c && truth[i] == c) tp += 1;
      if (predicted[i] == c && truth[i] != c) fp += 1;
      if (predicted[i] != c && truth[i] == c) fn += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    m.precision += p;
    m.f_score += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  m.precision /= static_cast<double>(classes.size());
  m.f_score /= static_cast<double>(classes.size());
  m.predictions = predicted;
  return m;
}

ClassificationMetrics train_linear_classifier(const Tensor& h_train, const std::vector<int>& y_train, const Tensor& h_eval,
                                              const std::vector<int>& y_eval, const LogRegConfig& cfg) {
  if (h_train.rank() != 2 || h_eval.rank() != 2 || h_train.dim(1) != h_eval.dim(1)) {
    throw ShapeError(fmt::format("train_linear_classifier: train {} vs eval {}", shape_string(h_train.shape()),
                                 shape_string(h_eval.shape())));
  }
  if (h_train.dim(0) != y_train.size() || h_eval.dim(0) != y_eval.size()) {
    throw std::invalid_argument("train_linear_classifier: label count differs from row count");
  }
  const std::vector<int> classes = [&] {
    std::set<int> s(y_train.begin(), y_train.end());
    return std::vector<int>(s.begin(), s.end());
  }();
  if (classes.size() < 2) throw std::invalid_argument("train_linear_classifier: need at least 2 classes in training labels");

  const std::size_t n = h_train.dim(0), d = h_train.dim(1), k = classes.size();
  std::vector<double> mu(d, 0.0), sd(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) mu[j] += h_train[i * d + j];
  }
  for (double& x : mu) x /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += (h_train[i * d + j] - mu[j]) * (h_train[i * d + j] - mu[j]);
  }
  for (double& x : sd) {
    x = std::sqrt(x / static_cast<double>(n));
    if (x < 1e-12) x = 1.0;
  }
  auto standardize = [&](const Tensor& h) {
    Tensor out = h;
    for (std::size_t i = 0; i < h.dim(0); ++i) {
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] = (h[i * d + j] - mu[j]) / sd[j];
    }
    return out;
  };
  const Tensor xt = standardize(h_train);
  const Tensor xe = standardize(h_eval);
  std::vector<std::size_t> yt(n);
  for (std::size_t i = 0; i < n; ++i) {
    yt[i] = static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), y_train[i]) - classes.begin());
  }

  std::vector<double> w(d * k, 0.0), b(k, 0.0), gw(d * k), gb(k), logits(k);
  auto scores = [&](const Tensor& x, std::size_t i) {
    for (std::size_t c = 0; c < k; ++c) {
      double s = b[c];
      for (std::size_t j = 0; j < d; ++j) s += x[i * d + j] * w[j * k + c];
      logits[c] = s;
    }
  };
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      scores(xt, i);
      const double top = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (double& l : logits) {
        l = std::exp(l - top);
        z += l;
      }
      for (std::size_t c = 0; c < k; ++c) {
        const double g = logits[c] / z - (yt[i] == c ? 1.0 : 0.0);
        gb[c] += g;
        for (std::size_t j = 0; j < d; ++j) gw[j * k + c] += g * xt[i * d + j];
      }
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t q = 0; q < w.size(); ++q) w[q] -= cfg.learning_rate * (gw[q] * inv + cfg.weight_decay * w[q]);
    for (std::size_t c = 0; c < k; ++c) b[c] -= cfg.learning_rate * gb[c] * inv;
  }

  std::vector<int> pred(h_eval.dim(0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    scores(xe, i);
    pred[i] = classes[static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin())];
  }
  ClassificationMetrics m = classification_metrics(y_eval, pred);
  std::set<int> unseen;
  for (int y : y_eval) {
    if (!std::binary_search(classes.begin(), classes.end(), y)) unseen.insert(y);
  }
  m.unseen_classes.assign(unseen.begin(), unseen.end());
  return m;
}

}  // namespace metaviewer
