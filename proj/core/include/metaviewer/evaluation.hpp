#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metaviewer/tensor.hpp"

namespace metaviewer {

struct KMeansConfig {
  std::size_t restarts = 50;
  std::size_t max_iterations = 300;
};

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Tensor centroids;
  double inertia = 0.0;
};

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia wins (earliest on ties). A cluster that empties out takes the
/// point farthest from its own centroid, chosen among clusters that still
/// have more than one member.
KMeansResult kmeans(const Tensor& x, std::size_t k, std::uint64_t seed, const KMeansConfig& cfg = {});

/// Minimum-cost assignment on a rows x cols cost matrix (rows <= cols).
/// Returns the column chosen for each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

/// Fraction of entities matched after the best one-to-one mapping of
/// cluster ids onto label ids.
double clustering_accuracy(const std::vector<std::size_t>& assignments, const std::vector<int>& labels);
/// I(A;B) / sqrt(H(A) H(B)). Two single-group partitions score 1.
double normalized_mutual_info(const std::vector<std::size_t>& a, const std::vector<int>& b);
/// Adjusted Rand index from pair counts. A zero denominator (both
/// partitions trivial in the same way) scores 1.
double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<int>& b);

struct ClusteringMetrics {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

ClusteringMetrics clustering_metrics(const std::vector<std::size_t>& assignments, const std::vector<int>& labels);

struct LogRegConfig {
  double learning_rate = 0.5;
  double weight_decay = 1e-4;
  std::size_t iterations = 500;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double f_score = 0.0;
  std::vector<int> predictions;
  /// Eval classes the classifier never saw in training.
  std::vector<int> unseen_classes;
};

/// Macro precision and F over the union of true and predicted classes; a
/// zero denominator counts as 0.
ClassificationMetrics classification_metrics(const std::vector<int>& truth, const std::vector<int>& predicted);

/// Multinomial logistic regression on standardized features (train
/// statistics), full-batch gradient descent with L2 weight decay.
ClassificationMetrics train_linear_classifier(const Tensor& h_train, const std::vector<int>& y_train, const Tensor& h_eval,
                                              const std::vector<int>& y_eval, const LogRegConfig& cfg = {});

struct EvalReport {
  /// "clustering" or "classification".
  std::string task;
  std::map<std::string, double> metrics;
  std::uint64_t seed = 0;
  std::string source;
};

}  // namespace metaviewer
