#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fsl/data.hpp"

namespace fsl::evaluation {

struct FoldSplit {
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Deterministic k-fold split: test folds are disjoint, cover all indices,
/// and differ in size by at most one.
std::vector<FoldSplit> kfold_split(std::size_t n, int k, std::uint64_t seed);

using Point = std::vector<double>;

struct ClusterPartition {
  std::vector<int> assignments;         // per-point cluster index
  std::vector<Point> centroids;
  int k = 0;
  double silhouette = 0.0;              // mean score; 0 when k < 2
  double objective = 0.0;               // within-cluster sum of squares
  std::vector<double> objective_trace;  // per Lloyd iteration, best restart
};

/// Lloyd's algorithm from k-means++ starts (10 restarts, best objective).
/// An emptied cluster is re-seeded at the point farthest from its centroid.
ClusterPartition kmeans(std::span<const Point> points, int k, std::uint64_t seed);

/// Per-point silhouette scores; singleton-cluster points score 0.
std::vector<double> silhouette_scores(std::span<const Point> points,
                                      const ClusterPartition& partition);
double silhouette(std::span<const Point> points, const ClusterPartition& partition);

/// Scans k = 2..k_max and returns the silhouette argmax (ties -> smallest k).
int select_cluster_count(std::span<const Point> points, int k_max, std::uint64_t seed);

/// Prediction in raw yield units from a raw record.
using RawYieldPredictor = std::function<double(const data::ShotRecord&)>;

/// Model trained without one cluster, with the normalizer fitted on its
/// training complement.
struct HeldOutModel {
  RawYieldPredictor predict_raw;
  data::Normalizer normalizer;
};

struct ClusterEvalEntry {
  int cluster = 0;
  std::size_t test_count = 0;
  double mse = 0.0;   // normalized target scale
  bool skipped = false;
};

struct OodReport {
  std::vector<ClusterEvalEntry> clusters;
  double mse_mean = 0.0;
  double mse_std = 0.0;
};

/// Per-cluster MSE of each held-out model on its cluster, normalized scale.
/// Clusters with fewer than 2 records are skipped and flagged.
OodReport ood_evaluate(std::span<const HeldOutModel> models,
                       std::span<const data::ShotRecord> records,
                       const ClusterPartition& partition);

struct PredictionErrorStats {
  double mean_pct = 0.0;
  double std_pct = 0.0;
};

/// Relative errors (y_hat - y)/y in percent on de-normalized yields.
PredictionErrorStats prediction_error_stats(const RawYieldPredictor& model,
                                            std::span<const data::ShotRecord> records);

inline constexpr int kPdGridPoints = 50;

struct PdCurve {
  int feature = 0;
  std::vector<double> grid;      // raw units, strictly increasing
  std::vector<double> response;  // A.U., 1 at the median grid point
};

/// Partial dependence: mean model response over the records as feature_j is
/// swept across its observed range; rescaled to 1 at the median grid point.
PdCurve partial_dependence(const RawYieldPredictor& model,
                           std::span<const data::ShotRecord> records, int feature);

/// Least-squares slope of log(response) vs log(grid) over [sub_lo, sub_hi].
double effective_exponent(const PdCurve& curve, double sub_lo, double sub_hi);
double effective_exponent(const PdCurve& curve);

/// Normalized 11-feature points for clustering (one-hot excluded).
std::vector<Point> physical_points(std::span<const data::ShotRecord> records,
                                   const data::Normalizer& norm);

}  // namespace fsl::evaluation
