#include "fsl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsl/errors.hpp"
#include "fsl/rng.hpp"

namespace fsl::evaluation {

std::vector<FoldSplit> kfold_split(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("kfold_split: k must be >= 2");
  if (static_cast<std::size_t>(k) > n)
    throw ArgumentError("kfold_split: k (" + std::to_string(k) + ") exceeds n (" +
                        std::to_string(n) + ")");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed).fork(0x6b666f6c64ULL);
  rng.shuffle(order);

  std::vector<FoldSplit> folds(k);
  std::size_t base = n / k;
  std::size_t extra = n % k;  // first `extra` folds get one more
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    folds[f].test_indices.assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }
  for (int f = 0; f < k; ++f) {
    std::sort(folds[f].test_indices.begin(), folds[f].test_indices.end());
    folds[f].train_indices.reserve(n - folds[f].test_indices.size());
    std::size_t t = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (t < folds[f].test_indices.size() && folds[f].test_indices[t] == i)
        ++t;
      else
        folds[f].train_indices.push_back(i);
    }
  }
  return folds;
}

namespace {

double squared_distance(const Point& a, const Point& b) {
  double sum = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    double diff = a[d] - b[d];
    sum += diff * diff;
  }
  return sum;
}

double distance(const Point& a, const Point& b) { return std::sqrt(squared_distance(a, b)); }

struct LloydResult {
  std::vector<int> assignments;
  std::vector<Point> centroids;
  double objective = 0.0;
  std::vector<double> trace;
};

std::vector<Point> kmeanspp_init(std::span<const Point> points, int k, Rng& rng) {
  std::vector<Point> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.below(points.size())]);
  std::vector<double> dist2(points.size());
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& centroid : centroids)
        best = std::min(best, squared_distance(points[i], centroid));
      dist2[i] = best;
      total += best;
    }
    if (total <= 0.0) {
      // all remaining mass at existing centroids; pick uniformly
      centroids.push_back(points[rng.below(points.size())]);
      continue;
    }
    double target = rng.uniform01() * total;
    double running = 0.0;
    std::size_t chosen = points.size() - 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      running += dist2[i];
      if (running >= target) {
        chosen = i;
        break;
      }
    }
    centroids.push_back(points[chosen]);
  }
  return centroids;
}

LloydResult lloyd(std::span<const Point> points, int k, Rng& rng) {
  const int max_iterations = 300;
  LloydResult result;
  result.centroids = kmeanspp_init(points, k, rng);
  result.assignments.assign(points.size(), -1);
  std::size_t dim = points[0].size();

  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      int best_c = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = squared_distance(points[i], result.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best_c = c;
        }
      }
      if (result.assignments[i] != best_c) {
        result.assignments[i] = best_c;
        changed = true;
      }
    }

    // update step
    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      int c = result.assignments[i];
      counts[c] += 1;
      for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points[i][d];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // re-seed the emptied centroid at the point farthest from its centroid
        double worst = -1.0;
        std::size_t far_idx = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
          double d = squared_distance(points[i], result.centroids[result.assignments[i]]);
          if (d > worst) {
            worst = d;
            far_idx = i;
          }
        }
        result.centroids[c] = points[far_idx];
        changed = true;
        continue;
      }
      for (std::size_t d = 0; d < dim; ++d)
        result.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
    }

    double objective = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i)
      objective += squared_distance(points[i], result.centroids[result.assignments[i]]);
    result.trace.push_back(objective);
    result.objective = objective;
    if (!changed) break;
  }
  return result;
}

}  // namespace

ClusterPartition kmeans(std::span<const Point> points, int k, std::uint64_t seed) {
  if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
  if (points.size() < static_cast<std::size_t>(k))
    throw ArgumentError("kmeans: fewer points (" + std::to_string(points.size()) +
                        ") than clusters (" + std::to_string(k) + ")");
  for (const auto& p : points)
    if (p.size() != points[0].size())
      throw ArgumentError("kmeans: points of mixed dimension");

  const int restarts = 10;
  LloydResult best;
  bool have_best = false;
  for (int r = 0; r < restarts; ++r) {
    Rng rng = Rng(seed).fork(0x6b6d65616e73ULL + static_cast<std::uint64_t>(r));
    LloydResult candidate = lloyd(points, k, rng);
    if (!have_best || candidate.objective < best.objective) {
      best = std::move(candidate);
      have_best = true;
    }
  }

  ClusterPartition partition;
  partition.assignments = std::move(best.assignments);
  partition.centroids = std::move(best.centroids);
  partition.k = k;
  partition.objective = best.objective;
  partition.objective_trace = std::move(best.trace);
  partition.silhouette = k >= 2 ? silhouette(points, partition) : 0.0;
  return partition;
}

std::vector<double> silhouette_scores(std::span<const Point> points,
                                      const ClusterPartition& partition) {
  if (partition.k < 2) throw ArgumentError("silhouette: needs k >= 2");
  if (partition.assignments.size() != points.size())
    throw ArgumentError("silhouette: partition does not match points");
  std::vector<std::size_t> counts(partition.k, 0);
  for (int a : partition.assignments) counts[a] += 1;
  for (int c = 0; c < partition.k; ++c)
    if (counts[c] == 0) throw ArgumentError("silhouette: cluster " + std::to_string(c) + " is empty");

  std::vector<double> scores(points.size(), 0.0);
  std::vector<double> mean_dist(partition.k, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    int own = partition.assignments[i];
    if (counts[own] == 1) {
      scores[i] = 0.0;  // singleton convention
      continue;
    }
    std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j == i) continue;
      mean_dist[partition.assignments[j]] += distance(points[i], points[j]);
    }
    double a = mean_dist[own] / static_cast<double>(counts[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < partition.k; ++c) {
      if (c == own) continue;
      b = std::min(b, mean_dist[c] / static_cast<double>(counts[c]));
    }
    double denom = std::max(a, b);
    scores[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  return scores;
}

double silhouette(std::span<const Point> points, const ClusterPartition& partition) {
  std::vector<double> scores = silhouette_scores(points, partition);
  double sum = 0.0;
  for (double s : scores) sum += s;
  return sum / static_cast<double>(scores.size());
}

int select_cluster_count(std::span<const Point> points, int k_max, std::uint64_t seed) {
  if (k_max < 2) throw ArgumentError("select_cluster_count: k_max must be >= 2");
  int upper = std::min<std::size_t>(k_max, points.size());
  int best_k = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int k = 2; k <= upper; ++k) {
    ClusterPartition partition = kmeans(points, k, seed);
    if (partition.silhouette > best_score) {
      best_score = partition.silhouette;
      best_k = k;  // strict > keeps the smallest k on ties
    }
  }
  if (best_k < 0) throw ArgumentError("select_cluster_count: no feasible k in 2..k_max");
  return best_k;
}

OodReport ood_evaluate(std::span<const HeldOutModel> models,
                       std::span<const data::ShotRecord> records,
                       const ClusterPartition& partition) {
  if (static_cast<int>(models.size()) != partition.k)
    throw ArgumentError("ood_evaluate: expected one model per cluster");
  if (partition.assignments.size() != records.size())
    throw ArgumentError("ood_evaluate: partition does not match records");

  OodReport report;
  std::vector<double> kept;
  for (int c = 0; c < partition.k; ++c) {
    ClusterEvalEntry entry;
    entry.cluster = c;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (partition.assignments[i] != c) continue;
      ++count;
    }
    entry.test_count = count;
    if (count < 2) {
      entry.skipped = true;
      report.clusters.push_back(entry);
      continue;
    }
    const auto& model = models[c];
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (partition.assignments[i] != c) continue;
      double pred = model.normalizer.normalize_target(model.predict_raw(records[i]));
      double truth = model.normalizer.normalize_target(records[i].y_exp);
      double r = pred - truth;
      sum += r * r;
    }
    entry.mse = sum / static_cast<double>(count);
    kept.push_back(entry.mse);
    report.clusters.push_back(entry);
  }

  if (!kept.empty()) {
    double mean = 0.0;
    for (double v : kept) mean += v;
    mean /= static_cast<double>(kept.size());
    double var = 0.0;
    for (double v : kept) var += (v - mean) * (v - mean);
    var /= static_cast<double>(kept.size());
    report.mse_mean = mean;
    report.mse_std = std::sqrt(var);
  }
  return report;
}

PredictionErrorStats prediction_error_stats(const RawYieldPredictor& model,
                                            std::span<const data::ShotRecord> records) {
  if (records.empty()) throw ArgumentError("prediction_error_stats: empty records");
  std::vector<double> errors;
  errors.reserve(records.size());
  for (const auto& r : records) {
    if (!(r.y_exp > 0.0))
      throw ArgumentError("prediction_error_stats: non-positive yield in shot '" +
                          r.shot_id + "'");
    errors.push_back((model(r) - r.y_exp) / r.y_exp * 100.0);
  }
  double mean = 0.0;
  for (double e : errors) mean += e;
  mean /= static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  var /= static_cast<double>(errors.size());
  return {mean, std::sqrt(var)};
}

PdCurve partial_dependence(const RawYieldPredictor& model,
                           std::span<const data::ShotRecord> records, int feature) {
  if (feature < 0 || feature >= data::kPhysicalFeatureCount)
    throw ArgumentError("partial_dependence: feature index " + std::to_string(feature) +
                        " out of range");
  if (records.empty()) throw ArgumentError("partial_dependence: empty records");

  double lo = records[0].physical(feature);
  double hi = lo;
  for (const auto& r : records) {
    lo = std::min(lo, r.physical(feature));
    hi = std::max(hi, r.physical(feature));
  }
  if (!(hi > lo))
    throw DataError("partial_dependence: feature " + data::feature_names()[feature] +
                    " is constant over the records");

  PdCurve curve;
  curve.feature = feature;
  curve.grid.resize(kPdGridPoints);
  curve.response.resize(kPdGridPoints);
  for (int g = 0; g < kPdGridPoints; ++g)
    curve.grid[g] = lo + (hi - lo) * g / (kPdGridPoints - 1);

  data::ShotRecord probe;
  for (int g = 0; g < kPdGridPoints; ++g) {
    double sum = 0.0;
    for (const auto& r : records) {
      probe = r;
      probe.set_physical(feature, curve.grid[g]);
      sum += model(probe);
    }
    curve.response[g] = sum / static_cast<double>(records.size());
  }

  double anchor = curve.response[(kPdGridPoints - 1) / 2];
  if (!(anchor != 0.0) || !std::isfinite(anchor))
    throw NumericError("partial_dependence: cannot rescale, median response is " +
                       std::to_string(anchor));
  for (double& v : curve.response) v /= anchor;
  return curve;
}

double effective_exponent(const PdCurve& curve, double sub_lo, double sub_hi) {
  if (!(sub_lo < sub_hi)) throw ArgumentError("effective_exponent: empty sub-range");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t n = 0;
  for (std::size_t g = 0; g < curve.grid.size(); ++g) {
    double v = curve.grid[g];
    if (v < sub_lo || v > sub_hi) continue;
    double r = curve.response[g];
    if (!(r > 0.0))
      throw NumericError("effective_exponent: non-positive response at grid value " +
                         std::to_string(v));
    if (!(v > 0.0))
      throw NumericError("effective_exponent: non-positive grid value " + std::to_string(v));
    double x = std::log(v);
    double y = std::log(r);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw ArgumentError("effective_exponent: fewer than 2 grid points in sub-range");
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw NumericError("effective_exponent: degenerate grid");
  return (n * sxy - sx * sy) / denom;
}

double effective_exponent(const PdCurve& curve) {
  return effective_exponent(curve, curve.grid.front(), curve.grid.back());
}

std::vector<Point> physical_points(std::span<const data::ShotRecord> records,
                                   const data::Normalizer& norm) {
  std::vector<Point> points;
  points.reserve(records.size());
  for (const auto& r : records) {
    Point p(data::kPhysicalFeatureCount);
    for (int f = 0; f < data::kPhysicalFeatureCount; ++f)
      p[f] = norm.normalize_feature(f, r.physical(f));
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace fsl::evaluation
