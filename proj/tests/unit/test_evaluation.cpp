#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "fsl/data.hpp"
#include "fsl/errors.hpp"
#include "fsl/evaluation.hpp"
#include "fsl/physics.hpp"
#include "fsl/rng.hpp"

using namespace fsl;
using namespace fsl::evaluation;

TEST_CASE("kfold: leave-one-out when k equals n") {
  auto folds = kfold_split(21, 21, 1);
  REQUIRE(folds.size() == 21);
  for (const auto& fold : folds) {
    CHECK(fold.test_indices.size() == 1);
    CHECK(fold.train_indices.size() == 20);
  }
}

TEST_CASE("kfold: 300 records over 21 folds partition the indices exactly") {
  auto folds = kfold_split(300, 21, 42);
  REQUIRE(folds.size() == 21);
  std::set<std::size_t> seen;
  for (const auto& fold : folds) {
    CHECK(fold.test_indices.size() >= 14);
    CHECK(fold.test_indices.size() <= 15);
    for (std::size_t i : fold.test_indices) {
      CHECK(!seen.count(i));
      seen.insert(i);
    }
    // train is the exact complement
    std::set<std::size_t> train(fold.train_indices.begin(), fold.train_indices.end());
    CHECK(train.size() == 300 - fold.test_indices.size());
    for (std::size_t i : fold.test_indices) CHECK(!train.count(i));
  }
  CHECK(seen.size() == 300);
  CHECK(*seen.rbegin() == 299);
}

TEST_CASE("kfold determinism and argument errors") {
  auto a = kfold_split(100, 7, 9);
  auto b = kfold_split(100, 7, 9);
  for (int f = 0; f < 7; ++f) CHECK(a[f].test_indices == b[f].test_indices);
  CHECK_THROWS_AS(kfold_split(5, 6, 0), ArgumentError);
  CHECK_THROWS_AS(kfold_split(5, 1, 0), ArgumentError);
}

namespace {

std::vector<Point> gaussian_blobs(int blobs, int per_blob, double sigma, Rng& rng,
                                  std::vector<int>* labels = nullptr, int dim = 3) {
  std::vector<Point> points;
  std::vector<Point> centers;
  for (int b = 0; b < blobs; ++b) {
    Point c(dim);
    // unit-separated centers on an axis-aligned diagonal lattice
    for (int d = 0; d < dim; ++d) c[d] = (d == b % dim) ? static_cast<double>(b + 1) : 0.0;
    centers.push_back(c);
  }
  for (int b = 0; b < blobs; ++b) {
    for (int i = 0; i < per_blob; ++i) {
      Point p = centers[b];
      for (auto& v : p) v += rng.normal(0.0, sigma);
      points.push_back(p);
      if (labels) labels->push_back(b);
    }
  }
  return points;
}

}  // namespace

TEST_CASE("kmeans: k=1 centroid is the mean") {
  std::vector<Point> points = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}};
  auto partition = kmeans(points, 1, 3);
  REQUIRE(partition.centroids.size() == 1);
  CHECK(partition.centroids[0][0] == doctest::Approx(0.5));
  CHECK(partition.centroids[0][1] == doctest::Approx(0.5));
}

TEST_CASE("kmeans: two well-separated pairs form two clusters") {
  std::vector<Point> points = {{0.0, 0.0}, {0.1, 0.0}, {5.0, 5.0}, {5.1, 5.0}};
  auto partition = kmeans(points, 2, 7);
  CHECK(partition.assignments[0] == partition.assignments[1]);
  CHECK(partition.assignments[2] == partition.assignments[3]);
  CHECK(partition.assignments[0] != partition.assignments[2]);
}

TEST_CASE("kmeans: six tight blobs are recovered to >= 99%") {
  Rng rng(11);
  std::vector<int> labels;
  auto points = gaussian_blobs(6, 40, 0.02, rng, &labels);
  auto partition = kmeans(points, 6, 13);

  // map each generated label to the majority cluster, then count agreement
  std::map<int, std::map<int, int>> votes;
  for (std::size_t i = 0; i < points.size(); ++i)
    votes[labels[i]][partition.assignments[i]] += 1;
  std::map<int, int> label_to_cluster;
  for (auto& [label, counts] : votes) {
    int best = -1, best_n = -1;
    for (auto& [c, n] : counts)
      if (n > best_n) {
        best = c;
        best_n = n;
      }
    label_to_cluster[label] = best;
  }
  int agree = 0;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (partition.assignments[i] == label_to_cluster[labels[i]]) ++agree;
  CHECK(static_cast<double>(agree) / points.size() >= 0.99);
}

TEST_CASE("kmeans objective is non-increasing over Lloyd iterations") {
  Rng rng(17);
  auto points = gaussian_blobs(4, 50, 0.3, rng);
  auto partition = kmeans(points, 4, 19);
  REQUIRE(!partition.objective_trace.empty());
  for (std::size_t i = 1; i < partition.objective_trace.size(); ++i)
    CHECK(partition.objective_trace[i] <= partition.objective_trace[i - 1] + 1e-12);
  CHECK(partition.objective == partition.objective_trace.back());
}

TEST_CASE("kmeans argument errors") {
  std::vector<Point> points = {{0.0}, {1.0}};
  CHECK_THROWS_AS(kmeans(points, 0, 1), ArgumentError);
  CHECK_THROWS_AS(kmeans(points, 3, 1), ArgumentError);
}

TEST_CASE("silhouette: direct formula on a constructed configuration") {
  // p0 at 0 with a=1 (one mate at distance 1), b=3 (singleton at distance 3)
  std::vector<Point> points = {{0.0}, {1.0}, {3.0}};
  ClusterPartition partition;
  partition.k = 2;
  partition.assignments = {0, 0, 1};
  partition.centroids = {{0.5}, {3.0}};
  auto scores = silhouette_scores(points, partition);
  CHECK(scores[0] == doctest::Approx(2.0 / 3.0));
  CHECK(scores[2] == 0.0);  // singleton convention
  CHECK(silhouette(points, partition) == doctest::Approx((2.0 / 3.0 + 0.5 + 0.0) / 3.0));
}

TEST_CASE("silhouette: coincident clusters score near zero, blobs score high") {
  Rng rng(23);
  SUBCASE("two coincident clusters") {
    std::vector<Point> points;
    ClusterPartition partition;
    partition.k = 2;
    for (int i = 0; i < 40; ++i) {
      points.push_back({rng.normal(), rng.normal()});
      partition.assignments.push_back(i % 2);
    }
    partition.centroids = {{0.0, 0.0}, {0.0, 0.0}};
    CHECK(silhouette(points, partition) <= 0.05);
  }
  SUBCASE("six tight blobs at k=6") {
    auto points = gaussian_blobs(6, 30, 0.02, rng);
    auto partition = kmeans(points, 6, 29);
    CHECK(partition.silhouette > 0.8);
  }
}

TEST_CASE("silhouette scores stay within [-1, 1]") {
  Rng rng(31);
  std::vector<Point> points;
  for (int i = 0; i < 60; ++i) points.push_back({rng.uniform01(), rng.uniform01()});
  for (int k = 2; k <= 6; ++k) {
    auto partition = kmeans(points, k, 37);
    auto scores = silhouette_scores(points, partition);
    for (double s : scores) {
      CHECK(s >= -1.0);
      CHECK(s <= 1.0);
    }
  }
}

TEST_CASE("select_cluster_count finds the generating blob count") {
  Rng rng(41);
  SUBCASE("six blobs, scan limit 29") {
    auto points = gaussian_blobs(6, 35, 0.02, rng);
    CHECK(select_cluster_count(points, 29, 43) == 6);
  }
  SUBCASE("two blobs") {
    auto points = gaussian_blobs(2, 35, 0.02, rng);
    CHECK(select_cluster_count(points, 10, 43) == 2);
  }
  SUBCASE("uniform noise does not crash") {
    std::vector<Point> points;
    for (int i = 0; i < 50; ++i) points.push_back({rng.uniform01(), rng.uniform01()});
    int k = select_cluster_count(points, 8, 43);
    CHECK(k >= 2);
    CHECK(k <= 8);
  }
  CHECK_THROWS_AS(select_cluster_count(std::vector<Point>{{0.0}, {1.0}}, 1, 0), ArgumentError);
}

namespace {

evaluation::RawYieldPredictor oracle_predictor() {
  return [](const data::ShotRecord& r) {
    return physics::expert_yield(r) * data::composition_offsets()[r.composition];
  };
}

}  // namespace

TEST_CASE("ood_evaluate: the exact oracle scores numerically zero on noiseless data") {
  auto records = data::synthesize(120, 51, 0.0, 4);
  data::Normalizer norm = data::fit_normalizer(records);
  auto points = physical_points(records, norm);
  auto partition = kmeans(points, 4, 53);

  std::vector<HeldOutModel> models;
  for (int c = 0; c < 4; ++c) {
    std::vector<data::ShotRecord> train;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (partition.assignments[i] != c) train.push_back(records[i]);
    models.push_back({oracle_predictor(), data::fit_normalizer(train)});
  }
  OodReport report = ood_evaluate(models, records, partition);
  REQUIRE(report.clusters.size() == 4);
  for (const auto& entry : report.clusters) {
    CHECK(!entry.skipped);
    CHECK(entry.mse < 1e-20);
  }
  CHECK(report.mse_mean < 1e-20);
}

TEST_CASE("ood_evaluate: constant predictor obeys the variance identity") {
  auto records = data::synthesize(90, 57, 0.3, 3);
  data::Normalizer norm = data::fit_normalizer(records);
  auto points = physical_points(records, norm);
  auto partition = kmeans(points, 3, 59);

  const double constant_yield = 2.0e2;
  std::vector<HeldOutModel> models;
  for (int c = 0; c < 3; ++c)
    models.push_back({[=](const data::ShotRecord&) { return constant_yield; }, norm});
  OodReport report = ood_evaluate(models, records, partition);

  for (int c = 0; c < 3; ++c) {
    std::vector<double> z;
    for (std::size_t i = 0; i < records.size(); ++i)
      if (partition.assignments[i] == c) z.push_back(norm.normalize_target(records[i].y_exp));
    double mean = 0.0;
    for (double v : z) mean += v;
    mean /= static_cast<double>(z.size());
    double var = 0.0;
    for (double v : z) var += (v - mean) * (v - mean);
    var /= static_cast<double>(z.size());
    double bias = norm.normalize_target(constant_yield) - mean;
    CHECK(report.clusters[c].mse == doctest::Approx(var + bias * bias).epsilon(1e-10));
  }

  SUBCASE("mean and std match an independent recomputation") {
    std::vector<double> mses;
    for (const auto& e : report.clusters)
      if (!e.skipped) mses.push_back(e.mse);
    double mean = 0.0;
    for (double m : mses) mean += m;
    mean /= static_cast<double>(mses.size());
    double var = 0.0;
    for (double m : mses) var += (m - mean) * (m - mean);
    var /= static_cast<double>(mses.size());
    CHECK(report.mse_mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(report.mse_std == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
  }
}

TEST_CASE("prediction_error_stats") {
  auto records = data::synthesize(50, 61, 0.1, 2);

  SUBCASE("exact predictions give 0 +- 0") {
    auto stats = prediction_error_stats(
        [](const data::ShotRecord& r) { return r.y_exp; }, records);
    CHECK(stats.mean_pct == 0.0);
    CHECK(stats.std_pct == 0.0);
  }
  SUBCASE("a uniform 10% over-prediction gives 10 +- 0") {
    auto stats = prediction_error_stats(
        [](const data::ShotRecord& r) { return 1.1 * r.y_exp; }, records);
    CHECK(stats.mean_pct == doctest::Approx(10.0).epsilon(1e-10));
    CHECK(stats.std_pct == doctest::Approx(0.0).epsilon(1e-8));
  }
  SUBCASE("random residuals match an independent recomputation") {
    Rng rng(63);
    std::vector<double> factors;
    for (std::size_t i = 0; i < records.size(); ++i) factors.push_back(rng.uniform(0.8, 1.2));
    std::size_t next = 0;
    std::map<const data::ShotRecord*, double> assigned;
    for (const auto& r : records) assigned[&r] = factors[next++];
    // recompute by hand
    std::vector<double> errors;
    for (const auto& r : records) errors.push_back((assigned[&r] - 1.0) * 100.0);
    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= static_cast<double>(errors.size());
    double var = 0.0;
    for (double e : errors) var += (e - mean) * (e - mean);
    var /= static_cast<double>(errors.size());

    auto stats = prediction_error_stats(
        [&](const data::ShotRecord& r) { return assigned.at(&r) * r.y_exp; }, records);
    CHECK(stats.mean_pct == doctest::Approx(mean).epsilon(1e-10));
    CHECK(stats.std_pct == doctest::Approx(std::sqrt(var)).epsilon(1e-10));
  }
  SUBCASE("empty input is rejected") {
    std::vector<data::ShotRecord> empty;
    CHECK_THROWS_AS(
        prediction_error_stats([](const data::ShotRecord&) { return 1.0; }, empty),
        ArgumentError);
  }
}

TEST_CASE("partial dependence") {
  auto records = data::synthesize(80, 71, 0.1, 3);

  SUBCASE("a model ignoring the feature yields the constant curve 1") {
    auto curve = partial_dependence(
        [](const data::ShotRecord& r) { return 3.0 + r.cr; }, records, data::kEl);
    for (double v : curve.response) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("the expert oracle's e_l curve is the pure power law") {
    auto curve = partial_dependence(oracle_predictor(), records, data::kEl);
    double v_med = curve.grid[(kPdGridPoints - 1) / 2];
    for (int g = 0; g < kPdGridPoints; ++g) {
      double expected = std::pow(curve.grid[g] / v_med, 2.3);
      CHECK(std::abs(curve.response[g] - expected) < 1e-10 * std::max(1.0, expected));
    }
    CHECK(effective_exponent(curve) == doctest::Approx(2.3).epsilon(1e-8));
  }

  SUBCASE("curves are pure functions of their inputs") {
    auto a = partial_dependence(oracle_predictor(), records, data::kVHat);
    auto b = partial_dependence(oracle_predictor(), records, data::kVHat);
    CHECK(a.grid == b.grid);
    CHECK(a.response == b.response);
  }

  SUBCASE("grid is strictly increasing and spans the observed range") {
    auto curve = partial_dependence(oracle_predictor(), records, data::kRbRt);
    for (int g = 1; g < kPdGridPoints; ++g) CHECK(curve.grid[g] > curve.grid[g - 1]);
  }

  SUBCASE("invalid feature index") {
    CHECK_THROWS_AS(partial_dependence(oracle_predictor(), records, 11), ArgumentError);
  }
}

TEST_CASE("effective_exponent") {
  PdCurve curve;
  curve.feature = data::kEl;
  for (int g = 0; g < kPdGridPoints; ++g) {
    double v = 1.0 + g * 0.1;
    curve.grid.push_back(v);
    curve.response.push_back(std::pow(v, 2.3));
  }

  SUBCASE("exact power law recovers its exponent") {
    CHECK(effective_exponent(curve) == doctest::Approx(2.3).epsilon(1e-10));
  }
  SUBCASE("constant curve has exponent 0") {
    PdCurve flat = curve;
    for (auto& r : flat.response) r = 0.7;
    CHECK(effective_exponent(flat) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("invariant under multiplicative rescaling") {
    PdCurve scaled = curve;
    for (auto& r : scaled.response) r *= 17.0;
    CHECK(effective_exponent(scaled) ==
          doctest::Approx(effective_exponent(curve)).epsilon(1e-12));
  }
  SUBCASE("non-positive response is an error") {
    PdCurve bad = curve;
    bad.response[10] = 0.0;
    CHECK_THROWS_AS(effective_exponent(bad), NumericError);
  }
  SUBCASE("sub-range must contain at least two grid points") {
    CHECK_THROWS_AS(effective_exponent(curve, 1.0, 1.0), ArgumentError);
    CHECK_THROWS_AS(effective_exponent(curve, 100.0, 200.0), ArgumentError);
  }
}

TEST_CASE("expert oracle rb_rt piece exponent on (0.86, 1) is -3") {
  auto records = data::synthesize(150, 81, 0.0, 3);
  auto curve = partial_dependence(oracle_predictor(), records, data::kRbRt);
  double lo = std::max(0.86, curve.grid.front());
  double hi = std::min(1.0, curve.grid.back());
  REQUIRE(lo < hi);
  CHECK(effective_exponent(curve, lo, hi) == doctest::Approx(-3.0).epsilon(1e-6));
}
