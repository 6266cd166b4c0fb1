#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "fsl/data.hpp"
#include "fsl/errors.hpp"
#include "fsl/evaluation.hpp"
#include "fsl/network.hpp"
#include "fsl/physics.hpp"
#include "fsl/rng.hpp"
#include "fsl/svg.hpp"
#include "run_config.hpp"

namespace fsl::cli {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string num(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;
};

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std_dev = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

/// Generator ground truth: expert model times the composition offset.
evaluation::RawYieldPredictor expert_predictor() {
  return [](const data::ShotRecord& r) {
    return physics::expert_yield(r) * data::composition_offsets()[r.composition];
  };
}

evaluation::RawYieldPredictor checkpoint_predictor(const network::Checkpoint& ckpt) {
  auto predictor = ckpt.model.predictor();
  data::Normalizer norm = ckpt.normalizer;
  return [predictor, norm](const data::ShotRecord& r) {
    return norm.denormalize_target(predictor(data::encode_features(r, norm)));
  };
}

struct ModelRef {
  bool is_expert = false;
  std::string name;
  std::optional<network::Checkpoint> checkpoint;
};

ModelRef load_model_ref(const std::string& ref) {
  ModelRef out;
  out.name = ref;
  if (ref == "expert") {
    out.is_expert = true;
    return out;
  }
  out.checkpoint = network::load_checkpoint(ref);
  return out;
}

evaluation::RawYieldPredictor raw_predictor(const ModelRef& ref) {
  return ref.is_expert ? expert_predictor() : checkpoint_predictor(*ref.checkpoint);
}

std::vector<data::ShotRecord> subset(std::span<const data::ShotRecord> records,
                                     std::span<const std::size_t> indices) {
  std::vector<data::ShotRecord> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(records[i]);
  return out;
}

/// Retrains the checkpoint's configuration from scratch on a record subset;
/// the normalizer is refitted on that subset.
evaluation::HeldOutModel fit_held_out(const ModelRef& ref,
                                      std::span<const data::ShotRecord> train_records,
                                      std::uint64_t job_seed) {
  evaluation::HeldOutModel out;
  out.normalizer = data::fit_normalizer(train_records);
  if (ref.is_expert) {
    out.predict_raw = expert_predictor();
    return out;
  }
  network::TrainConfig cfg = ref.checkpoint->meta.config;
  cfg.seed = job_seed;
  network::Model initial = network::init_model(ref.checkpoint->model.arch, job_seed);
  data::EncodedDataset encoded = data::encode_dataset(train_records, out.normalizer);
  network::TrainResult result = network::train(initial, encoded, cfg);
  auto predictor = result.model.predictor();
  data::Normalizer norm = out.normalizer;
  out.predict_raw = [predictor, norm](const data::ShotRecord& r) {
    return norm.denormalize_target(predictor(data::encode_features(r, norm)));
  };
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  if (path.empty()) throw ArgumentError("output path is empty");
  fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path + "'");
}

struct SplitSpec {
  enum class Protocol { kKfold, kKmeans, kCluster } protocol = Protocol::kKfold;
  int k = 21;
  int cluster_index = -1;
};

SplitSpec parse_split_spec(const std::string& text) {
  SplitSpec spec;
  if (text == "kmeans") {
    spec.protocol = SplitSpec::Protocol::kKmeans;
    return spec;
  }
  if (text == "kfold" || text.rfind("kfold:", 0) == 0) {
    spec.protocol = SplitSpec::Protocol::kKfold;
    if (text != "kfold") {
      std::string arg = text.substr(6);
      auto res = std::from_chars(arg.data(), arg.data() + arg.size(), spec.k);
      if (res.ec != std::errc{} || res.ptr != arg.data() + arg.size() || spec.k < 2)
        throw ArgumentError("--splits: bad fold count in '" + text + "'");
    }
    return spec;
  }
  if (text.rfind("cluster:", 0) == 0) {
    spec.protocol = SplitSpec::Protocol::kCluster;
    std::string arg = text.substr(8);
    auto res = std::from_chars(arg.data(), arg.data() + arg.size(), spec.cluster_index);
    if (res.ec != std::errc{} || res.ptr != arg.data() + arg.size() || spec.cluster_index < 0)
      throw ArgumentError("--splits: bad cluster index in '" + text + "'");
    return spec;
  }
  throw ArgumentError("--splits: expected kfold[:<k>], kmeans or cluster:<i> (got '" + text +
                      "')");
}

std::string feature_label(int f) { return data::feature_names()[f]; }

}  // namespace

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

int cmd_generate(const GenerateOptions& options) {
  if (options.n < 0) throw ArgumentError("--n must be >= 0");
  if (options.noise < 0.0) throw ArgumentError("--noise must be >= 0");
  if (options.campaigns < 1) throw ArgumentError("--campaigns must be >= 1");
  if (options.out.empty()) throw ArgumentError("--out is required");

  auto records = data::synthesize(options.n, options.seed, options.noise, options.campaigns);
  data::save_dataset(options.out, records);

  std::cout << "wrote " << records.size() << " records to " << options.out << "\n";
  std::cout << "seed=" << options.seed << " noise=" << num(options.noise)
            << " campaigns=" << options.campaigns << "\n";
  if (!records.empty()) {
    std::vector<double> logy;
    logy.reserve(records.size());
    for (const auto& r : records) logy.push_back(std::log(r.y_exp));
    MeanStd stats = mean_std(logy);
    std::cout << "log-yield mean=" << num(stats.mean) << " std=" << num(stats.std_dev) << "\n";
    for (int f = 0; f < data::kPhysicalFeatureCount; ++f) {
      double lo = records[0].physical(f);
      double hi = lo;
      for (const auto& r : records) {
        lo = std::min(lo, r.physical(f));
        hi = std::max(hi, r.physical(f));
      }
      std::cout << "  " << feature_label(f) << " in [" << num(lo) << ", " << num(hi) << "]\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int cmd_train(const TrainOptions& options) {
  RunConfig cfg = parse_run_config(options.config_path);
  if (auto seed = env_seed_override()) cfg.train.seed = *seed;

  auto records = data::load_dataset(options.data_path);
  if (records.empty()) throw DataError("training data '" + options.data_path + "' has no rows");
  data::Normalizer norm = data::fit_normalizer(records);
  data::EncodedDataset encoded = data::encode_dataset(records, norm);

  network::Model initial = network::init_model(cfg.architecture(), cfg.train.seed);
  network::TrainResult result = network::train(initial, encoded, cfg.train);

  fs::create_directories(options.out_dir);
  network::Checkpoint ckpt;
  ckpt.model = result.model;
  ckpt.normalizer = norm;
  ckpt.meta.seed = cfg.train.seed;
  ckpt.meta.epochs_run = result.epochs_run;
  ckpt.meta.final_loss = result.final_loss;
  ckpt.meta.config = cfg.train;
  std::string ckpt_path = (fs::path(options.out_dir) / "checkpoint.json").string();
  network::save_checkpoint(ckpt, ckpt_path);

  std::string loss_csv = "epoch,loss\n";
  for (std::size_t e = 0; e < result.loss_trace.size(); ++e)
    loss_csv += std::to_string(e + 1) + "," + num(result.loss_trace[e]) + "\n";
  write_text((fs::path(options.out_dir) / "loss.csv").string(), loss_csv);

  std::cout << "model=" << to_string(cfg.model) << " epochs_run=" << result.epochs_run
            << " final_loss=" << num(result.final_loss) << "\n";
  std::cout << "checkpoint=" << ckpt_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const EvalOptions& options) {
  SplitSpec spec = parse_split_spec(options.splits);
  ModelRef model = load_model_ref(options.model);

  std::uint64_t seed = 0;
  if (!model.is_expert) seed = model.checkpoint->meta.config.seed;
  if (options.seed) seed = *options.seed;
  if (auto env = env_seed_override()) seed = *env;

  auto records = data::load_dataset(options.data_path);
  if (records.size() < 2) throw DataError("evaluation data needs at least 2 rows");

  ordered_json report;
  report["model"] = model.name;
  report["data"] = options.data_path;
  report["seed"] = seed;

  std::vector<double> pooled_errors_pct;
  std::vector<double> kept_mse;

  if (spec.protocol == SplitSpec::Protocol::kKfold) {
    report["protocol"] = "kfold";
    report["k"] = spec.k;
    auto folds = evaluation::kfold_split(records.size(), spec.k, seed);
    if (options.split_index) {
      if (*options.split_index < 0 || *options.split_index >= spec.k)
        throw ArgumentError("--split-index must lie in [0, " + std::to_string(spec.k) + ")");
      report["split_index"] = *options.split_index;
    } else {
      report["split_index"] = nullptr;
    }
    ordered_json entries = ordered_json::array();
    for (int f = 0; f < spec.k; ++f) {
      if (options.split_index && *options.split_index != f) continue;
      auto train_records = subset(records, folds[f].train_indices);
      auto test_records = subset(records, folds[f].test_indices);
      auto held_out =
          fit_held_out(model, train_records, Rng(seed).fork(static_cast<std::uint64_t>(f)).seed());
      std::vector<double> sq;
      std::vector<double> errors;
      for (const auto& r : test_records) {
        double raw = held_out.predict_raw(r);
        double d = held_out.normalizer.normalize_target(raw) -
                   held_out.normalizer.normalize_target(r.y_exp);
        sq.push_back(d * d);
        errors.push_back((raw - r.y_exp) / r.y_exp * 100.0);
        pooled_errors_pct.push_back(errors.back());
      }
      MeanStd err = mean_std(errors);
      double mse = 0.0;
      for (double s : sq) mse += s;
      mse /= static_cast<double>(sq.size());
      kept_mse.push_back(mse);
      ordered_json entry;
      entry["split"] = f;
      entry["test_count"] = test_records.size();
      entry["mse"] = mse;
      entry["pred_error_mean_pct"] = err.mean;
      entry["pred_error_std_pct"] = err.std_dev;
      entries.push_back(entry);
    }
    report["entries"] = entries;
  } else {
    data::Normalizer norm_all = data::fit_normalizer(records);
    auto points = evaluation::physical_points(records, norm_all);
    int k_star = evaluation::select_cluster_count(points, options.k_max, seed);
    auto partition = evaluation::kmeans(points, k_star, seed);
    report["protocol"] = spec.protocol == SplitSpec::Protocol::kKmeans ? "kmeans" : "cluster";
    report["k"] = k_star;
    report["cluster_count"] = k_star;
    report["silhouette"] = partition.silhouette;

    int only = -1;
    if (spec.protocol == SplitSpec::Protocol::kCluster) {
      only = spec.cluster_index;
      if (only >= k_star)
        throw ArgumentError("--splits cluster:" + std::to_string(only) +
                            ": index beyond selected cluster count " + std::to_string(k_star));
      report["cluster_index"] = only;
    }

    ordered_json entries = ordered_json::array();
    for (int c = 0; c < k_star; ++c) {
      if (only >= 0 && c != only) continue;
      std::vector<std::size_t> train_idx;
      std::vector<std::size_t> test_idx;
      for (std::size_t i = 0; i < records.size(); ++i)
        (partition.assignments[i] == c ? test_idx : train_idx).push_back(i);
      ordered_json entry;
      entry["cluster"] = c;
      entry["test_count"] = test_idx.size();
      if (test_idx.size() < 2 || train_idx.empty()) {
        entry["skipped"] = true;
        std::cerr << "warning: cluster " << c << " has " << test_idx.size()
                  << " records, skipped\n";
        entries.push_back(entry);
        continue;
      }
      entry["skipped"] = false;
      auto train_records = subset(records, train_idx);
      auto held_out =
          fit_held_out(model, train_records, Rng(seed).fork(static_cast<std::uint64_t>(c)).seed());
      std::vector<double> errors;
      double mse = 0.0;
      for (std::size_t i : test_idx) {
        double raw = held_out.predict_raw(records[i]);
        double d = held_out.normalizer.normalize_target(raw) -
                   held_out.normalizer.normalize_target(records[i].y_exp);
        mse += d * d;
        errors.push_back((raw - records[i].y_exp) / records[i].y_exp * 100.0);
        pooled_errors_pct.push_back(errors.back());
      }
      mse /= static_cast<double>(test_idx.size());
      kept_mse.push_back(mse);
      MeanStd err = mean_std(errors);
      entry["mse"] = mse;
      entry["pred_error_mean_pct"] = err.mean;
      entry["pred_error_std_pct"] = err.std_dev;
      entries.push_back(entry);
    }
    report["entries"] = entries;
  }

  MeanStd mse_stats = mean_std(kept_mse);
  MeanStd pooled = mean_std(pooled_errors_pct);
  report["mse_mean"] = mse_stats.mean;
  report["mse_std"] = mse_stats.std_dev;
  report["prediction_error"] = {{"mean_pct", pooled.mean}, {"std_pct", pooled.std_dev}};

  std::string serialized = report.dump(2) + "\n";
  if (!options.report_path.empty()) write_text(options.report_path, serialized);
  std::cout << "entries=" << report["entries"].size() << " mse_mean=" << num(mse_stats.mean)
            << " mse_std=" << num(mse_stats.std_dev) << " pred_error=" << num(pooled.mean)
            << "%+-" << num(pooled.std_dev) << "%\n";
  return 0;
}

// ---------------------------------------------------------------------------
// pd
// ---------------------------------------------------------------------------

namespace {

void write_pd_outputs(const evaluation::PdCurve& model_curve,
                      const evaluation::PdCurve& expert_curve, const std::string& model_name,
                      const std::string& csv_path, const std::string& svg_path) {
  std::string csv = "value,response\n";
  for (std::size_t i = 0; i < model_curve.grid.size(); ++i)
    csv += num(model_curve.grid[i]) + "," + num(model_curve.response[i]) + "\n";
  write_text(csv_path, csv);

  std::vector<svg::Series> series(2);
  series[0].label = model_name;
  series[0].color = "#1f77b4";
  series[0].x = model_curve.grid;
  series[0].y = model_curve.response;
  series[1].label = "expert";
  series[1].color = "#ff7f0e";
  series[1].x = expert_curve.grid;
  series[1].y = expert_curve.response;
  std::string feature = feature_label(model_curve.feature);
  write_text(svg_path, svg::line_chart("partial dependence: " + feature, feature,
                                       "yield (A.U.)", series));
}

}  // namespace

int cmd_pd(const PdOptions& options) {
  ModelRef model = load_model_ref(options.model);
  auto records = data::load_dataset(options.data_path);
  if (records.empty()) throw DataError("pd: dataset has no rows");
  auto predictor = raw_predictor(model);
  auto oracle = expert_predictor();

  std::vector<int> features;
  if (options.feature == "all") {
    for (int f = 0; f < data::kPhysicalFeatureCount; ++f) features.push_back(f);
  } else {
    features.push_back(data::feature_index(options.feature));
  }

  for (int f : features) {
    auto model_curve = evaluation::partial_dependence(predictor, records, f);
    auto expert_curve = evaluation::partial_dependence(oracle, records, f);
    std::string stem = "pd_" + feature_label(f);
    std::string csv_path = (fs::path(options.out_dir) / (stem + ".csv")).string();
    std::string svg_path = (fs::path(options.out_dir) / (stem + ".svg")).string();
    if (features.size() == 1 && !options.out_csv.empty()) csv_path = options.out_csv;
    if (features.size() == 1 && !options.out_svg.empty()) svg_path = options.out_svg;
    write_pd_outputs(model_curve, expert_curve, model.name, csv_path, svg_path);
    std::cout << "wrote " << csv_path << " and " << svg_path << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

int cmd_compare(const CompareOptions& options) {
  if (options.models.empty()) throw ArgumentError("--models: need at least one checkpoint");
  auto records = data::load_dataset(options.data_path);
  if (records.empty()) throw DataError("compare: dataset has no rows");

  struct Row {
    std::string model;
    int feature;
    std::string piece;  // "full" or breakpoint-bounded sub-range
    double lo, hi;
    double effective;
    std::optional<double> expert;
  };
  std::vector<Row> rows;
  std::vector<std::pair<std::string, double>> ranking;  // model -> mean |deviation|

  for (const auto& ref_name : options.models) {
    ModelRef model = load_model_ref(ref_name);
    auto predictor = raw_predictor(model);
    double dev_sum = 0.0;
    int dev_count = 0;
    for (int f = 0; f < data::kPhysicalFeatureCount; ++f) {
      auto curve = evaluation::partial_dependence(predictor, records, f);
      double lo = curve.grid.front();
      double hi = curve.grid.back();

      std::vector<std::pair<double, double>> pieces;
      if (f == data::kRbRt) {
        const double brk = physics::expert_exponents().rb_rt_break;
        pieces = {{lo, brk}, {brk, 1.0}, {1.0, hi}};
      } else if (f == data::kAlphaIfar) {
        pieces = {{lo, 1.0}, {1.0, hi}};
      }

      Row full;
      full.model = model.name;
      full.feature = f;
      full.piece = "full";
      full.lo = lo;
      full.hi = hi;
      full.effective = evaluation::effective_exponent(curve);
      if (pieces.empty()) full.expert = physics::expert_exponent_at(f, lo);
      rows.push_back(full);
      if (full.expert) {
        dev_sum += std::abs(full.effective - *full.expert);
        ++dev_count;
      }

      for (auto [plo, phi] : pieces) {
        double clo = std::max(plo, lo);
        double chi = std::min(phi, hi);
        if (!(clo < chi)) continue;
        int in_range = 0;
        for (double v : curve.grid)
          if (v >= clo && v <= chi) ++in_range;
        if (in_range < 2) continue;
        Row piece;
        piece.model = model.name;
        piece.feature = f;
        piece.piece = "(" + num(clo) + ", " + num(chi) + ")";
        piece.lo = clo;
        piece.hi = chi;
        piece.effective = evaluation::effective_exponent(curve, clo, chi);
        piece.expert = physics::expert_exponent_at(f, 0.5 * (clo + chi));
        rows.push_back(piece);
        dev_sum += std::abs(piece.effective - *piece.expert);
        ++dev_count;
      }
    }
    ranking.emplace_back(model.name, dev_count > 0 ? dev_sum / dev_count : 0.0);
  }

  std::stable_sort(ranking.begin(), ranking.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });

  ordered_json report;
  report["data"] = options.data_path;
  ordered_json jrows = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json jr;
    jr["model"] = r.model;
    jr["feature"] = feature_label(r.feature);
    jr["piece"] = r.piece;
    jr["range"] = {r.lo, r.hi};
    jr["effective_exponent"] = r.effective;
    if (r.expert) {
      jr["expert_exponent"] = *r.expert;
      jr["abs_deviation"] = std::abs(r.effective - *r.expert);
    } else {
      jr["expert_exponent"] = nullptr;
      jr["abs_deviation"] = nullptr;
    }
    jrows.push_back(jr);
  }
  report["rows"] = jrows;
  ordered_json jrank = ordered_json::array();
  for (const auto& [name, dev] : ranking)
    jrank.push_back({{"model", name}, {"mean_abs_deviation", dev}});
  report["ranking"] = jrank;

  std::string serialized = report.dump(2) + "\n";
  if (!options.report_path.empty()) write_text(options.report_path, serialized);

  std::printf("%-24s %-12s %-22s %12s %10s %10s\n", "model", "feature", "piece", "effective",
              "expert", "|dev|");
  for (const auto& r : rows) {
    if (r.expert)
      std::printf("%-24s %-12s %-22s %12.4f %10.4f %10.4f\n", r.model.c_str(),
                  feature_label(r.feature).c_str(), r.piece.c_str(), r.effective, *r.expert,
                  std::abs(r.effective - *r.expert));
    else
      std::printf("%-24s %-12s %-22s %12.4f %10s %10s\n", r.model.c_str(),
                  feature_label(r.feature).c_str(), r.piece.c_str(), r.effective, "-", "-");
  }
  std::printf("ranking by mean |exponent deviation|:\n");
  for (const auto& [name, dev] : ranking) std::printf("  %-24s %10.4f\n", name.c_str(), dev);
  return 0;
}

}  // namespace fsl::cli
