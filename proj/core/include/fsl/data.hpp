#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fsl::data {

inline constexpr int kPhysicalFeatureCount = 11;
inline constexpr int kCompositionCount = 5;
inline constexpr int kFeatureCount = kPhysicalFeatureCount + kCompositionCount;

/// Normalized model input: 11 min-max scaled physical features followed by
/// the 5-slot composition one-hot, in this fixed order:
/// [e_l, r_out, m_hat, r_hat, rb_rt, alpha_ifar, cr, v_hat, y_hat, t_ratio,
///  yoc_he, onehot0..onehot4]
using FeatureVector16 = std::array<double, kFeatureCount>;

enum Feature : int {
  kEl = 0,
  kROut = 1,
  kMHat = 2,
  kRHat = 3,
  kRbRt = 4,
  kAlphaIfar = 5,
  kCr = 6,
  kVHat = 7,
  kYHat = 8,
  kTRatio = 9,
  kYocHe = 10,
};

/// Physical feature names in vector order (CSV column names minus units).
std::span<const std::string> feature_names();
int feature_index(const std::string& name);  // throws ArgumentError if unknown

/// One implosion experiment (or synthetic sample).
struct ShotRecord {
  std::string shot_id;
  double e_l = 0.0;        // laser energy, kJ, > 0
  double r_out = 0.0;      // outer radius, um, > 0
  double m_hat = 0.0;      // fuel-ice mass fraction, (0, 1]
  double r_hat = 0.0;      // inner/outer radius ratio, (0, 1)
  double rb_rt = 0.0;      // illumination nonuniformity ratio, > 0
  double alpha_ifar = 0.0; // stability parameter, > 0
  double cr = 0.0;         // convergence ratio, > 1
  double v_hat = 0.0;      // pulse-shape velocity parameter, > 0
  double y_hat = 0.0;      // pulse-shape yield parameter, > 0
  double t_ratio = 0.0;    // ion-temperature asymmetry ratio, >= 1
  double yoc_he = 0.0;     // 3He degradation factor, (0, 1]
  int composition = 0;     // category index, 0..4
  double y_exp = 0.0;      // fusion yield, > 0
  std::optional<int> campaign;  // generator metadata, not serialized

  double physical(int feature) const;
  void set_physical(int feature, double value);
};

/// Throws DataError naming the offending field if any invariant fails.
void validate(const ShotRecord& record);

/// Exact CSV header for dataset files.
std::string csv_header();

std::vector<ShotRecord> load_dataset(const std::string& path);
void save_dataset(const std::string& path, std::span<const ShotRecord> records);

/// Min-max input scaling plus log-standardized target, fitted on a training
/// split.
struct Normalizer {
  std::array<double, kPhysicalFeatureCount> feature_min{};
  std::array<double, kPhysicalFeatureCount> feature_max{};
  double target_log_mean = 0.0;
  double target_log_std = 1.0;

  double normalize_feature(int feature, double value) const;
  double denormalize_feature(int feature, double value) const;
  double normalize_target(double yield) const;
  double denormalize_target(double normalized) const;
};

Normalizer fit_normalizer(std::span<const ShotRecord> train_records);

/// Normalized features + one-hot for one record.
FeatureVector16 encode_features(const ShotRecord& record, const Normalizer& norm);

struct EncodedDataset {
  std::vector<FeatureVector16> features;
  std::vector<double> targets;  // normalized log yields
};

EncodedDataset encode_dataset(std::span<const ShotRecord> records, const Normalizer& norm);

/// Per-composition multiplicative yield offsets used by the synthetic
/// generator's ground truth.
std::span<const double> composition_offsets();

/// Default synthetic input ranges (configurable, not paper values).
struct SyntheticRanges {
  std::array<double, kPhysicalFeatureCount> lo{20.0, 400.0, 0.4, 0.85, 0.7, 0.3,
                                               12.0, 0.8, 0.5, 1.0, 0.5};
  std::array<double, kPhysicalFeatureCount> hi{30.0, 500.0, 0.9, 0.97, 1.2, 3.0,
                                               25.0, 1.2, 1.5, 1.5, 1.0};
};

/// Draws `campaign_count` cluster centers in input space, then records around
/// them; the target is the expert-model yield times the composition offset,
/// with multiplicative lognormal noise exp(N(0, noise_sigma^2)).
std::vector<ShotRecord> synthesize(int n, std::uint64_t seed, double noise_sigma,
                                   int campaign_count,
                                   const SyntheticRanges& ranges = SyntheticRanges{});

}  // namespace fsl::data
