#include "fsl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "fsl/errors.hpp"
#include "fsl/physics.hpp"
#include "fsl/rng.hpp"

namespace fsl::data {

namespace {

const std::array<std::string, kPhysicalFeatureCount> kFeatureNames = {
    "e_l", "r_out", "m_hat", "r_hat", "rb_rt", "alpha_ifar",
    "cr",  "v_hat", "y_hat", "t_ratio", "yoc_he"};

constexpr std::array<double, kCompositionCount> kCompositionOffsets = {1.0, 0.95, 1.05,
                                                                       0.9, 1.1};

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, int row, const std::string& column) {
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw DataError("row " + std::to_string(row) + ", column " + column +
                    ": cannot parse '" + text + "' as a number");
  return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

}  // namespace

std::span<const std::string> feature_names() { return kFeatureNames; }

int feature_index(const std::string& name) {
  for (int i = 0; i < kPhysicalFeatureCount; ++i)
    if (kFeatureNames[i] == name) return i;
  std::string known;
  for (const auto& n : kFeatureNames) known += (known.empty() ? "" : ", ") + n;
  throw ArgumentError("unknown feature '" + name + "' (known: " + known + ")");
}

double ShotRecord::physical(int feature) const {
  switch (feature) {
    case kEl: return e_l;
    case kROut: return r_out;
    case kMHat: return m_hat;
    case kRHat: return r_hat;
    case kRbRt: return rb_rt;
    case kAlphaIfar: return alpha_ifar;
    case kCr: return cr;
    case kVHat: return v_hat;
    case kYHat: return y_hat;
    case kTRatio: return t_ratio;
    case kYocHe: return yoc_he;
    default: throw ArgumentError("physical feature index out of range");
  }
}

void ShotRecord::set_physical(int feature, double value) {
  switch (feature) {
    case kEl: e_l = value; return;
    case kROut: r_out = value; return;
    case kMHat: m_hat = value; return;
    case kRHat: r_hat = value; return;
    case kRbRt: rb_rt = value; return;
    case kAlphaIfar: alpha_ifar = value; return;
    case kCr: cr = value; return;
    case kVHat: v_hat = value; return;
    case kYHat: y_hat = value; return;
    case kTRatio: t_ratio = value; return;
    case kYocHe: yoc_he = value; return;
    default: throw ArgumentError("physical feature index out of range");
  }
}

void validate(const ShotRecord& r) {
  auto fail = [&](const std::string& field, const std::string& why) {
    throw DataError("shot '" + r.shot_id + "': " + field + " " + why);
  };
  for (int f = 0; f < kPhysicalFeatureCount; ++f)
    if (!std::isfinite(r.physical(f))) fail(kFeatureNames[f], "is not finite");
  if (!(r.e_l > 0.0)) fail("e_l", "must be > 0");
  if (!(r.r_out > 0.0)) fail("r_out", "must be > 0");
  if (!(r.m_hat > 0.0 && r.m_hat <= 1.0)) fail("m_hat", "must lie in (0, 1]");
  if (!(r.r_hat > 0.0 && r.r_hat < 1.0)) fail("r_hat", "must lie in (0, 1)");
  if (!(r.rb_rt > 0.0)) fail("rb_rt", "must be > 0");
  if (!(r.alpha_ifar > 0.0)) fail("alpha_ifar", "must be > 0");
  if (!(r.cr > 1.0)) fail("cr", "must be > 1");
  if (!(r.v_hat > 0.0)) fail("v_hat", "must be > 0");
  if (!(r.y_hat > 0.0)) fail("y_hat", "must be > 0");
  if (!(r.t_ratio >= 1.0)) fail("t_ratio", "must be >= 1");
  if (!(r.yoc_he > 0.0 && r.yoc_he <= 1.0)) fail("yoc_he", "must lie in (0, 1]");
  if (r.composition < 0 || r.composition >= kCompositionCount)
    fail("composition", "must be one of C0..C4");
  if (!(std::isfinite(r.y_exp) && r.y_exp > 0.0)) fail("y_exp", "must be > 0");
}

std::string csv_header() {
  return "shot_id,e_l_kj,r_out_um,m_hat,r_hat,rb_rt,alpha_ifar,cr,v_hat,y_hat,"
         "t_ratio,yoc_he,composition,y_exp";
}

std::vector<ShotRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != csv_header())
    throw DataError("dataset '" + path + "': header mismatch, expected '" + csv_header() +
                    "'");

  const auto columns = split_csv_line(csv_header());
  std::vector<ShotRecord> records;
  int row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != columns.size())
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(columns.size()) + " columns, got " +
                      std::to_string(fields.size()));
    ShotRecord r;
    r.shot_id = fields[0];
    for (int f = 0; f < kPhysicalFeatureCount; ++f)
      r.set_physical(f, parse_double(fields[1 + f], row, columns[1 + f]));
    const std::string& comp = fields[12];
    if (comp.size() != 2 || comp[0] != 'C' || comp[1] < '0' ||
        comp[1] >= '0' + kCompositionCount)
      throw DataError("row " + std::to_string(row) +
                      ", column composition: '" + comp + "' is not one of C0..C4");
    r.composition = comp[1] - '0';
    r.y_exp = parse_double(fields[13], row, "y_exp");
    try {
      validate(r);
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(row) + ": " + e.what());
    }
    records.push_back(std::move(r));
  }
  return records;
}

void save_dataset(const std::string& path, std::span<const ShotRecord> records) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file '" + path + "'");
  out << csv_header() << "\n";
  for (const auto& r : records) {
    out << r.shot_id;
    for (int f = 0; f < kPhysicalFeatureCount; ++f) out << ',' << format_double(r.physical(f));
    out << ",C" << r.composition << ',' << format_double(r.y_exp) << "\n";
  }
  if (!out) throw IoError("failed writing dataset file '" + path + "'");
}

double Normalizer::normalize_feature(int feature, double value) const {
  return (value - feature_min[feature]) / (feature_max[feature] - feature_min[feature]);
}

double Normalizer::denormalize_feature(int feature, double value) const {
  return feature_min[feature] + value * (feature_max[feature] - feature_min[feature]);
}

double Normalizer::normalize_target(double yield) const {
  return (std::log(yield) - target_log_mean) / target_log_std;
}

double Normalizer::denormalize_target(double normalized) const {
  return std::exp(normalized * target_log_std + target_log_mean);
}

Normalizer fit_normalizer(std::span<const ShotRecord> train_records) {
  if (train_records.empty()) throw ArgumentError("fit_normalizer: empty training split");
  Normalizer norm;
  for (int f = 0; f < kPhysicalFeatureCount; ++f) {
    double lo = train_records[0].physical(f);
    double hi = lo;
    for (const auto& r : train_records) {
      lo = std::min(lo, r.physical(f));
      hi = std::max(hi, r.physical(f));
    }
    if (!(hi > lo))
      throw DataError("fit_normalizer: feature " + kFeatureNames[f] +
                      " is constant on the training split");
    norm.feature_min[f] = lo;
    norm.feature_max[f] = hi;
  }
  double sum = 0.0;
  for (const auto& r : train_records) sum += std::log(r.y_exp);
  double mean = sum / static_cast<double>(train_records.size());
  double var = 0.0;
  for (const auto& r : train_records) {
    double d = std::log(r.y_exp) - mean;
    var += d * d;
  }
  var /= static_cast<double>(train_records.size());
  double std_dev = std::sqrt(var);
  if (!(std_dev > 0.0))
    throw DataError("fit_normalizer: target is constant on the training split");
  norm.target_log_mean = mean;
  norm.target_log_std = std_dev;
  return norm;
}

FeatureVector16 encode_features(const ShotRecord& record, const Normalizer& norm) {
  if (record.composition < 0 || record.composition >= kCompositionCount)
    throw DataError("encode: composition must be one of C0..C4");
  FeatureVector16 x{};
  for (int f = 0; f < kPhysicalFeatureCount; ++f)
    x[f] = norm.normalize_feature(f, record.physical(f));
  x[kPhysicalFeatureCount + record.composition] = 1.0;
  return x;
}

EncodedDataset encode_dataset(std::span<const ShotRecord> records, const Normalizer& norm) {
  EncodedDataset out;
  out.features.reserve(records.size());
  out.targets.reserve(records.size());
  for (const auto& r : records) {
    out.features.push_back(encode_features(r, norm));
    out.targets.push_back(norm.normalize_target(r.y_exp));
  }
  return out;
}

std::span<const double> composition_offsets() { return kCompositionOffsets; }

std::vector<ShotRecord> synthesize(int n, std::uint64_t seed, double noise_sigma,
                                   int campaign_count, const SyntheticRanges& ranges) {
  if (n < 0) throw ArgumentError("synthesize: n must be >= 0");
  if (noise_sigma < 0.0) throw ArgumentError("synthesize: noise_sigma must be >= 0");
  if (campaign_count < 1) throw ArgumentError("synthesize: campaign_count must be >= 1");
  for (int f = 0; f < kPhysicalFeatureCount; ++f)
    if (!(ranges.lo[f] < ranges.hi[f]))
      throw ArgumentError("synthesize: invalid range for feature " + kFeatureNames[f]);

  Rng rng(seed);

  // Campaign centers first, so they depend only on (seed, campaign_count).
  // Centers are kept apart (in units of the per-feature range width) so the
  // campaign structure is recoverable by clustering.
  std::vector<std::array<double, kPhysicalFeatureCount>> centers;
  const double min_separation = 0.9;
  while (static_cast<int>(centers.size()) < campaign_count) {
    std::array<double, kPhysicalFeatureCount> c;
    for (int f = 0; f < kPhysicalFeatureCount; ++f)
      c[f] = rng.uniform(ranges.lo[f], ranges.hi[f]);
    bool ok = true;
    for (const auto& other : centers) {
      double dist2 = 0.0;
      for (int f = 0; f < kPhysicalFeatureCount; ++f) {
        double d = (c[f] - other[f]) / (ranges.hi[f] - ranges.lo[f]);
        dist2 += d * d;
      }
      if (dist2 < min_separation * min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(c);
  }

  const double spread = 0.04;  // per-feature std, in units of the range width
  std::vector<ShotRecord> records;
  records.reserve(n);
  for (int i = 0; i < n; ++i) {
    int campaign = i % campaign_count;
    ShotRecord r;
    std::ostringstream id;
    id << "S" << std::setw(5) << std::setfill('0') << i << "_K" << campaign;
    r.shot_id = id.str();
    r.campaign = campaign;
    for (int f = 0; f < kPhysicalFeatureCount; ++f) {
      double width = ranges.hi[f] - ranges.lo[f];
      double v = centers[campaign][f] + rng.normal(0.0, spread * width);
      r.set_physical(f, std::clamp(v, ranges.lo[f], ranges.hi[f]));
    }
    r.composition = static_cast<int>(rng.below(kCompositionCount));
    double noise = noise_sigma > 0.0 ? std::exp(rng.normal(0.0, noise_sigma)) : 1.0;
    r.y_exp = physics::expert_yield(r) * kCompositionOffsets[r.composition] * noise;
    validate(r);
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace fsl::data
