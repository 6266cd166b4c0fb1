#include "fsl/physics.hpp"

#include <cmath>
#include <string>

#include "fsl/errors.hpp"

namespace fsl::physics {

const ExpertExponents& expert_exponents() {
  static const ExpertExponents exponents;
  return exponents;
}

double rb_rt_factor(double x) {
  const auto& e = expert_exponents();
  if (x >= 1.0) return 1.0;  // x^0
  if (x >= e.rb_rt_break) return std::pow(x, e.rb_rt_mid);
  // Scale the low piece so the curve is continuous at the breakpoint:
  // break^mid = scale * break^low  =>  scale = break^(mid - low).
  double scale = std::pow(e.rb_rt_break, e.rb_rt_mid - e.rb_rt_low);
  return scale * std::pow(x, e.rb_rt_low);
}

double alpha_ifar_factor(double x) {
  const auto& e = expert_exponents();
  return x < 1.0 ? std::pow(x, e.alpha_low) : std::pow(x, e.alpha_high);
}

double expert_exponent_at(int feature, double x) {
  const auto& e = expert_exponents();
  switch (feature) {
    case data::kEl: return e.e_l;
    case data::kROut: return e.r_out;
    case data::kMHat: return e.m_hat;
    case data::kRHat: return e.r_hat;
    case data::kRbRt:
      if (x >= 1.0) return e.rb_rt_high;
      return x >= e.rb_rt_break ? e.rb_rt_mid : e.rb_rt_low;
    case data::kAlphaIfar: return x < 1.0 ? e.alpha_low : e.alpha_high;
    case data::kCr: return 0.0;  // no expert dependence on convergence ratio
    case data::kVHat: return e.v_hat;
    case data::kYHat: return e.y_hat;
    case data::kTRatio: return e.t_ratio;
    case data::kYocHe: return e.yoc;
    default:
      throw ArgumentError("expert_exponent_at: unknown feature index " +
                          std::to_string(feature));
  }
}

double expert_yield(const data::ShotRecord& record) {
  const auto& e = expert_exponents();
  for (int f = 0; f < data::kPhysicalFeatureCount; ++f)
    if (!(record.physical(f) > 0.0))
      throw ArgumentError("expert_yield: " + data::feature_names()[f] +
                          " must be strictly positive");
  return std::pow(record.e_l, e.e_l) * std::pow(record.r_out, e.r_out) *
         std::pow(record.m_hat, e.m_hat) * std::pow(record.r_hat, e.r_hat) *
         rb_rt_factor(record.rb_rt) * alpha_ifar_factor(record.alpha_ifar) *
         std::pow(record.v_hat, e.v_hat) * std::pow(record.y_hat, e.y_hat) *
         std::pow(record.t_ratio, e.t_ratio) * std::pow(record.yoc_he, e.yoc);
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty()) throw ArgumentError("mse_loss: empty input");
  if (predictions.size() != targets.size())
    throw ArgumentError("mse_loss: length mismatch (" + std::to_string(predictions.size()) +
                        " vs " + std::to_string(targets.size()) + ")");
  double sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double r = predictions[i] - targets[i];
    sum += r * r;
  }
  return sum / static_cast<double>(predictions.size());
}

double hinge_t(double d) { return d > 0.0 ? d : 0.0; }
double hinge_yoc(double d) { return d < 0.0 ? d : 0.0; }

namespace {

double fd_derivative(const Predictor& model, const data::FeatureVector16& x, int feature,
                     double h) {
  data::FeatureVector16 plus = x;
  data::FeatureVector16 minus = x;
  plus[feature] += h;
  minus[feature] -= h;
  return (model(plus) - model(minus)) / (2.0 * h);
}

}  // namespace

double physics_penalty(const Predictor& model, std::span<const data::FeatureVector16> batch,
                       const PhysicsPenaltyConfig& config) {
  if (config.gamma1 < 0.0 || config.gamma2 < 0.0)
    throw ArgumentError("physics_penalty: penalty strengths must be >= 0");
  if (!(config.fd_step > 0.0))
    throw ArgumentError("physics_penalty: fd_step must be positive");
  if (batch.empty()) throw ArgumentError("physics_penalty: empty batch");
  if (config.gamma1 == 0.0 && config.gamma2 == 0.0) return 0.0;

  double t_sum = 0.0;
  double yoc_sum = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double d_t = fd_derivative(model, batch[i], data::kTRatio, config.fd_step);
    double d_yoc = fd_derivative(model, batch[i], data::kYocHe, config.fd_step);
    if (!std::isfinite(d_t) || !std::isfinite(d_yoc))
      throw NumericError("physics_penalty: non-finite derivative estimate at sample " +
                         std::to_string(i));
    t_sum += std::abs(hinge_t(d_t));
    yoc_sum += std::abs(hinge_yoc(d_yoc));
  }
  double n = static_cast<double>(batch.size());
  return config.gamma1 * (t_sum / n) + config.gamma2 * (yoc_sum / n);
}

double total_loss(const Predictor& model, std::span<const data::FeatureVector16> batch,
                  std::span<const double> targets, const PhysicsPenaltyConfig& config) {
  std::vector<double> predictions(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) predictions[i] = model(batch[i]);
  double mse = mse_loss(predictions, targets);
  if (config.gamma1 == 0.0 && config.gamma2 == 0.0) return mse;
  return mse + physics_penalty(model, batch, config);
}

}  // namespace fsl::physics
