#pragma once

#include <functional>
#include <span>

#include "fsl/data.hpp"

namespace fsl::physics {

/// Exponents of the domain-expert piecewise power-law yield model. The
/// rb_rt piece below 0.86 carries a continuity scale so the assembled curve
/// is continuous at every breakpoint and equals 1 at the all-ones record.
struct ExpertExponents {
  double e_l = 2.3;
  double r_out = -2.6;
  double m_hat = 2.9;
  double r_hat = 26.5;
  double rb_rt_low = 1.6;    // x < 0.86
  double rb_rt_mid = -3.0;   // 0.86 <= x < 1
  double rb_rt_high = 0.0;   // x >= 1
  double rb_rt_break = 0.86;
  double alpha_low = 0.45;   // x < 1
  double alpha_high = -0.1;  // x >= 1
  double v_hat = 2.02;
  double y_hat = 0.78;
  double t_ratio = -1.32;
  double yoc = 1.26;
};

const ExpertExponents& expert_exponents();

/// Continuity-scaled piecewise factor for the illumination ratio.
double rb_rt_factor(double x);
/// Piecewise factor for the stability parameter (continuous at 1 as-is).
double alpha_ifar_factor(double x);

/// Expert exponent applicable to `feature` on the value `x` (piece selected
/// for piecewise features; cr has no expert dependence, exponent 0).
double expert_exponent_at(int feature, double x);

/// Domain-expert yield model: product of power-law factors over the record's
/// physical inputs. All inputs must be strictly positive; equals 1 at the
/// all-ones reference record.
double expert_yield(const data::ShotRecord& record);

double mse_loss(std::span<const double> predictions, std::span<const double> targets);

/// Violation-selecting clamps. hinge_t passes positive T-ratio derivatives
/// (which violate the required negativity); hinge_yoc passes negative YOC
/// derivatives (which violate the required positivity).
double hinge_t(double d);
double hinge_yoc(double d);

struct PhysicsPenaltyConfig {
  double gamma1 = 0.1;   // strength of the T-ratio term
  double gamma2 = 0.1;   // strength of the YOC term
  double fd_step = 1e-3; // symmetric finite-difference step, normalized units
};

/// Evaluation-mode predictor over normalized feature vectors.
using Predictor = std::function<double(const data::FeatureVector16&)>;

/// gamma1 * mean_i |hinge_t(df/dT(x_i))| + gamma2 * mean_i |hinge_yoc(df/dYOC(x_i))|
/// with the derivatives estimated by symmetric finite differences.
double physics_penalty(const Predictor& model, std::span<const data::FeatureVector16> batch,
                       const PhysicsPenaltyConfig& config);

/// MSE plus the physics penalty over one batch.
double total_loss(const Predictor& model, std::span<const data::FeatureVector16> batch,
                  std::span<const double> targets, const PhysicsPenaltyConfig& config);

}  // namespace fsl::physics
