#include <doctest.h>

#include <cmath>
#include <vector>

#include "fsl/data.hpp"
#include "fsl/errors.hpp"
#include "fsl/physics.hpp"
#include "fsl/rng.hpp"

using namespace fsl;
using namespace fsl::physics;

namespace {

data::ShotRecord all_ones_record() {
  data::ShotRecord r;
  r.shot_id = "ref";
  r.e_l = 1.0;
  r.r_out = 1.0;
  r.m_hat = 1.0;
  r.r_hat = 1.0 - 1e-15;  // (0,1) bound; equals 1 within tolerance
  r.rb_rt = 1.0;
  r.alpha_ifar = 1.0;
  r.cr = 2.0;  // no expert dependence
  r.v_hat = 1.0;
  r.y_hat = 1.0;
  r.t_ratio = 1.0;
  r.yoc_he = 1.0;
  r.composition = 0;
  r.y_exp = 1.0;
  return r;
}

data::ShotRecord random_record(Rng& rng) {
  data::ShotRecord r;
  r.shot_id = "rand";
  r.e_l = rng.uniform(20.0, 30.0);
  r.r_out = rng.uniform(400.0, 500.0);
  r.m_hat = rng.uniform(0.4, 0.9);
  r.r_hat = rng.uniform(0.85, 0.97);
  r.rb_rt = rng.uniform(0.7, 1.2);
  r.alpha_ifar = rng.uniform(0.3, 3.0);
  r.cr = rng.uniform(12.0, 25.0);
  r.v_hat = rng.uniform(0.8, 1.2);
  r.y_hat = rng.uniform(0.5, 1.5);
  r.t_ratio = rng.uniform(1.0 + 1e-3, 1.5);
  r.yoc_he = rng.uniform(0.5, 1.0 - 1e-3);
  r.composition = static_cast<int>(rng.below(5));
  r.y_exp = 1.0;
  return r;
}

}  // namespace

TEST_CASE("expert_yield is 1 at the all-ones reference") {
  CHECK(expert_yield(all_ones_record()) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("single-factor power evaluations") {
  data::ShotRecord r = all_ones_record();
  SUBCASE("E_L = 2 gives 2^2.3") {
    r.e_l = 2.0;
    CHECK(expert_yield(r) == doctest::Approx(std::pow(2.0, 2.3)).epsilon(1e-9));
    CHECK(expert_yield(r) == doctest::Approx(4.9246).epsilon(1e-4));
  }
  SUBCASE("rb_rt = 0.9 selects the middle piece, 0.9^-3") {
    r.rb_rt = 0.9;
    CHECK(expert_yield(r) == doctest::Approx(std::pow(0.9, -3.0)).epsilon(1e-9));
    CHECK(expert_yield(r) == doctest::Approx(1.3717).epsilon(1e-4));
  }
  SUBCASE("rb_rt above 1 contributes nothing") {
    r.rb_rt = 1.1;
    CHECK(expert_yield(r) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("piecewise factors are continuous at every breakpoint") {
  const double eps = 1e-9;
  SUBCASE("rb_rt at 0.86, continuity scale 0.86^-4.6") {
    double left = rb_rt_factor(0.86 - eps);
    double right = rb_rt_factor(0.86 + eps);
    CHECK(std::abs(left - right) < 1e-7);
    CHECK(rb_rt_factor(0.86) == doctest::Approx(std::pow(0.86, -3.0)).epsilon(1e-12));
    CHECK(std::pow(0.86, -4.6) == doctest::Approx(2.0013).epsilon(1e-4));
  }
  SUBCASE("rb_rt at 1") {
    CHECK(std::abs(rb_rt_factor(1.0 - eps) - rb_rt_factor(1.0 + eps)) < 1e-7);
    CHECK(rb_rt_factor(1.0) == 1.0);
  }
  SUBCASE("alpha_ifar at 1") {
    CHECK(std::abs(alpha_ifar_factor(1.0 - eps) - alpha_ifar_factor(1.0 + eps)) < 1e-7);
    CHECK(alpha_ifar_factor(1.0) == 1.0);
  }
}

TEST_CASE("expert_yield is multiplicatively separable") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    data::ShotRecord base = random_record(rng);
    double y_base = expert_yield(base);

    data::ShotRecord only_el = base;
    only_el.e_l = base.e_l * 1.3;
    data::ShotRecord only_yoc = base;
    only_yoc.yoc_he = base.yoc_he * 0.8;
    data::ShotRecord both = base;
    both.e_l = only_el.e_l;
    both.yoc_he = only_yoc.yoc_he;

    double factor_el = expert_yield(only_el) / y_base;
    double factor_yoc = expert_yield(only_yoc) / y_base;
    CHECK(expert_yield(both) ==
          doctest::Approx(y_base * factor_el * factor_yoc).epsilon(1e-10));
  }
}

TEST_CASE("expert derivative signs: negative in T-ratio, positive in YOC") {
  Rng rng(43);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    data::ShotRecord r = random_record(rng);
    data::ShotRecord plus = r;
    data::ShotRecord minus = r;
    plus.t_ratio = r.t_ratio + h;
    minus.t_ratio = r.t_ratio - h;
    CHECK(expert_yield(plus) - expert_yield(minus) < 0.0);
    plus = r;
    minus = r;
    plus.yoc_he = r.yoc_he + h;
    minus.yoc_he = r.yoc_he - h;
    CHECK(expert_yield(plus) - expert_yield(minus) > 0.0);
  }
}

TEST_CASE("expert_yield rejects non-positive inputs naming the field") {
  data::ShotRecord r = all_ones_record();
  r.t_ratio = 0.0;
  CHECK_THROWS_WITH_AS(expert_yield(r), doctest::Contains("t_ratio"), ArgumentError);
}

TEST_CASE("mse_loss basics") {
  std::vector<double> a = {1.0, 2.0, 3.0};
  CHECK(mse_loss(a, a) == 0.0);
  std::vector<double> pred = {1.0, 1.0};
  std::vector<double> target = {0.0, 2.0};
  CHECK(mse_loss(pred, target) == doctest::Approx(1.0));
  std::vector<double> empty;
  CHECK_THROWS_AS(mse_loss(empty, empty), ArgumentError);

  SUBCASE("matches an independent two-pass computation") {
    Rng rng(5);
    std::vector<double> p(37), t(37);
    for (auto& v : p) v = rng.normal();
    for (auto& v : t) v = rng.normal();
    std::vector<double> res(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) res[i] = p[i] - t[i];
    double sum = 0.0;
    for (double r : res) sum += r * r;
    CHECK(std::abs(mse_loss(p, t) - sum / static_cast<double>(p.size())) < 1e-12);
  }
}

TEST_CASE("hinges select only violations") {
  CHECK(hinge_t(-0.5) == 0.0);
  CHECK(hinge_t(0.5) == 0.5);
  CHECK(hinge_t(0.0) == 0.0);
  CHECK(hinge_yoc(-0.5) == -0.5);
  CHECK(hinge_yoc(0.5) == 0.0);
  CHECK(hinge_yoc(0.0) == 0.0);
}

namespace {

data::FeatureVector16 random_features(Rng& rng) {
  data::FeatureVector16 x{};
  for (int f = 0; f < data::kPhysicalFeatureCount; ++f) x[f] = rng.uniform01();
  x[data::kPhysicalFeatureCount + rng.below(data::kCompositionCount)] = 1.0;
  return x;
}

}  // namespace

TEST_CASE("physics_penalty on linear toy models") {
  Rng rng(7);
  std::vector<data::FeatureVector16> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(random_features(rng));

  PhysicsPenaltyConfig cfg;
  cfg.gamma1 = 1.0;
  cfg.gamma2 = 1.0;

  SUBCASE("correct monotonicities give zero penalty") {
    Predictor good = [](const data::FeatureVector16& x) {
      return -x[data::kTRatio] + x[data::kYocHe];
    };
    CHECK(physics_penalty(good, batch, cfg) == 0.0);
  }

  SUBCASE("unit violation in T passes straight through") {
    Predictor bad_t = [](const data::FeatureVector16& x) { return x[data::kTRatio]; };
    cfg.gamma2 = 0.0;
    CHECK(physics_penalty(bad_t, batch, cfg) == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("zero strengths give zero penalty for any model") {
    Predictor bad = [](const data::FeatureVector16& x) {
      return x[data::kTRatio] - x[data::kYocHe];
    };
    cfg.gamma1 = 0.0;
    cfg.gamma2 = 0.0;
    CHECK(physics_penalty(bad, batch, cfg) == 0.0);
  }

  SUBCASE("penalty scales exactly linearly in gamma") {
    Predictor bad = [](const data::FeatureVector16& x) {
      return 0.7 * x[data::kTRatio] - 0.3 * x[data::kYocHe];
    };
    cfg.gamma1 = 0.25;
    cfg.gamma2 = 0.0;
    double p1 = physics_penalty(bad, batch, cfg);
    cfg.gamma1 = 0.5;
    double p2 = physics_penalty(bad, batch, cfg);
    CHECK(p2 == doctest::Approx(2.0 * p1).epsilon(1e-15));
    CHECK(p1 > 0.0);
  }

  SUBCASE("penalty is nonnegative for random quadratics") {
    for (int trial = 0; trial < 20; ++trial) {
      double a = rng.normal();
      double b = rng.normal();
      Predictor q = [a, b](const data::FeatureVector16& x) {
        double t = x[data::kTRatio];
        double y = x[data::kYocHe];
        return a * t * t + b * y * y - t * y;
      };
      CHECK(physics_penalty(q, batch, cfg) >= 0.0);
    }
  }
}

TEST_CASE("total_loss is mse plus penalty") {
  Rng rng(8);
  std::vector<data::FeatureVector16> batch;
  std::vector<double> targets;
  for (int i = 0; i < 12; ++i) {
    batch.push_back(random_features(rng));
    targets.push_back(rng.normal());
  }
  Predictor model = [](const data::FeatureVector16& x) {
    return x[data::kTRatio] * 0.5 - x[data::kYocHe] * 0.25 + x[0];
  };

  PhysicsPenaltyConfig zero;
  zero.gamma1 = 0.0;
  zero.gamma2 = 0.0;
  std::vector<double> preds(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) preds[i] = model(batch[i]);
  CHECK(total_loss(model, batch, targets, zero) == mse_loss(preds, targets));

  PhysicsPenaltyConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.9;
  double combined = total_loss(model, batch, targets, cfg);
  double parts = mse_loss(preds, targets) + physics_penalty(model, batch, cfg);
  CHECK(std::abs(combined - parts) < 1e-12);

  SUBCASE("perfect predictions leave only the penalty") {
    std::vector<double> exact_targets = preds;
    CHECK(total_loss(model, batch, exact_targets, cfg) ==
          doctest::Approx(physics_penalty(model, batch, cfg)).epsilon(1e-15));
  }
}
