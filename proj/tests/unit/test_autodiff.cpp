#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "fsl/autodiff.hpp"
#include "fsl/errors.hpp"
#include "fsl/rng.hpp"

using namespace fsl;
using namespace fsl::autodiff;

namespace {

// Central finite-difference oracle over the tape's own forward pass.
double fd_wrt_leaf(Tape& tape, NodeId output, NodeId leaf, double h = 1e-5) {
  double saved = tape.value(leaf);
  tape.set_value(leaf, saved + h);
  tape.forward();
  double plus = tape.value(output);
  tape.set_value(leaf, saved - h);
  tape.forward();
  double minus = tape.value(output);
  tape.set_value(leaf, saved);
  tape.forward();
  return (plus - minus) / (2.0 * h);
}

void check_close(double got, double want, double rel = 1e-4, double abs_floor = 1e-7) {
  double scale = std::max({std::abs(got), std::abs(want), abs_floor / rel});
  CHECK(std::abs(got - want) <= rel * scale);
}

}  // namespace

TEST_CASE("d(theta^2)/d(theta) = 2*theta") {
  Tape tape;
  NodeId theta = tape.parameter(3.0);
  NodeId f = tape.mul(theta, theta);
  tape.forward();
  auto grads = tape.gradient(f);
  REQUIRE(grads.size() == 1);
  CHECK(grads[0] == doctest::Approx(6.0));
}

TEST_CASE("constant output has zero gradient") {
  Tape tape;
  NodeId theta = tape.parameter(2.5);
  NodeId c = tape.constant(7.0);
  NodeId f = tape.add(c, tape.constant(1.0));
  tape.forward();
  auto grads = tape.gradient(f);
  CHECK(grads[0] == 0.0);
  (void)theta;
}

TEST_CASE("every primitive matches central finite differences") {
  Rng rng(21);
  struct Case {
    const char* name;
    std::function<NodeId(Tape&, NodeId, NodeId)> build;
  };
  std::vector<Case> cases = {
      {"add", [](Tape& t, NodeId a, NodeId b) { return t.add(a, b); }},
      {"sub", [](Tape& t, NodeId a, NodeId b) { return t.sub(a, b); }},
      {"mul", [](Tape& t, NodeId a, NodeId b) { return t.mul(a, b); }},
      {"mul_add", [](Tape& t, NodeId a, NodeId b) { return t.mul_add(a, b, t.mul(a, b)); }},
      {"axpb", [](Tape& t, NodeId a, NodeId) { return t.axpb(a, 1.75, -0.5); }},
      {"pow", [](Tape& t, NodeId a, NodeId) { return t.pow_const(t.softplus(a), 2.3); }},
      {"softplus", [](Tape& t, NodeId a, NodeId) { return t.softplus(a); }},
      {"logistic", [](Tape& t, NodeId a, NodeId) { return t.logistic(a); }},
      {"silu", [](Tape& t, NodeId a, NodeId) { return t.silu(a); }},
      {"max_zero", [](Tape& t, NodeId a, NodeId) { return t.max_zero(a); }},
      {"min_zero", [](Tape& t, NodeId a, NodeId) { return t.min_zero(a); }},
      {"clamp", [](Tape& t, NodeId a, NodeId) { return t.clamp(a, -0.8, 0.8); }},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    for (int trial = 0; trial < 100; ++trial) {
      Tape tape;
      NodeId a = tape.parameter(rng.uniform(-2.0, 2.0));
      NodeId b = tape.parameter(rng.uniform(-2.0, 2.0));
      NodeId f = c.build(tape, a, b);
      tape.forward();
      auto grads = tape.gradient(f);
      check_close(grads[0], fd_wrt_leaf(tape, f, a));
      check_close(grads[1], fd_wrt_leaf(tape, f, b));
    }
  }
}

TEST_CASE("random 2-4-1 network gradient matches finite differences") {
  Rng rng(22);
  Tape tape;
  std::vector<NodeId> params;
  auto param = [&](double v) {
    NodeId id = tape.parameter(v);
    params.push_back(id);
    return id;
  };
  NodeId x0 = tape.leaf(0.3);
  NodeId x1 = tape.leaf(-0.7);
  std::vector<NodeId> hidden;
  for (int o = 0; o < 4; ++o) {
    NodeId acc = param(rng.normal() * 0.5);  // bias
    acc = tape.mul_add(param(rng.normal() * 0.5), x0, acc);
    acc = tape.mul_add(param(rng.normal() * 0.5), x1, acc);
    hidden.push_back(tape.softplus(acc));
  }
  NodeId out = param(rng.normal() * 0.5);
  for (NodeId h : hidden) out = tape.mul_add(param(rng.normal() * 0.5), h, out);

  tape.forward();
  auto grads = tape.gradient(out);
  REQUIRE(grads.size() == params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    CAPTURE(p);
    check_close(grads[p], fd_wrt_leaf(tape, out, params[p]));
  }

  SUBCASE("gradients are linear in the output") {
    // grad(a*f + b*g) == a*grad(f) + b*grad(g)
    NodeId g = tape.mul(hidden[0], hidden[2]);
    NodeId combo = tape.add(tape.axpb(out, 2.5, 0.0), tape.axpb(g, -1.25, 0.0));
    tape.forward();
    auto grad_f = tape.gradient(out);
    auto grad_g = tape.gradient(g);
    auto grad_combo = tape.gradient(combo);
    for (std::size_t p = 0; p < params.size(); ++p)
      CHECK(grad_combo[p] ==
            doctest::Approx(2.5 * grad_f[p] - 1.25 * grad_g[p]).epsilon(1e-12));
  }
}

TEST_CASE("input sensitivities via derivatives()") {
  Tape tape;
  NodeId x0 = tape.leaf(0.4);
  NodeId x1 = tape.leaf(0.9);
  // f(x) = 3*x0 + x1
  NodeId f = tape.add(tape.axpb(x0, 3.0, 0.0), x1);
  tape.forward();
  std::vector<NodeId> inputs = {x0, x1};
  auto sens = tape.derivatives(f, inputs);
  CHECK(sens[0] == doctest::Approx(3.0));
  CHECK(sens[1] == doctest::Approx(1.0));

  // f independent of x1
  NodeId g = tape.mul(x0, x0);
  tape.forward();
  CHECK(tape.derivative(g, x1) == 0.0);
}

TEST_CASE("structural misuse is rejected") {
  Tape tape;
  NodeId a = tape.leaf(1.0);
  CHECK_THROWS_AS(tape.add(a, 57), StructuralError);    // future node
  CHECK_THROWS_AS(tape.mul(-1, a), StructuralError);    // invalid id
  NodeId prod = tape.mul(a, a);
  CHECK_THROWS_AS(tape.set_value(prod, 2.0), StructuralError);
  CHECK_THROWS_AS(tape.gradient(99), StructuralError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  std::vector<double> params = {1.0, -2.0, 0.5};
  std::vector<double> grads = {0.0, 0.0, 0.0};
  AdamState state(3);
  adam_step(params, grads, state, 1e-3);
  CHECK(params == std::vector<double>{1.0, -2.0, 0.5});
  CHECK(state.step_count == 1);
}

TEST_CASE("adam: first step is the hand-evaluated bias-corrected update") {
  // t=1, g=0.5: m_hat = g, v_hat = g^2, step = lr * g / (|g| + eps) ~ lr
  std::vector<double> params = {0.0};
  std::vector<double> grads = {0.5};
  AdamState state(1);
  adam_step(params, grads, state, 1e-3);
  double expected = -1e-3 * 0.5 / (0.5 + 1e-8);
  CHECK(params[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(params[0] == doctest::Approx(-1e-3).epsilon(1e-6));
}

TEST_CASE("adam: deterministic across reruns") {
  auto run = [] {
    Rng rng(77);
    std::vector<double> params = {0.1, 0.2};
    AdamState state(2);
    for (int step = 0; step < 50; ++step) {
      std::vector<double> grads = {rng.normal(), rng.normal()};
      adam_step(params, grads, state, 1e-3);
    }
    return params;
  };
  auto a = run();
  auto b = run();
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
}

TEST_CASE("adam rejects non-finite gradients naming the parameter") {
  std::vector<double> params = {1.0, 2.0};
  std::vector<double> grads = {0.1, std::nan("")};
  AdamState state(2);
  CHECK_THROWS_WITH_AS(adam_step(params, grads, state, 1e-3),
                       doctest::Contains("parameter 1"), NumericError);
  // rejected updates leave everything untouched
  CHECK(params[0] == 1.0);
  CHECK(state.step_count == 0);
  CHECK_THROWS_AS(adam_step(params, std::vector<double>{0.1}, state, 1e-3), ArgumentError);
}

TEST_CASE("dropout: rate zero and evaluation mode are the identity") {
  Rng rng(31);
  std::vector<double> acts = {1.0, -2.0, 3.0, 0.0};
  auto mask0 = DropoutMask::draw(rng, acts.size(), 0.0);
  CHECK(apply_dropout(acts, mask0, true) == acts);
  auto mask_half = DropoutMask::draw(rng, acts.size(), 0.5);
  CHECK(apply_dropout(acts, mask_half, false) == acts);
}

TEST_CASE("dropout keeps roughly the right fraction and rescales") {
  Rng rng(32);
  const double rate = 0.5;
  const int n = 10000;
  std::vector<double> acts(n, 1.0);
  auto mask = DropoutMask::draw(rng, n, rate);
  auto out = apply_dropout(acts, mask, true);
  int kept = 0;
  for (double v : out) {
    if (v != 0.0) {
      CHECK(v == doctest::Approx(2.0));
      ++kept;
    }
  }
  double fraction = static_cast<double>(kept) / n;
  CHECK(std::abs(fraction - 0.5) < 0.02);
}

TEST_CASE("dropout argument errors") {
  Rng rng(33);
  CHECK_THROWS_AS(DropoutMask::draw(rng, 4, 1.0), ArgumentError);
  CHECK_THROWS_AS(DropoutMask::draw(rng, 4, -0.1), ArgumentError);
  auto mask = DropoutMask::draw(rng, 4, 0.25);
  std::vector<double> acts = {1.0, 2.0};
  CHECK_THROWS_AS(apply_dropout(acts, mask, true), ArgumentError);
}
