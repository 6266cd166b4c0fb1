#include "fsl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "fsl/errors.hpp"

namespace fsl::autodiff {

namespace {

double stable_logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

NodeId Tape::push(Op op, NodeId a, NodeId b, NodeId c, double aux0, double aux1,
                  double value) {
  kind_.push_back(op);
  a_.push_back(a);
  b_.push_back(b);
  c_.push_back(c);
  aux0_.push_back(aux0);
  aux1_.push_back(aux1);
  val_.push_back(value);
  adj_.push_back(0.0);
  return static_cast<NodeId>(kind_.size() - 1);
}

NodeId Tape::check(NodeId operand) const {
  if (operand < 0 || static_cast<std::size_t>(operand) >= kind_.size())
    throw StructuralError("tape: operand " + std::to_string(operand) +
                          " is not an existing node (tape has " +
                          std::to_string(kind_.size()) + ")");
  return operand;
}

NodeId Tape::leaf(double initial) { return push(Op::Leaf, -1, -1, -1, 0, 0, initial); }

NodeId Tape::parameter(double initial) {
  NodeId id = leaf(initial);
  parameters_.push_back(id);
  return id;
}

NodeId Tape::constant(double value) { return push(Op::Constant, -1, -1, -1, 0, 0, value); }

NodeId Tape::add(NodeId a, NodeId b) { return push(Op::Add, check(a), check(b), -1, 0, 0, 0); }
NodeId Tape::sub(NodeId a, NodeId b) { return push(Op::Sub, check(a), check(b), -1, 0, 0, 0); }
NodeId Tape::mul(NodeId a, NodeId b) { return push(Op::Mul, check(a), check(b), -1, 0, 0, 0); }

NodeId Tape::mul_add(NodeId a, NodeId b, NodeId c) {
  return push(Op::MulAdd, check(a), check(b), check(c), 0, 0, 0);
}

NodeId Tape::axpb(NodeId x, double a, double b) {
  return push(Op::AxPlusB, check(x), -1, -1, a, b, 0);
}

NodeId Tape::pow_const(NodeId x, double exponent) {
  return push(Op::PowConst, check(x), -1, -1, exponent, 0, 0);
}

NodeId Tape::softplus(NodeId x) { return push(Op::Softplus, check(x), -1, -1, 0, 0, 0); }
NodeId Tape::logistic(NodeId x) { return push(Op::Logistic, check(x), -1, -1, 0, 0, 0); }
NodeId Tape::silu(NodeId x) { return push(Op::Silu, check(x), -1, -1, 0, 0, 0); }
NodeId Tape::max_zero(NodeId x) { return push(Op::MaxZero, check(x), -1, -1, 0, 0, 0); }
NodeId Tape::min_zero(NodeId x) { return push(Op::MinZero, check(x), -1, -1, 0, 0, 0); }

NodeId Tape::interval(NodeId x, double lo, double hi) {
  return push(Op::Interval, check(x), -1, -1, lo, hi, 0);
}

NodeId Tape::clamp(NodeId x, double lo, double hi) {
  return push(Op::Clamp, check(x), -1, -1, lo, hi, 0);
}

void Tape::set_value(NodeId node, double value) {
  check(node);
  if (kind_[node] != Op::Leaf)
    throw StructuralError("tape: set_value on non-leaf node " + std::to_string(node));
  val_[node] = value;
}

double Tape::value(NodeId node) const {
  if (node < 0 || static_cast<std::size_t>(node) >= kind_.size())
    throw StructuralError("tape: value of unknown node " + std::to_string(node));
  return val_[node];
}

void Tape::forward() {
  const std::size_t n = kind_.size();
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind_[i]) {
      case Op::Leaf:
      case Op::Constant:
        break;
      case Op::Add:
        val_[i] = val_[a_[i]] + val_[b_[i]];
        break;
      case Op::Sub:
        val_[i] = val_[a_[i]] - val_[b_[i]];
        break;
      case Op::Mul:
        val_[i] = val_[a_[i]] * val_[b_[i]];
        break;
      case Op::MulAdd:
        val_[i] = val_[a_[i]] * val_[b_[i]] + val_[c_[i]];
        break;
      case Op::AxPlusB:
        val_[i] = aux0_[i] * val_[a_[i]] + aux1_[i];
        break;
      case Op::PowConst:
        val_[i] = std::pow(val_[a_[i]], aux0_[i]);
        break;
      case Op::Softplus:
        val_[i] = stable_softplus(val_[a_[i]]);
        break;
      case Op::Logistic:
        val_[i] = stable_logistic(val_[a_[i]]);
        break;
      case Op::Silu:
        val_[i] = val_[a_[i]] * stable_logistic(val_[a_[i]]);
        break;
      case Op::MaxZero:
        val_[i] = std::max(val_[a_[i]], 0.0);
        break;
      case Op::MinZero:
        val_[i] = std::min(val_[a_[i]], 0.0);
        break;
      case Op::Interval:
        val_[i] = (val_[a_[i]] >= aux0_[i] && val_[a_[i]] < aux1_[i]) ? 1.0 : 0.0;
        break;
      case Op::Clamp:
        val_[i] = std::clamp(val_[a_[i]], aux0_[i], aux1_[i]);
        break;
    }
  }
}

void Tape::sweep_backward(NodeId output) {
  check(output);
  std::memset(adj_.data(), 0, adj_.size() * sizeof(double));
  adj_[output] += 1.0;
  for (std::int64_t i = output; i >= 0; --i) {
    double bar = adj_[i];
    if (bar == 0.0) continue;
    switch (kind_[i]) {
      case Op::Leaf:
      case Op::Constant:
      case Op::Interval:
        break;
      case Op::Add:
        adj_[a_[i]] += bar;
        adj_[b_[i]] += bar;
        break;
      case Op::Sub:
        adj_[a_[i]] += bar;
        adj_[b_[i]] -= bar;
        break;
      case Op::Mul:
        adj_[a_[i]] += bar * val_[b_[i]];
        adj_[b_[i]] += bar * val_[a_[i]];
        break;
      case Op::MulAdd:
        adj_[a_[i]] += bar * val_[b_[i]];
        adj_[b_[i]] += bar * val_[a_[i]];
        adj_[c_[i]] += bar;
        break;
      case Op::AxPlusB:
        adj_[a_[i]] += bar * aux0_[i];
        break;
      case Op::PowConst:
        adj_[a_[i]] += bar * aux0_[i] * std::pow(val_[a_[i]], aux0_[i] - 1.0);
        break;
      case Op::Softplus:
        adj_[a_[i]] += bar * stable_logistic(val_[a_[i]]);
        break;
      case Op::Logistic: {
        double s = val_[i];
        adj_[a_[i]] += bar * s * (1.0 - s);
        break;
      }
      case Op::Silu: {
        double s = stable_logistic(val_[a_[i]]);
        adj_[a_[i]] += bar * s * (1.0 + val_[a_[i]] * (1.0 - s));
        break;
      }
      case Op::MaxZero:
        if (val_[a_[i]] > 0.0) adj_[a_[i]] += bar;
        break;
      case Op::MinZero:
        if (val_[a_[i]] < 0.0) adj_[a_[i]] += bar;
        break;
      case Op::Clamp:
        if (val_[a_[i]] >= aux0_[i] && val_[a_[i]] <= aux1_[i]) adj_[a_[i]] += bar;
        break;
    }
  }
}

std::vector<double> Tape::gradient(NodeId output) {
  sweep_backward(output);
  std::vector<double> grads(parameters_.size());
  for (std::size_t p = 0; p < parameters_.size(); ++p) grads[p] = adj_[parameters_[p]];
  return grads;
}

void Tape::gradient_accumulate(NodeId output, double seed, std::span<double> accum) {
  if (accum.size() != parameters_.size())
    throw ArgumentError("tape: gradient accumulator size mismatch");
  sweep_backward(output);
  for (std::size_t p = 0; p < parameters_.size(); ++p)
    accum[p] += seed * adj_[parameters_[p]];
}

std::vector<double> Tape::derivatives(NodeId output, std::span<const NodeId> wrt) {
  sweep_backward(output);
  std::vector<double> out(wrt.size());
  for (std::size_t i = 0; i < wrt.size(); ++i) out[i] = adj_[check(wrt[i])];
  return out;
}

double Tape::derivative(NodeId output, NodeId wrt) {
  sweep_backward(output);
  return adj_[check(wrt)];
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ArgumentError("adam_step: params, grads and state sizes disagree");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError("adam_step: non-finite gradient at parameter " + std::to_string(i));

  state.step_count += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    double m = state.first_moment[i] = state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * g;
    double v = state.second_moment[i] = state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * g * g;
    params[i] -= learning_rate * (m / bc1) / (std::sqrt(v / bc2) + state.epsilon);
  }
}

std::vector<double> DropoutMask::multipliers() const {
  std::vector<double> m(keep.size());
  double s = scale();
  for (std::size_t i = 0; i < keep.size(); ++i) m[i] = keep[i] ? s : 0.0;
  return m;
}

DropoutMask DropoutMask::draw(Rng& rng, std::size_t n, double rate) {
  if (rate < 0.0 || rate >= 1.0)
    throw ArgumentError("dropout: rate must lie in [0, 1)");
  DropoutMask mask;
  mask.rate = rate;
  mask.draw_id = rng.next_u64();
  mask.keep.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    mask.keep[i] = rate == 0.0 ? true : rng.uniform01() >= rate;
  return mask;
}

std::vector<double> apply_dropout(std::span<const double> activations,
                                  const DropoutMask& mask, bool training) {
  if (mask.rate < 0.0 || mask.rate >= 1.0)
    throw ArgumentError("dropout: rate must lie in [0, 1)");
  if (mask.keep.size() != activations.size())
    throw ArgumentError("dropout: mask dimension " + std::to_string(mask.keep.size()) +
                        " does not match activations " + std::to_string(activations.size()));
  std::vector<double> out(activations.begin(), activations.end());
  if (!training || mask.rate == 0.0) return out;
  double s = mask.scale();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = mask.keep[i] ? out[i] * s : 0.0;
  return out;
}

}  // namespace fsl::autodiff
