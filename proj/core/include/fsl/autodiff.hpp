#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fsl/errors.hpp"
#include "fsl/rng.hpp"

namespace fsl::autodiff {

using NodeId = std::int32_t;

/// Structural misuse of the tape (dependency on a node that does not exist
/// yet, reading a non-scalar output, writing a non-leaf).
class StructuralError : public fsl::Error {
 public:
  explicit StructuralError(const std::string& msg) : Error(msg) {}
};

enum class Op : std::uint8_t {
  Leaf,      // free value, set via set_value
  Constant,  // fixed value
  Add,       // a + b
  Sub,       // a - b
  Mul,       // a * b
  MulAdd,    // a * b + c
  AxPlusB,   // aux0 * a + aux1
  PowConst,  // a ^ aux0
  Softplus,  // log(1 + exp(a))
  Logistic,  // 1 / (1 + exp(-a))
  Silu,      // a * logistic(a)
  MaxZero,   // max(a, 0)
  MinZero,   // min(a, 0)
  Interval,  // 1 if aux0 <= a < aux1 else 0; zero derivative
  Clamp      // clamp(a, aux0, aux1)
};

// Append-only scalar computation graph. Nodes may only depend on earlier
// nodes, so a forward pass is a single in-order sweep and a backward pass a
// single reverse sweep. The graph is recorded once and re-evaluated with new
// leaf values, which is what the training loop does per sample.
class Tape {
 public:
  NodeId leaf(double initial = 0.0);
  /// A leaf registered as a trainable parameter (in registration order).
  NodeId parameter(double initial = 0.0);
  NodeId constant(double value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId mul_add(NodeId a, NodeId b, NodeId c);
  NodeId axpb(NodeId x, double a, double b);
  NodeId pow_const(NodeId x, double exponent);
  NodeId softplus(NodeId x);
  NodeId logistic(NodeId x);
  NodeId silu(NodeId x);
  NodeId max_zero(NodeId x);
  NodeId min_zero(NodeId x);
  NodeId interval(NodeId x, double lo, double hi);
  NodeId clamp(NodeId x, double lo, double hi);

  std::size_t size() const { return kind_.size(); }
  std::size_t parameter_count() const { return parameters_.size(); }
  const std::vector<NodeId>& parameters() const { return parameters_; }

  void set_value(NodeId leaf, double value);
  double value(NodeId node) const;

  /// Recompute every node value from the current leaf values.
  void forward();

  /// Reverse sweep from a scalar output: returns d(output)/d(theta) for every
  /// registered parameter. Adjoints are scratch state, zeroed on entry and
  /// left zeroed-for-reuse afterward.
  std::vector<double> gradient(NodeId output);

  /// Accumulates seed * d(output)/d(theta) into accum (parameter_count entries).
  void gradient_accumulate(NodeId output, double seed, std::span<double> accum);

  /// d(output)/d(node) for arbitrary nodes (e.g. input leaves), one sweep.
  std::vector<double> derivatives(NodeId output, std::span<const NodeId> wrt);
  double derivative(NodeId output, NodeId wrt);

 private:
  NodeId push(Op op, NodeId a, NodeId b, NodeId c, double aux0, double aux1, double value);
  NodeId check(NodeId operand) const;
  void sweep_backward(NodeId output);

  std::vector<Op> kind_;
  std::vector<NodeId> a_, b_, c_;
  std::vector<double> aux0_, aux1_;
  std::vector<double> val_, adj_;
  std::vector<NodeId> parameters_;
};

/// Adam optimizer state; one slot per parameter.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// One bias-corrected Adam update. Rejects the whole update (no partial
/// write) if any gradient entry is non-finite.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double learning_rate);

/// Inverted-scaling dropout mask: surviving activations are rescaled by
/// 1/(1-rate) so evaluation mode is the identity.
struct DropoutMask {
  std::vector<bool> keep;
  double rate = 0.0;
  std::uint64_t draw_id = 0;

  double scale() const { return rate > 0.0 ? 1.0 / (1.0 - rate) : 1.0; }
  /// Per-slot multipliers (0 for dropped, scale() for kept).
  std::vector<double> multipliers() const;

  static DropoutMask draw(Rng& rng, std::size_t n, double rate);
};

std::vector<double> apply_dropout(std::span<const double> activations,
                                  const DropoutMask& mask, bool training);

}  // namespace fsl::autodiff
