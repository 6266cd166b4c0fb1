#pragma once

#include <span>
#include <vector>

namespace fsl::spline {

/// Uniform B-spline knot grid over a fixed domain.
///
/// The knot vector has grid_size + 2*order + 1 entries: uniform interior
/// knots plus `order` replicated-spacing extension knots on each side, so
/// the basis spans grid_size + order functions and forms a partition of
/// unity on [domain_lo, domain_hi].
struct SplineGrid {
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  int grid_size = 0;  // number of interior intervals
  int order = 0;      // spline order (polynomial degree)
  std::vector<double> knots;

  int basis_count() const { return grid_size + order; }
};

SplineGrid make_grid(double domain_lo, double domain_hi, int grid_size, int order);

/// Cox-de Boor basis values at x. Inputs outside the domain are clamped.
/// Result has grid.basis_count() entries, each >= 0, summing to 1 in-domain.
std::vector<double> basis_eval(const SplineGrid& grid, double x);

/// Derivatives of each basis function at x (clamped like basis_eval).
/// Entries sum to 0 inside the domain.
std::vector<double> basis_derivative(const SplineGrid& grid, double x);

/// Non-allocating variants; `out` must have grid.basis_count() entries and
/// `scratch` at least grid_size + 2*order entries.
void basis_eval_into(const SplineGrid& grid, double x, std::span<double> out,
                     std::span<double> scratch);
void basis_derivative_into(const SplineGrid& grid, double x, std::span<double> out,
                           std::span<double> scratch);

/// One learnable KAN edge: a spline term over the shared grid plus a fixed
/// smooth base activation, phi(x) = spline_weight * sum_i c_i B_i(x)
///                               + base_weight * b(x),  b(x) = x * logistic(x).
struct KanEdge {
  SplineGrid grid;
  std::vector<double> coefficients;  // grid.basis_count() entries
  double base_weight = 0.0;
  double spline_weight = 1.0;
};

/// Fixed smooth base activation b(x) = x * logistic(x).
double base_activation(double x);
/// Derivative of the base activation.
double base_activation_derivative(double x);

/// Spline part only: sum_i c_i B_i(x) on the clamped argument.
double spline_part(const KanEdge& edge, double x);

double edge_eval(const KanEdge& edge, double x);

/// Derivative of edge_eval with respect to x. Outside the domain the spline
/// part is flat (clamped argument) and only the base path contributes.
double edge_derivative(const KanEdge& edge, double x);

/// Refit the edge's spline onto a finer grid with new_grid_size intervals by
/// least squares over a dense sample of the current spline. Weights are
/// preserved. new_grid_size must be >= the current grid size.
KanEdge grid_extend(const KanEdge& edge, int new_grid_size);

}  // namespace fsl::spline
