#include "fsl/spline.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "fsl/errors.hpp"

namespace fsl::spline {

SplineGrid make_grid(double domain_lo, double domain_hi, int grid_size, int order) {
  if (!(domain_lo < domain_hi))
    throw ArgumentError("make_grid: domain_lo must be below domain_hi");
  if (grid_size < 1) throw ArgumentError("make_grid: grid_size must be >= 1");
  if (order < 1) throw ArgumentError("make_grid: order must be >= 1");

  SplineGrid grid;
  grid.domain_lo = domain_lo;
  grid.domain_hi = domain_hi;
  grid.grid_size = grid_size;
  grid.order = order;

  double h = (domain_hi - domain_lo) / grid_size;
  int count = grid_size + 2 * order + 1;
  grid.knots.resize(count);
  for (int i = 0; i < count; ++i) grid.knots[i] = domain_lo + (i - order) * h;
  return grid;
}

namespace {

double clamp_to_domain(const SplineGrid& grid, double x) {
  if (!std::isfinite(x)) throw ArgumentError("spline: x is not finite");
  return std::clamp(x, grid.domain_lo, grid.domain_hi);
}

// Fills `work` (grid_size + 2*order entries) with basis values of order
// `up_to`; the first grid_size + 2*order - up_to entries are meaningful.
void cox_de_boor(const SplineGrid& grid, double x, std::span<double> work, int up_to) {
  const auto& t = grid.knots;
  int intervals = static_cast<int>(t.size()) - 1;
  for (int j = 0; j < intervals; ++j)
    work[j] = (x >= t[j] && x < t[j + 1]) ? 1.0 : 0.0;
  for (int k = 1; k <= up_to; ++k) {
    for (int j = 0; j < intervals - k; ++j) {
      double left = (x - t[j]) / (t[j + k] - t[j]) * work[j];
      double right = (t[j + k + 1] - x) / (t[j + k + 1] - t[j + 1]) * work[j + 1];
      work[j] = left + right;
    }
  }
}

}  // namespace

void basis_eval_into(const SplineGrid& grid, double x, std::span<double> out,
                     std::span<double> scratch) {
  double xc = clamp_to_domain(grid, x);
  cox_de_boor(grid, xc, scratch, grid.order);
  for (int i = 0; i < grid.basis_count(); ++i) out[i] = scratch[i];
}

void basis_derivative_into(const SplineGrid& grid, double x, std::span<double> out,
                           std::span<double> scratch) {
  double xc = clamp_to_domain(grid, x);
  int k = grid.order;
  cox_de_boor(grid, xc, scratch, k - 1);
  const auto& t = grid.knots;
  // B'_{i,k} = k * (B_{i,k-1}/(t_{i+k}-t_i) - B_{i+1,k-1}/(t_{i+k+1}-t_{i+1}))
  for (int i = 0; i < grid.basis_count(); ++i) {
    double left = scratch[i] / (t[i + k] - t[i]);
    double right = scratch[i + 1] / (t[i + k + 1] - t[i + 1]);
    out[i] = k * (left - right);
  }
}

std::vector<double> basis_eval(const SplineGrid& grid, double x) {
  std::vector<double> out(grid.basis_count());
  std::vector<double> scratch(grid.grid_size + 2 * grid.order);
  basis_eval_into(grid, x, out, scratch);
  return out;
}

std::vector<double> basis_derivative(const SplineGrid& grid, double x) {
  std::vector<double> out(grid.basis_count());
  std::vector<double> scratch(grid.grid_size + 2 * grid.order);
  basis_derivative_into(grid, x, out, scratch);
  return out;
}

double base_activation(double x) { return x / (1.0 + std::exp(-x)); }

double base_activation_derivative(double x) {
  double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

double spline_part(const KanEdge& edge, double x) {
  std::vector<double> basis = basis_eval(edge.grid, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i) sum += edge.coefficients[i] * basis[i];
  return sum;
}

double edge_eval(const KanEdge& edge, double x) {
  if (!std::isfinite(x)) throw ArgumentError("edge_eval: x is not finite");
  return edge.spline_weight * spline_part(edge, x) +
         edge.base_weight * base_activation(x);
}

double edge_derivative(const KanEdge& edge, double x) {
  if (!std::isfinite(x)) throw ArgumentError("edge_derivative: x is not finite");
  double spline_term = 0.0;
  if (x >= edge.grid.domain_lo && x <= edge.grid.domain_hi) {
    std::vector<double> deriv = basis_derivative(edge.grid, x);
    for (std::size_t i = 0; i < deriv.size(); ++i)
      spline_term += edge.coefficients[i] * deriv[i];
  }
  return edge.spline_weight * spline_term +
         edge.base_weight * base_activation_derivative(x);
}

KanEdge grid_extend(const KanEdge& edge, int new_grid_size) {
  if (new_grid_size < edge.grid.grid_size)
    throw ArgumentError("grid_extend: new grid size must not shrink the grid");

  KanEdge refined;
  refined.grid = make_grid(edge.grid.domain_lo, edge.grid.domain_hi, new_grid_size,
                           edge.grid.order);
  refined.base_weight = edge.base_weight;
  refined.spline_weight = edge.spline_weight;

  int basis = refined.grid.basis_count();
  int samples = 10 * (new_grid_size + refined.grid.order);
  Eigen::MatrixXd design(samples, basis);
  Eigen::VectorXd target(samples);
  std::vector<double> row(basis);
  std::vector<double> scratch(new_grid_size + 2 * refined.grid.order);
  for (int s = 0; s < samples; ++s) {
    double x = edge.grid.domain_lo +
               (edge.grid.domain_hi - edge.grid.domain_lo) * s / (samples - 1);
    basis_eval_into(refined.grid, x, row, scratch);
    for (int j = 0; j < basis; ++j) design(s, j) = row[j];
    target(s) = spline_part(edge, x);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < basis)
    throw NumericError("grid_extend: singular least-squares system (rank " +
                       std::to_string(qr.rank()) + " of " + std::to_string(basis) + ")");
  Eigen::VectorXd solution = qr.solve(target);
  refined.coefficients.assign(solution.data(), solution.data() + basis);
  return refined;
}

}  // namespace fsl::spline
