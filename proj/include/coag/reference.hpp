#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "coag/dynamics.hpp"
#include "coag/kernels.hpp"
#include "coag/localization.hpp"
#include "coag/observables.hpp"
#include "coag/quadrature.hpp"

namespace coag {

/// F(r, theta) = c0 r^{exponent} point mass at theta0, exponent = -((gamma+1)/2 + d) + shift.
/// A non-zero shift is only meant for sensitivity checks.
class PowerLawFluxSolution {
 public:
  /// Throws unless the kernel passes the existence gate.
  PowerLawFluxSolution(double c0, const KernelSpec& kernel, Eigen::VectorXd theta0, double exponent_shift = 0.0);

  double c0() const { return c0_; }
  double gamma() const { return gamma_; }
  int dimension() const { return static_cast<int>(theta0_.size()); }
  const Eigen::VectorXd& theta0() const { return theta0_; }
  double exponent_shift() const { return shift_; }
  double exponent() const { return -((gamma_ + 1.0) / 2.0 + dimension()) + shift_; }
  PowerLawFluxSolution scaled(double factor) const;

 private:
  double c0_;
  double gamma_;
  Eigen::VectorXd theta0_;
  double shift_;
};

struct QuadratureFlux {
  FluxCurve curve;
  std::vector<double> error;  // absolute error estimate of the total per radius
  bool converged = true;
};

/// A_j(R) for the power-law family by quadrature over (r, rho); the point mass collapses the
/// direction integrals, giving A_j(R) = theta0_j (c0^2 / d) int int r^{d-a} rho^{d-1-a} K with a = -exponent.
QuadratureFlux c4_flux(const PowerLawFluxSolution& solution, const KernelSpec& kernel, const std::vector<double>& radii);

/// max_R |A(R) - mean| / mean of the total flux.
double max_relative_deviation(const FluxCurve& curve);

/// Checks K(lambda x, lambda y) = lambda^gamma K(x, y) on sampled directions; throws otherwise.
void require_homogeneous(const KernelSpec& kernel, int dimension);

/// Radial profile H(r) = c0 r^exponent.
struct RadialMeasure {
  double c0 = 0.0;
  double exponent = 0.0;

  double density(double r) const { return c0 * std::pow(r, exponent); }
  /// int_1^inf r^{gamma+p} H < inf and int_0^1 r^{1-p} H < inf.
  bool integrable(double gamma, double p) const;
};

struct RadialReduction {
  RadialMeasure measure;
  std::function<double(double, double)> kernel;  // K(r theta0, rho theta0)
  Eigen::VectorXd theta0;
  int source_dimension = 1;
};

RadialReduction reduce_to_radial(const PowerLawFluxSolution& solution, const KernelSpec& kernel);
/// Direction given as a simplex measure; rejects measures with dispersion above 1e-10.
RadialReduction reduce_to_radial(const SimplexMeasure& direction, double c0, double exponent, const KernelSpec& kernel);

/// One-component flux int_0^R r H(r) int_{R-r}^inf H(rho) K(r, rho). It equals d times the
/// total d-dimensional flux of the source measure (the latter carries a 1/d).
QuadratureFlux radial_flux(const RadialReduction& reduction, const std::vector<double>& radii);

/// Quadruple-loop right-hand side over all ordered pairs with direct kernel calls.
/// Guarded to lattices of at most 500 points.
RhsResult brute_force_rhs(const PopulationState& state, const KernelSpec& kernel, const SourceSpec& source);
/// Same loop with a precomputed rate matrix K(i, j) (see direct_kernel_matrix).
RhsResult brute_force_rhs(const PopulationState& state, const Eigen::MatrixXd& rates, const SourceSpec& source);
/// K evaluated directly on every ordered pair of lattice points.
Eigen::MatrixXd direct_kernel_matrix(const LatticeIndex& lattice, const KernelSpec& kernel);

}  // namespace coag
