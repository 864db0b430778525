#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coag/dynamics.hpp"
#include "coag/kernels.hpp"
#include "coag/lattice.hpp"

namespace coag {

struct InjectionVector {
  Eigen::VectorXd j0;  // sum_alpha s_alpha alpha
  double norm = 0.0;   // sum_j j0_j
};

InjectionVector injection_vector(const SourceSpec& source);

/// Per-species flux A_j(R) across a list of size surfaces; row r of `flux` belongs to radii[r].
struct FluxCurve {
  std::vector<double> radii;
  Eigen::MatrixXd flux;
  std::vector<std::string> warnings;

  Eigen::VectorXd total() const { return flux.rowwise().sum(); }
};

/// A_j(R) = sum_{|alpha| <= R} sum_{|beta| > R - |alpha|} alpha_j K n_alpha n_beta.
FluxCurve flux(const PopulationState& state, const KernelSpec& kernel, const std::vector<double>& radii,
               ExecutionPolicy policy = {});

class InsufficientRange : public Error {
 public:
  using Error::Error;
};

struct ScalingFit {
  double exponent = 0.0;
  double exponent_stderr = 0.0;
  double prefactor = 0.0;
  double z_lo = 0.0;
  double z_hi = 0.0;
  double predicted_exponent = 0.0;  // -(3 + gamma) / 2
  std::vector<double> z;
  std::vector<double> shell_average;
};

/// Least-squares slope of log((1/z) sum_{bz <= |alpha| <= z} n) against log z at four
/// geometric points per octave in [z_lo, z_hi]. Needs at least five non-empty shells.
ScalingFit fit_shell_scaling(const PopulationState& state, double b, double z_lo, double z_hi, double gamma);

struct BoundRow {
  double z = 0.0;
  double lower = 0.0;
  double value = 0.0;
  double upper = 0.0;
  bool ok = true;
};

struct BoundReport {
  std::vector<BoundRow> rows;
  std::vector<double> violations;  // z values of failing rows
};

/// Checks C2 sqrt(|J0|) z^{-(3+gamma)/2} <= (1/z) shell_sum(bz, z) <= C1 sqrt(|J0|) z^{-(3+gamma)/2}
/// at every integer z with source_support / b < z <= n_max (or inside [z_lo, z_hi] when given).
BoundReport two_sided_bound_check(const PopulationState& state, double b, double C1, double C2, double j0_norm,
                                  double gamma, int source_support, double z_lo = 0.0, double z_hi = 0.0);

struct BoundConstants {
  double C1 = 0.0;  // largest shell ratio
  double C2 = 0.0;  // smallest shell ratio
};

/// Tightest (C1, C2) for which two_sided_bound_check passes on [z_lo, z_hi].
BoundConstants calibrate_bound_constants(const PopulationState& state, double b, double j0_norm, double gamma,
                                         double z_lo, double z_hi);

class PremiseViolated : public Error {
 public:
  PremiseViolated(const std::string& what, std::vector<double> offending)
      : Error(what), offending_(std::move(offending)) {}
  const std::vector<double>& offending() const { return offending_; }

 private:
  std::vector<double> offending_;
};

struct TailBoundResult {
  bool holds = false;
  double constant = 0.0;           // C(b, q, a / R) used for the conclusion
  double measured_constant = 0.0;  // sum over [a, R] / (c0 int_a^R x^q dx)
};

/// Shell-average-to-interval bound: if (1/z) sum_{bz <= |alpha| <= z} n <= c0 z^q for every
/// z in [a, R], then sum_{a <= |alpha| <= R} n <= C(b, q, a / R) c0 int_a^R x^q dx.
/// The premise is verified exactly (the shell sum is piecewise constant in z); throws
/// PremiseViolated listing offending z otherwise.
TailBoundResult tail_bound_from_shells(const PopulationState& state, double b, double c0, double q, double a,
                                       double R);

/// C(b, q, r) = 1 / kappa(b) + r^{q+1} / kappa(r), kappa(x) = (1 - x^{q+1}) / (q + 1) (log(1/x) at q = -1).
double tail_bound_constant(double b, double q, double r);

}  // namespace coag
