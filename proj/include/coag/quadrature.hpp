#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace coag {

/// Nodes and weights on [-1, 1].
struct GaussLegendreRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

/// Golub-Welsch construction from the Jacobi matrix of the Legendre recurrence.
GaussLegendreRule gauss_legendre(int order);

/// Composite rule over [lo, hi] split into panels no wider than `width`.
double integrate_panels(const std::function<double(double)>& f, double lo, double hi, double width,
                        const GaussLegendreRule& rule);

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // |fine - coarse|
  bool converged = true;
  std::string note;
};

/// int_0^R dr r h(r) int_{R-r}^inf drho h(rho) K(r, rho) for power-law-like h.
///
/// Both integrals run in logarithmic variables, the outer one split at R/2 so the
/// endpoint singularities at r -> 0 and r -> R each sit at the end of a log range.
/// Ranges are cut at R 1e-8 and R 1e8 and the remainders added from the local power-law
/// slope. The error estimate compares panel widths 1 and 1/2.
QuadratureResult flux_double_integral(const std::function<double(double)>& h,
                                      const std::function<double(double, double)>& kernel, double R,
                                      double rel_tol = 1e-6);

}  // namespace coag
