#include "coag/quadrature.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace coag {

GaussLegendreRule gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("Gauss-Legendre order must be >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double beta = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = jacobi(k - 1, k) = beta;
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussLegendreRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = 2.0 * eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

double integrate_panels(const std::function<double(double)>& f, double lo, double hi, double width,
                        const GaussLegendreRule& rule) {
  if (!(hi > lo)) return 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / width)));
  const double h = (hi - lo) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * h;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < rule.nodes.size(); ++k) acc += rule.weights[k] * f(mid + 0.5 * h * rule.nodes[k]);
    total += 0.5 * h * acc;
  }
  return total;
}

namespace {

constexpr double kSpan = 1e8;
constexpr double kSlopeStep = 0.05;

struct Pass {
  const std::function<double(double)>& h;
  const std::function<double(double, double)>& kernel;
  double R;
  double width;
  const GaussLegendreRule& rule;
  bool tails_ok = true;

  // Remainder of int_x^inf (upper) or int_0^x (lower) of a function behaving like c x^sigma near x.
  double power_tail(double fx, double fx_inner, double x, bool upper) {
    if (fx == 0.0) return 0.0;
    const double sigma = std::log(fx / fx_inner) / (upper ? kSlopeStep : -kSlopeStep);
    if (upper ? !(sigma < -1.0) : !(sigma > -1.0)) {
      tails_ok = false;
      return 0.0;
    }
    return upper ? fx * x / (-sigma - 1.0) : fx * x / (sigma + 1.0);
  }

  double inner(double r) {
    const double lo = R - r;
    const double hi = kSpan * R;
    auto g = [&](double rho) { return h(rho) * kernel(r, rho); };
    const double body = integrate_panels([&](double t) { const double rho = std::exp(t); return g(rho) * rho; },
                                         std::log(lo), std::log(hi), width, rule);
    return body + power_tail(g(hi), g(hi * std::exp(-kSlopeStep)), hi, true);
  }

  double outer_integrand(double r) { return r * h(r) * inner(r); }

  double run() {
    const double cut = R / kSpan;
    // r in [cut, R/2], variable log r.
    const double left =
        integrate_panels([&](double u) { const double r = std::exp(u); return outer_integrand(r) * r; },
                         std::log(cut), std::log(0.5 * R), width, rule) +
        power_tail(outer_integrand(cut), outer_integrand(cut * std::exp(kSlopeStep)), cut, false);
    // r = R - w with w in [cut, R/2], variable log w.
    auto by_gap = [&](double w) { return outer_integrand(R - w); };
    const double right =
        integrate_panels([&](double v) { const double w = std::exp(v); return by_gap(w) * w; }, std::log(cut),
                         std::log(0.5 * R), width, rule) +
        power_tail(by_gap(cut), by_gap(cut * std::exp(kSlopeStep)), cut, false);
    return left + right;
  }
};

}  // namespace

QuadratureResult flux_double_integral(const std::function<double(double)>& h,
                                      const std::function<double(double, double)>& kernel, double R,
                                      double rel_tol) {
  if (!(R > 0.0)) throw std::invalid_argument("flux radius must be positive");
  static const GaussLegendreRule rule = gauss_legendre(10);
  Pass coarse{h, kernel, R, 1.0, rule};
  Pass fine{h, kernel, R, 0.5, rule};
  const double a = coarse.run();
  QuadratureResult out;
  out.value = fine.run();
  out.error = std::abs(out.value - a);
  out.converged = coarse.tails_ok && fine.tails_ok && std::isfinite(out.value) && out.error <= rel_tol * std::abs(out.value);
  if (!coarse.tails_ok || !fine.tails_ok) out.note = "integrand tail is not integrable at the cut-off";
  else if (!out.converged) out.note = "error estimate " + std::to_string(out.error) + " above tolerance";
  return out;
}

}  // namespace coag
