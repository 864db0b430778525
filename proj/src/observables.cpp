#include "coag/observables.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace coag {

InjectionVector injection_vector(const SourceSpec& source) {
  InjectionVector out;
  out.j0 = Eigen::VectorXd::Zero(std::max(source.dimension(), 1));
  for (const auto& e : source.entries()) out.j0 += e.rate * e.composition.counts().cast<double>();
  out.norm = out.j0.sum();
  return out;
}

FluxCurve flux(const PopulationState& state, const KernelSpec& kernel, const std::vector<double>& radii,
               ExecutionPolicy policy) {
  const LatticeIndex& lat = state.lattice();
  const int n_max = lat.n_max();
  const RhsEvaluator ev(kernel, SourceSpec{}, state.lattice_ptr(), policy);
  const Eigen::ArrayXd& n = state.concentrations();

  FluxCurve curve;
  curve.radii = radii;
  curve.flux = Eigen::MatrixXd::Zero(static_cast<Index>(radii.size()), lat.dimension());
  for (std::size_t r = 0; r < radii.size(); ++r) {
    const double R = radii[r];
    if (!(R > 0.0) || R > n_max) throw Error("flux radius " + std::to_string(R) + " outside (0, n_max]");
    if (r > 0 && !(R > radii[r - 1])) throw Error("flux radii must be strictly increasing");
    if (2.0 * R > n_max) curve.warnings.push_back("R = " + std::to_string(R) + " is within a factor 2 of n_max");
    const int inside = static_cast<int>(std::floor(R));
    if (inside < 1) continue;
    const Eigen::ArrayXd partner = ev.partner_rate(n, [inside](int s) { return inside - s + 1; });
    const Index end = lat.shell_range(inside).end;
    curve.flux.row(static_cast<Index>(r)) =
        reduce_range(ev.pool(), policy, end, 512, lat.dimension(),
                     [&](std::ptrdiff_t b, std::ptrdiff_t e, Eigen::VectorXd& acc) {
                       for (Index i = b; i < e; ++i) {
                         const double rate = n[i] * partner[i];
                         if (rate != 0.0) acc += rate * lat.point(i).cast<double>();
                       }
                     })
            .transpose();
  }
  return curve;
}

ScalingFit fit_shell_scaling(const PopulationState& state, double b, double z_lo, double z_hi, double gamma) {
  if (!(b > 0.0 && b < 1.0)) throw Error("fit_shell_scaling needs b in (0, 1)");
  if (!(z_lo > 0.0) || !(z_hi > z_lo)) throw Error("fit_shell_scaling needs 0 < z_lo < z_hi");
  if (z_hi > state.lattice().n_max()) throw Error("fit range extends past n_max");

  ScalingFit fit;
  fit.z_lo = z_lo;
  fit.z_hi = z_hi;
  fit.predicted_exponent = -(3.0 + gamma) / 2.0;
  const int points = static_cast<int>(std::floor(4.0 * std::log2(z_hi / z_lo) + 1e-9)) + 1;
  for (int k = 0; k < points; ++k) {
    const double z = z_lo * std::pow(2.0, k / 4.0);
    const double avg = shell_sum(state, b * z, z) / z;
    if (avg > 0.0 && std::isfinite(avg)) {
      fit.z.push_back(z);
      fit.shell_average.push_back(avg);
    }
  }
  const Index m = static_cast<Index>(fit.z.size());
  if (m < 5) throw InsufficientRange("insufficient dynamic range: " + std::to_string(m) + " usable shells");

  Eigen::MatrixXd A(m, 2);
  Eigen::VectorXd y(m);
  for (Index k = 0; k < m; ++k) {
    A(k, 0) = 1.0;
    A(k, 1) = std::log(fit.z[static_cast<std::size_t>(k)]);
    y[k] = std::log(fit.shell_average[static_cast<std::size_t>(k)]);
  }
  const Eigen::Vector2d coef = A.colPivHouseholderQr().solve(y);
  const double sse = (A * coef - y).squaredNorm();
  const double sigma2 = m > 2 ? sse / static_cast<double>(m - 2) : 0.0;
  const Eigen::Matrix2d cov = sigma2 * (A.transpose() * A).inverse();
  fit.prefactor = std::exp(coef[0]);
  fit.exponent = coef[1];
  fit.exponent_stderr = std::sqrt(std::max(cov(1, 1), 0.0));
  return fit;
}

BoundReport two_sided_bound_check(const PopulationState& state, double b, double C1, double C2, double j0_norm,
                                  double gamma, int source_support, double z_lo, double z_hi) {
  if (!(b > 0.0 && b < 1.0)) throw Error("bound check needs b in (0, 1)");
  if (!(C2 > 0.0) || C1 < C2) throw Error("bound check needs C1 >= C2 > 0");
  const int n_max = state.lattice().n_max();
  const double xi = source_support / b;
  const int first = std::max(static_cast<int>(std::floor(xi)) + 1, z_lo > 0.0 ? static_cast<int>(std::ceil(z_lo)) : 1);
  const int last = z_hi > 0.0 ? std::min(n_max, static_cast<int>(std::floor(z_hi))) : n_max;
  const double amplitude = std::sqrt(j0_norm);

  BoundReport report;
  for (int zi = first; zi <= last; ++zi) {
    const double z = zi;
    const double shape = amplitude * std::pow(z, -(3.0 + gamma) / 2.0);
    BoundRow row{z, C2 * shape, shell_sum(state, b * z, z) / z, C1 * shape, true};
    row.ok = row.lower <= row.value && row.value <= row.upper;
    if (!row.ok) report.violations.push_back(z);
    report.rows.push_back(row);
  }
  return report;
}

BoundConstants calibrate_bound_constants(const PopulationState& state, double b, double j0_norm, double gamma,
                                         double z_lo, double z_hi) {
  BoundConstants c{0.0, std::numeric_limits<double>::infinity()};
  const int last = std::min(state.lattice().n_max(), static_cast<int>(std::floor(z_hi)));
  for (int zi = static_cast<int>(std::ceil(z_lo)); zi <= last; ++zi) {
    const double z = zi;
    const double ratio =
        shell_sum(state, b * z, z) / z / (std::sqrt(j0_norm) * std::pow(z, -(3.0 + gamma) / 2.0));
    c.C1 = std::max(c.C1, ratio);
    c.C2 = std::min(c.C2, ratio);
  }
  return c;
}

double tail_bound_constant(double b, double q, double r) {
  auto kappa = [q](double x) { return q == -1.0 ? std::log(1.0 / x) : (1.0 - std::pow(x, q + 1.0)) / (q + 1.0); };
  return 1.0 / kappa(b) + std::pow(r, q + 1.0) / kappa(r);
}

TailBoundResult tail_bound_from_shells(const PopulationState& state, double b, double c0, double q, double a,
                                       double R) {
  if (!(b > 0.0 && b < 1.0)) throw Error("tail bound needs b in (0, 1)");
  if (!(a > 0.0) || !(R > a)) throw Error("tail bound needs 0 < a < R");
  if (!(c0 > 0.0)) throw Error("tail bound needs c0 > 0");

  // S(z) = sum_{bz <= |alpha| <= z} n changes only where z or bz crosses an integer.
  std::set<double> cuts{a, R};
  for (int s = static_cast<int>(std::ceil(b * a)); s <= static_cast<int>(std::floor(R)); ++s) {
    if (s >= a && s <= R) cuts.insert(s);
    if (s / b >= a && s / b <= R) cuts.insert(s / b);
  }
  auto excess = [&](double z, double shell) { return shell / z - c0 * std::pow(z, q) > 1e-12 * c0 * std::pow(z, q); };
  std::vector<double> offending;
  const std::vector<double> points(cuts.begin(), cuts.end());
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double z = points[k];
    if (excess(z, shell_sum(state, b * z, z))) offending.push_back(z);
    if (k + 1 < points.size()) {
      const double z2 = points[k + 1];
      const double open = shell_sum(state, b * 0.5 * (z + z2), 0.5 * (z + z2));
      if (excess(z, open) || excess(z2, open)) offending.push_back(0.5 * (z + z2));
    }
  }
  if (!offending.empty()) {
    std::string what = "premise violated at z =";
    for (std::size_t k = 0; k < std::min<std::size_t>(offending.size(), 8); ++k) what += " " + std::to_string(offending[k]);
    throw PremiseViolated(what, offending);
  }

  TailBoundResult out;
  out.constant = tail_bound_constant(b, q, a / R);
  const double integral = q == -1.0 ? std::log(R / a) : (std::pow(R, q + 1.0) - std::pow(a, q + 1.0)) / (q + 1.0);
  const double mass = shell_sum(state, a, R);
  out.measured_constant = mass / (c0 * integral);
  out.holds = out.measured_constant <= out.constant;
  return out;
}

}  // namespace coag
