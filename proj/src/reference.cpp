#include "coag/reference.hpp"

#include <cmath>
#include <random>

namespace coag {

PowerLawFluxSolution::PowerLawFluxSolution(double c0, const KernelSpec& kernel, Eigen::VectorXd theta0,
                                           double exponent_shift)
    : c0_(c0), gamma_(kernel.gamma()), theta0_(std::move(theta0)), shift_(exponent_shift) {
  if (!(c0 > 0.0)) throw Error("power-law solution needs c0 > 0");
  if (theta0_.size() < 1 || (theta0_.array() < 0.0).any() || std::abs(theta0_.sum() - 1.0) > 1e-12)
    throw Error("power-law solution direction must lie on the unit simplex");
  const ExistenceVerdict v = existence_gate(kernel);
  if (!v.stationary_expected)
    throw Error("power-law flux family needs gamma + 2p < 1, got " + std::to_string(v.gamma_plus_2p));
}

PowerLawFluxSolution PowerLawFluxSolution::scaled(double factor) const {
  PowerLawFluxSolution out = *this;
  out.c0_ *= factor;
  return out;
}

void require_homogeneous(const KernelSpec& kernel, int dimension) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int k = 0; k < 16; ++k) {
    Eigen::VectorXd x(dimension), y(dimension);
    for (int j = 0; j < dimension; ++j) {
      x[j] = u(rng);
      y[j] = u(rng);
    }
    const double lambda = 0.1 + 10.0 * u(rng);
    const double base = evaluate(kernel, x, y);
    const double scaled = evaluate(kernel, (lambda * x).eval(), (lambda * y).eval());
    if (std::abs(scaled - std::pow(lambda, kernel.gamma()) * base) > 1e-9 * scaled)
      throw Error("kernel '" + kernel.name() + "' is not homogeneous of degree gamma");
  }
}

double max_relative_deviation(const FluxCurve& curve) {
  const Eigen::VectorXd total = curve.total();
  if (total.size() == 0) return 0.0;
  const double mean = total.mean();
  return (total.array() - mean).abs().maxCoeff() / std::abs(mean);
}

namespace {

QuadratureFlux run_flux(const std::function<double(double)>& h, const std::function<double(double, double)>& k,
                        const std::vector<double>& radii, const Eigen::VectorXd& split, double scale) {
  QuadratureFlux out;
  out.curve.radii = radii;
  out.curve.flux = Eigen::MatrixXd::Zero(static_cast<Index>(radii.size()), split.size());
  for (std::size_t r = 0; r < radii.size(); ++r) {
    const QuadratureResult q = flux_double_integral(h, k, radii[r]);
    out.curve.flux.row(static_cast<Index>(r)) = (scale * q.value) * split.transpose();
    out.error.push_back(scale * q.error);
    if (!q.converged) {
      out.converged = false;
      out.curve.warnings.push_back("R = " + std::to_string(radii[r]) + ": " + q.note);
    }
  }
  return out;
}

std::function<double(double, double)> along(const KernelSpec& kernel, const Eigen::VectorXd& theta0) {
  return [kernel, theta0](double r, double rho) {
    return evaluate(kernel, (r * theta0).eval(), (rho * theta0).eval());
  };
}

}  // namespace

QuadratureFlux c4_flux(const PowerLawFluxSolution& solution, const KernelSpec& kernel, const std::vector<double>& radii) {
  const int d = solution.dimension();
  require_homogeneous(kernel, d);
  const double inner_exponent = d - 1 + solution.exponent();
  auto h = [inner_exponent](double r) { return std::pow(r, inner_exponent); };
  const double c0 = solution.c0();
  return run_flux(h, along(kernel, solution.theta0()), radii, solution.theta0(), c0 * c0 / d);
}

bool RadialMeasure::integrable(double gamma, double p) const {
  return gamma + p + exponent < -1.0 && 1.0 - p + exponent > -1.0;
}

RadialReduction reduce_to_radial(const PowerLawFluxSolution& solution, const KernelSpec& kernel) {
  RadialReduction out;
  out.theta0 = solution.theta0();
  out.source_dimension = solution.dimension();
  out.measure = {solution.c0(), solution.exponent() + solution.dimension() - 1};
  out.kernel = along(kernel, out.theta0);
  return out;
}

RadialReduction reduce_to_radial(const SimplexMeasure& direction, double c0, double exponent, const KernelSpec& kernel) {
  direction.validate();
  const double v = dispersion(direction);
  if (v > 1e-10) throw Error("measure is not a point mass in direction (dispersion " + std::to_string(v) + ")");
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(direction.dimension());
  for (const auto& a : direction.atoms) theta += a.weight * a.theta;
  RadialReduction out;
  out.theta0 = theta / theta.sum();
  out.source_dimension = direction.dimension();
  out.measure = {c0, exponent + direction.dimension() - 1};
  out.kernel = along(kernel, out.theta0);
  return out;
}

QuadratureFlux radial_flux(const RadialReduction& reduction, const std::vector<double>& radii) {
  const RadialMeasure m = reduction.measure;
  auto h = [m](double r) { return std::pow(r, m.exponent); };
  return run_flux(h, reduction.kernel, radii, Eigen::VectorXd::Ones(1), m.c0 * m.c0);
}

Eigen::MatrixXd direct_kernel_matrix(const LatticeIndex& lattice, const KernelSpec& kernel) {
  if (lattice.count() > 500) throw Error("direct kernel matrices are limited to lattices of at most 500 points");
  const Index m = lattice.count();
  Eigen::MatrixXd k(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) k(i, j) = evaluate(kernel, lattice.composition(i), lattice.composition(j));
  return k;
}

RhsResult brute_force_rhs(const PopulationState& state, const KernelSpec& kernel, const SourceSpec& source) {
  return brute_force_rhs(state, direct_kernel_matrix(state.lattice(), kernel), source);
}

RhsResult brute_force_rhs(const PopulationState& state, const Eigen::MatrixXd& rates, const SourceSpec& source) {
  const LatticeIndex& lat = state.lattice();
  if (lat.count() > 500) throw Error("brute_force_rhs is limited to lattices of at most 500 points");
  const Index m = lat.count();
  if (rates.rows() != m || rates.cols() != m) throw Error("rate matrix does not match the lattice");
  const int d = lat.dimension();
  RhsResult r;
  r.gain = Eigen::ArrayXd::Zero(m);
  r.loss = Eigen::ArrayXd::Zero(m);
  r.outflux = Eigen::VectorXd::Zero(d);
  const Eigen::ArrayXd s = source.empty() ? Eigen::ArrayXd::Zero(m) : source.on_lattice(lat);
  std::vector<int> sum(static_cast<std::size_t>(d));
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      const double rate = rates(i, j) * state[i] * state[j];
      r.loss[i] += rate;
      for (int c = 0; c < d; ++c) sum[static_cast<std::size_t>(c)] = lat.point(i)[c] + lat.point(j)[c];
      const Index k = lat.index_of(std::span<const int>(sum));
      if (k >= 0) {
        r.gain[k] += 0.5 * rate;
      } else {
        for (int c = 0; c < d; ++c) r.outflux[c] += lat.point(i)[c] * rate;
      }
    }
  }
  r.derivative = r.gain - r.loss + s;
  return r;
}

}  // namespace coag
