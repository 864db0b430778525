#include <doctest.h>

#include <cmath>
#include <random>

#include "coag/observables.hpp"
#include "support.hpp"

using namespace coag;

namespace {

// Shell k of a d = 2 lattice holds k + 1 points; give it total mass k^{1-a}, so the
// shell average decays like z^{1-a}.
PopulationState planted(int n_max, double a) {
  auto lat = enumerate(2, n_max);
  Eigen::ArrayXd n(lat->count());
  for (Index i = 0; i < n.size(); ++i) {
    const double k = lat->size_of(i);
    n[i] = std::pow(k, 1.0 - a) / (k + 1.0);
  }
  return PopulationState(lat, n);
}

}  // namespace

TEST_SUITE("observables") {
  TEST_CASE("injection vector") {
    const InjectionVector j = injection_vector(testing::two_species_source());
    CHECK(j.j0[0] == 2.0);
    CHECK(j.j0[1] == 1.0);
    CHECK(j.norm == 3.0);
  }

  TEST_CASE("flux matches its defining double sum") {
    std::mt19937_64 rng(6);
    auto lat = enumerate(2, 10);
    const PopulationState s = testing::random_state(lat, rng);
    for (const auto& k : testing::sample_kernels(2)) {
      const std::vector<double> radii{1.0, 3.5, 6.0};
      const FluxCurve c = flux(s, k, radii);
      for (std::size_t r = 0; r < radii.size(); ++r) {
        Eigen::Vector2d a = Eigen::Vector2d::Zero();
        for (Index i = 0; i < lat->count(); ++i)
          for (Index j = 0; j < lat->count(); ++j)
            if (lat->size_of(i) <= radii[r] && lat->size_of(j) > radii[r] - lat->size_of(i))
              a += lat->point(i).cast<double>() * evaluate(k, lat->composition(i), lat->composition(j)) * s[i] * s[j];
        CHECK(c.flux(static_cast<Index>(r), 0) == doctest::Approx(a[0]).epsilon(1e-12));
        CHECK(c.flux(static_cast<Index>(r), 1) == doctest::Approx(a[1]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("flux rejects bad radii and warns near the boundary") {
    auto lat = enumerate(2, 10);
    const PopulationState s(lat, Eigen::ArrayXd::Ones(lat->count()));
    CHECK_THROWS_AS(flux(s, KernelSpec::constant(), {11.0}), Error);
    CHECK_THROWS_AS(flux(s, KernelSpec::constant(), {4.0, 3.0}), Error);
    CHECK_FALSE(flux(s, KernelSpec::constant(), {6.0}).warnings.empty());
  }

  TEST_CASE("stationary flux is flat at the injection vector") {
    auto lat = enumerate(2, 32);
    const SourceSpec src = testing::two_species_source();
    const auto run = integrate_to_steady_state(PopulationState(lat), KernelSpec::constant(), src);
    const FluxCurve c = flux(run.state, KernelSpec::constant(), {1, 2, 3, 5, 8});
    for (Index r = 0; r < 5; ++r) {
      CHECK(c.flux(r, 0) == doctest::Approx(2.0).epsilon(1e-6));
      CHECK(c.flux(r, 1) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("planted power law is recovered by the shell fit") {
    const PopulationState s = planted(256, 2.5);
    const ScalingFit fit = fit_shell_scaling(s, 0.5, 16, 128, 0.0);
    CHECK(fit.exponent == doctest::Approx(-1.5).epsilon(0.02));
    CHECK(fit.predicted_exponent == -1.5);
    CHECK(fit.z.size() >= 5);
    CHECK_THROWS_AS(fit_shell_scaling(s, 0.5, 16, 17, 0.0), InsufficientRange);
  }

  TEST_CASE("two-sided bounds with calibrated constants") {
    const PopulationState s = planted(128, 2.5);
    const BoundConstants c = calibrate_bound_constants(s, 0.5, 4.0, 0.0, 8, 64);
    CHECK(c.C2 <= c.C1);
    const BoundReport ok = two_sided_bound_check(s, 0.5, c.C1, c.C2, 4.0, 0.0, 1, 8, 64);
    CHECK(ok.violations.empty());
    CHECK_FALSE(ok.rows.empty());
    const BoundReport tight = two_sided_bound_check(s, 0.5, 0.9 * c.C1, c.C2, 4.0, 0.0, 1, 8, 64);
    CHECK_FALSE(tight.violations.empty());
  }

  TEST_CASE("interval bound from shell averages") {
    CHECK(tail_bound_constant(0.5, -1.0, 0.25) == doctest::Approx(1.0 / std::log(2.0) + 1.0 / std::log(4.0)));
    const double q = -1.5, b = 0.5, r = 0.125;
    const auto kappa = [q](double x) { return (1.0 - std::pow(x, q + 1)) / (q + 1); };
    CHECK(tail_bound_constant(b, q, r) == doctest::Approx(1.0 / kappa(b) + std::pow(r, q + 1) / kappa(r)));

    const PopulationState s = planted(128, 2.5);
    const double c0 = calibrate_bound_constants(s, b, 1.0, 0.0, 16, 128).C1;
    const TailBoundResult t = tail_bound_from_shells(s, b, c0 * 1.0000001, q, 16, 128);
    CHECK(t.holds);
    CHECK(t.measured_constant <= t.constant);
    CHECK_THROWS_AS(tail_bound_from_shells(s, b, 0.5 * c0, q, 16, 128), PremiseViolated);
  }
}
