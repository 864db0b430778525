#include <doctest.h>

#include <cmath>
#include <random>

#include "coag/dynamics.hpp"
#include "coag/observables.hpp"
#include "coag/reference.hpp"
#include "support.hpp"

using namespace coag;

namespace {

double max_rel(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  const double scale = std::max(b.abs().maxCoeff(), 1e-300);
  return (a - b).abs().maxCoeff() / scale;
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("monomer-dimer oracle") {
    auto lat = enumerate(1, 2);
    const double n1 = 0.7, n2 = 0.3;
    PopulationState s(lat, (Eigen::ArrayXd(2) << n1, n2).finished());
    SourceSpec src;
    src.add(Composition{1}, 1.0);
    const RhsResult r = rhs(s, KernelSpec::constant(), src);
    CHECK(r.gain[0] == 0.0);
    CHECK(r.gain[1] == doctest::Approx(0.5 * n1 * n1));
    CHECK(r.loss[0] == doctest::Approx(n1 * (n1 + n2)));
    CHECK(r.loss[1] == doctest::Approx(n2 * (n1 + n2)));
    CHECK(r.derivative[0] == doctest::Approx(1.0 - n1 * (n1 + n2)));
    CHECK(r.derivative[1] == doctest::Approx(0.5 * n1 * n1 - n2 * (n1 + n2)));
    // pairs (1,2), (2,1), (2,2) leave the lattice
    CHECK(r.outflux[0] == doctest::Approx(3 * n1 * n2 + 2 * n2 * n2));
  }

  TEST_CASE("fast right-hand side matches the brute-force loop") {
    std::mt19937_64 rng(11);
    for (int d = 1; d <= 3; ++d) {
      auto lat = enumerate(d, d == 1 ? 30 : (d == 2 ? 12 : 6));
      SourceSpec src;
      Eigen::VectorXi e = Eigen::VectorXi::Zero(d);
      e[0] = 1;
      src.add(Composition(e), 1.5);
      for (const auto& k : testing::sample_kernels(d)) {
        const PopulationState s = testing::random_state(lat, rng);
        const RhsResult fast = rhs(s, k, src), slow = brute_force_rhs(s, k, src);
        CHECK_MESSAGE(max_rel(fast.gain, slow.gain) < 1e-12, k.name());
        CHECK_MESSAGE(max_rel(fast.loss, slow.loss) < 1e-12, k.name());
        CHECK_MESSAGE(max_rel(fast.outflux.array(), slow.outflux.array()) < 1e-12, k.name());
      }
    }
  }

  TEST_CASE("property: species mass balance holds for any state") {
    std::mt19937_64 rng(2);
    auto lat = enumerate(2, 16);
    const SourceSpec src = testing::two_species_source();
    for (const auto& k : testing::sample_kernels(2)) {
      const PopulationState s = testing::random_state(lat, rng);
      const RhsResult r = rhs(s, k, src);
      const Eigen::VectorXd change = lat->points().cast<double>() * r.derivative.matrix();
      const Eigen::VectorXd expected = injection_vector(src).j0 - r.outflux;
      CHECK((change - expected).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + r.outflux.norm()));
    }
  }

  TEST_CASE("reproducible reductions are bit-identical across thread counts") {
    std::mt19937_64 rng(8);
    auto lat = enumerate(2, 60);
    const PopulationState s = testing::random_state(lat, rng);
    const SourceSpec src = testing::two_species_source();
    const KernelSpec k = KernelSpec::brownian(1.0, {1.0, 1.0});
    RhsEvaluator one(k, src, lat, {1, true}), four(k, src, lat, {4, true});
    const RhsResult a = one(s.concentrations()), b = four(s.concentrations());
    CHECK((a.derivative == b.derivative).all());
    CHECK((a.outflux.array() == b.outflux.array()).all());
  }

  TEST_CASE("steady state: sweep and Runge-Kutta agree and balance the source") {
    auto lat = enumerate(2, 24);
    const SourceSpec src = testing::two_species_source();
    const KernelSpec k = KernelSpec::constant();
    SolverOptions opt;
    const SteadyStateResult sweep = integrate_to_steady_state(PopulationState(lat), k, src, opt);
    REQUIRE(sweep.report.status == SolverStatus::Converged);
    CHECK(sweep.report.outflux[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(sweep.report.outflux[1] == doctest::Approx(1.0).epsilon(1e-6));
    opt.method = SolverMethod::RungeKutta;
    opt.tol = 1e-7;
    const SteadyStateResult rk = integrate_to_steady_state(PopulationState(lat), k, src, opt);
    REQUIRE(rk.report.status == SolverStatus::Converged);
    CHECK(max_rel(rk.state.concentrations(), sweep.state.concentrations()) < 1e-5);
    CHECK(relative_residual(rhs(sweep.state, k, src), src.on_lattice(*lat)) < 1e-7);
  }

  TEST_CASE("kernels past the existence threshold are reported as diverged") {
    auto lat = enumerate(2, 32);
    const SourceSpec src = testing::two_species_source();
    const SteadyStateResult r = integrate_to_steady_state(PopulationState(lat), KernelSpec::additive(), src);
    CHECK(r.report.status == SolverStatus::Diverged);
    CHECK_FALSE(r.report.converged);
    CHECK(r.report.gamma_plus_2p == doctest::Approx(1.0));
    CHECK(r.report.message.find("gamma + 2p") != std::string::npos);
  }

  TEST_CASE("a tiny step budget is reported as exhausted") {
    auto lat = enumerate(2, 24);
    SolverOptions opt;
    opt.max_steps = 3;
    const SteadyStateResult r =
        integrate_to_steady_state(PopulationState(lat), KernelSpec::constant(), testing::two_species_source(), opt);
    CHECK(r.report.status == SolverStatus::BudgetExhausted);
    CHECK(r.report.steps == 3);
  }

  TEST_CASE("weak form equals the pairing of the test function with the right-hand side") {
    std::mt19937_64 rng(4);
    auto lat = enumerate(2, 32);
    const PopulationState s = testing::random_state(lat, rng);
    const SourceSpec src = testing::two_species_source();
    const KernelSpec k = KernelSpec::product_powerlaw(-0.5, 0.0);
    const TestFunction phi = [](const Composition& a) { return a.size() <= 10 ? a[0] * 1.0 + 0.5 * a[1] : 0.0; };
    const WeakFormResult w = weak_form_residual(s, k, src, phi);
    const RhsResult r = rhs(s, k, src);
    double pairing = 0.0;
    for (Index i = 0; i < lat->count(); ++i) pairing += phi(lat->composition(i)) * r.derivative[i];
    CHECK(w.value == doctest::Approx(pairing).epsilon(1e-11));
    CHECK(w.positive_scale > 0.0);
    CHECK_FALSE(w.truncation_warning);
    const WeakFormResult edge = weak_form_residual(s, k, src, [](const Composition&) { return 1.0; });
    CHECK(edge.truncation_warning);
  }

  TEST_CASE("source validation") {
    SourceSpec src;
    CHECK_THROWS_AS(src.add(Composition{1, 0}, -1.0), Error);
    src.add(Composition{9, 0}, 1.0);
    CHECK(src.support_bound() == 9);
    CHECK_THROWS_AS(src.on_lattice(*enumerate(2, 8)), Error);
    CHECK(solver_method_from_string("runge_kutta") == SolverMethod::RungeKutta);
    CHECK_THROWS_AS(solver_method_from_string("euler"), Error);
  }
}
