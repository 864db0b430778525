// Estimates the dichotomy constant per dimension: the smallest V / (delta eps^{d+1}) over
// uncovered measures found by random search plus local refinement, halved for margin.
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "coag/localization.hpp"

namespace {

constexpr double kGrid[] = {0.05, 0.1, 0.3};

// Smallest ratio over the (eps, delta) grid, or +inf when every pair is covered.
double worst_ratio(const coag::SimplexMeasure& m, int d) {
  double worst = std::numeric_limits<double>::infinity();
  for (double eps : kGrid)
    for (double delta : kGrid) {
      const coag::DichotomyResult r = coag::dichotomy(m, eps, delta, 1e-300);
      if (r.branch == coag::DichotomyResult::Branch::Dispersed)
        worst = std::min(worst, r.functional / (delta * std::pow(eps, d + 1)));
    }
  return worst;
}

coag::SimplexMeasure perturb(coag::SimplexMeasure m, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, scale);
  for (auto& a : m.atoms) {
    for (Eigen::Index j = 0; j < a.theta.size(); ++j) a.theta[j] = std::max(0.0, a.theta[j] + g(rng));
    a.theta /= a.theta.sum();
    a.weight = std::max(1e-6, a.weight * std::exp(g(rng)));
  }
  double total = 0.0;
  for (const auto& a : m.atoms) total += a.weight;
  for (auto& a : m.atoms) a.weight /= total;
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const long samples = argc > 1 ? std::atol(argv[1]) : 50000;
  const unsigned long long seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 20261016ULL;
  for (int d = 2; d <= 3; ++d) {
    std::mt19937_64 rng(seed + static_cast<unsigned long long>(d));
    double best = std::numeric_limits<double>::infinity();
    coag::SimplexMeasure argmin;
    for (long s = 0; s < samples; ++s) {
      coag::SimplexMeasure m = coag::random_simplex_measure(d, rng);
      double r = worst_ratio(m, d);
      if (!std::isfinite(r)) continue;
      // Greedy descent on the ratio from promising starts.
      if (r < 4.0 * best) {
        for (int it = 0; it < 200; ++it) {
          const coag::SimplexMeasure trial = perturb(m, 0.02, rng);
          const double tr = worst_ratio(trial, d);
          if (tr < r) {
            m = trial;
            r = tr;
          }
        }
      }
      if (r < best) {
        best = r;
        argmin = m;
      }
    }
    std::printf("d = %d  min ratio = %.6g  c_d = %.6g  (atoms in minimiser: %zu)\n", d, best, 0.5 * best,
                argmin.atoms.size());
  }
  return 0;
}
