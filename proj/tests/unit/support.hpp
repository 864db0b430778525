#pragma once

#include <random>

#include "coag/dynamics.hpp"
#include "coag/kernels.hpp"
#include "coag/lattice.hpp"

namespace coag::testing {

inline PopulationState random_state(std::shared_ptr<const LatticeIndex> lattice, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::ArrayXd n(lattice->count());
  for (Index i = 0; i < n.size(); ++i) n[i] = u(rng) / (1.0 + lattice->size_of(i));
  return PopulationState(std::move(lattice), n);
}

inline SourceSpec two_species_source(double a = 2.0, double b = 1.0) {
  SourceSpec s;
  s.add(Composition{1, 0}, a);
  s.add(Composition{0, 1}, b);
  return s;
}

inline std::vector<KernelSpec> sample_kernels(int dimension) {
  return {KernelSpec::constant(1.5),
          KernelSpec::additive(0.7),
          KernelSpec::product_powerlaw(-0.5, 0.25, 1.3),
          KernelSpec::product_powerlaw(0.4, -0.2),
          KernelSpec::brownian(1.0, std::vector<double>(static_cast<std::size_t>(dimension), 1.0))};
}

}  // namespace coag::testing
