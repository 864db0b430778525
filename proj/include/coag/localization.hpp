#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coag/dynamics.hpp"
#include "coag/lattice.hpp"
#include "coag/parallel.hpp"

namespace coag {

struct SimplexAtom {
  Eigen::VectorXd theta;
  double weight = 0.0;
};

/// Finitely supported probability measure on the unit simplex.
struct SimplexMeasure {
  std::vector<SimplexAtom> atoms;

  int dimension() const { return atoms.empty() ? 0 : static_cast<int>(atoms.front().theta.size()); }
  /// Throws unless weights are non-negative and sum to 1 within 1e-10 and every theta is on the simplex.
  void validate() const;
};

class EmptyTail : public Error {
 public:
  using Error::Error;
};

struct LambdaMeasure {
  SimplexMeasure measure;
  double z = 0.0;  // sum_{|alpha| >= R} |alpha|^gamma n_alpha
};

/// Directions alpha/|alpha| of the tail |alpha| >= R weighted by |alpha|^gamma n_alpha;
/// compositions on the same ray share one atom.
LambdaMeasure lambda_measure(const PopulationState& state, double R, double gamma);

/// sum_{a,b} w_a w_b |theta_a - theta_b|^2 (Euclidean), evaluated as the double sum.
double dispersion(const SimplexMeasure& measure, ThreadPool* pool = nullptr);
/// Same value through 2 (E|theta|^2 - |E theta|^2).
double dispersion_from_moments(const SimplexMeasure& measure);

/// sum s alpha / sum s |alpha|.
Eigen::VectorXd source_direction(const SourceSpec& source);

struct LocalizationRow {
  double R = 0.0;
  double shell_hi = 0.0;
  bool empty = false;
  double fraction_l1 = 0.0;         // shell mass with |theta - theta0|_1 <= epsilon
  double fraction_euclidean = 0.0;  // same with the Euclidean distance
  double dispersion = 0.0;          // V(R) of the tail lambda measure
  double theta0_err_l1 = 0.0;       // |mean direction of the shell - theta0|_1
  double delta90 = 0.0;             // smallest l1 radius holding 90% of the shell mass
  double delta99 = 0.0;
};

struct LocalizationProfile {
  Eigen::VectorXd theta0;
  double epsilon = 0.0;
  double b = 0.5;
  std::vector<LocalizationRow> rows;
};

/// Shell statistics on [R, R/b] (fractions, mean direction, delta*) and the tail dispersion V(R).
LocalizationProfile localization_profile(const PopulationState& state, const SourceSpec& source,
                                         const std::vector<double>& radii, double epsilon, double b, double gamma);

class DichotomyViolation : public Error {
 public:
  using Error::Error;
};

struct DichotomyResult {
  enum class Branch { Covered, Dispersed };
  Branch branch = Branch::Covered;
  double epsilon = 0.0;
  double delta = 0.0;
  double c_d = 0.0;
  Eigen::VectorXd center;  // covered: ball centre
  double mass = 0.0;       // covered: ball mass
  double functional = 0.0;  // dispersed: V
};

/// Either some open Euclidean ball of radius epsilon/2 (centred on an atom or on the simplex
/// grid of pitch at most epsilon/4) holds mass > 1 - delta, or V >= c_d delta epsilon^{d+1}.
/// Throws DichotomyViolation when neither holds.
DichotomyResult dichotomy(const SimplexMeasure& measure, double epsilon, double delta, double c_d);

/// Dichotomy constant shipped for dimension d (from tools/calibrate_cd).
double calibrated_cd(int dimension);

/// Random finitely supported simplex measure mixing spread, clustered and two-atom shapes;
/// used by the dichotomy calibration and its tests.
SimplexMeasure random_simplex_measure(int dimension, std::mt19937_64& rng);

/// Every point of the simplex whose coordinates are multiples of 1/k.
std::vector<Eigen::VectorXd> simplex_grid(int dimension, int k);

struct EffectiveDirection {
  Eigen::VectorXd theta;
  Eigen::VectorXd spread;  // bootstrap standard deviation per component
};

/// Mass-weighted mean direction sum alpha n / sum |alpha| n over lo <= |alpha| <= hi, with a
/// shell-bootstrap spread (seeded).
EffectiveDirection effective_theta0(const PopulationState& state, double lo, double hi, int bootstrap = 200,
                                    std::uint64_t seed = 7);

}  // namespace coag
