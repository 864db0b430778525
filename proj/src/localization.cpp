#include "coag/localization.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

namespace coag {

namespace {

// From `calibrate_cd 50000` (default seed): half the smallest V / (delta eps^{d+1}) seen on
// uncovered measures, indexed by dimension. d = 1 is vacuous since the simplex is a point.
constexpr double kCalibratedCd[] = {0.0, 1.0, 0.93, 3.6};

void append_grid(int dimension, int k, int component, int remaining, Eigen::VectorXd& scratch,
                 std::vector<Eigen::VectorXd>& out) {
  if (component == dimension - 1) {
    scratch[component] = static_cast<double>(remaining) / k;
    out.push_back(scratch);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    scratch[component] = static_cast<double>(a) / k;
    append_grid(dimension, k, component + 1, remaining - a, scratch, out);
  }
}

}  // namespace

void SimplexMeasure::validate() const {
  double total = 0.0;
  for (const auto& a : atoms) {
    if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) throw Error("simplex measure weight must be non-negative");
    if ((a.theta.array() < 0.0).any() || std::abs(a.theta.sum() - 1.0) > 1e-12)
      throw Error("simplex measure atom is not on the unit simplex");
    if (a.theta.size() != atoms.front().theta.size()) throw Error("simplex measure atoms have mixed dimensions");
    total += a.weight;
  }
  if (std::abs(total - 1.0) > 1e-10) throw Error("simplex measure weights do not sum to 1");
}

LambdaMeasure lambda_measure(const PopulationState& state, double R, double gamma) {
  const LatticeIndex& lat = state.lattice();
  const int d = lat.dimension();
  const int first = std::max(1, static_cast<int>(std::ceil(R)));
  std::map<std::vector<int>, double> rays;
  double z = 0.0;
  for (int s = first; s <= lat.n_max(); ++s) {
    const ShellRange shell = lat.shell_range(s);
    const double weight = std::pow(static_cast<double>(s), gamma);
    for (Index i = shell.begin; i < shell.end; ++i) {
      const double w = weight * state[i];
      if (w == 0.0) continue;
      const auto a = lat.point(i);
      int g = 0;
      for (int j = 0; j < d; ++j) g = std::gcd(g, a[j]);
      std::vector<int> key(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) key[static_cast<std::size_t>(j)] = a[j] / g;
      rays[key] += w;
      z += w;
    }
  }
  if (!(z > 0.0)) throw EmptyTail("empty tail: no lattice mass at |alpha| >= " + std::to_string(R));

  LambdaMeasure out;
  out.z = z;
  out.measure.atoms.reserve(rays.size());
  for (const auto& [key, w] : rays) {
    Eigen::VectorXd theta(d);
    const double size = std::accumulate(key.begin(), key.end(), 0);
    for (int j = 0; j < d; ++j) theta[j] = key[static_cast<std::size_t>(j)] / size;
    out.measure.atoms.push_back({theta, w / z});
  }
  return out;
}

double dispersion(const SimplexMeasure& measure, ThreadPool* pool) {
  const auto& atoms = measure.atoms;
  const auto n = static_cast<std::ptrdiff_t>(atoms.size());
  const ExecutionPolicy fixed{pool ? pool->size() : 1, true};
  const Eigen::VectorXd v = reduce_range(pool, fixed, n, 64, 1, [&](std::ptrdiff_t b, std::ptrdiff_t e, Eigen::VectorXd& acc) {
    for (std::ptrdiff_t i = b; i < e; ++i) {
      const auto& ai = atoms[static_cast<std::size_t>(i)];
      double row = 0.0;
      for (const auto& aj : atoms) row += aj.weight * (ai.theta - aj.theta).squaredNorm();
      acc[0] += ai.weight * row;
    }
  });
  return v[0];
}

double dispersion_from_moments(const SimplexMeasure& measure) {
  if (measure.atoms.empty()) return 0.0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(measure.dimension());
  double second = 0.0;
  for (const auto& a : measure.atoms) {
    mean += a.weight * a.theta;
    second += a.weight * a.theta.squaredNorm();
  }
  return std::max(0.0, 2.0 * (second - mean.squaredNorm()));
}

Eigen::VectorXd source_direction(const SourceSpec& source) {
  if (source.empty()) throw Error("source direction needs a non-empty source");
  Eigen::VectorXd num = Eigen::VectorXd::Zero(source.dimension());
  double den = 0.0;
  for (const auto& e : source.entries()) {
    num += e.rate * e.composition.counts().cast<double>();
    den += e.rate * e.composition.size();
  }
  return num / den;
}

LocalizationProfile localization_profile(const PopulationState& state, const SourceSpec& source,
                                         const std::vector<double>& radii, double epsilon, double b, double gamma) {
  if (!(epsilon > 0.0)) throw Error("localization epsilon must be positive");
  if (!(b > 0.0 && b < 1.0)) throw Error("localization b must be in (0, 1)");
  const LatticeIndex& lat = state.lattice();
  LocalizationProfile profile;
  profile.theta0 = source_direction(source);
  if (profile.theta0.size() != lat.dimension()) throw Error("source dimension does not match state");
  profile.epsilon = epsilon;
  profile.b = b;

  for (const double R : radii) {
    if (!(R > 0.0)) throw Error("localization radii must be positive");
    LocalizationRow row;
    row.R = R;
    row.shell_hi = R / b;
    const int lo = static_cast<int>(std::ceil(R));
    const int hi = std::min(lat.n_max(), static_cast<int>(std::floor(R / b)));
    std::vector<std::pair<double, double>> by_distance;
    double total = 0.0, near_l1 = 0.0, near_l2 = 0.0, size_mass = 0.0;
    Eigen::VectorXd species_mass = Eigen::VectorXd::Zero(lat.dimension());
    for (int s = lo; s <= hi; ++s) {
      const ShellRange shell = lat.shell_range(s);
      for (Index i = shell.begin; i < shell.end; ++i) {
        const double n = state[i];
        if (n == 0.0) continue;
        const Eigen::VectorXd theta = lat.point(i).cast<double>() / static_cast<double>(s);
        const double l1 = (theta - profile.theta0).lpNorm<1>();
        total += n;
        if (l1 <= epsilon) near_l1 += n;
        if ((theta - profile.theta0).norm() <= epsilon) near_l2 += n;
        by_distance.emplace_back(l1, n);
        species_mass += n * lat.point(i).cast<double>();
        size_mass += n * s;
      }
    }
    if (!(total > 0.0)) {
      row.empty = true;
      row.fraction_l1 = row.fraction_euclidean = row.dispersion = row.theta0_err_l1 = std::nan("");
      row.delta90 = row.delta99 = std::nan("");
      profile.rows.push_back(row);
      continue;
    }
    row.fraction_l1 = near_l1 / total;
    row.fraction_euclidean = near_l2 / total;
    row.theta0_err_l1 = (species_mass / size_mass - profile.theta0).lpNorm<1>();
    std::sort(by_distance.begin(), by_distance.end());
    double cumulative = 0.0;
    row.delta90 = row.delta99 = by_distance.back().first;
    bool got90 = false;
    for (const auto& [dist, n] : by_distance) {
      cumulative += n;
      if (!got90 && cumulative >= 0.9 * total) {
        row.delta90 = dist;
        got90 = true;
      }
      if (cumulative >= 0.99 * total) {
        row.delta99 = dist;
        break;
      }
    }
    try {
      row.dispersion = dispersion(lambda_measure(state, R, gamma).measure);
    } catch (const EmptyTail&) {
      row.dispersion = std::nan("");
    }
    profile.rows.push_back(row);
  }
  return profile;
}

std::vector<Eigen::VectorXd> simplex_grid(int dimension, int k) {
  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd scratch(dimension);
  append_grid(dimension, k, 0, k, scratch, out);
  return out;
}

DichotomyResult dichotomy(const SimplexMeasure& measure, double epsilon, double delta, double c_d) {
  if (!(epsilon > 0.0 && epsilon < 1.0) || !(delta > 0.0 && delta < 1.0))
    throw Error("dichotomy needs epsilon, delta in (0, 1)");
  if (!(c_d > 0.0)) throw Error("dichotomy needs c_d > 0");
  measure.validate();
  const int d = measure.dimension();

  DichotomyResult out;
  out.epsilon = epsilon;
  out.delta = delta;
  out.c_d = c_d;
  const double radius = epsilon / 2.0;
  auto ball_mass = [&](const Eigen::VectorXd& c) {
    double m = 0.0;
    for (const auto& a : measure.atoms)
      if ((a.theta - c).norm() < radius) m += a.weight;
    return m;
  };
  auto try_centres = [&](const auto& centres, auto&& get) {
    for (const auto& c : centres) {
      const Eigen::VectorXd& centre = get(c);
      const double m = ball_mass(centre);
      if (m > 1.0 - delta) {
        out.branch = DichotomyResult::Branch::Covered;
        out.center = centre;
        out.mass = m;
        return true;
      }
    }
    return false;
  };
  if (try_centres(measure.atoms, [](const SimplexAtom& a) -> const Eigen::VectorXd& { return a.theta; })) return out;
  const int k = static_cast<int>(std::ceil(4.0 / epsilon - 1e-12));
  if (try_centres(simplex_grid(d, k), [](const Eigen::VectorXd& v) -> const Eigen::VectorXd& { return v; })) return out;

  out.branch = DichotomyResult::Branch::Dispersed;
  out.functional = dispersion(measure);
  const double threshold = c_d * delta * std::pow(epsilon, d + 1);
  if (out.functional < threshold) {
    throw DichotomyViolation("dichotomy violated: V = " + std::to_string(out.functional) + " < c_d delta eps^(d+1) = " +
                             std::to_string(threshold));
  }
  return out;
}

double calibrated_cd(int dimension) {
  if (dimension < 1 || dimension > 3) throw Error("no calibrated dichotomy constant for dimension " + std::to_string(dimension));
  return kCalibratedCd[dimension];
}

EffectiveDirection effective_theta0(const PopulationState& state, double lo, double hi, int bootstrap,
                                    std::uint64_t seed) {
  const LatticeIndex& lat = state.lattice();
  const int d = lat.dimension();
  const int first = std::max(1, static_cast<int>(std::ceil(lo)));
  const int last = std::min(lat.n_max(), static_cast<int>(std::floor(hi)));
  std::vector<Eigen::VectorXd> species;
  std::vector<double> sizes;
  for (int s = first; s <= last; ++s) {
    const ShellRange shell = lat.shell_range(s);
    const Eigen::ArrayXd n = state.concentrations().segment(shell.begin, shell.count());
    const Eigen::VectorXd m = lat.points().middleCols(shell.begin, shell.count()).cast<double>() * n.matrix();
    if (m.sum() == 0.0) continue;
    species.push_back(m);
    sizes.push_back(m.sum());
  }
  if (species.empty()) throw EmptyTail("effective direction: no mass in the requested shells");

  auto mean_of = [&](const std::vector<std::size_t>& pick) {
    Eigen::VectorXd num = Eigen::VectorXd::Zero(d);
    double den = 0.0;
    for (std::size_t k : pick) {
      num += species[k];
      den += sizes[k];
    }
    return Eigen::VectorXd(num / den);
  };
  std::vector<std::size_t> all(species.size());
  std::iota(all.begin(), all.end(), 0);
  EffectiveDirection out;
  out.theta = mean_of(all);
  out.spread = Eigen::VectorXd::Zero(d);
  if (bootstrap > 1 && species.size() > 1) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, species.size() - 1);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sum2 = Eigen::VectorXd::Zero(d);
    std::vector<std::size_t> sample(species.size());
    for (int r = 0; r < bootstrap; ++r) {
      for (auto& k : sample) k = pick(rng);
      const Eigen::VectorXd t = mean_of(sample);
      sum += t;
      sum2 += t.cwiseProduct(t);
    }
    const Eigen::VectorXd mean = sum / bootstrap;
    out.spread = (sum2 / bootstrap - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
  }
  return out;
}

SimplexMeasure random_simplex_measure(int dimension, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto point = [&] {
    Eigen::VectorXd t(dimension);
    for (int j = 0; j < dimension; ++j) t[j] = expo(rng);
    return Eigen::VectorXd(t / t.sum());
  };
  auto vertex = [&] {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(dimension);
    t[std::uniform_int_distribution<int>(0, dimension - 1)(rng)] = 1.0;
    return t;
  };
  SimplexMeasure m;
  const int shape = std::uniform_int_distribution<int>(0, 3)(rng);
  const int atoms = std::uniform_int_distribution<int>(1, 12)(rng);
  const Eigen::VectorXd center = point();
  const double spread = 0.3 * unif(rng);
  for (int k = 0; k < atoms; ++k) {
    Eigen::VectorXd theta;
    switch (shape) {
      case 0: theta = point(); break;
      case 1: theta = (1.0 - spread * unif(rng)) * center + spread * unif(rng) * point(); break;
      case 2: theta = k == 0 ? center : point(); break;
      default: theta = unif(rng) < 0.5 ? vertex() : Eigen::VectorXd((vertex() + vertex()) / 2.0); break;
    }
    theta /= theta.sum();
    m.atoms.push_back({theta, expo(rng)});
  }
  if (shape == 2 && atoms > 1) {
    // one heavy atom plus light satellites
    const double light = 0.4 * unif(rng);
    double rest = 0.0;
    for (int k = 1; k < atoms; ++k) rest += m.atoms[k].weight;
    m.atoms[0].weight = (1.0 - light) * rest / light;
  }
  double total = 0.0;
  for (const auto& a : m.atoms) total += a.weight;
  for (auto& a : m.atoms) a.weight /= total;
  return m;
}

}  // namespace coag
