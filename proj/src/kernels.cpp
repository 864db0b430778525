#include "coag/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace coag {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string describe(const Eigen::VectorXd& v) {
  std::ostringstream os;
  os << '(';
  for (Index j = 0; j < v.size(); ++j) os << (j ? "," : "") << v[j];
  os << ')';
  return os.str();
}

double checked_size(const Eigen::VectorXd& x) {
  if ((x.array() < 0.0).any() || !x.allFinite()) throw KernelEvaluationError("kernel argument outside the positive cone: " + describe(x));
  const double s = x.sum();
  if (!(s > 0.0)) throw KernelEvaluationError("kernel argument is the origin");
  return s;
}

double raw_rate(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double sx = checked_size(x);
  const double sy = checked_size(y);
  return std::visit(
      overloaded{
          [&](const ConstantForm& f) { return f.c; },
          [&](const BrownianForm& f) {
            const Eigen::Map<const Eigen::VectorXd> v(f.volumes.data(), static_cast<Index>(f.volumes.size()));
            if (v.size() != x.size()) throw KernelEvaluationError("brownian volumes do not match dimension");
            const double a = std::cbrt(v.dot(x));
            const double b = std::cbrt(v.dot(y));
            return f.C * (1.0 / a + 1.0 / b) * (a + b);
          },
          [&](const ProductPowerLawForm& f) { return f.prefactor * envelope_shape(sx, sy, f.gamma, f.p); },
          [&](const AdditiveForm& f) { return f.prefactor * (sx + sy); },
          [&](const SizeTableForm& f) {
            const double rx = std::round(sx), ry = std::round(sy);
            if (std::abs(rx - sx) > 1e-9 || std::abs(ry - sy) > 1e-9)
              throw KernelEvaluationError("size table kernel needs integer sizes");
            if (rx < 1 || ry < 1 || rx > f.table.rows() || ry > f.table.cols())
              throw KernelEvaluationError("size table kernel queried outside its table at sizes " +
                                          std::to_string(rx) + ", " + std::to_string(ry));
            return f.table(static_cast<Index>(rx) - 1, static_cast<Index>(ry) - 1);
          },
          [&](const CallableForm& f) { return f.rate(x, y); },
          [&](const ReducedForm& f) { return evaluate(*f.base, x, y) * std::pow(sx, f.p) * std::pow(sy, f.p); },
      },
      spec.form());
}

// Representative compositions of size s in d parts for the deterministic envelope sweep.
std::vector<Eigen::VectorXi> representatives(int d, int s, std::mt19937_64& rng) {
  std::vector<Eigen::VectorXi> out;
  const LatticeIndex shell_lattice(d, s);
  const ShellRange shell = shell_lattice.shell_range(s);
  if (shell.count() <= 8) {
    for (Index i = shell.begin; i < shell.end; ++i) out.emplace_back(shell_lattice.point(i));
    return out;
  }
  for (int j = 0; j < d; ++j) out.push_back(Eigen::VectorXi::Unit(d, j) * s);
  Eigen::VectorXi centre = Eigen::VectorXi::Constant(d, s / d);
  for (int j = 0; j < s % d; ++j) centre[j] += 1;
  out.push_back(centre);
  std::uniform_int_distribution<Index> pick(shell.begin, shell.end - 1);
  for (int k = 0; k < 3; ++k) out.emplace_back(shell_lattice.point(pick(rng)));
  return out;
}

Eigen::VectorXi random_composition(int d, int s, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> cut(0, s);
  std::vector<int> bars(static_cast<std::size_t>(d - 1));
  for (auto& b : bars) b = cut(rng);
  std::sort(bars.begin(), bars.end());
  Eigen::VectorXi out(d);
  int prev = 0;
  for (int j = 0; j < d - 1; ++j) {
    out[j] = bars[static_cast<std::size_t>(j)] - prev;
    prev = bars[static_cast<std::size_t>(j)];
  }
  out[d - 1] = s - prev;
  return out;
}

}  // namespace

KernelSpec::KernelSpec(KernelForm form, double gamma, double p, double c1, double c2)
    : form_(std::move(form)), gamma_(gamma), p_(p), c1_(c1), c2_(c2) {
  if (!std::isfinite(gamma) || !std::isfinite(p)) throw Error("kernel exponents must be finite");
  if (!(c1 > 0.0) || !(c2 >= c1) || !std::isfinite(c2)) throw Error("kernel envelope needs 0 < c1 <= c2 < inf");
}

KernelSpec KernelSpec::constant(double c) {
  if (!(c > 0.0)) throw Error("constant kernel needs c > 0");
  return {ConstantForm{c}, 0.0, 0.0, c, c};
}

KernelSpec KernelSpec::brownian(double C, std::vector<double> volumes) {
  if (!(C > 0.0)) throw Error("brownian kernel needs C > 0");
  if (volumes.empty()) throw Error("brownian kernel needs monomer volumes");
  for (double v : volumes)
    if (!(v > 0.0)) throw Error("brownian monomer volumes must be positive");
  const auto [lo, hi] = std::minmax_element(volumes.begin(), volumes.end());
  const double kappa = std::cbrt(*lo / *hi);
  // Equal volumes give K / Phi in [C, 2^{4/3} C]; unequal volumes widen that by kappa.
  return {BrownianForm{C, std::move(volumes)}, 0.0, 1.0 / 3.0, kappa * C, std::pow(2.0, 4.0 / 3.0) * C / kappa};
}

KernelSpec KernelSpec::product_powerlaw(double gamma, double p, double prefactor) {
  if (!(prefactor > 0.0)) throw Error("product_powerlaw kernel needs prefactor > 0");
  return {ProductPowerLawForm{gamma, p, prefactor}, gamma, p, prefactor, prefactor};
}

KernelSpec KernelSpec::additive(double prefactor) {
  if (!(prefactor > 0.0)) throw Error("additive kernel needs prefactor > 0");
  return {AdditiveForm{prefactor}, 1.0, 0.0, prefactor, prefactor};
}

KernelSpec KernelSpec::size_table(Eigen::MatrixXd table, double gamma, double p, double c1, double c2) {
  if (table.rows() != table.cols() || table.rows() == 0) throw Error("size table kernel needs a square table");
  if (!table.allFinite() || (table.array() <= 0.0).any()) throw Error("size table kernel entries must be positive");
  return {SizeTableForm{std::move(table)}, gamma, p, c1, c2};
}

KernelSpec KernelSpec::callable(std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> rate,
                                double gamma, double p, double c1, double c2, std::string name) {
  if (!rate) throw Error("callable kernel needs a rate function");
  return {CallableForm{std::move(rate), std::move(name)}, gamma, p, c1, c2};
}

std::string KernelSpec::name() const {
  return std::visit(overloaded{
                        [](const ConstantForm&) { return std::string("constant"); },
                        [](const BrownianForm&) { return std::string("brownian"); },
                        [](const ProductPowerLawForm&) { return std::string("product_powerlaw"); },
                        [](const AdditiveForm&) { return std::string("additive"); },
                        [](const SizeTableForm&) { return std::string("size_table"); },
                        [](const CallableForm& f) { return f.name; },
                        [](const ReducedForm& f) { return "reduced(" + f.base->name() + ")"; },
                    },
                    form_);
}

KernelSpec KernelSpec::with_envelope(double c1, double c2) const { return {form_, gamma_, p_, c1, c2}; }

double log_phi(double x, double y, double p) {
  if (p == 0.0) return 0.0;
  const double lt = std::log(x + y);
  return -p * ((std::log(x) - lt) + (std::log(y) - lt));
}

double envelope_shape(double x, double y, double gamma, double p) {
  return std::exp(gamma * std::log(x + y) + log_phi(x, y, p));
}

double evaluate(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  const double k = raw_rate(spec, x, y);
  if (!std::isfinite(k) || !(k > 0.0)) {
    throw KernelEvaluationError("kernel '" + spec.name() + "' returned " + std::to_string(k) + " for pair " +
                                describe(x) + ", " + describe(y));
  }
  return k;
}

double evaluate(const KernelSpec& spec, const Composition& alpha, const Composition& beta) {
  if (alpha.dimension() != beta.dimension()) throw Error("kernel pair has mismatched dimensions");
  return evaluate(spec, alpha.counts().cast<double>().eval(), beta.counts().cast<double>().eval());
}

EnvelopeReport validate_envelope(const KernelSpec& spec, int dimension, Index sample_count, int n_max,
                                 std::uint64_t seed) {
  if (sample_count < 1) throw Error("validate_envelope needs sample_count >= 1");
  EnvelopeReport report;
  report.tightest_c1 = std::numeric_limits<double>::infinity();
  report.tightest_c2 = 0.0;
  std::mt19937_64 rng(seed);

  auto check = [&](const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
    const Eigen::VectorXd x = a.cast<double>(), y = b.cast<double>();
    const double k = evaluate(spec, x, y);
    if (evaluate(spec, y, x) != k) ++report.asymmetric_pairs;
    const double ratio = k / envelope_shape(x.sum(), y.sum(), spec.gamma(), spec.p());
    report.tightest_c1 = std::min(report.tightest_c1, ratio);
    report.tightest_c2 = std::max(report.tightest_c2, ratio);
    if (ratio < spec.c1() * (1.0 - 1e-12) || ratio > spec.c2() * (1.0 + 1e-12))
      report.violations.push_back({a, b, k, ratio});
    ++report.pairs_checked;
  };

  const int top = std::min(n_max, 50);
  std::vector<std::vector<Eigen::VectorXi>> reps(static_cast<std::size_t>(top) + 1);
  for (int s = 1; s <= top; ++s) reps[static_cast<std::size_t>(s)] = representatives(dimension, s, rng);
  for (int s1 = 1; s1 <= top; ++s1)
    for (int s2 = 1; s2 <= top; ++s2)
      for (const auto& a : reps[static_cast<std::size_t>(s1)])
        for (const auto& b : reps[static_cast<std::size_t>(s2)]) check(a, b);

  std::uniform_int_distribution<int> size(1, n_max);
  for (Index k = 0; k < sample_count; ++k) {
    const Eigen::VectorXi a = random_composition(dimension, size(rng), rng);
    const Eigen::VectorXi b = random_composition(dimension, size(rng), rng);
    check(a, b);
  }
  return report;
}

ExistenceVerdict existence_gate(const KernelSpec& spec) {
  const double g = spec.gamma() + 2.0 * spec.p();
  return {g, g < 1.0};
}

PopulationState WeightMap::apply(const PopulationState& state) const {
  if (p == 0.0) return state;
  const Eigen::ArrayXd w = state.lattice().sizes().cast<double>().array().pow(-p);
  return PopulationState(state.lattice_ptr(), state.concentrations() * w, state.time());
}

PopulationState WeightMap::invert(const PopulationState& state) const {
  if (p == 0.0) return state;
  const Eigen::ArrayXd w = state.lattice().sizes().cast<double>().array().pow(p);
  return PopulationState(state.lattice_ptr(), state.concentrations() * w, state.time());
}

PZeroReduction reduce_to_p_zero(const KernelSpec& spec) {
  const double p = spec.p();
  if (p == 0.0) return {spec, WeightMap{0.0}};
  const double gamma_reduced = spec.gamma() + 2.0 * p;
  if (const auto* f = std::get_if<ProductPowerLawForm>(&spec.form())) {
    KernelSpec k = KernelSpec::product_powerlaw(gamma_reduced, 0.0, f->prefactor).with_envelope(spec.c1(), spec.c2());
    return {k, WeightMap{p}};
  }
  KernelSpec k(ReducedForm{std::make_shared<const KernelSpec>(spec), p}, gamma_reduced, 0.0, spec.c1(), spec.c2());
  return {k, WeightMap{p}};
}

double KernelTable::Direct::operator()(Index i, Index j) const {
  return evaluate(*spec, lattice->point(i).cast<double>().eval(), lattice->point(j).cast<double>().eval());
}

namespace {

constexpr Index kDenseLimit = 4096;

KernelTable::Storage build_storage(const KernelSpec& spec, const std::shared_ptr<const LatticeIndex>& lattice) {
  const LatticeIndex& lat = *lattice;
  const Index m = lat.count();
  const int n_max = lat.n_max();
  const Eigen::ArrayXd size = lat.sizes().cast<double>().array();
  const int* sizes = lat.sizes().data();

  auto factored = [&](Eigen::VectorXd g, KernelTable::RowMatrix u, KernelTable::RowMatrix w) -> KernelTable::Storage {
    return KernelTable::Factored{std::move(g), std::move(u), std::move(w), sizes};
  };
  auto size_factor = [&](auto&& fn) {
    Eigen::VectorXd g(2 * n_max + 1);
    g[0] = 0.0;
    for (int s = 1; s <= 2 * n_max; ++s) g[s] = fn(static_cast<double>(s));
    return g;
  };
  const KernelTable::RowMatrix ones = KernelTable::RowMatrix::Ones(m, 1);

  return std::visit(
      overloaded{
          [&](const ConstantForm& f) -> KernelTable::Storage {
            return factored(size_factor([&](double) { return f.c; }), ones, ones);
          },
          [&](const AdditiveForm& f) -> KernelTable::Storage {
            return factored(size_factor([&](double s) { return f.prefactor * s; }), ones, ones);
          },
          [&](const ProductPowerLawForm& f) -> KernelTable::Storage {
            KernelTable::RowMatrix u = size.pow(-f.p).matrix();
            return factored(size_factor([&](double s) { return f.prefactor * std::pow(s, f.gamma + 2.0 * f.p); }), u, u);
          },
          [&](const BrownianForm& f) -> KernelTable::Storage {
            if (static_cast<int>(f.volumes.size()) != lat.dimension())
              throw Error("brownian volumes do not match lattice dimension");
            const Eigen::Map<const Eigen::VectorXd> v(f.volumes.data(), lat.dimension());
            const Eigen::ArrayXd volume = (lat.points().cast<double>().transpose() * v).array();
            const Eigen::ArrayXd a = volume.unaryExpr([](double x) { return std::cbrt(x); });
            KernelTable::RowMatrix u(m, 3), w(m, 3);
            u.col(0).setConstant(2.0 * f.C);
            w.col(0).setOnes();
            u.col(1) = (f.C / a).matrix();
            w.col(1) = a.matrix();
            u.col(2) = (f.C * a).matrix();
            w.col(2) = (1.0 / a).matrix();
            return factored(size_factor([](double) { return 1.0; }), u, w);
          },
          [&](const SizeTableForm& f) -> KernelTable::Storage {
            if (f.table.rows() < n_max) throw Error("size table kernel smaller than lattice n_max");
            return KernelTable::SizeTable{f.table.topLeftCorner(n_max, n_max), sizes};
          },
          [&](const CallableForm&) -> KernelTable::Storage {
            if (m > kDenseLimit) return KernelTable::Direct{std::make_shared<const KernelSpec>(spec), lattice};
            Eigen::MatrixXd values(m, m);
            for (Index j = 0; j < m; ++j) {
              const Eigen::VectorXd y = lat.point(j).cast<double>();
              for (Index i = 0; i < m; ++i) values(i, j) = evaluate(spec, lat.point(i).cast<double>().eval(), y);
            }
            return KernelTable::Dense{std::move(values)};
          },
          [&](const ReducedForm& f) -> KernelTable::Storage {
            KernelTable::Storage base = build_storage(*f.base, lattice);
            const Eigen::ArrayXd weight = size.pow(f.p);
            return std::visit(
                overloaded{
                    [&](KernelTable::Factored& k) -> KernelTable::Storage {
                      k.u = (k.u.array().colwise() * weight).matrix();
                      k.w = (k.w.array().colwise() * weight).matrix();
                      return std::move(k);
                    },
                    [&](KernelTable::SizeTable& k) -> KernelTable::Storage {
                      const Eigen::ArrayXd sw = Eigen::ArrayXd::LinSpaced(n_max, 1.0, n_max).pow(f.p);
                      k.table = (sw.matrix().asDiagonal() * k.table * sw.matrix().asDiagonal()).eval();
                      return std::move(k);
                    },
                    [&](KernelTable::Dense& k) -> KernelTable::Storage {
                      k.values = (weight.matrix().asDiagonal() * k.values * weight.matrix().asDiagonal()).eval();
                      return std::move(k);
                    },
                    [&](KernelTable::Direct&) -> KernelTable::Storage {
                      return KernelTable::Direct{std::make_shared<const KernelSpec>(spec), lattice};
                    },
                },
                base);
          },
      },
      spec.form());
}

}  // namespace

KernelTable::KernelTable(const KernelSpec& spec, std::shared_ptr<const LatticeIndex> lattice)
    : spec_(spec), lattice_(std::move(lattice)), storage_(build_storage(spec_, lattice_)) {}

}  // namespace coag
