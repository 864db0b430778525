#include "coag/dynamics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace coag {

namespace {

constexpr std::ptrdiff_t kGrain = 256;

// Calls f(jb, jc) for every ordered split alpha = beta + gamma into two lattice points,
// with jb, jc the dense indices of beta and gamma.
template <class F>
void for_each_split(const LatticeIndex& lat, Index i, F&& f) {
  const int d = lat.dimension();
  const auto a = lat.point(i);
  const Index oa = lat.grid_offset(i);
  const int last = a[d - 1];
  if (d == 1) {
    for (int k = 1; k < last; ++k) f(lat.at_grid_offset(k), lat.at_grid_offset(oa - k));
    return;
  }
  std::vector<int> b(static_cast<std::size_t>(d - 1), 0);
  Index ob = 0;
  for (;;) {
    bool lead_zero = true, lead_full = true;
    for (int j = 0; j < d - 1; ++j) {
      lead_zero = lead_zero && b[static_cast<std::size_t>(j)] == 0;
      lead_full = lead_full && b[static_cast<std::size_t>(j)] == a[j];
    }
    const int kmin = lead_zero ? 1 : 0;
    const int kmax = lead_full ? last - 1 : last;
    for (int k = kmin; k <= kmax; ++k) f(lat.at_grid_offset(ob + k), lat.at_grid_offset(oa - ob - k));
    int j = d - 2;
    for (; j >= 0; --j) {
      auto& bj = b[static_cast<std::size_t>(j)];
      if (bj < a[j]) {
        ++bj;
        ob += lat.grid_stride(j);
        break;
      }
      ob -= bj * lat.grid_stride(j);
      bj = 0;
    }
    if (j < 0) break;
  }
}

void check_finite(const LatticeIndex& lat, const Eigen::ArrayXd& values, const char* what) {
  for (Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      const int shell = lat.size_of(i);
      throw DivergenceError(std::string("non-finite ") + what + " at shell |alpha| = " + std::to_string(shell),
                            shell);
    }
  }
}

}  // namespace

SourceSpec::SourceSpec(std::vector<SourceEntry> entries) {
  for (auto& e : entries) add(e.composition, e.rate);
}

void SourceSpec::add(const Composition& alpha, double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw Error("source rates must be positive and finite");
  if (!entries_.empty() && alpha.dimension() != dimension()) throw Error("source entries have mixed dimensions");
  entries_.push_back({alpha, rate});
}

int SourceSpec::support_bound() const {
  int l = 0;
  for (const auto& e : entries_) l = std::max(l, e.composition.size());
  return l;
}

double SourceSpec::total_rate() const {
  double total = 0.0;
  for (const auto& e : entries_) total += e.rate;
  return total;
}

Eigen::ArrayXd SourceSpec::on_lattice(const LatticeIndex& lattice) const {
  Eigen::ArrayXd s = Eigen::ArrayXd::Zero(lattice.count());
  for (const auto& e : entries_) {
    if (e.composition.dimension() != lattice.dimension()) throw Error("source dimension does not match lattice");
    const Index i = lattice.index_of(e.composition);
    if (i < 0) throw Error("source entry outside the truncated lattice");
    s[i] += e.rate;
  }
  return s;
}

SourceSpec SourceSpec::scaled(double factor) const {
  SourceSpec out;
  for (const auto& e : entries_) out.add(e.composition, e.rate * factor);
  return out;
}

struct RhsEvaluator::Impl {
  // Per-shell, per-rank moments sum_{j in shell} w_t(j) n_j of a factored kernel.
  static Eigen::MatrixXd shell_moments(const LatticeIndex& lat, const KernelTable::Factored& k,
                                       const Eigen::ArrayXd& n) {
    const Index rank = k.w.cols();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(lat.n_max() + 1, rank);
    for (int s = 1; s <= lat.n_max(); ++s) {
      const ShellRange r = lat.shell_range(s);
      for (Index j = r.begin; j < r.end; ++j) m.row(s) += n[j] * k.w.row(j);
    }
    return m;
  }

  static Eigen::ArrayXd shell_totals(const LatticeIndex& lat, const Eigen::ArrayXd& n) {
    Eigen::ArrayXd t = Eigen::ArrayXd::Zero(lat.n_max() + 1);
    for (int s = 1; s <= lat.n_max(); ++s) {
      const ShellRange r = lat.shell_range(s);
      t[s] = n.segment(r.begin, r.count()).sum();
    }
    return t;
  }

  // sum over partner shells s' in [lo(s), n_max] of rate(alpha, beta) n_beta, for every alpha.
  // lo(s) = 1 gives the full loss rate, lo(s) = n_max - s + 1 the exit rate.
  template <class Lower>
  static Eigen::ArrayXd partner_rate(const RhsEvaluator& ev, const Eigen::ArrayXd& n, Lower lower) {
    const LatticeIndex& lat = ev.lattice();
    const int n_max = lat.n_max();
    Eigen::ArrayXd out = Eigen::ArrayXd::Zero(lat.count());
    ev.table().visit([&](const auto& k) {
      using K = std::decay_t<decltype(k)>;
      if constexpr (std::is_same_v<K, KernelTable::Factored>) {
        const Eigen::MatrixXd m = shell_moments(lat, k, n);
        const Index rank = m.cols();
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n_max + 1, rank);
        for (int s = 1; s <= n_max; ++s)
          for (int t = lower(s); t <= n_max; ++t) q.row(s) += k.size_factor[s + t] * m.row(t);
        for_range(ev.pool(), lat.count(), kGrain, [&](std::ptrdiff_t b, std::ptrdiff_t e) {
          for (Index i = b; i < e; ++i) out[i] = k.u.row(i).dot(q.row(lat.size_of(i)));
        });
      } else if constexpr (std::is_same_v<K, KernelTable::SizeTable>) {
        const Eigen::ArrayXd tot = shell_totals(lat, n);
        Eigen::ArrayXd q = Eigen::ArrayXd::Zero(n_max + 1);
        for (int s = 1; s <= n_max; ++s)
          for (int t = lower(s); t <= n_max; ++t) q[s] += k.table(s - 1, t - 1) * tot[t];
        for (Index i = 0; i < lat.count(); ++i) out[i] = q[lat.size_of(i)];
      } else {
        for_range(ev.pool(), lat.count(), kGrain / 16 + 1, [&](std::ptrdiff_t b, std::ptrdiff_t e) {
          for (Index i = b; i < e; ++i) {
            const int lo = lower(lat.size_of(i));
            if (lo > n_max) continue;
            double acc = 0.0;
            for (Index j = lat.shell_range(lo).begin; j < lat.count(); ++j) acc += k(i, j) * n[j];
            out[i] = acc;
          }
        });
      }
    });
    return out;
  }

  // 2 * gain of entry i given per-rank weighted concentrations (factored) or n (general).
  static double factored_split_sum(const LatticeIndex& lat, Index i, const KernelTable::RowMatrix& un,
                                   const KernelTable::RowMatrix& wn) {
    double acc = 0.0;
    if (un.cols() == 1) {
      const double* u = un.data();
      const double* w = wn.data();
      for_each_split(lat, i, [&](Index jb, Index jc) { acc += u[jb] * w[jc]; });
    } else {
      for_each_split(lat, i, [&](Index jb, Index jc) { acc += un.row(jb).dot(wn.row(jc)); });
    }
    return acc;
  }

  template <class K>
  static double general_split_sum(const LatticeIndex& lat, Index i, const K& k, const Eigen::ArrayXd& n) {
    double acc = 0.0;
    for_each_split(lat, i, [&](Index jb, Index jc) { acc += k(jb, jc) * n[jb] * n[jc]; });
    return acc;
  }
};

RhsEvaluator::RhsEvaluator(const KernelSpec& kernel, const SourceSpec& source,
                           std::shared_ptr<const LatticeIndex> lattice, ExecutionPolicy policy)
    : lattice_(std::move(lattice)), table_(kernel, lattice_), policy_(policy) {
  if (!source.empty() && source.dimension() != lattice_->dimension())
    throw Error("source dimension does not match lattice");
  source_ = source.on_lattice(*lattice_);
  if (policy_.threads > 1) pool_ = std::make_unique<ThreadPool>(policy_.threads);
}

RhsEvaluator::~RhsEvaluator() = default;

Eigen::ArrayXd RhsEvaluator::loss_rate(const Eigen::ArrayXd& n) const {
  return Impl::partner_rate(*this, n, [](int) { return 1; });
}

Eigen::ArrayXd RhsEvaluator::exit_rate(const Eigen::ArrayXd& n) const {
  const int n_max = lattice_->n_max();
  return Impl::partner_rate(*this, n, [n_max](int s) { return n_max - s + 1; });
}

Eigen::ArrayXd RhsEvaluator::partner_rate(const Eigen::ArrayXd& n, const std::function<int(int)>& lower) const {
  return Impl::partner_rate(*this, n, [&](int s) { return std::max(1, lower(s)); });
}

Eigen::ArrayXd RhsEvaluator::gain(const Eigen::ArrayXd& n) const {
  const LatticeIndex& lat = *lattice_;
  Eigen::ArrayXd g = Eigen::ArrayXd::Zero(lat.count());
  table_.visit([&](const auto& k) {
    using K = std::decay_t<decltype(k)>;
    if constexpr (std::is_same_v<K, KernelTable::Factored>) {
      const KernelTable::RowMatrix un = k.u.array().colwise() * n;
      const KernelTable::RowMatrix wn = k.w.array().colwise() * n;
      for_range(pool(), lat.count(), kGrain, [&](std::ptrdiff_t b, std::ptrdiff_t e) {
        for (Index i = b; i < e; ++i)
          g[i] = 0.5 * k.size_factor[lat.size_of(i)] * Impl::factored_split_sum(lat, i, un, wn);
      });
    } else {
      for_range(pool(), lat.count(), kGrain, [&](std::ptrdiff_t b, std::ptrdiff_t e) {
        for (Index i = b; i < e; ++i) g[i] = 0.5 * Impl::general_split_sum(lat, i, k, n);
      });
    }
  });
  return g;
}

RhsResult RhsEvaluator::operator()(const Eigen::ArrayXd& n) const {
  const LatticeIndex& lat = *lattice_;
  if (n.size() != lat.count()) throw Error("state does not match evaluator lattice");
  RhsResult r;
  r.gain = gain(n);
  check_finite(lat, r.gain, "gain");
  r.loss = n * loss_rate(n);
  check_finite(lat, r.loss, "loss");
  r.derivative = r.gain - r.loss + source_;

  const Eigen::ArrayXd leaving = n * exit_rate(n);
  const int d = lat.dimension();
  r.outflux = reduce_range(pool(), policy_, lat.count(), kGrain, d,
                           [&](std::ptrdiff_t b, std::ptrdiff_t e, Eigen::VectorXd& acc) {
                             for (Index i = b; i < e; ++i)
                               if (leaving[i] != 0.0) acc += leaving[i] * lat.point(i).cast<double>();
                           });
  if (!r.outflux.allFinite()) throw DivergenceError("non-finite outflux", lat.n_max());
  return r;
}

Eigen::ArrayXd RhsEvaluator::implicit_sweep(const Eigen::ArrayXd& n, double dt) const {
  const LatticeIndex& lat = *lattice_;
  const Eigen::ArrayXd loss = loss_rate(n);
  check_finite(lat, loss, "loss rate");
  Eigen::ArrayXd m = n;
  table_.visit([&](const auto& k) {
    using K = std::decay_t<decltype(k)>;
    if constexpr (std::is_same_v<K, KernelTable::Factored>) {
      KernelTable::RowMatrix un(k.u.rows(), k.u.cols()), wn(k.w.rows(), k.w.cols());
      for (int s = 1; s <= lat.n_max(); ++s) {
        const ShellRange r = lat.shell_range(s);
        const double g = 0.5 * k.size_factor[s];
        for_range(pool(), r.count(), kGrain, [&](std::ptrdiff_t b, std::ptrdiff_t e) {
          for (Index i = r.begin + b; i < r.begin + e; ++i) {
            const double gain = g * Impl::factored_split_sum(lat, i, un, wn);
            m[i] = (n[i] + dt * (gain + source_[i])) / (1.0 + dt * loss[i]);
          }
        });
        for (Index i = r.begin; i < r.end; ++i) {
          un.row(i) = k.u.row(i) * m[i];
          wn.row(i) = k.w.row(i) * m[i];
        }
      }
    } else {
      for (int s = 1; s <= lat.n_max(); ++s) {
        const ShellRange r = lat.shell_range(s);
        for_range(pool(), r.count(), kGrain / 16 + 1, [&](std::ptrdiff_t b, std::ptrdiff_t e) {
          for (Index i = r.begin + b; i < r.begin + e; ++i) {
            const double gain = 0.5 * Impl::general_split_sum(lat, i, k, m);
            m[i] = (n[i] + dt * (gain + source_[i])) / (1.0 + dt * loss[i]);
          }
        });
      }
    }
  });
  check_finite(lat, m, "concentration");
  return m;
}

RhsResult rhs(const PopulationState& state, const KernelSpec& kernel, const SourceSpec& source) {
  const RhsEvaluator ev(kernel, source, state.lattice_ptr());
  return ev(state.concentrations());
}

double relative_residual(const RhsResult& r, const Eigen::ArrayXd& source) {
  double worst = 0.0;
  for (Index i = 0; i < r.derivative.size(); ++i) {
    const double scale = std::max({std::abs(r.gain[i]), std::abs(r.loss[i]), std::abs(source[i])});
    if (scale == 0.0) continue;
    worst = std::max(worst, std::abs(r.derivative[i]) / scale);
  }
  return worst;
}

std::string to_string(SolverMethod m) { return m == SolverMethod::ShellSweep ? "shell_sweep" : "runge_kutta"; }

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged: return "converged";
    case SolverStatus::Diverged: return "diverged";
    case SolverStatus::BudgetExhausted: return "budget_exhausted";
  }
  return "unknown";
}

SolverMethod solver_method_from_string(const std::string& name) {
  if (name == "shell_sweep") return SolverMethod::ShellSweep;
  if (name == "runge_kutta") return SolverMethod::RungeKutta;
  throw Error("unknown solver method '" + name + "'");
}

double tail_moment_share(const PopulationState& state, double q) {
  const int n_max = state.lattice().n_max();
  const double total = shell_sum(state, 1.0, n_max, q);
  if (total == 0.0) return 0.0;
  const int half = n_max / 2 + 1;
  return half > n_max ? 0.0 : shell_sum(state, half, n_max, q) / total;
}

namespace {

struct Marcher {
  const RhsEvaluator& ev;
  const SolverOptions& opt;
  double ceiling_rate;  // total injection rate

  bool over_ceiling(const Eigen::ArrayXd& n, double t) const {
    if (ceiling_rate <= 0.0) return false;
    return n.sum() > opt.divergence_factor * ceiling_rate * std::max(t, 1.0);
  }
};

}  // namespace

SteadyStateResult integrate_to_steady_state(const PopulationState& initial, const KernelSpec& kernel,
                                            const SourceSpec& source, const SolverOptions& options) {
  if (!(options.tol > 0.0)) throw Error("solver tolerance must be positive");
  initial.validate();
  const auto start = std::chrono::steady_clock::now();
  const RhsEvaluator ev(kernel, source, initial.lattice_ptr(), options.exec);
  const Marcher march{ev, options, source.total_rate()};

  Eigen::ArrayXd n = initial.concentrations();
  double t = initial.time();
  SteadyStateReport report;
  report.method = options.method;
  const ExistenceVerdict verdict = existence_gate(kernel);
  report.gamma_plus_2p = verdict.gamma_plus_2p;

  RhsResult current;
  try {
    current = ev(n);
    double res = relative_residual(current, ev.source());
    report.status = SolverStatus::BudgetExhausted;

    if (options.method == SolverMethod::ShellSweep) {
      // Step length is steered by the absolute mass-weighted residual, which unlike the
      // relative sup norm does not saturate when a trial overshoots.
      const Eigen::ArrayXd mass = ev.lattice().sizes().cast<double>().array();
      auto mass_residual = [&](const RhsResult& r) { return (mass * r.derivative.abs()).sum(); };
      double err = mass_residual(current);
      double dt = 0.1;
      while (res > options.tol) {
        if (report.steps >= options.max_steps || t >= options.max_time) break;
        if (dt < 1e-12) {
          report.message = "step size collapsed";
          break;
        }
        ++report.steps;
        Eigen::ArrayXd m;
        RhsResult next;
        double next_err = std::numeric_limits<double>::infinity();
        try {
          m = ev.implicit_sweep(n, dt);
          next = ev(m);
          if (!march.over_ceiling(m, t + dt)) next_err = mass_residual(next);
        } catch (const DivergenceError&) {
          // An overflowing trial sweep only means dt was too long for the lagged loss.
        }
        if (next_err < 1.5 * err) {
          n = std::move(m);
          current = std::move(next);
          err = next_err;
          res = relative_residual(current, ev.source());
          t += dt;
          dt *= 1.2;
        } else {
          dt *= 0.5;
        }
      }
    } else {
      // Bogacki-Shampine 3(2) with positivity rejection.
      double h = 1e-3;
      // The residual stalls near the local tolerance, so keep it below the target.
      const double rtol = std::min(options.rk_rtol, 0.1 * options.tol);
      RhsResult k1 = current;
      while (res > options.tol) {
        if (report.steps >= options.max_steps || t >= options.max_time) break;
        if (h < 1e-14) {
          report.message = "step size collapsed";
          break;
        }
        ++report.steps;
        const Eigen::ArrayXd y2 = n + 0.5 * h * k1.derivative;
        if ((y2 < 0.0).any()) {
          h *= 0.5;
          continue;
        }
        const RhsResult k2 = ev(y2);
        const Eigen::ArrayXd y3 = n + 0.75 * h * k2.derivative;
        if ((y3 < 0.0).any()) {
          h *= 0.5;
          continue;
        }
        const RhsResult k3 = ev(y3);
        Eigen::ArrayXd y1 = n + h * (2.0 / 9.0 * k1.derivative + 1.0 / 3.0 * k2.derivative +
                                     4.0 / 9.0 * k3.derivative);
        if ((y1 < 0.0).any()) {
          h *= 0.5;
          continue;
        }
        RhsResult k4 = ev(y1);
        const Eigen::ArrayXd err = h * (-5.0 / 72.0 * k1.derivative + 1.0 / 12.0 * k2.derivative +
                                        1.0 / 9.0 * k3.derivative - 1.0 / 8.0 * k4.derivative);
        const Eigen::ArrayXd scale = options.rk_atol + rtol * n.abs().max(y1.abs());
        const double e = (err.abs() / scale).maxCoeff();
        const double factor = std::clamp(0.9 * std::pow(std::max(e, 1e-10), -1.0 / 3.0), 0.2, 5.0);
        if (e <= 1.0) {
          n = std::move(y1);
          t += h;
          k1 = std::move(k4);
          res = relative_residual(k1, ev.source());
          if (march.over_ceiling(n, t)) throw DivergenceError("number density passed the divergence ceiling", 0);
        }
        h *= factor;
      }
      current = k1;
    }
    report.residual = res;
    report.converged = res <= options.tol;
    report.status = report.converged ? SolverStatus::Converged : SolverStatus::BudgetExhausted;
    if (!report.converged && report.message.empty()) report.message = "step or time budget exhausted";
  } catch (const DivergenceError& e) {
    report.status = SolverStatus::Diverged;
    report.converged = false;
    report.residual = std::numeric_limits<double>::infinity();
    report.message = e.what();
    n = n.isFinite().select(n, 0.0);
  }

  PopulationState final_state(initial.lattice_ptr(), n, t);
  report.time = t;
  report.outflux = current.outflux.size() ? current.outflux : Eigen::VectorXd::Zero(initial.dimension());
  report.tail_moment_share = tail_moment_share(final_state, kernel.gamma() + kernel.p());
  if (!verdict.stationary_expected && report.status != SolverStatus::Diverged) {
    report.message = "gamma + 2p = " + std::to_string(verdict.gamma_plus_2p) +
                     " >= 1: no stationary solution without truncation; lattice state is boundary-held (" +
                     to_string(report.status) + " on the truncated lattice)";
    report.status = SolverStatus::Diverged;
    report.converged = false;
  }
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(final_state), std::move(report)};
}

WeakFormResult weak_form_residual(const PopulationState& state, const KernelSpec& kernel, const SourceSpec& source,
                                  const TestFunction& phi, std::optional<int> margin) {
  const LatticeIndex& lat = state.lattice();
  const int band = margin.value_or(std::max(1, lat.n_max() / 8));
  const RhsEvaluator ev(kernel, source, state.lattice_ptr());
  const RhsResult r = ev(state.concentrations());

  WeakFormResult out;
  int first_bad = 0;
  for (Index i = 0; i < lat.count(); ++i) {
    const double f = phi(lat.composition(i));
    if (!std::isfinite(f)) throw Error("test function is not finite at lattice index " + std::to_string(i));
    if (f == 0.0) continue;
    if (lat.size_of(i) > lat.n_max() - band && first_bad == 0) first_bad = lat.size_of(i);
    out.value += f * r.derivative[i];
    out.positive_scale += std::max(f, 0.0) * (r.gain[i] + ev.source()[i]) + std::max(-f, 0.0) * r.loss[i];
  }
  if (first_bad) {
    out.truncation_warning = true;
    out.warning = "test function is non-zero at |alpha| = " + std::to_string(first_bad) + ", within " +
                  std::to_string(band) + " of n_max";
  }
  return out;
}

}  // namespace coag
