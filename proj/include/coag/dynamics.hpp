#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coag/kernels.hpp"
#include "coag/lattice.hpp"
#include "coag/parallel.hpp"

namespace coag {

struct SourceEntry {
  Composition composition;
  double rate = 0.0;
};

/// Injection term: a finite list of (composition, rate) pairs with positive rates.
class SourceSpec {
 public:
  SourceSpec() = default;
  explicit SourceSpec(std::vector<SourceEntry> entries);

  void add(const Composition& alpha, double rate);
  const std::vector<SourceEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  /// Dimension of the entries, or 0 when empty.
  int dimension() const { return entries_.empty() ? 0 : entries_.front().composition.dimension(); }
  /// Largest |alpha| among the entries (0 when empty).
  int support_bound() const;
  /// Total injected number rate.
  double total_rate() const;
  /// Rates scattered onto the lattice; throws if an entry lies outside it.
  Eigen::ArrayXd on_lattice(const LatticeIndex& lattice) const;
  SourceSpec scaled(double factor) const;

 private:
  std::vector<SourceEntry> entries_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int shell) : Error(what), shell_(shell) {}
  int shell() const { return shell_; }

 private:
  int shell_;
};

struct RhsResult {
  Eigen::ArrayXd derivative;
  Eigen::ArrayXd gain;     // (1/2) sum over splits of K n n
  Eigen::ArrayXd loss;     // n_alpha sum_beta K n_beta, including pairs that leave the lattice
  Eigen::VectorXd outflux;  // species mass per time carried past n_max
};

/// Fast evaluator of the truncated right-hand side for a fixed kernel, source and lattice.
class RhsEvaluator {
 public:
  RhsEvaluator(const KernelSpec& kernel, const SourceSpec& source, std::shared_ptr<const LatticeIndex> lattice,
               ExecutionPolicy policy = {});
  ~RhsEvaluator();
  RhsEvaluator(const RhsEvaluator&) = delete;
  RhsEvaluator& operator=(const RhsEvaluator&) = delete;

  const LatticeIndex& lattice() const { return *lattice_; }
  const std::shared_ptr<const LatticeIndex>& lattice_ptr() const { return lattice_; }
  const KernelTable& table() const { return table_; }
  const Eigen::ArrayXd& source() const { return source_; }

  RhsResult operator()(const Eigen::ArrayXd& n) const;

  /// sum_beta K(alpha, beta) n_beta for every alpha.
  Eigen::ArrayXd loss_rate(const Eigen::ArrayXd& n) const;
  /// sum over beta with |alpha|+|beta| > n_max of K(alpha, beta) n_beta.
  Eigen::ArrayXd exit_rate(const Eigen::ArrayXd& n) const;
  Eigen::ArrayXd gain(const Eigen::ArrayXd& n) const;
  /// sum over partners beta with |beta| >= lower(|alpha|) of K(alpha, beta) n_beta.
  Eigen::ArrayXd partner_rate(const Eigen::ArrayXd& n, const std::function<int(int)>& lower) const;

  /// One semi-implicit shell sweep: shells are updated in increasing size so gains use
  /// the already-updated smaller shells, while the loss rate is frozen at n.
  Eigen::ArrayXd implicit_sweep(const Eigen::ArrayXd& n, double dt) const;

  ThreadPool* pool() const { return pool_.get(); }
  const ExecutionPolicy& policy() const { return policy_; }

 private:
  struct Impl;
  std::shared_ptr<const LatticeIndex> lattice_;
  KernelTable table_;
  Eigen::ArrayXd source_;
  ExecutionPolicy policy_;
  std::unique_ptr<ThreadPool> pool_;
};

RhsResult rhs(const PopulationState& state, const KernelSpec& kernel, const SourceSpec& source);

/// sup over entries of |derivative| / max(gain, loss, source); entries with zero scale are skipped.
double relative_residual(const RhsResult& r, const Eigen::ArrayXd& source);

enum class SolverMethod { ShellSweep, RungeKutta };
enum class SolverStatus { Converged, Diverged, BudgetExhausted };

std::string to_string(SolverMethod m);
std::string to_string(SolverStatus s);
SolverMethod solver_method_from_string(const std::string& name);

struct SolverOptions {
  double tol = 1e-8;
  double max_time = 1e8;
  long max_steps = 20000;
  SolverMethod method = SolverMethod::ShellSweep;
  /// Number-density ceiling as a multiple of (total injection rate x max(time, 1)).
  double divergence_factor = 1e6;
  /// Runge-Kutta local error tolerances; the relative one is capped at tol / 10.
  double rk_rtol = 1e-6;
  double rk_atol = 1e-14;
  ExecutionPolicy exec;
};

struct SteadyStateReport {
  bool converged = false;
  SolverStatus status = SolverStatus::BudgetExhausted;
  double residual = 0.0;
  long steps = 0;
  double wall_time = 0.0;
  double time = 0.0;
  Eigen::VectorXd outflux;
  double gamma_plus_2p = 0.0;
  /// Share of sum |alpha|^{gamma+p} n_alpha held by the outer half of the lattice.
  double tail_moment_share = 0.0;
  SolverMethod method = SolverMethod::ShellSweep;
  std::string message;
};

struct SteadyStateResult {
  PopulationState state;
  SteadyStateReport report;
};

/// Marches toward a stationary state. A fixed point reached for a kernel with
/// gamma + 2p >= 1 is reported as Diverged: the absorbing boundary makes the truncated
/// problem stationary, but the untruncated one has no stationary solution.
SteadyStateResult integrate_to_steady_state(const PopulationState& initial, const KernelSpec& kernel,
                                            const SourceSpec& source, const SolverOptions& options = {});

/// Share of the |alpha|^q moment carried by sizes above n_max / 2.
double tail_moment_share(const PopulationState& state, double q);

using TestFunction = std::function<double(const Composition&)>;

struct WeakFormResult {
  double value = 0.0;
  double positive_scale = 0.0;
  bool truncation_warning = false;
  std::string warning;
};

/// (1/2) sum K n n [phi(a+b) - phi(a) - phi(b)] + sum phi s on the truncated lattice.
/// phi is assumed to vanish above n_max; a warning is set when it is non-zero within
/// `margin` of n_max (default max(1, n_max / 8)).
WeakFormResult weak_form_residual(const PopulationState& state, const KernelSpec& kernel, const SourceSpec& source,
                                  const TestFunction& phi, std::optional<int> margin = std::nullopt);

}  // namespace coag
