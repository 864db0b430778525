#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "coag/lattice.hpp"

namespace coag {

class KernelEvaluationError : public Error {
 public:
  using Error::Error;
};

struct ConstantForm {
  double c = 1.0;
};

/// C (V(x)^{-1/3} + V(y)^{-1/3}) (V(x)^{1/3} + V(y)^{1/3}) with V(x) = sum_j v_j x_j.
struct BrownianForm {
  double C = 1.0;
  std::vector<double> volumes;
};

/// prefactor (|x|+|y|)^gamma Phi(|x|/(|x|+|y|)), Phi(s) = s^{-p} (1-s)^{-p}.
struct ProductPowerLawForm {
  double gamma = 0.0;
  double p = 0.0;
  double prefactor = 1.0;
};

/// prefactor (|x| + |y|).
struct AdditiveForm {
  double prefactor = 1.0;
};

/// Rates that depend on total sizes only; entry (i, j) is K for sizes (i+1, j+1).
struct SizeTableForm {
  Eigen::MatrixXd table;
};

/// Arbitrary user rate on real composition vectors.
struct CallableForm {
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> rate;
  std::string name = "callable";
};

class KernelSpec;

/// K(x, y) |x|^p |y|^p applied to a base kernel.
struct ReducedForm {
  std::shared_ptr<const KernelSpec> base;
  double p = 0.0;
};

using KernelForm = std::variant<ConstantForm, BrownianForm, ProductPowerLawForm, AdditiveForm, SizeTableForm,
                                CallableForm, ReducedForm>;

/// A coagulation rate family with its declared power-law envelope
///   c1 (|x|+|y|)^gamma Phi(s) <= K(x,y) <= c2 (|x|+|y|)^gamma Phi(s).
/// Built-in forms carry their exact exponents and constants.
class KernelSpec {
 public:
  KernelSpec(KernelForm form, double gamma, double p, double c1, double c2);

  static KernelSpec constant(double c = 1.0);
  static KernelSpec brownian(double C, std::vector<double> volumes);
  static KernelSpec product_powerlaw(double gamma, double p, double prefactor = 1.0);
  static KernelSpec additive(double prefactor = 1.0);
  static KernelSpec size_table(Eigen::MatrixXd table, double gamma, double p, double c1, double c2);
  static KernelSpec callable(std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> rate,
                             double gamma, double p, double c1, double c2, std::string name = "callable");

  const KernelForm& form() const { return form_; }
  double gamma() const { return gamma_; }
  double p() const { return p_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  std::string name() const;

  /// Same rate with a different declared envelope (c1 <= c2 enforced).
  KernelSpec with_envelope(double c1, double c2) const;

 private:
  KernelForm form_;
  double gamma_;
  double p_;
  double c1_;
  double c2_;
};

/// log Phi(s) for s = x / (x + y), computed from the sizes so very unequal pairs stay finite.
double log_phi(double x, double y, double p);

/// (x+y)^gamma Phi(x/(x+y)) for sizes x, y > 0.
double envelope_shape(double x, double y, double gamma, double p);

/// Rate for two points of the positive cone (real-valued compositions).
double evaluate(const KernelSpec& spec, const Eigen::VectorXd& x, const Eigen::VectorXd& y);
double evaluate(const KernelSpec& spec, const Composition& alpha, const Composition& beta);

struct EnvelopeViolation {
  Eigen::VectorXi alpha;
  Eigen::VectorXi beta;
  double rate = 0.0;
  double ratio = 0.0;  // K / shape
};

struct EnvelopeReport {
  Index pairs_checked = 0;
  double tightest_c1 = 0.0;  // min K / shape over the sample
  double tightest_c2 = 0.0;  // max K / shape over the sample
  std::vector<EnvelopeViolation> violations;
  Index asymmetric_pairs = 0;
};

/// Checks the declared envelope on every pair of shells up to min(n_max, 50) (all compositions
/// for small shells, vertices/centre/seeded picks otherwise) plus sample_count random pairs.
EnvelopeReport validate_envelope(const KernelSpec& spec, int dimension, Index sample_count, int n_max,
                                 std::uint64_t seed = 20240521);

struct ExistenceVerdict {
  double gamma_plus_2p = 0.0;
  bool stationary_expected = false;
};

ExistenceVerdict existence_gate(const KernelSpec& spec);

/// n_alpha -> |alpha|^{-p} n_alpha and back.
struct WeightMap {
  double p = 0.0;
  PopulationState apply(const PopulationState& state) const;
  PopulationState invert(const PopulationState& state) const;
  bool is_identity() const { return p == 0.0; }
};

struct PZeroReduction {
  KernelSpec kernel;
  WeightMap weights;
};

/// Kernel K(x,y)|x|^p|y|^p with gamma' = gamma + 2p, p' = 0, and the matching state map.
PZeroReduction reduce_to_p_zero(const KernelSpec& spec);

/// Lattice-bound evaluation tables for the hot loops.
///
/// Where possible the rate is stored as K(i,j) = g(|i|+|j|) * sum_t u_t(i) w_t(j), which lets
/// loss and outflux sums run through per-shell moments instead of all pairs.
class KernelTable {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  struct Factored {
    Eigen::VectorXd size_factor;  // g(s) for s = 0..2 n_max
    RowMatrix u;                  // count x rank
    RowMatrix w;                  // count x rank
    const int* sizes = nullptr;
    double operator()(Index i, Index j) const {
      return size_factor[sizes[i] + sizes[j]] * u.row(i).dot(w.row(j));
    }
  };
  struct SizeTable {
    Eigen::MatrixXd table;  // by sizes, 1-based shifted to 0
    const int* sizes = nullptr;
    double operator()(Index i, Index j) const { return table(sizes[i] - 1, sizes[j] - 1); }
  };
  struct Dense {
    Eigen::MatrixXd values;
    double operator()(Index i, Index j) const { return values(i, j); }
  };
  struct Direct {
    std::shared_ptr<const KernelSpec> spec;
    std::shared_ptr<const LatticeIndex> lattice;
    double operator()(Index i, Index j) const;
  };
  using Storage = std::variant<Factored, SizeTable, Dense, Direct>;

  KernelTable(const KernelSpec& spec, std::shared_ptr<const LatticeIndex> lattice);

  const Storage& storage() const { return storage_; }
  const KernelSpec& spec() const { return spec_; }
  const LatticeIndex& lattice() const { return *lattice_; }

  double operator()(Index i, Index j) const {
    return std::visit([&](const auto& k) { return k(i, j); }, storage_);
  }

  template <typename F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), storage_);
  }

 private:
  KernelSpec spec_;
  std::shared_ptr<const LatticeIndex> lattice_;
  Storage storage_;
};

}  // namespace coag
