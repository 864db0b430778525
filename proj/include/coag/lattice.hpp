#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace coag {

using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LatticeTooLarge : public Error {
 public:
  using Error::Error;
};

/// Cluster make-up: number of monomers of each of the d species.
/// The origin is not a composition.
class Composition {
 public:
  explicit Composition(Eigen::VectorXi counts);
  Composition(std::initializer_list<int> counts);

  int dimension() const { return static_cast<int>(counts_.size()); }
  /// Total number of monomers, the l1 norm of the counts.
  int size() const { return size_; }
  int operator[](int j) const { return counts_[j]; }
  const Eigen::VectorXi& counts() const { return counts_; }

  friend bool operator==(const Composition& a, const Composition& b) {
    return a.counts_ == b.counts_;
  }

 private:
  Eigen::VectorXi counts_;
  int size_ = 0;
};

/// x = r * theta with r > 0 and theta on the unit simplex.
struct PolarPoint {
  double r = 0.0;
  Eigen::VectorXd theta;
};

PolarPoint to_polar(const Composition& alpha);

struct ShellRange {
  Index begin = 0;
  Index end = 0;
  Index count() const { return end - begin; }
};

/// Dense, shell-ordered enumeration of all compositions with 1 <= |alpha| <= n_max.
///
/// Compositions are sorted by total size, and inside a shell by descending
/// lexicographic order, so for d = 2 the first shell is (1,0), (0,1). A mixed-radix
/// grid of side n_max + 1 maps any componentwise-bounded vector to its dense index
/// in O(1); the offset of alpha - beta in that grid is grid_offset(alpha) -
/// grid_offset(beta), which the convolution loops rely on.
class LatticeIndex {
 public:
  static constexpr int kOrderingVersion = 1;
  static constexpr std::size_t kDefaultMemoryBudget = std::size_t{2} << 30;

  LatticeIndex(int dimension, int n_max, std::size_t memory_budget = kDefaultMemoryBudget);

  int dimension() const { return dimension_; }
  int n_max() const { return n_max_; }
  Index count() const { return points_.cols(); }

  /// Column i is the composition with dense index i.
  const Eigen::MatrixXi& points() const { return points_; }
  auto point(Index i) const { return points_.col(i); }
  Composition composition(Index i) const { return Composition(Eigen::VectorXi(points_.col(i))); }
  /// |alpha| for every index.
  const Eigen::VectorXi& sizes() const { return sizes_; }
  int size_of(Index i) const { return sizes_[i]; }

  ShellRange shell_range(int s) const;

  /// Dense index of alpha, or -1 when alpha is outside the truncated lattice.
  Index index_of(const Composition& alpha) const;
  Index index_of(std::span<const int> alpha) const;

  /// Mixed-radix offset of alpha in the (n_max+1)^d grid; alpha must satisfy 0 <= alpha_j <= n_max.
  Index grid_offset(Index i) const { return grid_offsets_[i]; }
  /// Dense index stored at a grid offset (-1 for the origin and for |alpha| > n_max).
  Index at_grid_offset(Index offset) const { return grid_[offset]; }
  /// Grid stride of component j.
  Index grid_stride(int j) const { return strides_[j]; }

 private:
  int dimension_;
  int n_max_;
  Eigen::MatrixXi points_;
  Eigen::VectorXi sizes_;
  Eigen::Matrix<Index, Eigen::Dynamic, 1> shell_begin_;
  Eigen::Matrix<Index, Eigen::Dynamic, 1> grid_offsets_;
  Eigen::Matrix<Index, Eigen::Dynamic, 1> grid_;
  Eigen::Matrix<Index, Eigen::Dynamic, 1> strides_;
};

/// Number of compositions with 1 <= |alpha| <= n_max in dimension d.
Index lattice_point_count(int dimension, int n_max);

std::shared_ptr<const LatticeIndex> enumerate(int dimension, int n_max,
                                              std::size_t memory_budget = LatticeIndex::kDefaultMemoryBudget);

/// Concentrations n_alpha on a truncated lattice. Non-negative and finite.
class PopulationState {
 public:
  PopulationState() = default;
  explicit PopulationState(std::shared_ptr<const LatticeIndex> lattice, double time = 0.0);
  PopulationState(std::shared_ptr<const LatticeIndex> lattice, Eigen::ArrayXd concentrations,
                  double time = 0.0);

  const LatticeIndex& lattice() const { return *lattice_; }
  const std::shared_ptr<const LatticeIndex>& lattice_ptr() const { return lattice_; }
  int dimension() const { return lattice_->dimension(); }

  const Eigen::ArrayXd& concentrations() const { return n_; }
  /// Mutable access; callers are responsible for keeping entries non-negative.
  Eigen::ArrayXd& concentrations() { return n_; }
  double operator[](Index i) const { return n_[i]; }

  double time() const { return time_; }
  void set_time(double t) { time_ = t; }

  /// Throws if any entry is negative or not finite.
  void validate() const;

 private:
  std::shared_ptr<const LatticeIndex> lattice_;
  Eigen::ArrayXd n_;
  double time_ = 0.0;
};

/// Sum of |alpha|^q n_alpha over lo <= |alpha| <= hi. Shells beyond n_max contribute nothing.
double shell_sum(const PopulationState& state, double lo, double hi, double q = 0.0);

}  // namespace coag
