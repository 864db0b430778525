#include "coag/lattice.hpp"

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace coag {

namespace {

int checked_size(const Eigen::VectorXi& counts) {
  if (counts.size() < 1) throw Error("composition needs at least one species");
  if ((counts.array() < 0).any()) throw Error("composition counts must be non-negative");
  const int size = counts.sum();
  if (size <= 0) throw Error("the origin is not a composition");
  return size;
}

// Appends every composition of `remaining` into the trailing components, first
// component descending.
void fill_shell(int remaining, int component, Eigen::VectorXi& scratch, std::vector<int>& out) {
  const int d = static_cast<int>(scratch.size());
  if (component == d - 1) {
    scratch[component] = remaining;
    out.insert(out.end(), scratch.data(), scratch.data() + d);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    scratch[component] = a;
    fill_shell(remaining - a, component + 1, scratch, out);
  }
}

long double binomial(int n, int k) {
  long double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

Composition::Composition(Eigen::VectorXi counts) : counts_(std::move(counts)), size_(checked_size(counts_)) {}

Composition::Composition(std::initializer_list<int> counts)
    : Composition(Eigen::Map<const Eigen::VectorXi>(counts.begin(), static_cast<Index>(counts.size()))) {}

PolarPoint to_polar(const Composition& alpha) {
  PolarPoint p;
  p.r = alpha.size();
  p.theta = alpha.counts().cast<double>() / p.r;
  return p;
}

Index lattice_point_count(int dimension, int n_max) {
  long double total = 0;
  for (int s = 1; s <= n_max; ++s) total += binomial(s + dimension - 1, dimension - 1);
  if (total > static_cast<long double>(std::numeric_limits<Index>::max() / 16))
    throw LatticeTooLarge("lattice too large: index count overflows");
  return static_cast<Index>(std::llround(total));
}

LatticeIndex::LatticeIndex(int dimension, int n_max, std::size_t memory_budget)
    : dimension_(dimension), n_max_(n_max) {
  if (dimension < 1) throw Error("lattice dimension must be >= 1");
  if (n_max < 1) throw Error("lattice n_max must be >= 1");

  const Index count = lattice_point_count(dimension, n_max);
  const long double grid_cells = std::pow(static_cast<long double>(n_max + 1), dimension);
  const long double bytes = static_cast<long double>(count) * sizeof(double) + grid_cells * sizeof(Index);
  if (bytes > static_cast<long double>(memory_budget)) {
    throw LatticeTooLarge("lattice too large: d=" + std::to_string(dimension) + ", n_max=" +
                          std::to_string(n_max) + " needs " + std::to_string(static_cast<double>(bytes)) +
                          " bytes, budget is " + std::to_string(memory_budget));
  }

  std::vector<int> flat;
  flat.reserve(static_cast<std::size_t>(count) * dimension);
  shell_begin_.resize(n_max + 2);
  shell_begin_[0] = 0;
  shell_begin_[1] = 0;
  Eigen::VectorXi scratch(dimension);
  for (int s = 1; s <= n_max; ++s) {
    fill_shell(s, 0, scratch, flat);
    shell_begin_[s + 1] = static_cast<Index>(flat.size()) / dimension;
  }
  points_ = Eigen::Map<const Eigen::MatrixXi>(flat.data(), dimension, count);
  sizes_ = points_.colwise().sum().transpose();

  strides_.resize(dimension);
  Index stride = 1;
  for (int j = dimension - 1; j >= 0; --j) {
    strides_[j] = stride;
    stride *= n_max + 1;
  }
  grid_ = Eigen::Matrix<Index, Eigen::Dynamic, 1>::Constant(stride, -1);
  grid_offsets_.resize(count);
  for (Index i = 0; i < count; ++i) {
    Index offset = 0;
    for (int j = 0; j < dimension; ++j) offset += strides_[j] * points_(j, i);
    grid_offsets_[i] = offset;
    grid_[offset] = i;
  }
}

ShellRange LatticeIndex::shell_range(int s) const {
  if (s < 1 || s > n_max_) return {count(), count()};
  return {shell_begin_[s], shell_begin_[s + 1]};
}

Index LatticeIndex::index_of(std::span<const int> alpha) const {
  if (static_cast<int>(alpha.size()) != dimension_) throw Error("composition dimension does not match lattice");
  Index offset = 0;
  int total = 0;
  for (int j = 0; j < dimension_; ++j) {
    if (alpha[j] < 0) return -1;
    total += alpha[j];
    if (total > n_max_) return -1;
    offset += strides_[j] * alpha[j];
  }
  return grid_[offset];
}

Index LatticeIndex::index_of(const Composition& alpha) const {
  return index_of(std::span<const int>(alpha.counts().data(), static_cast<std::size_t>(alpha.dimension())));
}

std::shared_ptr<const LatticeIndex> enumerate(int dimension, int n_max, std::size_t memory_budget) {
  return std::make_shared<const LatticeIndex>(dimension, n_max, memory_budget);
}

PopulationState::PopulationState(std::shared_ptr<const LatticeIndex> lattice, double time)
    : lattice_(std::move(lattice)), time_(time) {
  n_ = Eigen::ArrayXd::Zero(lattice_->count());
}

PopulationState::PopulationState(std::shared_ptr<const LatticeIndex> lattice, Eigen::ArrayXd concentrations,
                                 double time)
    : lattice_(std::move(lattice)), n_(std::move(concentrations)), time_(time) {
  if (n_.size() != lattice_->count()) throw Error("concentration array does not match lattice size");
}

void PopulationState::validate() const {
  for (Index i = 0; i < n_.size(); ++i) {
    if (!std::isfinite(n_[i]) || n_[i] < 0.0) {
      throw Error("invalid concentration " + std::to_string(n_[i]) + " at lattice index " + std::to_string(i));
    }
  }
}

double shell_sum(const PopulationState& state, double lo, double hi, double q) {
  if (!(lo > 0.0) || hi < lo) throw Error("shell_sum requires 0 < lo <= hi");
  const LatticeIndex& lattice = state.lattice();
  const int first = static_cast<int>(std::ceil(lo));
  const int last = static_cast<int>(std::min<double>(std::floor(hi), lattice.n_max()));
  double total = 0.0;
  for (int s = first; s <= last; ++s) {
    const ShellRange shell = lattice.shell_range(s);
    const double weight = q == 0.0 ? 1.0 : std::pow(static_cast<double>(s), q);
    total += weight * state.concentrations().segment(shell.begin, shell.count()).sum();
  }
  return total;
}

}  // namespace coag
