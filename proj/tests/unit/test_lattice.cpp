#include <doctest.h>

#include <random>

#include "coag/lattice.hpp"

using namespace coag;

TEST_SUITE("lattice") {
  TEST_CASE("point counts match the closed form") {
    CHECK(enumerate(3, 20)->count() == 1770);
    CHECK(lattice_point_count(3, 20) == 1770);
    CHECK(lattice_point_count(1, 7) == 7);
    CHECK(lattice_point_count(2, 10) == 65);
    for (int d = 1; d <= 4; ++d)
      for (int n = 1; n <= 9; ++n) CHECK(enumerate(d, n)->count() == lattice_point_count(d, n));
  }

  TEST_CASE("shells ascend and are descending-lexicographic inside") {
    auto lat = enumerate(2, 3);
    CHECK(lat->composition(0) == Composition{1, 0});
    CHECK(lat->composition(1) == Composition{0, 1});
    CHECK(lat->composition(2) == Composition{2, 0});
    CHECK(lat->composition(3) == Composition{1, 1});
    CHECK(lat->composition(4) == Composition{0, 2});
    auto big = enumerate(3, 8);
    for (Index i = 1; i < big->count(); ++i) {
      const int a = big->size_of(i - 1), b = big->size_of(i);
      CHECK(a <= b);
      if (a == b) {
        const Eigen::VectorXi p = big->point(i - 1), q = big->point(i);
        CHECK(std::lexicographical_compare(q.data(), q.data() + 3, p.data(), p.data() + 3));
      }
    }
  }

  TEST_CASE("index_of inverts composition and rejects outside points") {
    auto lat = enumerate(3, 10);
    for (Index i = 0; i < lat->count(); ++i) CHECK(lat->index_of(lat->composition(i)) == i);
    CHECK(lat->index_of(Composition{11, 0, 0}) == -1);
    CHECK(lat->index_of(Composition{4, 4, 3}) == -1);
  }

  TEST_CASE("shell ranges are contiguous and cover the lattice") {
    auto lat = enumerate(3, 12);
    Index next = 0;
    for (int s = 1; s <= 12; ++s) {
      const ShellRange r = lat->shell_range(s);
      CHECK(r.begin == next);
      CHECK(r.count() == (s + 1) * (s + 2) / 2);
      for (Index i = r.begin; i < r.end; ++i) CHECK(lat->size_of(i) == s);
      next = r.end;
    }
    CHECK(next == lat->count());
  }

  TEST_CASE("property: grid offsets are additive") {
    auto lat = enumerate(3, 14);
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<Index> pick(0, lat->count() - 1);
    for (int t = 0; t < 2000; ++t) {
      const Index a = pick(rng), b = pick(rng);
      const Eigen::VectorXi sum = lat->point(a) + lat->point(b);
      const Index k = lat->index_of(Composition(sum));
      if (k < 0) continue;
      CHECK(lat->grid_offset(k) == lat->grid_offset(a) + lat->grid_offset(b));
      CHECK(lat->at_grid_offset(lat->grid_offset(k)) == k);
    }
  }

  TEST_CASE("compositions and states reject invalid input") {
    CHECK_THROWS_AS(Composition({0, 0}), Error);
    CHECK_THROWS_AS(Composition({-1, 2}), Error);
    CHECK_THROWS_AS(enumerate(3, 400, 1 << 20), LatticeTooLarge);
    auto lat = enumerate(2, 4);
    PopulationState s(lat);
    s.concentrations()[3] = -1.0;
    CHECK_THROWS_AS(s.validate(), Error);
    s.concentrations()[3] = std::nan("");
    CHECK_THROWS_AS(s.validate(), Error);
  }

  TEST_CASE("polar coordinates and shell sums") {
    const PolarPoint p = to_polar(Composition{3, 1});
    CHECK(p.r == 4.0);
    CHECK(p.theta[0] == doctest::Approx(0.75));
    auto lat = enumerate(2, 4);
    PopulationState s(lat, Eigen::ArrayXd::Ones(lat->count()));
    CHECK(shell_sum(s, 1, 4) == doctest::Approx(14.0));
    CHECK(shell_sum(s, 2, 3) == doctest::Approx(7.0));
    CHECK(shell_sum(s, 2, 2, 1.0) == doctest::Approx(6.0));
    CHECK(shell_sum(s, 5, 9) == 0.0);
  }
}
