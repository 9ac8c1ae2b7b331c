#include "doctest.h"

#include <atomic>
#include <cmath>
#include <set>

#include "crystalflow/core.hpp"

using namespace crystalflow;

TEST_CASE("lattice index and coords are inverse with periodic wrap") {
  const Lattice lat({4, 6});
  CHECK(lat.size() == 24);
  CHECK(lat.origin() == std::vector<long>{2, 3});
  for (std::size_t s = 0; s < lat.size(); ++s) CHECK(lat.index(lat.coords(s)) == s);
  const std::vector<long> a{1, -2};
  const std::vector<long> b{1 + 4, -2 - 6};
  CHECK(lat.index(a) == lat.index(b));
  const std::vector<long> zero{0, 0};
  const std::size_t c = lat.index(zero);
  const std::vector<int> step{0, 1};
  CHECK(lat.coords(lat.shifted(c, step)) == std::vector<long>{0, 1});
  const std::vector<int> wrap{-3, 0};
  CHECK(lat.coords(lat.shifted(c, wrap)) == std::vector<long>{1, 0});
}

TEST_CASE("lattice rejects bad shapes") {
  CHECK_THROWS_AS(Lattice(std::vector<std::size_t>{}), ConfigError);
  CHECK_THROWS_AS(Lattice({4, 0}), ConfigError);
  CHECK_THROWS_AS(Lattice({4}, {0, 0}), ConfigError);
}

TEST_CASE("quadrature grid avoids theta = 0 and is symmetric") {
  const auto g = FrequencyGrid::quadrature(2, 8);
  CHECK(g.size() == 64);
  CHECK(g.weight() == doctest::Approx(1.0 / 64));
  for (std::size_t p = 0; p < g.size(); ++p) {
    const auto th = g.theta(p);
    for (double t : th) {
      CHECK(t != 0.0);
      CHECK(t > -kPi);
      CHECK(t < kPi);
    }
    const auto neg = g.theta(g.negated(p));
    CHECK(neg[0] == doctest::Approx(-th[0]));
    CHECK(neg[1] == doctest::Approx(-th[1]));
    const auto ref = g.theta(g.reflected(p, 1));
    CHECK(ref[0] == doctest::Approx(th[0]));
    CHECK(ref[1] == doctest::Approx(-th[1]));
  }
}

TEST_CASE("lattice grid holds DFT frequencies in FFT order") {
  const auto g = FrequencyGrid::for_lattice(Lattice({8}));
  CHECK(g.theta(0)[0] == 0.0);
  CHECK(g.theta(1)[0] == doctest::Approx(2 * kPi / 8));
  CHECK(g.theta(7)[0] == doctest::Approx(-2 * kPi / 8));
  CHECK(std::abs(g.theta(4)[0]) == doctest::Approx(kPi));
  CHECK(g.negated(1) == 7);
  CHECK(g.negated(0) == 0);
}

TEST_CASE("reservoir indices, patterns and digits") {
  const auto all = all_reservoirs(2);
  REQUIRE(all.size() == 4);
  CHECK(all[0].pattern() == "--");
  CHECK(all[0].digits() == "11");
  CHECK(all[3].pattern() == "++");
  CHECK(all[3].digits() == "22");
  const auto r = ReservoirIndex::from_pattern("+-");
  CHECK(r.n(0) == 2);
  CHECK(r.n(1) == 1);
  CHECK(r.parity(0) == 1);
  CHECK(r.parity(1) == -1);
  CHECK(r.digits() == "21");
  CHECK_THROWS_AS(ReservoirIndex::from_pattern("+x"), ConfigError);
}

TEST_CASE("parallel_for visits every index once for any worker count") {
  for (std::size_t workers : {1u, 2u, 7u}) {
    std::vector<std::atomic<int>> hits(101);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) CHECK(h.load() == 1);
  }
}
