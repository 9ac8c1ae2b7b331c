#include "doctest.h"

#include <cmath>
#include <random>

#include "crystalflow/halfspace.hpp"

using namespace crystalflow;

namespace {

InteractionMatrix nn(int d, double kappa, double mass) {
  const std::vector<double> k{kappa}, m{mass};
  return nearest_neighbor_crystal(d, 1, k, m);
}

FieldState random_slab(const Lattice& slab, int n, std::uint64_t seed) {
  FieldState y(slab, n, true);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (std::size_t s = 0; s < slab.size(); ++s) {
    if (slab.coords(s)[0] == 0) continue;
    for (int a = 0; a < n; ++a) {
      y.u[s * n + a] = g(rng);
      y.v[s * n + a] = g(rng);
    }
  }
  return y;
}

double c1_square_lattice(double mass) {
  const int n = 4096;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t2 = -kPi + 2.0 * kPi * i / n;
    const double a = mass * mass + 4.0 - 2.0 * std::cos(t2);
    s += 2.0 * (std::sqrt(a + 2.0) - std::sqrt(a - 2.0));
  }
  return s * (2.0 * kPi / n) / (4.0 * kPi * kPi);
}

const double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

TEST_CASE("odd extension and restriction") {
  const Lattice slab = halfspace_lattice({6, 4});
  CHECK(slab.origin()[0] == 0);
  const auto y = random_slab(slab, 2, 3);
  const auto ext = odd_extension(y);
  CHECK(ext.lattice.extent(0) == 12);
  for (std::size_t s = 0; s < ext.size(); ++s) {
    auto c = ext.lattice.coords(s);
    const long x1 = ((c[0] % 12) + 12) % 12;
    if (x1 == 0 || x1 == 6) {
      CHECK(ext.u[2 * s] == 0.0);
      continue;
    }
    auto m = c;
    m[0] = 12 - x1;
    c[0] = x1;
    CHECK(ext.u[2 * ext.lattice.index(c)] == -ext.u[2 * ext.lattice.index(m)]);
  }
  const auto back = restrict_to_slab(ext, slab);
  CHECK(back.u == y.u);
  CHECK(back.v == y.v);
  CHECK(back.half_space);
}

TEST_CASE("half-space evolution keeps the wall at zero and conserves energy") {
  const auto v = nn(2, 1.0, 0.5);
  const Lattice slab = halfspace_lattice({16, 8});
  const HalfSpaceEvolver ev(v, slab);
  const auto y0 = random_slab(slab, 1, 4);
  for (double t : {0.3, 9.0, 40.0}) {
    const auto yt = ev.evolve(y0, t);
    for (std::size_t s = 0; s < slab.size(); ++s)
      if (slab.coords(s)[0] == 0) {
        CHECK(yt.u[s] == 0.0);
        CHECK(yt.v[s] == 0.0);
      }
    // energy of the odd extension is twice the slab energy with u(0) = 0 and u(N_1) = 0
    const auto e0 = odd_extension(y0), et = ev.evolve_extended(y0, t);
    CHECK(energy(et, v) == doctest::Approx(energy(e0, v)).epsilon(1e-9));
  }
}

TEST_CASE("far from the wall the half-space flow matches the full-space flow") {
  const auto v = nn(1, 1.0, 1.0);
  const Lattice slab = halfspace_lattice({256});
  const Lattice full({512}, {0});
  FieldState ys(slab, 1, true), yf(full, 1);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (long x = 110; x <= 146; ++x) {
    const double a = g(rng), b = g(rng);
    const long xs[1] = {x};
    ys.u[slab.index(xs)] = a;
    ys.v[slab.index(xs)] = b;
    yf.u[full.index(xs)] = a;
    yf.v[full.index(xs)] = b;
  }
  const auto hs = HalfSpaceEvolver(v, slab).evolve(ys, 6.0);
  const auto fs = Evolver(v, full).evolve(yf, 6.0);
  double err = 0.0;
  for (long x = 1; x < 256; ++x) {
    const long xs[1] = {x};
    err = std::max(err, std::abs(hs.u[slab.index(xs)] - fs.u[full.index(xs)]));
  }
  CHECK(err < 1e-8);
}

TEST_CASE("half-space evolution requires mirror symmetry along axis 1") {
  RMatrix a(1, 1), b(1, 1), c(1, 1);
  a << 4.0;
  b << -1.0;
  c << -0.5;
  // coupling along the diagonal e_1 + e_2 only: not mirror symmetric in x_1
  const InteractionMatrix v(2, 1, {{{0, 0}, a}, {{1, 0}, b}, {{-1, 0}, b}, {{1, 1}, c}, {{-1, -1}, c}});
  CHECK_FALSE(v.mirror_symmetric());
  CHECK_THROWS_AS(HalfSpaceEvolver(v, halfspace_lattice({8, 8})), ConfigError);
}

TEST_CASE("half-space covariance vanishes on the wall and decays to the bulk") {
  const auto v = nn(1, 1.0, 1.0);
  const auto grid = FrequencyGrid::quadrature(1, 2048);
  // A single reservoir on the n_1 = 2 index set: the part of q_hat+ even in
  // theta_1 is half the Gibbs density; the odd part drops out of Q+(x, x).
  const auto layout = gibbs_layout(v, 1, {kNaN, 1.0}, 0, SpliceProfile::ramp, true);
  const auto data = DispersionData::build(v, grid);
  const auto qhat = limiting_covariance(ReservoirSpectra::from_layout(layout), data);
  const auto spec = gibbs_spec(v, 1.0);
  for (std::size_t p = 0; p < grid.size(); p += 97) {
    const CMatrix even = 0.5 * (qhat[p] + qhat[grid.size() - 1 - p]);
    CHECK((even - 0.5 * spec(grid.theta(p))).cwiseAbs().maxCoeff() < 1e-12);
  }
  const long zero[1] = {0};
  const double bulk = 1.0 / std::sqrt(5.0);
  for (long y = 0; y < 6; ++y) {
    const long yy[1] = {y};
    CHECK(halfspace_covariance(qhat, grid, zero, yy).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(halfspace_covariance(qhat, grid, yy, zero).cwiseAbs().maxCoeff() < 1e-14);
  }
  double prev = 1e9;
  for (long x : {1L, 2L, 4L, 8L, 16L}) {
    const long xx[1] = {x};
    const double diff = std::abs(halfspace_covariance(qhat, grid, xx, xx)(0, 0).real() - bulk);
    CHECK(diff < prev);
    prev = diff;
  }
  CHECK(prev < 1e-6);
  // momentum block: delta_{xy} for x, y > 0
  const long x3[1] = {3}, x4[1] = {4};
  CHECK(halfspace_covariance(qhat, grid, x3, x3)(1, 1).real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(halfspace_covariance(qhat, grid, x3, x4)(1, 1).real()) < 1e-12);
}

TEST_CASE("d = 1 and k = 1 half-space currents vanish") {
  const auto v1 = nn(1, 1.0, 1.0);
  const auto l1 = gibbs_layout(v1, 1, {kNaN, 2.0}, 0, SpliceProfile::ramp, true);
  const auto p1 = halfspace_current(v1, l1, {0, 1, 5}, 1024);
  for (const auto& row : p1.current)
    for (double j : row) CHECK(std::abs(j) < 1e-14);

  const auto v2 = nn(2, 1.0, 1.0);
  const auto l2 = gibbs_layout(v2, 1, {kNaN, 2.0}, 0, SpliceProfile::ramp, true);
  const auto p2 = halfspace_current(v2, l2, {0, 1, 5}, 128);
  for (const auto& row : p2.current)
    for (double j : row) CHECK(std::abs(j) < 1e-12);
}

TEST_CASE("square lattice half-space profile with two reservoirs") {
  const auto v = nn(2, 1.0, 1.0);
  const double t21 = 1.0, t22 = 3.0;
  const auto layout = gibbs_layout(v, 2, {kNaN, t21, kNaN, t22}, 0, SpliceProfile::ramp, true);
  const std::vector<long> planes{0, 1, 2, 4, 8, 16, 32};
  const auto prof = halfspace_current(v, layout, planes, 512);
  REQUIRE(prof.current.size() == planes.size());
  REQUIRE_FALSE(prof.current_fourier.empty());
  REQUIRE_FALSE(prof.current_shortcut.empty());

  const double c = c1_square_lattice(1.0);
  CHECK(prof.c_limit[1] == doctest::Approx(c).epsilon(1e-4));
  // Far from the wall the two reservoirs act as one splice along axis 2.
  CHECK(prof.asymptote[0] == 0.0);
  CHECK(prof.asymptote[1] == doctest::Approx(-0.5 * c * (t22 - t21)).epsilon(1e-4));

  for (std::size_t i = 0; i < planes.size(); ++i) {
    CAPTURE(planes[i]);
    CHECK(prof.current[i][0] == 0.0);
    CHECK(prof.current_fourier[i][1] == doctest::Approx(prof.current[i][1]).epsilon(1e-8));
    CHECK(prof.current_shortcut[i][1] == doctest::Approx(prof.current[i][1]).epsilon(1e-8));
    CHECK(prof.c[i][1] >= 0.0);
    CHECK(prof.c[i][1] <= 2.0 * prof.c_limit[1] + 1e-12);
  }
  CHECK(prof.current[0][1] == 0.0);
  CHECK(std::abs(prof.current.back()[1] - prof.asymptote[1]) < 1e-3 * std::abs(prof.asymptote[1]));

  // Cesaro means of c_l(x_1) approach c_l.
  const auto many = halfspace_current(v, layout, [] {
    std::vector<long> xs;
    for (long x = 1; x <= 64; ++x) xs.push_back(x);
    return xs;
  }(), 512, false);
  double mean8 = 0.0, mean64 = 0.0;
  for (std::size_t i = 0; i < many.c.size(); ++i) {
    if (i < 8) mean8 += many.c[i][1] / 8.0;
    mean64 += many.c[i][1] / 64.0;
  }
  CHECK(std::abs(mean64 - c) < std::abs(mean8 - c) + 1e-12);
  CHECK(mean64 == doctest::Approx(c).epsilon(2e-2));
}

TEST_CASE("equal half-space temperatures carry no current") {
  const auto v = nn(2, 1.0, 0.5);
  const auto layout = gibbs_layout(v, 2, {kNaN, 2.0, kNaN, 2.0}, 0, SpliceProfile::ramp, true);
  const auto prof = halfspace_current(v, layout, {1, 3, 9}, 128);
  for (const auto& row : prof.current)
    for (double j : row) CHECK(std::abs(j) < 1e-12);
}

TEST_CASE("half-space layout validation") {
  const auto v = nn(2, 1.0, 1.0);
  CHECK_NOTHROW(gibbs_halfspace_layout(v, 2, {kNaN, 1.0, kNaN, 2.0}, 2, SpliceProfile::ramp, {64, 64}));
  CHECK_THROWS_AS(gibbs_halfspace_layout(v, 2, {kNaN, 1.0, kNaN, -2.0}, 2, SpliceProfile::ramp, {64, 64}),
                  ConfigError);
  CHECK_THROWS_AS(gibbs_halfspace_layout(v, 2, {kNaN, 1.0, kNaN, 2.0}, 2, SpliceProfile::ramp, {64}),
                  ConfigError);
}
