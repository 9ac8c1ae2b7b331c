#include "doctest.h"

#include <cmath>
#include <random>

#include "crystalflow/dynamics.hpp"

using namespace crystalflow;

namespace {

InteractionMatrix chain(double kappa, double mass) {
  const double k[1] = {kappa};
  const double m[1] = {mass};
  return nearest_neighbor_crystal(1, 1, k, m);
}

InteractionMatrix coupled_2d() {
  RMatrix v0(2, 2), b(2, 2), c(2, 2);
  v0 << 6.0, 0.5, 0.5, 5.0;
  b << -1.0, 0.3, -0.2, -0.8;
  c << -0.7, 0.0, 0.0, -0.9;
  std::vector<StencilEntry> e{{{0, 0}, v0}, {{1, 0}, b}, {{-1, 0}, b.transpose()},
                              {{0, 1}, c}, {{0, -1}, c.transpose()}};
  return InteractionMatrix(2, 2, e);
}

// Next-nearest-neighbour chain: support radius 2.
InteractionMatrix long_chain() {
  RMatrix a(1, 1), b(1, 1), c(1, 1);
  a << 3.5;
  b << -1.0;
  c << -0.25;
  return InteractionMatrix(1, 1, {{{0}, a}, {{1}, b}, {{-1}, b}, {{2}, c}, {{-2}, c}});
}

FieldState random_field(const Lattice& lat, int n, std::uint64_t seed) {
  FieldState y(lat, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (auto& x : y.u) x = g(rng);
  for (auto& x : y.v) x = g(rng);
  return y;
}

double max_diff(const FieldState& a, const FieldState& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.u.size(); ++i) {
    m = std::max(m, std::abs(a.u[i] - b.u[i]));
    m = std::max(m, std::abs(a.v[i] - b.v[i]));
  }
  return m;
}

// h(x) = 1/2 |v(x)|^2 + 1/2 u(x) . (V u)(x), computed independently of the library.
double site_energy(const FieldState& y, const InteractionMatrix& v, std::size_t x) {
  const auto n = static_cast<Eigen::Index>(y.components);
  Eigen::Map<const Eigen::VectorXd> ux(y.u.data() + x * n, n), vx(y.v.data() + x * n, n);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  std::vector<int> neg(v.dimension());
  for (const auto& e : v.entries()) {
    for (int j = 0; j < v.dimension(); ++j) neg[j] = -e.offset[j];
    const std::size_t s = y.lattice.shifted(x, neg);
    acc += e.block * Eigen::Map<const Eigen::VectorXd>(y.u.data() + s * n, n);
  }
  return 0.5 * vx.squaredNorm() + 0.5 * ux.dot(acc);
}

double box_energy(const FieldState& y, const InteractionMatrix& v, const Box& b) {
  double s = 0.0;
  for (std::size_t x : b.sites(y.lattice)) s += site_energy(y, v, x);
  return s;
}

}  // namespace

TEST_CASE("energy is conserved to 1e-9 relative") {
  for (const auto& v : {chain(1.0, 1.0), chain(2.0, 0.0), coupled_2d(), long_chain()}) {
    const Lattice lat = v.dimension() == 1 ? Lattice({128}) : Lattice({16, 24});
    const Evolver ev(v, lat);
    const auto y0 = random_field(lat, v.components(), 5);
    const double h0 = energy(y0, v);
    for (double t : {0.5, 17.0, 250.0}) {
      const auto yt = ev.evolve(y0, t);
      CHECK(std::abs(energy(yt, v) - h0) <= 1e-9 * h0);
    }
    CHECK(energy_spectral(y0, ev) == doctest::Approx(h0).epsilon(1e-12));
  }
}

TEST_CASE("evolution is linear, reversible and obeys the group law") {
  const auto v = coupled_2d();
  const Lattice lat({12, 10});
  const Evolver ev(v, lat);
  const auto a = random_field(lat, 2, 1);
  const auto b = random_field(lat, 2, 2);
  FieldState comb(lat, 2);
  for (std::size_t i = 0; i < comb.u.size(); ++i) {
    comb.u[i] = 2.0 * a.u[i] - 0.5 * b.u[i];
    comb.v[i] = 2.0 * a.v[i] - 0.5 * b.v[i];
  }
  const auto ea = ev.evolve(a, 3.3), eb = ev.evolve(b, 3.3), ec = ev.evolve(comb, 3.3);
  FieldState lin(lat, 2);
  for (std::size_t i = 0; i < lin.u.size(); ++i) {
    lin.u[i] = 2.0 * ea.u[i] - 0.5 * eb.u[i];
    lin.v[i] = 2.0 * ea.v[i] - 0.5 * eb.v[i];
  }
  CHECK(max_diff(ec, lin) < 1e-10);

  auto back = ea;
  for (auto& x : back.v) x = -x;
  back = ev.evolve(back, 3.3);
  for (auto& x : back.v) x = -x;
  CHECK(max_diff(back, a) < 1e-10);

  CHECK(max_diff(ev.evolve(ev.evolve(a, 1.25), 2.5), ev.evolve(a, 3.75)) < 1e-10);
  CHECK(max_diff(ev.evolve(a, 0.0), a) < 1e-13);
}

TEST_CASE("propagator blocks are symplectic and preserve Gibbs densities") {
  const auto v = coupled_2d();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  const CMatrix j = [] {
    CMatrix m = CMatrix::Zero(4, 4);
    m.block(0, 2, 2, 2) = CMatrix::Identity(2, 2);
    m.block(2, 0, 2, 2) = -CMatrix::Identity(2, 2);
    return m;
  }();
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> th{u(rng), u(rng)};
    const CMatrix vh = v.symbol(th);
    const auto dec = eigendecompose(vh);
    const CMatrix g = propagator_block(dec, 7.3);
    CHECK((g.adjoint() * j * g - j).cwiseAbs().maxCoeff() < 1e-10);
    CMatrix q = CMatrix::Zero(4, 4);
    q.block(0, 0, 2, 2) = 1.7 * vh.inverse();
    q.block(2, 2, 2, 2) = 1.7 * CMatrix::Identity(2, 2);
    CHECK((g * q * g.adjoint() - q).cwiseAbs().maxCoeff() < 1e-10);
  }
  // omega = 0 replaces sin(w t)/w by t
  const auto massless = chain(1.0, 0.0);
  const std::vector<double> zero{0.0};
  const CMatrix g0 = propagator_block(eigendecompose(massless.symbol(zero)), 2.0);
  CHECK(std::abs(g0(0, 1) - 2.0) < 1e-14);
  CHECK(std::abs(g0(0, 0) - 1.0) < 1e-14);
}

TEST_CASE("exact evolution agrees with a fine leapfrog integration") {
  const auto v = long_chain();
  const Lattice lat({40});
  const Evolver ev(v, lat);
  const auto y0 = random_field(lat, 1, 9);
  auto force = [&](const std::vector<double>& u) {
    std::vector<double> f(u.size(), 0.0);
    for (std::size_t x = 0; x < u.size(); ++x)
      for (const auto& e : v.entries()) {
        const int neg = -e.offset[0];
        f[x] -= e.block(0, 0) * u[lat.shifted(x, std::span<const int>(&neg, 1))];
      }
    return f;
  };
  const double dt = 1e-3;
  const int steps = 2000;
  auto uu = y0.u, vv = y0.v;
  auto f = force(uu);
  for (int s = 0; s < steps; ++s) {
    for (std::size_t x = 0; x < uu.size(); ++x) vv[x] += 0.5 * dt * f[x];
    for (std::size_t x = 0; x < uu.size(); ++x) uu[x] += dt * vv[x];
    f = force(uu);
    for (std::size_t x = 0; x < uu.size(); ++x) vv[x] += 0.5 * dt * f[x];
  }
  const auto exact = ev.evolve(y0, dt * steps);
  double err = 0.0;
  for (std::size_t x = 0; x < uu.size(); ++x)
    err = std::max({err, std::abs(uu[x] - exact.u[x]), std::abs(vv[x] - exact.v[x])});
  CHECK(err < 1e-5);
}

TEST_CASE("chain bond current matches the nearest-neighbour formula") {
  // j(x) = (kappa/2) [v(x) u(x-1) - v(x-1) u(x)]: the flux from x-1 into x.
  const auto v = chain(1.5, 1.0);
  const Lattice lat({32});
  const auto y = random_field(lat, 1, 3);
  for (std::size_t x = 0; x < lat.size(); ++x) {
    const std::size_t xm = (x + lat.size() - 1) % lat.size();
    const double j = 0.75 * (y.v[x] * y.u[xm] - y.v[xm] * y.u[x]);
    CHECK(local_current(y, v, 0, x) == doctest::Approx(j).epsilon(1e-12));
  }
}

TEST_CASE("local energy continuity: dH_box/dt = J(lo) - J(hi + 1)") {
  // Oracle: central difference of the box energy along the exact flow.
  for (const auto& v : {chain(1.0, 0.5), long_chain(), coupled_2d()}) {
    const int d = v.dimension();
    const Lattice lat = d == 1 ? Lattice({48}) : Lattice({14, 12});
    const Evolver ev(v, lat);
    const auto y = random_field(lat, v.components(), 21);
    for (int axis = 0; axis < d; ++axis) {
      Box b = Box::whole(lat);
      b.lo[axis] = -3;
      b.hi[axis] = 2;
      const double h = 1e-5;
      const double dh = (box_energy(ev.evolve(y, h), v, b) - box_energy(ev.evolve(y, -h), v, b)) / (2 * h);
      const double flux = energy_current(y, v, axis, -3) - energy_current(y, v, axis, 3);
      CAPTURE(axis);
      CHECK(dh == doctest::Approx(flux).epsilon(1e-6));
    }
  }
}

TEST_CASE("box_current fast path matches the general double sum") {
  const auto v = nearest_neighbor_crystal(2, 2, std::vector<double>{0.8, 0.8},
                                          std::vector<double>{1.0, 0.3});
  const Lattice lat({10, 9});
  const auto y = random_field(lat, 2, 77);
  std::vector<const kernels::KernelTable*> tables{&kernels::scalar_table()};
  if (kernels::avx2_table()) tables.push_back(kernels::avx2_table());
  for (int axis = 0; axis < 2; ++axis)
    for (const Box& b : {Box::whole(lat), Box{{-2, -4}, {3, 4}}, Box{{-5, -4}, {-5, 4}},
                         Box{{0, -1}, {4, 0}}}) {
      double direct = 0.0;
      for (std::size_t s : b.sites(lat)) direct += local_current(y, v, axis, s);
      direct /= static_cast<double>(b.count());
      for (const auto* t : tables) {
        CAPTURE(t->name);
        CHECK(box_current(y, v, axis, b, *t) == doctest::Approx(direct).epsilon(1e-12));
      }
    }
  // box_kinetic: mean of |v|^2
  const Box b{{-1, -1}, {1, 1}};
  double kin = 0.0;
  for (std::size_t s : b.sites(lat)) kin += y.v[2 * s] * y.v[2 * s] + y.v[2 * s + 1] * y.v[2 * s + 1];
  CHECK(box_kinetic(y, b) == doctest::Approx(kin / 9.0).epsilon(1e-13));
}

TEST_CASE("weighted norm and validity horizon") {
  const Lattice lat({8});
  FieldState y(lat, 1);
  const long x3[1] = {3};
  y.u[lat.index(x3)] = 2.0;
  y.v[lat.index(x3)] = 1.0;
  // <3>^{2 alpha} (4 + 1) = 10^alpha * 5
  CHECK(weighted_norm(y, 0.5) == doctest::Approx(5.0 * std::sqrt(10.0)));
  CHECK(weighted_norm(y, 0.0) == doctest::Approx(5.0));
  CHECK(validity_horizon(Lattice({64, 128}), 2, 1, 0.5) == doctest::Approx(58.0));
  CHECK(validity_horizon(Lattice({4096}), 2, 1, 0.5 * (std::sqrt(5.0) - 1.0)) ==
        doctest::Approx(2045.0 / (0.5 * (std::sqrt(5.0) - 1.0))));
}
