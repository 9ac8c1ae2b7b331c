#include "doctest.h"

#include <cmath>
#include <random>

#include "crystalflow/spectral.hpp"

using namespace crystalflow;

namespace {

InteractionMatrix chain(double kappa, double mass) {
  const double k[1] = {kappa};
  const double m[1] = {mass};
  return nearest_neighbor_crystal(1, 1, k, m);
}

// Two coupled components on a 2D lattice with a nonsymmetric-looking but
// stencil-symmetric coupling: V(e_1) = B, V(-e_1) = B^T.
InteractionMatrix coupled_2d() {
  RMatrix v0(2, 2), b(2, 2), c(2, 2);
  v0 << 6.0, 0.5, 0.5, 5.0;
  b << -1.0, 0.3, -0.2, -0.8;
  c << -0.7, 0.0, 0.0, -0.9;
  std::vector<StencilEntry> e{{{0, 0}, v0}, {{1, 0}, b}, {{-1, 0}, b.transpose()},
                              {{0, 1}, c}, {{0, -1}, c.transpose()}};
  return InteractionMatrix(2, 2, e);
}

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("nearest-neighbour symbol: omega^2 = m^2 + 2 kappa sum (1 - cos theta_j)") {
  const double k[2] = {1.5, 0.5};
  const double m[2] = {1.0, 0.0};
  const auto v = nearest_neighbor_crystal(2, 2, k, m);
  CHECK(v.mirror_symmetric());
  CHECK(v.diagonal());
  CHECK(v.support_radius() == 1);
  const std::vector<double> th{0.3, -1.1};
  const CMatrix s = v.symbol(th);
  const double sum = 2.0 * (2.0 - std::cos(th[0]) - std::cos(th[1]));
  CHECK(std::abs(s(0, 0) - (1.0 + 1.5 * sum)) < 1e-14);
  CHECK(std::abs(s(1, 1) - 0.5 * sum) < 1e-14);
  CHECK(std::abs(s(0, 1)) < 1e-15);
}

TEST_CASE("stencil symmetry V(-x) = V(x)^T is enforced on construction") {
  RMatrix a(1, 1), b(1, 1);
  a << 2.0;
  b << -1.0;
  CHECK_THROWS_AS(InteractionMatrix(1, 1, {{{0}, a}, {{1}, b}}), ValidationError);
  CHECK_NOTHROW(InteractionMatrix(1, 1, {{{0}, a}, {{1}, b}, {{-1}, b}}));
  CHECK_THROWS_AS(InteractionMatrix(1, 1, {{{0}, a}, {{0}, a}}), ConfigError);
}

TEST_CASE("symbol is Hermitian and its derivative matches finite differences") {
  const auto v = coupled_2d();
  CHECK_FALSE(v.diagonal());
  CHECK_FALSE(v.mirror_symmetric());
  const std::vector<double> th{0.7, -0.4};
  const CMatrix s = v.symbol(th);
  CHECK(max_abs(s - s.adjoint()) < 1e-14);
  for (int l = 0; l < 2; ++l) {
    std::vector<double> p = th, q = th;
    p[l] += 1e-6;
    q[l] -= 1e-6;
    const CMatrix fd = (v.symbol(p) - v.symbol(q)) / 2e-6;
    CHECK(max_abs(fd - v.symbol_derivative(th, l)) < 1e-8);
  }
}

TEST_CASE("projector algebra holds to 1e-10") {
  const auto v = coupled_2d();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<double> th{u(rng), u(rng)};
    const CMatrix vhat = v.symbol(th);
    const auto dec = eigendecompose(vhat, {}, th);
    CMatrix sum = CMatrix::Zero(2, 2);
    for (std::size_t s = 0; s < dec.bands.size(); ++s) {
      const CMatrix p = dec.projector(s);
      CHECK(max_abs(p * p - p) < 1e-10);
      CHECK(max_abs(p - p.adjoint()) < 1e-10);
      CHECK(std::abs(p.trace().real() - dec.bands[s].multiplicity) < 1e-10);
      for (std::size_t r = 0; r < dec.bands.size(); ++r)
        if (r != s) CHECK(max_abs(p * dec.projector(r)) < 1e-10);
      sum += p;
    }
    CHECK(max_abs(sum - CMatrix::Identity(2, 2)) < 1e-10);
    const CMatrix omega = dec.omega_matrix();
    CHECK(max_abs(omega * omega - vhat) < 1e-10 * (1.0 + max_abs(vhat)));
  }
}

TEST_CASE("degenerate bands are clustered") {
  const std::vector<double> ones(3, 1.0);
  const auto v = nearest_neighbor_crystal(1, 3, ones, ones);
  const std::vector<double> th{0.9};
  const auto dec = eigendecompose(v.symbol(th));
  REQUIRE(dec.bands.size() == 1);
  CHECK(dec.bands[0].multiplicity == 3);
}

TEST_CASE("an indefinite symbol throws ValidationError") {
  RMatrix a(1, 1), b(1, 1);
  a << -1.0;
  b << 0.2;
  const InteractionMatrix v(1, 1, {{{0}, a}, {{1}, b}, {{-1}, b}});
  CHECK_THROWS_AS(DispersionData::build(v, FrequencyGrid::quadrature(1, 16)), ValidationError);
}

TEST_CASE("chain group velocity: d omega / d theta = kappa sin theta / omega") {
  const auto v = chain(1.0, 1.0);
  for (double t : {-2.5, -0.3, 0.1, 1.7, 3.0}) {
    const double w = std::sqrt(1.0 + 2.0 * (1.0 - std::cos(t)));
    const std::vector<double> th{t};
    const double exact = std::sin(t) / w;
    CHECK(std::abs(group_velocity(v, th, 0, 0, VelocityMode::analytic) - exact) < 1e-12);
    CHECK(std::abs(group_velocity(v, th, 0, 0, VelocityMode::finite_difference) - exact) < 1e-7);
  }
}

TEST_CASE("analytic velocities agree with finite differences on nondegenerate coupled bands") {
  const auto v = coupled_2d();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-kPi, kPi);
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<double> th{u(rng), u(rng)};
    const auto dec = eigendecompose(v.symbol(th));
    if (dec.bands.size() != 2) continue;
    if (dec.bands[1].omega - dec.bands[0].omega < 1e-3) continue;
    for (std::size_t s = 0; s < 2; ++s)
      for (int l = 0; l < 2; ++l)
        CHECK(std::abs(group_velocity(v, th, s, l, VelocityMode::analytic) -
                       group_velocity(v, th, s, l, VelocityMode::finite_difference)) < 1e-6);
  }
}

TEST_CASE("dispersion data: max velocity and zero-velocity fraction of the chain") {
  const auto v = chain(1.0, 1.0);
  const auto data = DispersionData::build(v, FrequencyGrid::quadrature(1, 1024));
  // max sin/w over theta: attained at cos theta = 3 - sqrt(5) ... < 1
  double best = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double t = kPi * i / 200000.0;
    best = std::max(best, std::sin(t) / std::sqrt(3.0 - 2.0 * std::cos(t)));
  }
  CHECK(data.max_group_velocity() == doctest::Approx(best).epsilon(1e-4));
  CHECK(data.max_group_velocity() < 1.0);
  CHECK(data.zero_velocity_fraction()[0] == 0.0);
  for (std::size_t p = 0; p < data.size(); ++p) {
    const double th = data.grid().theta(p)[0];
    CHECK(data.velocity_sign(p, 0, 0) == (th > 0 ? 1 : -1));
  }
}

TEST_CASE("condition report: massless chain has C_0 = {0}, massive chain none") {
  const auto massless = chain(1.0, 0.0);
  const auto data0 = DispersionData::build(massless, FrequencyGrid::quadrature(1, 256));
  const auto rep0 = validate_conditions(massless, data0);
  REQUIRE(rep0.zero_set.size() == 1);
  CHECK(std::abs(rep0.zero_set[0][0]) < 1e-12);
  CHECK(rep0.psd);
  CHECK_FALSE(rep0.warnings.empty());
  // In d = 1 the massless inverse norm is not integrable: refinement diverges.
  CHECK_FALSE(rep0.inverse_norm.converging);

  const auto massive = chain(1.0, 1.0);
  const auto data1 = DispersionData::build(massive, FrequencyGrid::quadrature(1, 256));
  const auto rep1 = validate_conditions(massive, data1);
  CHECK(rep1.zero_set.empty());
  CHECK(rep1.inverse_norm.converging);
  // (2 pi)^{-1} int dtheta / (3 - 2 cos theta) = 1 / sqrt(5)
  CHECK(rep1.inverse_norm.values.back() == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-8));
}

TEST_CASE("massless 3D crystal has an integrable inverse symbol") {
  const double k[1] = {1.0};
  const double m[1] = {0.0};
  const auto v = nearest_neighbor_crystal(3, 1, k, m);
  const auto data = DispersionData::build(v, FrequencyGrid::quadrature(3, 32));
  const auto rep = validate_conditions(v, data);
  CHECK(rep.inverse_norm.converging);
}
