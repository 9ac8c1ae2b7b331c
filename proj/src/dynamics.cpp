#include "crystalflow/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crystalflow/fft.hpp"

namespace crystalflow {

namespace {

using cplx = std::complex<double>;

double sinc_time(double w, double t, double zero_omega) {
  return w < zero_omega ? t : std::sin(w * t) / w;
}

// Contiguous storage runs (start site, length) covering a box, one or two
// per row of the last axis.
struct Run {
  std::size_t start;
  std::size_t length;
};

std::vector<Run> box_runs(const Lattice& lattice, const Box& box) {
  const int d = lattice.dimension();
  const int last = d - 1;
  const long n_last = static_cast<long>(lattice.extent(last));
  const long span = box.hi[last] - box.lo[last] + 1;
  std::vector<Run> runs;
  if (span <= 0) return runs;
  const long len_total = std::min(span, n_last);
  std::vector<long> c(box.lo);
  for (;;) {
    // Split the last-axis range where it wraps in storage.
    c[last] = box.lo[last];
    const std::size_t first = lattice.index(c);
    const long i0 = static_cast<long>((first / lattice.stride(last)) % lattice.extent(last));
    const long head = std::min(len_total, n_last - i0);
    runs.push_back({first, static_cast<std::size_t>(head)});
    if (head < len_total) runs.push_back({first - static_cast<std::size_t>(i0), static_cast<std::size_t>(len_total - head)});
    int j = last - 1;
    for (; j >= 0; --j) {
      if (++c[j] <= box.hi[j]) break;
      c[j] = box.lo[j];
    }
    if (j < 0) break;
  }
  return runs;
}

// Coupling kappa if V is a nearest-neighbour stencil along `axis` with
// V(+-e_axis) = -kappa I; NaN otherwise.
double bond_coupling(const InteractionMatrix& v, int axis) {
  const int n = v.components();
  double kappa = std::numeric_limits<double>::quiet_NaN();
  for (const auto& e : v.entries()) {
    int nonzero = 0;
    int which = -1;
    for (int j = 0; j < v.dimension(); ++j)
      if (e.offset[j] != 0) {
        ++nonzero;
        which = j;
      }
    if (nonzero == 0) continue;
    if (nonzero > 1 || std::abs(e.offset[which]) != 1)
      return std::numeric_limits<double>::quiet_NaN();
    if (which != axis) continue;
    const double k = -e.block(0, 0);
    if (!(e.block + k * RMatrix::Identity(n, n)).isZero(0.0))
      return std::numeric_limits<double>::quiet_NaN();
    if (std::isnan(kappa)) kappa = k;
    else if (kappa != k) return std::numeric_limits<double>::quiet_NaN();
  }
  return std::isnan(kappa) ? 0.0 : kappa;
}

}  // namespace

CMatrix propagator_block(const SpectralDecomposition& dec, double t, double zero_omega) {
  const auto n = dec.vectors.rows();
  CMatrix g = CMatrix::Zero(2 * n, 2 * n);
  for (std::size_t s = 0; s < dec.bands.size(); ++s) {
    const double w = dec.bands[s].omega;
    const CMatrix pi = dec.projector(s);
    const double c = std::cos(w * t);
    g.topLeftCorner(n, n) += c * pi;
    g.bottomRightCorner(n, n) += c * pi;
    g.topRightCorner(n, n) += sinc_time(w, t, zero_omega) * pi;
    g.bottomLeftCorner(n, n) += (w < zero_omega ? 0.0 : -w * std::sin(w * t)) * pi;
  }
  return g;
}

Evolver::Evolver(const InteractionMatrix& v, const Lattice& lattice, const SpectralTolerances& tol,
                 std::size_t workers)
    : v_(v),
      lattice_(lattice),
      dispersion_(DispersionData::build(v, FrequencyGrid::for_lattice(lattice), tol, workers)) {
  if (v.dimension() != lattice.dimension())
    throw ConfigError("evolver: lattice dimension differs from the interaction matrix");
}

Propagator Evolver::propagator(double t) const {
  Propagator g;
  g.time = t;
  g.components = components();
  const std::size_t count = dispersion_.size();
  const double zt = dispersion_.tolerances().zero_omega;
  if (g.components == 1) {
    g.scalar_coeffs.resize(4 * count);
    for (std::size_t p = 0; p < count; ++p) {
      const double w = dispersion_.omega(p, 0);
      const double c = std::cos(w * t);
      g.scalar_coeffs[4 * p + 0] = c;
      g.scalar_coeffs[4 * p + 1] = c;
      g.scalar_coeffs[4 * p + 2] = sinc_time(w, t, zt);
      g.scalar_coeffs[4 * p + 3] = w < zt ? 0.0 : -w * std::sin(w * t);
    }
  } else {
    g.blocks.resize(count);
    for (std::size_t p = 0; p < count; ++p) g.blocks[p] = propagator_block(dispersion_.point(p), t, zt);
  }
  return g;
}

std::vector<cplx> Evolver::transform(const FieldState& y) const {
  if (!(y.lattice.shape() == lattice_.shape()) || y.components != components())
    throw ConfigError("evolver: field shape differs from the evolver lattice");
  const std::size_t n = static_cast<std::size_t>(components());
  const std::size_t m = 2 * n;
  std::vector<cplx> buf(lattice_.size() * m);
  for (std::size_t x = 0; x < lattice_.size(); ++x)
    for (std::size_t a = 0; a < n; ++a) {
      buf[x * m + a] = y.u[x * n + a];
      buf[x * m + n + a] = y.v[x * n + a];
    }
  FftPlan(lattice_.shape(), m, +1).execute(buf.data());
  return buf;
}

void Evolver::propagate(std::vector<cplx>& spectrum, const Propagator& g) const {
  const std::size_t count = dispersion_.size();
  if (g.components == 1) {
    kernels::active().propagate_pairs(spectrum.data(), g.scalar_coeffs.data(), count);
    return;
  }
  const auto m = static_cast<Eigen::Index>(2 * g.components);
  Eigen::VectorXcd tmp(m);
  for (std::size_t p = 0; p < count; ++p) {
    Eigen::Map<Eigen::VectorXcd> x(spectrum.data() + p * m, m);
    tmp.noalias() = g.blocks[p] * x;
    x = tmp;
  }
}

FieldState Evolver::synthesize(const std::vector<cplx>& spectrum, bool half_space) const {
  const std::size_t n = static_cast<std::size_t>(components());
  const std::size_t m = 2 * n;
  std::vector<cplx> buf(spectrum);
  FftPlan(lattice_.shape(), m, -1).execute(buf.data());
  const double scale = 1.0 / static_cast<double>(lattice_.size());
  FieldState out(lattice_, components(), half_space);
  for (std::size_t x = 0; x < lattice_.size(); ++x)
    for (std::size_t a = 0; a < n; ++a) {
      out.u[x * n + a] = buf[x * m + a].real() * scale;
      out.v[x * n + a] = buf[x * m + n + a].real() * scale;
    }
  return out;
}

FieldState Evolver::evolve(const FieldState& y0, double t) const {
  auto spec = transform(y0);
  propagate(spec, propagator(t));
  FieldState out = synthesize(spec, y0.half_space);
  out.lattice = y0.lattice;
  return out;
}

Box Box::whole(const Lattice& lattice) {
  Box b;
  for (int j = 0; j < lattice.dimension(); ++j) {
    b.lo.push_back(-lattice.origin()[j]);
    b.hi.push_back(static_cast<long>(lattice.extent(j)) - 1 - lattice.origin()[j]);
  }
  return b;
}

std::size_t Box::count() const {
  std::size_t c = 1;
  for (std::size_t j = 0; j < lo.size(); ++j) c *= static_cast<std::size_t>(std::max(0L, hi[j] - lo[j] + 1));
  return c;
}

std::vector<std::size_t> Box::sites(const Lattice& lattice) const {
  std::vector<std::size_t> out;
  for (const Run& r : box_runs(lattice, *this))
    for (std::size_t i = 0; i < r.length; ++i) out.push_back(r.start + i);
  return out;
}

double energy(const FieldState& y, const InteractionMatrix& v) {
  const std::size_t n = static_cast<std::size_t>(y.components);
  double kinetic = 0.0;
  for (double x : y.v) kinetic += x * x;
  double potential = 0.0;
  std::vector<int> neg(v.dimension());
  Eigen::VectorXd acc(static_cast<Eigen::Index>(n));
  for (std::size_t x = 0; x < y.size(); ++x) {
    acc.setZero();
    for (const auto& e : v.entries()) {
      for (int j = 0; j < v.dimension(); ++j) neg[j] = -e.offset[j];
      const std::size_t s = y.lattice.shifted(x, neg);
      acc += e.block * Eigen::Map<const Eigen::VectorXd>(y.u.data() + s * n, static_cast<Eigen::Index>(n));
    }
    potential += Eigen::Map<const Eigen::VectorXd>(y.u.data() + x * n, static_cast<Eigen::Index>(n)).dot(acc);
  }
  return 0.5 * (kinetic + potential);
}

double energy_spectral(const FieldState& y, const Evolver& evolver) {
  const auto spec = evolver.transform(y);
  const auto n = static_cast<Eigen::Index>(y.components);
  const auto& disp = evolver.dispersion();
  double sum = 0.0;
  for (std::size_t p = 0; p < disp.size(); ++p) {
    Eigen::Map<const Eigen::VectorXcd> uh(spec.data() + p * 2 * n, n);
    Eigen::Map<const Eigen::VectorXcd> vh(spec.data() + p * 2 * n + n, n);
    sum += vh.squaredNorm() + (uh.adjoint() * disp.symbol(p) * uh)(0, 0).real();
  }
  return 0.5 * sum / static_cast<double>(disp.size());
}

double local_current(const FieldState& y, const InteractionMatrix& v, int axis, std::size_t site) {
  if (axis < 0 || axis >= v.dimension()) throw ConfigError("current: axis out of range");
  const int d = v.dimension();
  const auto n = static_cast<Eigen::Index>(y.components);
  const int r = v.support_radius();
  std::vector<int> shift(d, 0);
  double sum = 0.0;
  for (int m = -r; m <= r; ++m) {
    std::fill(shift.begin(), shift.end(), 0);
    shift[axis] = m;
    const std::size_t x = y.lattice.shifted(site, shift);
    Eigen::Map<const Eigen::VectorXd> vx(y.v.data() + x * n, n);
    for (const auto& e : v.entries()) {
      const int p = m - e.offset[axis];
      int sign = 0;
      if (m <= -1 && p >= 0) sign = 1;
      else if (m >= 0 && p <= -1) sign = -1;
      if (sign == 0) continue;
      for (int j = 0; j < d; ++j) shift[j] = -e.offset[j];
      const std::size_t yy = y.lattice.shifted(x, shift);
      Eigen::Map<const Eigen::VectorXd> uy(y.u.data() + yy * n, n);
      sum += sign * vx.dot(e.block * uy);
    }
  }
  return 0.5 * sum;
}

double energy_current(const FieldState& y, const InteractionMatrix& v, int axis, long plane) {
  if (axis < 0 || axis >= v.dimension()) throw ConfigError("current: axis out of range");
  Box b = Box::whole(y.lattice);
  b.lo[axis] = b.hi[axis] = plane;
  double sum = 0.0;
  for (std::size_t s : b.sites(y.lattice)) sum += local_current(y, v, axis, s);
  return sum;
}

double box_current(const FieldState& y, const InteractionMatrix& v, int axis, const Box& box,
                   const kernels::KernelTable& k) {
  if (axis < 0 || axis >= v.dimension()) throw ConfigError("current: axis out of range");
  const std::size_t count = box.count();
  if (count == 0) return 0.0;
  const double kappa = bond_coupling(v, axis);
  if (std::isnan(kappa)) {
    double sum = 0.0;
    for (std::size_t s : box.sites(y.lattice)) sum += local_current(y, v, axis, s);
    return sum / static_cast<double>(count);
  }
  const Lattice& lat = y.lattice;
  const std::size_t n = static_cast<std::size_t>(y.components);
  const int last = lat.dimension() - 1;
  std::vector<int> back(lat.dimension(), 0);
  back[axis] = -1;
  const double* u = y.u.data();
  const double* vv = y.v.data();
  double cross = 0.0;
  for (Run r : box_runs(lat, box)) {
    if (axis == last) {
      // The neighbour run is the same row shifted by one element, except
      // where the row wraps.
      const std::size_t i0 = (r.start / lat.stride(last)) % lat.extent(last);
      if (i0 == 0) {
        const std::size_t nb = lat.shifted(r.start, back);
        cross += k.cross_sum(u + nb * n, vv + nb * n, u + r.start * n, vv + r.start * n, n);
        ++r.start;
        --r.length;
      }
      if (r.length == 0) continue;
      const std::size_t nb = r.start - 1;
      cross += k.cross_sum(u + nb * n, vv + nb * n, u + r.start * n, vv + r.start * n, r.length * n);
    } else {
      const std::size_t nb = lat.shifted(r.start, back);
      cross += k.cross_sum(u + nb * n, vv + nb * n, u + r.start * n, vv + r.start * n, r.length * n);
    }
  }
  return -0.5 * kappa * cross / static_cast<double>(count);
}

double box_kinetic(const FieldState& y, const Box& box, const kernels::KernelTable& k) {
  const std::size_t count = box.count();
  if (count == 0) return 0.0;
  const std::size_t n = static_cast<std::size_t>(y.components);
  double sum = 0.0;
  for (const Run& r : box_runs(y.lattice, box))
    sum += k.dot(y.v.data() + r.start * n, y.v.data() + r.start * n, r.length * n);
  return sum / static_cast<double>(count);
}

double weighted_norm(const FieldState& y, double alpha) {
  const std::size_t n = static_cast<std::size_t>(y.components);
  std::vector<long> c(y.lattice.dimension());
  double sum = 0.0;
  for (std::size_t x = 0; x < y.size(); ++x) {
    y.lattice.coords(x, c);
    double r2 = 1.0;
    for (long ci : c) r2 += static_cast<double>(ci) * static_cast<double>(ci);
    double s = 0.0;
    for (std::size_t a = 0; a < n; ++a) s += y.u[x * n + a] * y.u[x * n + a] + y.v[x * n + a] * y.v[x * n + a];
    sum += std::pow(r2, alpha) * s;
  }
  return sum;
}

double validity_horizon(const Lattice& lattice, long half_width, int support_radius,
                        double max_velocity) {
  double half = std::numeric_limits<double>::infinity();
  for (int j = 0; j < lattice.dimension(); ++j) half = std::min(half, 0.5 * static_cast<double>(lattice.extent(j)));
  const double room = half - static_cast<double>(half_width) - support_radius;
  if (room <= 0.0) return 0.0;
  if (max_velocity <= 0.0) return std::numeric_limits<double>::infinity();
  return room / max_velocity;
}

}  // namespace crystalflow
