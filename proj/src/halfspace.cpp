#include "crystalflow/halfspace.hpp"

#include <algorithm>
#include <cmath>

namespace crystalflow {

namespace {

void require_mirror(const InteractionMatrix& v) {
  if (!v.mirror_symmetric())
    throw ConfigError("half-space: V must satisfy V(-z_1, z') = V(z_1, z')");
}

// Copy component data of plane i_src (scaled) into plane i_dst; both given as
// axis-0 indices of their respective lattices, which share transverse strides.
void copy_plane(const FieldState& from, std::size_t i_src, FieldState& to, std::size_t i_dst,
                double scale) {
  const std::size_t plane = from.lattice.size() / from.lattice.extent(0);
  const std::size_t n = static_cast<std::size_t>(from.components);
  const std::size_t src = i_src * plane * n;
  const std::size_t dst = i_dst * plane * n;
  for (std::size_t i = 0; i < plane * n; ++i) {
    to.u[dst + i] = scale * from.u[src + i];
    to.v[dst + i] = scale * from.v[src + i];
  }
}

}  // namespace

Lattice halfspace_lattice(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw ConfigError("half-space: empty shape");
  std::vector<long> origin(shape.size());
  for (std::size_t j = 1; j < shape.size(); ++j) origin[j] = static_cast<long>(shape[j] / 2);
  origin[0] = 0;
  return Lattice(shape, origin);
}

Lattice doubled_lattice(const Lattice& slab) {
  auto shape = slab.shape();
  auto origin = slab.origin();
  if (origin[0] != 0) throw ConfigError("half-space: slab origin on axis 1 must be 0");
  shape[0] *= 2;
  return Lattice(shape, origin);
}

FieldState odd_extension(const FieldState& y) {
  y.validate();
  const Lattice ext = doubled_lattice(y.lattice);
  const std::size_t n1 = y.lattice.extent(0);
  FieldState out(ext, y.components, false);
  for (std::size_t i = 1; i < n1; ++i) {
    copy_plane(y, i, out, i, 1.0);
    copy_plane(y, i, out, 2 * n1 - i, -1.0);
  }
  return out;
}

void clear_reflection_planes(FieldState& extended) {
  const std::size_t plane = extended.size() / extended.lattice.extent(0);
  const std::size_t n = static_cast<std::size_t>(extended.components) * plane;
  const std::size_t n1 = extended.lattice.extent(0) / 2;
  std::fill_n(extended.u.begin(), n, 0.0);
  std::fill_n(extended.v.begin(), n, 0.0);
  std::fill_n(extended.u.begin() + n1 * n, n, 0.0);
  std::fill_n(extended.v.begin() + n1 * n, n, 0.0);
}

FieldState restrict_to_slab(const FieldState& extended, const Lattice& slab) {
  if (extended.lattice.extent(0) != 2 * slab.extent(0))
    throw ConfigError("half-space: extended field does not match the slab");
  FieldState out(slab, extended.components, true);
  for (std::size_t i = 1; i < slab.extent(0); ++i) copy_plane(extended, i, out, i, 1.0);
  return out;
}

void HalfSpaceLayout::validate() const {
  if (!reservoirs.half_space) throw ConfigError("half-space layout: reservoirs not in half-space mode");
  reservoirs.validate();
  if (slab_shape.size() < 1) throw ConfigError("half-space layout: empty slab shape");
  if (static_cast<int>(slab_shape.size()) < reservoirs.k)
    throw ConfigError("half-space layout: k exceeds the slab dimension");
  if (slab_shape[0] < 2) throw ConfigError("half-space layout: slab needs N_1 >= 2");
}

HalfSpaceLayout gibbs_halfspace_layout(const InteractionMatrix& v, int k,
                                       const std::vector<double>& temps_by_mask, long half_width,
                                       SpliceProfile profile, std::vector<std::size_t> slab_shape) {
  require_mirror(v);
  HalfSpaceLayout out;
  out.reservoirs = gibbs_layout(v, k, temps_by_mask, half_width, profile, true);
  out.slab_shape = std::move(slab_shape);
  out.validate();
  return out;
}

HalfSpaceEvolver::HalfSpaceEvolver(const InteractionMatrix& v, const Lattice& slab,
                                   std::size_t workers)
    : slab_(slab), full_((require_mirror(v), v), doubled_lattice(slab), {}, workers) {}

FieldState HalfSpaceEvolver::evolve_extended(const FieldState& y0, double t) const {
  if (!(y0.lattice == slab_)) throw ConfigError("half-space: field lattice does not match the slab");
  FieldState ext = full_.evolve(odd_extension(y0), t);
  clear_reflection_planes(ext);
  return ext;
}

FieldState HalfSpaceEvolver::evolve(const FieldState& y0, double t) const {
  return restrict_to_slab(evolve_extended(y0, t), slab_);
}

FieldState evolve_halfspace(const FieldState& y0, const InteractionMatrix& v, double t) {
  return HalfSpaceEvolver(v, y0.lattice).evolve(y0, t);
}

CMatrix halfspace_covariance(const std::vector<CMatrix>& qhat_plus, const FrequencyGrid& grid,
                             std::span<const long> x, std::span<const long> y) {
  const std::size_t d = x.size();
  std::vector<long> xm(x.begin(), x.end()), ym(y.begin(), y.end());
  xm[0] = -xm[0];
  ym[0] = -ym[0];
  auto diff = [d](std::span<const long> a, std::span<const long> b) {
    std::vector<long> z(d);
    for (std::size_t j = 0; j < d; ++j) z[j] = a[j] - b[j];
    return z;
  };
  const std::vector<std::vector<long>> offsets = {diff(x, y), diff(x, ym), diff(xm, y), diff(xm, ym)};
  const auto q = real_space_kernel(qhat_plus, grid, offsets);
  return q[0] - q[1] - q[2] + q[3];
}

HalfSpaceProfile halfspace_current(const InteractionMatrix& v, const ReservoirLayout& layout,
                                   const std::vector<long>& x1, std::size_t grid,
                                   bool fourier_route, std::size_t workers) {
  require_mirror(v);
  if (!layout.half_space) throw ConfigError("half-space current: layout is not in half-space mode");
  layout.validate();
  const int d = v.dimension();
  const auto data = DispersionData::build(v, FrequencyGrid::quadrature(d, grid), {}, workers);
  const ReservoirSpectra res = ReservoirSpectra::from_layout(layout);
  std::vector<double> temps;
  for (const auto& m : res.members) temps.push_back(layout.temperature(m));

  HalfSpaceProfile out;
  out.x1 = x1;
  out.symmetry = shortcut_symmetry_test(data, layout.k);
  out.c_limit = velocity_constants(data);
  out.asymptote = shortcut_current(out.c_limit, res, temps, d);
  for (double& j : out.asymptote) j *= 2.0;
  out.asymptote[0] = 0.0;

  std::vector<CMatrix> density;
  if (fourier_route) density = limiting_covariance(res, data, workers);

  for (long x : x1) {
    const ThetaWeight w = [x](std::span<const double> th) {
      const double s = std::sin(th[0] * static_cast<double>(x));
      return s * s;
    };
    auto j = gibbs_current(data, res, temps, w);
    for (double& v_ : j) v_ *= 4.0;
    j[0] = 0.0;
    out.current.push_back(j);

    auto c = velocity_constants(data, w);
    for (double& v_ : c) v_ *= 2.0;
    out.c.push_back(c);

    if (out.symmetry.any()) {
      auto s = shortcut_current(c, res, temps, d);
      for (double& v_ : s) v_ *= 2.0;
      s[0] = 0.0;
      out.current_shortcut.push_back(s);
    }
    if (fourier_route) {
      auto f = fourier_current(v, data, density, w);
      for (double& v_ : f) v_ *= 4.0;
      out.current_fourier.push_back(f);
    }
  }
  return out;
}

}  // namespace crystalflow
