#include "crystalflow/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace crystalflow {

namespace {

using cplx = std::complex<double>;

std::string format_point(std::span<const double> theta) {
  std::ostringstream os;
  os << '(';
  for (std::size_t j = 0; j < theta.size(); ++j) os << (j ? ", " : "") << theta[j];
  os << ')';
  return os.str();
}

bool same_offset(const std::vector<int>& a, const std::vector<int>& b) { return a == b; }

}  // namespace

InteractionMatrix::InteractionMatrix(int dimension, int components,
                                     std::vector<StencilEntry> entries)
    : dimension_(dimension), components_(components), entries_(std::move(entries)) {
  if (dimension_ < 1) throw ConfigError("interaction matrix: dimension must be >= 1");
  if (components_ < 1) throw ConfigError("interaction matrix: components must be >= 1");
  for (std::size_t a = 0; a < entries_.size(); ++a) {
    const auto& e = entries_[a];
    if (static_cast<int>(e.offset.size()) != dimension_)
      throw ConfigError("interaction matrix: offset rank differs from dimension");
    if (e.block.rows() != components_ || e.block.cols() != components_)
      throw ConfigError("interaction matrix: block must be n x n");
    if (!e.block.allFinite()) throw ConfigError("interaction matrix: non-finite entry");
    for (std::size_t b = 0; b < a; ++b)
      if (same_offset(entries_[b].offset, e.offset))
        throw ConfigError("interaction matrix: duplicate offset");
    for (int x : e.offset) radius_ = std::max(radius_, std::abs(x));
  }
  // V_lk(-x) = V_kl(x)
  for (const auto& e : entries_) {
    std::vector<int> neg(e.offset);
    for (int& x : neg) x = -x;
    const RMatrix partner = at(neg);
    const double scale = 1.0 + e.block.cwiseAbs().maxCoeff();
    if ((partner.transpose() - e.block).cwiseAbs().maxCoeff() > 1e-14 * scale) {
      std::ostringstream os;
      os << "interaction matrix violates V(-x) = V(x)^T at offset (";
      for (std::size_t j = 0; j < e.offset.size(); ++j) os << (j ? "," : "") << e.offset[j];
      os << ')';
      throw ValidationError(os.str());
    }
  }
  mirror_symmetric_ = true;
  for (const auto& e : entries_) {
    std::vector<int> mir(e.offset);
    mir[0] = -mir[0];
    if ((at(mir) - e.block).cwiseAbs().maxCoeff() > 1e-14 * (1.0 + e.block.cwiseAbs().maxCoeff()))
      mirror_symmetric_ = false;
    for (int r = 0; r < components_; ++r)
      for (int c = 0; c < components_; ++c)
        if (r != c && e.block(r, c) != 0.0) diagonal_ = false;
  }
}

RMatrix InteractionMatrix::at(std::span<const int> offset) const {
  for (const auto& e : entries_)
    if (std::equal(e.offset.begin(), e.offset.end(), offset.begin(), offset.end())) return e.block;
  return RMatrix::Zero(components_, components_);
}

CMatrix InteractionMatrix::symbol(std::span<const double> theta) const {
  CMatrix out = CMatrix::Zero(components_, components_);
  for (const auto& e : entries_) {
    double phase = 0.0;
    for (int j = 0; j < dimension_; ++j) phase += e.offset[j] * theta[j];
    out += std::polar(1.0, phase) * e.block.cast<cplx>();
  }
  return out;
}

CMatrix InteractionMatrix::symbol_derivative(std::span<const double> theta, int axis) const {
  if (axis < 0 || axis >= dimension_) throw ConfigError("symbol derivative: axis out of range");
  CMatrix out = CMatrix::Zero(components_, components_);
  for (const auto& e : entries_) {
    if (e.offset[axis] == 0) continue;
    double phase = 0.0;
    for (int j = 0; j < dimension_; ++j) phase += e.offset[j] * theta[j];
    out += cplx(0.0, e.offset[axis]) * std::polar(1.0, phase) * e.block.cast<cplx>();
  }
  return out;
}

InteractionMatrix nearest_neighbor_crystal(int dimension, int components,
                                           std::span<const double> kappa,
                                           std::span<const double> mass) {
  if (dimension < 1) throw ConfigError("nearest neighbour crystal: d must be >= 1");
  if (components < 1) throw ConfigError("nearest neighbour crystal: n must be >= 1");
  if (static_cast<int>(kappa.size()) != components || static_cast<int>(mass.size()) != components)
    throw ConfigError("nearest neighbour crystal: need one kappa and one m per component");
  for (double k : kappa)
    if (!(k > 0.0)) throw ConfigError("nearest neighbour crystal: kappa must be positive");
  for (double m : mass)
    if (!(m >= 0.0)) throw ConfigError("nearest neighbour crystal: m must be nonnegative");

  std::vector<StencilEntry> entries;
  RMatrix centre = RMatrix::Zero(components, components);
  RMatrix bond = RMatrix::Zero(components, components);
  for (int l = 0; l < components; ++l) {
    centre(l, l) = 2.0 * dimension * kappa[l] + mass[l] * mass[l];
    bond(l, l) = -kappa[l];
  }
  entries.push_back({std::vector<int>(dimension, 0), centre});
  for (int i = 0; i < dimension; ++i) {
    for (int s : {1, -1}) {
      std::vector<int> off(dimension, 0);
      off[i] = s;
      entries.push_back({off, bond});
    }
  }
  return InteractionMatrix(dimension, components, std::move(entries));
}

CMatrix SpectralDecomposition::projector(std::size_t band) const {
  const Band& b = bands[band];
  auto cols = vectors.middleCols(b.first, b.multiplicity);
  return cols * cols.adjoint();
}

CMatrix SpectralDecomposition::omega_matrix() const {
  return apply([](double w) { return cplx(w, 0.0); });
}

SpectralDecomposition eigendecompose(const CMatrix& vhat, const SpectralTolerances& tol,
                                     std::span<const double> theta) {
  if (vhat.rows() != vhat.cols()) throw ConfigError("eigendecompose: matrix must be square");
  const CMatrix herm = 0.5 * (vhat + vhat.adjoint());
  SpectralDecomposition out;
  const auto n = herm.rows();
  if (n == 1) {
    out.eigenvalues.resize(1);
    out.eigenvalues(0) = herm(0, 0).real();
    out.vectors = CMatrix::Identity(1, 1);
  } else {
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(herm);
    if (solver.info() != Eigen::Success) throw ValidationError("eigendecompose: solver failed");
    out.eigenvalues = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
  }
  const double norm = out.eigenvalues.cwiseAbs().maxCoeff();
  out.raw_min = out.eigenvalues.minCoeff();
  const double psd_tol = tol.psd_rel * norm;
  for (Eigen::Index i = 0; i < n; ++i) {
    double& lam = out.eigenvalues(i);
    if (lam < -psd_tol) {
      std::ostringstream os;
      os << "symbol is not positive semidefinite at theta = " << format_point(theta)
         << ": eigenvalue " << lam;
      throw ValidationError(os.str());
    }
    if (lam < 0.0) lam = 0.0;
  }
  std::vector<double> omega(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) omega[i] = std::sqrt(out.eigenvalues(i));
  const double cluster = tol.cluster_rel * omega.back();
  int start = 0;
  for (int i = 1; i <= n; ++i) {
    if (i == n || omega[i] - omega[i - 1] > cluster) {
      double sum = 0.0;
      for (int j = start; j < i; ++j) sum += omega[j];
      out.bands.push_back({sum / (i - start), i - start, start});
      start = i;
    }
  }
  return out;
}

double group_velocity(const InteractionMatrix& v, std::span<const double> theta, std::size_t band,
                      int axis, VelocityMode mode, double step, const SpectralTolerances& tol) {
  if (axis < 0 || axis >= v.dimension()) throw ConfigError("group velocity: axis out of range");
  const SpectralDecomposition dec = eigendecompose(v.symbol(theta), tol, theta);
  if (band >= dec.bands.size()) throw ConfigError("group velocity: band index out of range");
  const Band& b = dec.bands[band];
  if (mode == VelocityMode::analytic) {
    if (b.omega < tol.zero_omega)
      throw ValidationError("group velocity: omega = 0 at theta = " + format_point(theta));
    const CMatrix dv = v.symbol_derivative(theta, axis);
    const cplx tr = (dec.projector(band) * dv).trace();
    return tr.real() / (2.0 * b.omega * b.multiplicity);
  }
  if (b.multiplicity > 1)
    throw ValidationError("group velocity: finite differences on a degenerate band at theta = " +
                          format_point(theta));
  std::vector<double> tp(theta.begin(), theta.end());
  std::vector<double> tm(theta.begin(), theta.end());
  tp[axis] += step;
  tm[axis] -= step;
  const auto ep = eigendecompose(v.symbol(tp), tol, tp).eigenvalues;
  const auto em = eigendecompose(v.symbol(tm), tol, tm).eigenvalues;
  return (std::sqrt(ep(b.first)) - std::sqrt(em(b.first))) / (2.0 * step);
}

DispersionData DispersionData::build(const InteractionMatrix& v, const FrequencyGrid& grid,
                                     const SpectralTolerances& tol, std::size_t workers) {
  if (grid.dimension() != v.dimension())
    throw ConfigError("dispersion: grid dimension differs from the interaction matrix");
  DispersionData out;
  out.grid_ = grid;
  out.tol_ = tol;
  out.dimension_ = v.dimension();
  out.components_ = v.components();
  const std::size_t count = grid.size();
  const int d = out.dimension_;
  const int n = out.components_;
  out.symbols_.resize(count);
  out.points_.resize(count);
  out.velocities_.assign(count * n * d, 0.0);

  const std::size_t chunk = 1024;
  const std::size_t chunks = (count + chunk - 1) / chunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<double> theta(d);
    const std::size_t end = std::min(count, (c + 1) * chunk);
    for (std::size_t p = c * chunk; p < end; ++p) {
      grid.theta(p, theta);
      out.symbols_[p] = v.symbol(theta);
      out.points_[p] = eigendecompose(out.symbols_[p], tol, theta);
      const auto& dec = out.points_[p];
      for (int l = 0; l < d; ++l) {
        const CMatrix dv = v.symbol_derivative(theta, l);
        for (std::size_t s = 0; s < dec.bands.size(); ++s) {
          const Band& b = dec.bands[s];
          double vel = 0.0;
          if (b.omega >= tol.zero_omega) {
            const cplx tr = n == 1 ? dv(0, 0) : (dec.projector(s) * dv).trace();
            vel = tr.real() / (2.0 * b.omega * b.multiplicity);
          }
          out.velocities_[(p * n + s) * d + l] = vel;
        }
      }
    }
  });

  out.zero_velocity_fraction_.assign(static_cast<std::size_t>(n), 0.0);
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t s = 0; s < out.points_[p].bands.size(); ++s) {
      bool flat = false;
      for (int l = 0; l < d; ++l) {
        const double vel = out.velocity(p, s, l);
        out.max_velocity_ = std::max(out.max_velocity_, std::abs(vel));
        if (std::abs(vel) < tol.velocity) flat = true;
      }
      if (flat) out.zero_velocity_fraction_[s] += 1.0;
    }
  }
  for (double& f : out.zero_velocity_fraction_) f /= static_cast<double>(count);
  return out;
}

int DispersionData::velocity_sign(std::size_t p, std::size_t band, int axis) const {
  const double vel = velocity(p, band, axis);
  if (std::abs(vel) < tol_.velocity) return 0;
  return vel > 0.0 ? 1 : -1;
}

namespace {

// (2 pi)^{-d} * integral of w(theta) / lambda_min(V_hat(theta)) at the
// midpoint rule with `per_axis` cells.
double inverse_norm_integral(const InteractionMatrix& v, std::size_t per_axis, bool weighted) {
  const FrequencyGrid grid = FrequencyGrid::quadrature(v.dimension(), per_axis);
  std::vector<double> theta(v.dimension());
  double sum = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    grid.theta(p, theta);
    const CMatrix s = v.symbol(theta);
    double lam;
    if (v.components() == 1) {
      lam = s(0, 0).real();
    } else {
      Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (s + s.adjoint()), Eigen::EigenvaluesOnly);
      lam = solver.eigenvalues().minCoeff();
    }
    if (lam <= 0.0) return std::numeric_limits<double>::infinity();
    const double w = weighted ? std::sin(theta[0]) * std::sin(theta[0]) : 1.0;
    sum += w / lam;
  }
  return sum * grid.weight();
}

IntegralEstimate refinement_sequence(const InteractionMatrix& v, std::size_t per_axis,
                                     bool weighted) {
  IntegralEstimate est;
  per_axis = std::max<std::size_t>(per_axis, 8);
  for (std::size_t g : {per_axis / 4, per_axis / 2, per_axis}) {
    est.grid_sizes.push_back(g);
    est.values.push_back(inverse_norm_integral(v, g, weighted));
  }
  const auto& x = est.values;
  for (double val : x)
    if (!std::isfinite(val)) est.converging = false;
  if (est.converging) {
    const double d1 = x[1] - x[0];
    const double d2 = x[2] - x[1];
    const double scale = 1e-12 * (1.0 + std::abs(x[2]));
    if (std::abs(d2) > scale && std::abs(d2) > 0.75 * std::abs(d1)) est.converging = false;
  }
  return est;
}

}  // namespace

ConditionReport validate_conditions(const InteractionMatrix& v, const DispersionData& data) {
  ConditionReport rep;
  const int d = v.dimension();
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < data.size(); ++p)
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, data.point(p).raw_min);

  // The zero set is searched on the unshifted companion grid as well, since
  // the shifted quadrature grid never samples theta = 0.
  const std::size_t per_axis = data.grid().count(0);
  const FrequencyGrid companion(FrequencyGrid::Kind::lattice, data.grid().counts());
  for (const FrequencyGrid* g : {&data.grid(), &companion}) {
    std::vector<double> theta(d);
    for (std::size_t p = 0; p < g->size(); ++p) {
      g->theta(p, theta);
      const CMatrix s = v.symbol(theta);
      Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (s + s.adjoint()), Eigen::EigenvaluesOnly);
      const auto& ev = solver.eigenvalues();
      const double lam = ev.minCoeff();
      rep.min_eigenvalue = std::min(rep.min_eigenvalue, lam);
      if (lam < -data.tolerances().psd_rel * ev.cwiseAbs().maxCoeff()) rep.psd = false;
      if (lam <= 1e-10 * (1.0 + ev.cwiseAbs().maxCoeff())) {
        bool known = false;
        for (const auto& z : rep.zero_set)
          if (z == theta) known = true;
        if (!known) rep.zero_set.push_back(theta);
      }
    }
  }
  if (!rep.zero_set.empty())
    rep.warnings.push_back("det V_hat vanishes on the grid (" + std::to_string(rep.zero_set.size()) +
                           " points)");

  rep.inverse_norm = refinement_sequence(v, per_axis, false);
  rep.weighted_inverse_norm = refinement_sequence(v, per_axis, true);
  if (!rep.inverse_norm.converging)
    rep.warnings.push_back("integral of ||V_hat^-1|| grows under refinement (not integrable)");
  if (!rep.weighted_inverse_norm.converging)
    rep.warnings.push_back("integral of sin^2(theta_1)||V_hat^-1|| grows under refinement (not integrable)");

  const int n = v.components();
  rep.zero_velocity_fraction.assign(n, std::vector<double>(d, 0.0));
  for (std::size_t p = 0; p < data.size(); ++p)
    for (std::size_t s = 0; s < data.band_count(p); ++s)
      for (int l = 0; l < d; ++l)
        if (data.velocity_sign(p, s, l) == 0) rep.zero_velocity_fraction[s][l] += 1.0;
  for (auto& row : rep.zero_velocity_fraction)
    for (double& f : row) f /= static_cast<double>(data.size());
  if (!rep.psd) rep.warnings.push_back("symbol has negative eigenvalues");
  return rep;
}

}  // namespace crystalflow
