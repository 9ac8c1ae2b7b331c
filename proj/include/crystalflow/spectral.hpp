#pragma once

// Interaction matrices, Fourier symbols, dispersion bands and the numeric
// checks of the structural conditions on the crystal.

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crystalflow/core.hpp"

namespace crystalflow {

using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;

struct StencilEntry {
  std::vector<int> offset;
  RMatrix block;  // n x n, real
};

/// Compactly supported force matrix x -> V(x). Construction enforces the
/// symmetry V_lk(-x) = V_kl(x); offsets outside the support are zero.
class InteractionMatrix {
 public:
  InteractionMatrix() = default;
  InteractionMatrix(int dimension, int components, std::vector<StencilEntry> entries);

  int dimension() const { return dimension_; }
  int components() const { return components_; }
  const std::vector<StencilEntry>& entries() const { return entries_; }
  /// V(x_-) = V(x) with x_- the sign flip of the first coordinate.
  bool mirror_symmetric() const { return mirror_symmetric_; }
  /// Every block is diagonal (decoupled components).
  bool diagonal() const { return diagonal_; }
  /// max_j |x_j| over the support.
  int support_radius() const { return radius_; }
  /// V(x), zero outside the support.
  RMatrix at(std::span<const int> offset) const;

  /// sum_x e^{i(x,theta)} V(x)
  CMatrix symbol(std::span<const double> theta) const;
  /// d/d theta_axis of the symbol.
  CMatrix symbol_derivative(std::span<const double> theta, int axis) const;

 private:
  int dimension_ = 0;
  int components_ = 0;
  std::vector<StencilEntry> entries_;
  bool mirror_symmetric_ = false;
  bool diagonal_ = true;
  int radius_ = 0;
};

/// V_ll(0) = 2 d kappa_l + m_l^2, V_ll(+-e_i) = -kappa_l.
InteractionMatrix nearest_neighbor_crystal(int dimension, int components,
                                           std::span<const double> kappa,
                                           std::span<const double> mass);

inline CMatrix fourier_symbol(const InteractionMatrix& v, std::span<const double> theta) {
  return v.symbol(theta);
}

struct SpectralTolerances {
  double cluster_rel = 1e-9;   // band clustering, relative to max omega
  double psd_rel = 1e-10;      // negative-eigenvalue clamp, relative to ||V_hat||
  double velocity = 1e-9;      // |v| below this has sign 0
  double zero_omega = 1e-12;   // omega below this is treated as a zero mode
};

struct Band {
  double omega = 0.0;
  int multiplicity = 0;
  int first = 0;  // first eigenvector column of the cluster
};

/// Per-theta spectral data of a Hermitian PSD symbol.
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;  // of V_hat, ascending, clamped at 0
  double raw_min = 0.0;         // smallest eigenvalue before clamping
  CMatrix vectors;              // orthonormal eigenvectors (columns)
  std::vector<Band> bands;

  CMatrix projector(std::size_t band) const;
  /// Omega = V_hat^{1/2}
  CMatrix omega_matrix() const;
  /// sum_sigma f(omega_sigma) Pi_sigma
  template <class F>
  CMatrix apply(F&& f) const {
    const auto n = vectors.rows();
    CMatrix out = CMatrix::Zero(n, n);
    for (std::size_t s = 0; s < bands.size(); ++s) out += f(bands[s].omega) * projector(s);
    return out;
  }
};

/// Eigen-decomposes V_hat, clamps tiny negative eigenvalues, takes square
/// roots and clusters them into bands. Throws ValidationError when V_hat has a
/// clearly negative eigenvalue; `theta` only feeds the message.
SpectralDecomposition eigendecompose(const CMatrix& vhat, const SpectralTolerances& tol = {},
                                     std::span<const double> theta = {});

enum class VelocityMode { analytic, finite_difference };

/// d omega_sigma / d theta_axis at theta.
///
/// The analytic mode uses tr(Pi_sigma dV_hat) / (2 omega r_sigma), which is
/// the exact derivative for nondegenerate bands and for decoupled stencils.
/// Finite differences use a central step h on the sorted eigenvalues.
double group_velocity(const InteractionMatrix& v, std::span<const double> theta, std::size_t band,
                      int axis, VelocityMode mode, double step = 1e-4,
                      const SpectralTolerances& tol = {});

/// Bands, projections and group velocities on a frequency grid. Immutable
/// after construction.
class DispersionData {
 public:
  static DispersionData build(const InteractionMatrix& v, const FrequencyGrid& grid,
                              const SpectralTolerances& tol = {}, std::size_t workers = 1);

  const FrequencyGrid& grid() const { return grid_; }
  const SpectralTolerances& tolerances() const { return tol_; }
  std::size_t size() const { return grid_.size(); }
  int dimension() const { return dimension_; }
  int components() const { return components_; }

  const SpectralDecomposition& point(std::size_t p) const { return points_[p]; }
  const CMatrix& symbol(std::size_t p) const { return symbols_[p]; }
  std::size_t band_count(std::size_t p) const { return points_[p].bands.size(); }
  double omega(std::size_t p, std::size_t band) const { return points_[p].bands[band].omega; }
  int multiplicity(std::size_t p, std::size_t band) const {
    return points_[p].bands[band].multiplicity;
  }
  double velocity(std::size_t p, std::size_t band, int axis) const {
    return velocities_[(p * components_ + band) * dimension_ + axis];
  }
  /// sgn of the group velocity with the zero-velocity convention.
  int velocity_sign(std::size_t p, std::size_t band, int axis) const;
  double max_group_velocity() const { return max_velocity_; }
  /// Fraction of grid points with a zero-velocity component, per band slot.
  const std::vector<double>& zero_velocity_fraction() const { return zero_velocity_fraction_; }

 private:
  DispersionData() = default;

  FrequencyGrid grid_;
  SpectralTolerances tol_;
  int dimension_ = 0;
  int components_ = 0;
  std::vector<CMatrix> symbols_;
  std::vector<SpectralDecomposition> points_;
  std::vector<double> velocities_;
  std::vector<double> zero_velocity_fraction_;
  double max_velocity_ = 0.0;
};

struct IntegralEstimate {
  std::vector<std::size_t> grid_sizes;
  std::vector<double> values;  // (2 pi)^{-d} * integral at each grid size
  bool converging = true;
};

struct ConditionReport {
  double min_eigenvalue = 0.0;      // over the grid
  bool psd = true;
  std::vector<std::vector<double>> zero_set;  // points with det V_hat ~ 0
  IntegralEstimate inverse_norm;          // integral of ||V_hat^{-1}||
  IntegralEstimate weighted_inverse_norm; // integral of sin^2(theta_1) ||V_hat^{-1}||
  std::vector<std::vector<double>> zero_velocity_fraction;  // [band][axis]
  std::vector<std::string> warnings;
};

/// Numeric evidence for positivity, the zero set C_0, velocity degeneracy and
/// integrability of V_hat^{-1}. Diagnostic only; the one hard failure is the
/// positivity check inside DispersionData::build.
ConditionReport validate_conditions(const InteractionMatrix& v, const DispersionData& grid);

}  // namespace crystalflow
