#pragma once

// Exact Fourier-space evolution on periodic lattices, energy and empirical
// energy-current observables.

#include <complex>
#include <vector>

#include "crystalflow/kernels.hpp"
#include "crystalflow/measures.hpp"
#include "crystalflow/spectral.hpp"

namespace crystalflow {

/// 2n x 2n block [[cos Omega t, sin Omega t Omega^{-1}], [-sin Omega t Omega, cos Omega t]]
/// with sin(w t)/w replaced by t for w < zero_omega.
CMatrix propagator_block(const SpectralDecomposition& dec, double t, double zero_omega = 1e-12);

/// Per-frequency propagator table for one time. For scalar fields the
/// table is (a, d, b, c) per frequency, ready for the pair kernel.
struct Propagator {
  double time = 0.0;
  int components = 1;
  std::vector<double> scalar_coeffs;  // n = 1
  std::vector<CMatrix> blocks;        // n > 1
};

class Evolver {
 public:
  Evolver(const InteractionMatrix& v, const Lattice& lattice, const SpectralTolerances& tol = {},
          std::size_t workers = 1);

  const InteractionMatrix& interaction() const { return v_; }
  const Lattice& lattice() const { return lattice_; }
  const DispersionData& dispersion() const { return dispersion_; }
  int components() const { return v_.components(); }

  Propagator propagator(double t) const;
  /// (u_hat, v_hat) per frequency, 2n complex values each, theta in FFT order.
  std::vector<std::complex<double>> transform(const FieldState& y) const;
  /// Apply G_t in place.
  void propagate(std::vector<std::complex<double>>& spectrum, const Propagator& g) const;
  /// Inverse transform back to a real field.
  FieldState synthesize(const std::vector<std::complex<double>>& spectrum, bool half_space) const;

  FieldState evolve(const FieldState& y0, double t) const;

 private:
  InteractionMatrix v_;
  Lattice lattice_;
  DispersionData dispersion_;
};

/// Inclusive coordinate box, one [lo, hi] pair per axis.
struct Box {
  std::vector<long> lo;
  std::vector<long> hi;

  static Box whole(const Lattice& lattice);
  std::size_t count() const;
  /// Site indices inside the box, row-major order.
  std::vector<std::size_t> sites(const Lattice& lattice) const;
};

/// H = 1/2 sum |v|^2 + 1/2 sum u . (V u), periodic convolution.
double energy(const FieldState& y, const InteractionMatrix& v);
/// Same quantity from the Fourier coefficients (Parseval).
double energy_spectral(const FieldState& y, const Evolver& evolver);

/// Current density across the hyperplane through `site` normal to `axis`:
/// the general double sum over the stencil support.
double local_current(const FieldState& y, const InteractionMatrix& v, int axis, std::size_t site);
/// J^l summed over the transverse plane with coordinate `plane` on `axis`.
double energy_current(const FieldState& y, const InteractionMatrix& v, int axis, long plane);
/// Mean local current over the sites of `box`. Nearest-neighbour stencils
/// with equal couplings take the bond-current kernel path.
double box_current(const FieldState& y, const InteractionMatrix& v, int axis, const Box& box,
                   const kernels::KernelTable& k = kernels::active());
/// Mean of sum_a v_a(x)^2 over the box.
double box_kinetic(const FieldState& y, const Box& box,
                   const kernels::KernelTable& k = kernels::active());

/// sum_x <x>^{2 alpha} (|u(x)|^2 + |v(x)|^2), <x> = sqrt(1 + |x|^2).
double weighted_norm(const FieldState& y, double alpha);

/// Horizon (min_l N_l / 2 - a - r) / v_max beyond which wraparound spoils
/// comparisons with the infinite lattice.
double validity_horizon(const Lattice& lattice, long half_width, int support_radius,
                        double max_velocity);

}  // namespace crystalflow
