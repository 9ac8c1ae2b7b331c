#pragma once

// Half-space crystal with a zero plane at x_1 = 0, solved by odd reflection
// onto a periodic lattice of doubled length, and the half-space limit
// objects Q+_inf and J_{+,inf}(x_1).

#include <vector>

#include "crystalflow/dynamics.hpp"
#include "crystalflow/limits.hpp"

namespace crystalflow {

/// Slab lattice: axis 1 holds x_1 in [0, N_1) with origin 0, transverse
/// axes periodic and centred.
Lattice halfspace_lattice(const std::vector<std::size_t>& shape);
/// Periodic lattice of length 2 N_1 along axis 1 carrying the odd extension.
Lattice doubled_lattice(const Lattice& slab);

/// ext(x_1) = y(x_1) for 0 <= x_1 < N_1, ext(N_1) = 0, ext(2 N_1 - x_1) = -y(x_1).
FieldState odd_extension(const FieldState& y);
/// Zero planes 0 and N_1 of an extended field; they are invariant under the
/// flow and only collect rounding residue.
void clear_reflection_planes(FieldState& extended);
/// Planes 0 .. N_1 - 1 of an extended field.
FieldState restrict_to_slab(const FieldState& extended, const Lattice& slab);

struct HalfSpaceLayout {
  ReservoirLayout reservoirs;          // half_space = true, members n_1 = 2
  std::vector<std::size_t> slab_shape;

  void validate() const;
};

HalfSpaceLayout gibbs_halfspace_layout(const InteractionMatrix& v, int k,
                                       const std::vector<double>& temps_by_mask, long half_width,
                                       SpliceProfile profile, std::vector<std::size_t> slab_shape);

class HalfSpaceEvolver {
 public:
  HalfSpaceEvolver(const InteractionMatrix& v, const Lattice& slab, std::size_t workers = 1);

  const Lattice& slab() const { return slab_; }
  const Evolver& extended() const { return full_; }
  /// Evolve a slab field; the result vanishes on x_1 = 0.
  FieldState evolve(const FieldState& y0, double t) const;
  /// Evolve and return the odd-extended field on the doubled lattice.
  FieldState evolve_extended(const FieldState& y0, double t) const;

 private:
  Lattice slab_;
  Evolver full_;
};

FieldState evolve_halfspace(const FieldState& y0, const InteractionMatrix& v, double t);

/// Q+(x, y) = q(x - y) - q(x - y_-) - q(x_- - y) + q(x_- - y_-) from a
/// tabulated q_hat+ on the quadrature grid.
CMatrix halfspace_covariance(const std::vector<CMatrix>& qhat_plus, const FrequencyGrid& grid,
                             std::span<const long> x, std::span<const long> y);

struct HalfSpaceProfile {
  std::vector<long> x1;
  std::vector<std::vector<double>> current;           // quadrature, [x1][axis]
  std::vector<std::vector<double>> current_shortcut;  // shortcut with c_l(x_1), empty unless it applies
  std::vector<std::vector<double>> current_fourier;   // sin^2-weighted Fourier route
  std::vector<std::vector<double>> c;                 // c_l(x_1)
  std::vector<double> c_limit;                        // c_l
  std::vector<double> asymptote;                      // x_1 -> infinity
  SymmetryReport symmetry;
};

/// J_{+,inf}(x_1) for Gibbs reservoirs on the index set with n_1 = 2.
HalfSpaceProfile halfspace_current(const InteractionMatrix& v, const ReservoirLayout& layout,
                                   const std::vector<long>& x1, std::size_t grid,
                                   bool fourier_route = true, std::size_t workers = 1);

}  // namespace crystalflow
