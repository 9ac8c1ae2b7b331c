#pragma once

// Limit objects as t -> infinity: the covariance q_hat_inf, its real-space
// kernel, the energy current J_inf, the constants c_l and the kinetic
// temperature, by midpoint quadrature on the shifted torus grid.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "crystalflow/measures.hpp"
#include "crystalflow/spectral.hpp"

namespace crystalflow {

struct SignSums {
  int even = 0;
  int odd = 0;
};

/// S^even and S^odd for one reservoir: sums over nonempty subsets P of
/// {1..k} of prod_{p in P} s_p (-1)^{n_p}, split by the parity of |P|.
SignSums sign_sums(std::span<const int> signs, const ReservoirIndex& n);

/// C(theta) and C*(theta) built from the spectral decomposition.
CMatrix c_matrix(const SpectralDecomposition& dec);
CMatrix c_star_matrix(const SpectralDecomposition& dec);
/// L_1^{+-}(q) = (q +- C q C*) / 2
CMatrix l1(const CMatrix& q, const CMatrix& c, const CMatrix& cs, int sign);
/// L_2^{+-}(q) = (C q +- q C*) / 2
CMatrix l2(const CMatrix& q, const CMatrix& c, const CMatrix& cs, int sign);

/// Reservoir densities q_hat_n(theta) for each member of an index set.
struct ReservoirSpectra {
  int k = 1;
  std::vector<ReservoirIndex> members;
  std::vector<GaussianMeasureSpec> spectra;  // parallel to members

  static ReservoirSpectra from_layout(const ReservoirLayout& layout);
};

/// q_hat_inf at grid point p: sum_sigma P_sigma (M+ + i M-) P_sigma with the
/// 2^{-k} normalisation kept for every index set.
CMatrix limit_density(const DispersionData& data, std::size_t p, const std::vector<CMatrix>& qn,
                      const ReservoirSpectra& res);
/// The k = 1 specialisation evaluated from q_hat_1 and q_hat_2 directly.
CMatrix limit_density_k1(const DispersionData& data, std::size_t p, const CMatrix& q1,
                         const CMatrix& q2);

/// q_hat_inf on every grid point.
std::vector<CMatrix> limiting_covariance(const ReservoirSpectra& res, const DispersionData& data,
                                         std::size_t workers = 1);

/// q(z) = (2 pi)^{-d} int e^{-i z theta} q_hat(theta) d theta by direct
/// summation over the quadrature grid. The imaginary residue relative to
/// the largest entry is written to `imaginary_residue`.
std::vector<CMatrix> real_space_kernel(const std::vector<CMatrix>& qhat, const FrequencyGrid& grid,
                                       const std::vector<std::vector<long>>& offsets,
                                       double* imaginary_residue = nullptr,
                                       std::size_t workers = 1);

/// All offsets z with |z_i| <= radius.
std::vector<std::vector<long>> offset_window(int dimension, long radius);

struct SymmetryReport {
  std::vector<double> reflection_residue;  // per axis, max |w(theta) - w(theta with theta_j negated)|
  std::vector<bool> even;                  // per axis
  std::vector<bool> sign_separable;        // per axis j < k: sgn(d_j w) depends on theta_j only
  bool a = false;
  bool b = false;
  bool c = false;
  bool any() const { return a || b || c; }
};

SymmetryReport shortcut_symmetry_test(const DispersionData& data, int k, double tolerance = 1e-10);

/// Optional sin^2(theta_1 x_1) weight for the half-space quantities.
using ThetaWeight = std::function<double(std::span<const double>)>;

/// c^l_{p_1..p_m} keyed by the subset mask of {p}, for every axis l.
/// With a weight w the integrand is multiplied by w(theta).
std::map<unsigned, std::vector<double>> current_coefficients(const DispersionData& data, int k,
                                                             const ThetaWeight& weight = {});
/// c_l = (2 pi)^{-d} sum_sigma int r_sigma |d_l w_sigma|, all axes.
std::vector<double> velocity_constants(const DispersionData& data, const ThetaWeight& weight = {});

/// Gibbs current by quadrature of the S^odd integrand, optionally weighted.
std::vector<double> gibbs_current(const DispersionData& data, const ReservoirSpectra& res,
                                  const std::vector<double>& temperatures,
                                  const ThetaWeight& weight = {});
/// Gibbs current assembled from the c^l_{p..} table.
std::vector<double> gibbs_current_from_coefficients(
    const std::map<unsigned, std::vector<double>>& coeffs, const ReservoirSpectra& res,
    const std::vector<double>& temperatures, int dimension);
/// Shortcut J^l = -c_l 2^{-k} sum_n (-1)^{n_l} T_n for l <= k, zero beyond.
std::vector<double> shortcut_current(const std::vector<double>& c, const ReservoirSpectra& res,
                                     const std::vector<double>& temperatures, int dimension);
/// Current for arbitrary reservoir spectra via the p^{ij} projections.
std::vector<double> general_current(const DispersionData& data, const ReservoirSpectra& res,
                                    std::size_t workers = 1);
/// -1/2 (2 pi)^{-d} int i tr[q_hat^{10} d_l V_hat] from a tabulated q_hat_inf.
std::vector<double> fourier_current(const InteractionMatrix& v, const DispersionData& data,
                                    const std::vector<CMatrix>& qhat,
                                    const ThetaWeight& weight = {});

/// (2 pi)^{-d} int tr q_hat^{11}_inf.
double kinetic_temperature(const DispersionData& data, const std::vector<CMatrix>& qhat);
/// Gibbs reservoirs: 2^{-k} sum_n T_n (2 pi)^{-d} sum_sigma int r (1 + S^even).
double gibbs_kinetic_temperature(const DispersionData& data, const ReservoirSpectra& res,
                                 const std::vector<double>& temperatures);

struct LimitOptions {
  std::size_t grid = 4096;       // per axis
  long window = 8;               // real-space window |x_i| <= window
  bool keep_density = false;     // keep q_hat_inf in the report
  bool general_path = true;      // also evaluate the p^{ij} and Fourier routes
  std::size_t workers = 1;
  SpectralTolerances tolerances;
};

struct LimitReport {
  int dimension = 1;
  int components = 1;
  int k = 1;
  std::size_t grid = 0;
  std::vector<double> current;            // Gibbs quadrature (primary)
  std::vector<double> current_coeffs;     // from the c^l_{p..} table
  std::vector<double> current_general;    // p^{ij} route, empty if skipped
  std::vector<double> current_fourier;    // Fourier route, empty if skipped
  std::vector<double> current_shortcut;   // empty unless the symmetry shortcut applies
  std::vector<double> current_error;      // |J(G) - J(G/2)|
  std::vector<double> c;                  // c_l
  std::map<unsigned, std::vector<double>> coefficients;
  double kinetic = 0.0;
  double kinetic_closed_form = 0.0;       // n 2^{-k} sum T_n
  double kinetic_error = 0.0;
  SymmetryReport symmetry;
  std::vector<double> zero_velocity_fraction;
  std::vector<std::vector<long>> window_offsets;
  std::vector<CMatrix> window;            // q_inf(z) on the window
  double window_imaginary_residue = 0.0;
  std::vector<CMatrix> density;           // q_hat_inf, if kept
};

/// Limits for a Gibbs reservoir layout: every route, plus the coarse-grid
/// error estimate.
LimitReport compute_limits(const InteractionMatrix& v, const ReservoirLayout& layout,
                           const LimitOptions& options);

}  // namespace crystalflow
