#pragma once

// Translation-invariant Gaussian measures given by spectral densities,
// circulant sampling on periodic lattices, reservoir splicing and the field
// snapshot format.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crystalflow/core.hpp"
#include "crystalflow/spectral.hpp"

namespace crystalflow {

/// 2n x 2n block density [[q00, q01], [q10, q11]] as a function of theta.
using DensityFunction = std::function<CMatrix(std::span<const double>)>;

struct GaussianMeasureSpec {
  int dimension = 1;
  int components = 1;
  DensityFunction density;
  std::string label;
  std::optional<double> gibbs_temperature;

  CMatrix operator()(std::span<const double> theta) const { return density(theta); }
};

/// q00 = T V_hat^{-1}, q11 = T I, off-diagonal blocks zero. Evaluation
/// throws ValidationError at a theta where V_hat is singular.
GaussianMeasureSpec gibbs_spec(const InteractionMatrix& v, double temperature);
/// Same, after checking det V_hat != 0 on every point of `grid`.
GaussianMeasureSpec gibbs_spec(const InteractionMatrix& v, const DispersionData& grid,
                               double temperature);

/// Scalar spectral factor on the circle.
using SpectralFactor = std::function<double(double)>;

/// q^{ii} = scale_i * f(theta_1) ... f(theta_d) I, q^{01} = q^{10} = 0.
GaussianMeasureSpec product_spec(int dimension, int components, SpectralFactor factor,
                                 double scale_u, double scale_v, std::string label);

struct TriangularCorrelation {
  int n0 = 1;
};
struct GeometricCorrelation {
  double a = 1.0;
  double b = 0.0;
  double gamma = 0.5;
};

/// f(z) = N0 - |z| (|z| <= N0): f_hat = (1 - cos N0 theta) / (1 - cos theta).
SpectralFactor example_correlation(const TriangularCorrelation& c);
/// f(z) = (a + b|z|) gamma^|z|, closed-form transform. Parameters must lie
/// in the positivity window a >= 2 b gamma / (1 - gamma^2).
SpectralFactor example_correlation(const GeometricCorrelation& c);

/// Y = (u, v) on a periodic lattice, n reals per site for each of u and v,
/// stored site-major with the component index fastest.
struct FieldState {
  Lattice lattice;
  int components = 1;
  bool half_space = false;
  std::vector<double> u;
  std::vector<double> v;

  FieldState() = default;
  FieldState(Lattice lat, int n, bool half = false);

  std::size_t size() const { return lattice.size(); }
  bool finite() const;
  /// Check the invariants; throws ValidationError.
  void validate() const;
};

enum class SpliceProfile { ramp, step };

/// Reservoir table for the spliced initial measure. Temperatures and spectra
/// are indexed by ReservoirIndex::mask. In half-space mode only masks with
/// n_1 = 2 are members and axis 1 always carries weight zeta_2(x_1).
struct ReservoirLayout {
  int k = 1;
  bool half_space = false;
  long half_width = 0;
  SpliceProfile profile = SpliceProfile::ramp;
  std::vector<double> temperatures;            // size 2^k, unused slots NaN
  std::vector<GaussianMeasureSpec> spectra;    // size 2^k, unused slots empty

  std::vector<ReservoirIndex> members() const;
  /// zeta_n(x) along one axis, n in {1, 2}.
  double zeta(int n, long x) const;
  /// Product weight zeta_n1(x_1) ... zeta_nk(x_k).
  double weight(const ReservoirIndex& r, std::span<const long> coords) const;
  double temperature(const ReservoirIndex& r) const { return temperatures.at(r.mask); }
  void validate() const;
};

/// Gibbs spectra at the given temperatures, keyed by mask.
ReservoirLayout gibbs_layout(const InteractionMatrix& v, int k, const std::vector<double>& temps,
                             long half_width, SpliceProfile profile, bool half_space = false);

/// splitmix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x);
/// Seed of stream `index` derived from `master`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Circulant sampler for one spec on one periodic lattice. The coloring
/// matrices are computed once; sampling is then pure in the seed.
class StationarySampler {
 public:
  StationarySampler(const GaussianMeasureSpec& spec, const Lattice& lattice);

  FieldState sample(std::uint64_t seed, double* imaginary_residue = nullptr) const;
  const Lattice& lattice() const { return lattice_; }
  /// (2 pi)^{-d}-normalised lattice sum of the density, q(0) on the lattice.
  CMatrix lattice_covariance_at_zero() const;

 private:
  Lattice lattice_;
  int components_ = 1;
  std::vector<CMatrix> coloring_;  // Hermitian square roots per frequency
  std::vector<CMatrix> density_;
};

/// Y0(x) = sum_n zeta_n(x) Y_n(x). `samples[i]` belongs to layout.members()[i].
FieldState splice(const std::vector<FieldState>& samples, const ReservoirLayout& layout);

/// Binary snapshot: "CRYFIELD", u32 version, u32 d, u32 n, u32 half_space,
/// d x u64 shape, then u and v as little-endian f64.
void write_snapshot(const FieldState& y, const std::string& path);
FieldState read_snapshot(const std::string& path);

}  // namespace crystalflow
