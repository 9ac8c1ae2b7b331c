#pragma once

// Monte Carlo ensembles: draw spliced reservoir fields, evolve them, and
// accumulate streaming moments of covariance, current, kinetic and linear
// functional observables; compare the estimates with analytic limits.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crystalflow/dynamics.hpp"
#include "crystalflow/halfspace.hpp"
#include "crystalflow/limits.hpp"

namespace crystalflow {

/// Streaming central moments up to order four with pairwise merge.
struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;

  void add(double x);
  void merge(const Moments& other);
  /// Unbiased sample variance; NaN for fewer than two samples.
  double variance() const;
  /// sqrt(variance / count); NaN for fewer than two samples.
  double standard_error() const;
  /// count * m4 / m2^2, the plain moment ratio (3 for a Gaussian).
  double kurtosis() const;
};

struct ObservableSpec {
  enum class Kind { current, kinetic, covariance, functional };

  Kind kind = Kind::current;
  std::string name;
  int axis = 0;                // current: hyperplane normal
  Box box;                     // current/kinetic: averaging box; covariance: translations
  std::vector<long> x;         // covariance: first site (before translation)
  std::vector<long> y;         // covariance: second site
  int a = 0;                   // covariance: component of Y at x, in [0, 2n); functional: component
  int b = 0;                   // covariance: component of Y at y
  std::vector<long> centre;    // functional: bump centre
  double width = 8.0;          // functional: bump width
};

std::string kind_name(ObservableSpec::Kind kind);

struct EnsembleConfig {
  InteractionMatrix interaction;
  ReservoirLayout layout;
  std::vector<std::size_t> shape;   // lattice shape, or slab shape in half-space mode
  std::size_t samples = 1;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<ObservableSpec> observables;
  std::size_t workers = 1;
  bool override_horizon = false;

  Lattice lattice() const;
  void validate() const;
};

/// Observable bundles used by the CLI and the acceptance runs.
struct ObservableOptions {
  long current_half_width = 0;      // |x_j| <= w on the junction axes j < k
  long kinetic_half_width = 0;      // box for the kinetic energy per site
  long covariance_radius = 4;       // pairs (c, c + z) with |z_i| <= radius
  long covariance_half_width = 0;   // translation box half-width per axis
  bool functional = true;
  std::vector<long> halfspace_planes;  // half-space current probes x_1
};

/// Box with |x_j| <= half_width on the junction axes j < k and the full
/// extent on the remaining axes.
Box junction_box(const Lattice& lattice, int k, long half_width);

std::vector<ObservableSpec> standard_observables(const EnsembleConfig& config,
                                                 const ObservableOptions& options);

struct ObservableEstimate {
  double mean = 0.0;
  double se = 0.0;        // NaN if undefined (M = 1)
  double kurtosis = 0.0;  // functional observables only
  double kurtosis_se = 0.0;
};

struct EnsembleResult {
  std::size_t samples = 0;
  std::vector<double> times;
  std::vector<ObservableSpec> observables;
  std::vector<std::vector<Moments>> moments;   // [time][observable]
  double horizon = 0.0;
  double max_imaginary_residue = 0.0;

  ObservableEstimate estimate(std::size_t time, std::size_t observable) const;
};

/// Number of samples accumulated sequentially per block before the blocks
/// are merged in a fixed binary tree. The result depends only on the config
/// and the seed, not on the worker count.
inline constexpr std::size_t kEnsembleBlock = 8;

/// Spliced initial field of sample `index`: reservoir member r is drawn with
/// seed derive_seed(derive_seed(master, index), r).
FieldState initial_field(const EnsembleConfig& config,
                         const std::vector<StationarySampler>& samplers, std::size_t index,
                         double* imaginary_residue = nullptr);
std::vector<StationarySampler> make_samplers(const EnsembleConfig& config);

/// Value of one observable on one field.
double observe(const ObservableSpec& obs, const FieldState& y, const InteractionMatrix& v);

EnsembleResult run_ensemble(const EnsembleConfig& config);

/// Analytic t -> infinity value per observable (none for functionals, whose
/// target is a kurtosis of 3). Quadrature on a grid of `grid` cells per axis.
std::vector<std::optional<double>> analytic_targets(const EnsembleConfig& config, std::size_t grid,
                                                    std::size_t workers = 1);
/// Targets read from a full-space LimitReport carrying its density.
std::vector<std::optional<double>> analytic_targets(const EnsembleConfig& config,
                                                    const LimitReport& report);

struct TolerancePolicy {
  double z = 4.0;
  double rel_tol = 0.05;
};

struct Verdict {
  std::string name;
  std::string kind;
  double time = 0.0;
  double estimate = 0.0;
  double se = 0.0;
  double analytic = 0.0;
  double allowed = 0.0;
  bool se_defined = true;
  bool pass = false;
};

struct ComparisonReport {
  std::vector<Verdict> verdicts;
  bool pass = true;
};

/// |estimate - analytic| <= max(z SE, rel_tol |analytic|) per observable at
/// time index `time`. Functional observables are checked as kurtosis vs 3
/// with z SE only. Observables without a target are skipped.
ComparisonReport compare(const EnsembleResult& result,
                         const std::vector<std::optional<double>>& analytic,
                         const TolerancePolicy& policy, std::size_t time);
ComparisonReport compare(const EnsembleResult& result, const LimitReport& limit,
                         const EnsembleConfig& config, const TolerancePolicy& policy,
                         std::size_t time);

/// Two-pass mean and unbiased variance, the reference for Moments.
std::pair<double, double> two_pass_moments(std::span<const double> xs);

}  // namespace crystalflow
