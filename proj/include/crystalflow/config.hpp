#pragma once

// Run configuration: a sectioned key = value text file.
//
//   [model]    kind, dimension, components, kappa, mass, stencil
//   [layout]   k, T<pattern>, S<pattern>, half_width, profile, half_space
//   [grid]     G, window
//   [ensemble] samples, seed, shape, times, workers, probe and policy keys
//   [output]   directory, formats
//
// Unknown sections or keys are errors. See docs/config.md.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "crystalflow/estimator.hpp"

namespace crystalflow {

struct ModelConfig {
  std::string kind = "nearest_neighbor";  // nearest_neighbor | stencil
  int dimension = 1;
  int components = 1;
  std::vector<double> kappa{1.0};
  std::vector<double> mass{1.0};
  std::vector<StencilEntry> stencil;

  bool operator==(const ModelConfig& o) const;
};

struct LayoutConfig {
  int k = 1;
  std::map<std::string, double> temperatures;  // keyed by pattern, e.g. "+-"
  std::map<std::string, std::string> spectra;  // keyed by pattern; default gibbs
  long half_width = 0;
  SpliceProfile profile = SpliceProfile::ramp;
  bool half_space = false;

  bool operator==(const LayoutConfig&) const = default;
};

struct GridConfig {
  std::size_t G = 4096;
  long window = 8;

  bool operator==(const GridConfig&) const = default;
};

struct EnsembleSection {
  std::size_t samples = 1;
  std::uint64_t seed = 0;
  std::vector<std::size_t> shape;
  std::vector<double> times;
  std::size_t workers = 1;
  long current_half_width = 0;
  long kinetic_half_width = 0;
  long covariance_radius = 4;
  long covariance_half_width = 0;
  bool functional = true;
  std::vector<long> planes;
  bool override_horizon = false;
  bool compare = false;
  double z = 4.0;
  double rel_tol = 0.05;

  bool operator==(const EnsembleSection&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"json", "csv"};

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  LayoutConfig layout;
  GridConfig grid;
  EnsembleSection ensemble;
  OutputConfig output;

  /// Parse and validate; ConfigError names the offending section.key.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::string& path);
  /// Canonical text form; parse(to_string()) == *this.
  std::string to_string() const;

  InteractionMatrix interaction() const;
  ReservoirLayout reservoir_layout(const InteractionMatrix& v) const;
  ObservableOptions observable_options() const;
  EnsembleConfig ensemble_config(const InteractionMatrix& v) const;
  TolerancePolicy policy() const { return {ensemble.z, ensemble.rel_tol}; }

  bool operator==(const RunConfig& o) const;

 private:
  void validate() const;
};

/// Spectrum descriptor for one reservoir: "gibbs", "triangular N0 su sv" or
/// "geometric a b gamma su sv".
GaussianMeasureSpec parse_spectrum(const std::string& text, const InteractionMatrix& v,
                                   double temperature, const std::string& key);

}  // namespace crystalflow
