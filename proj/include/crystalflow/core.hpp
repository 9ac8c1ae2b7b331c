#pragma once

// Shared vocabulary: error types, lattice geometry, frequency grids,
// reservoir sign patterns and a small worker pool helper.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crystalflow {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration or arguments outside an operation's domain.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A structural condition on the model failed (PSD, nonsingular symbol, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Periodic lattice with per-axis origin. Storage is row-major (last axis
/// fastest); the physical coordinate of index i on axis j is i - origin[j].
class Lattice {
 public:
  Lattice() = default;
  explicit Lattice(std::vector<std::size_t> shape);
  Lattice(std::vector<std::size_t> shape, std::vector<long> origin);

  int dimension() const { return static_cast<int>(shape_.size()); }
  std::size_t size() const { return size_; }
  std::size_t extent(int axis) const { return shape_[axis]; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<long>& origin() const { return origin_; }
  std::size_t stride(int axis) const { return strides_[axis]; }

  /// Site index for physical coordinates, wrapping periodically.
  std::size_t index(std::span<const long> coords) const;
  void coords(std::size_t site, std::span<long> out) const;
  std::vector<long> coords(std::size_t site) const;
  /// Index of the site displaced by `offset` (periodic).
  std::size_t shifted(std::size_t site, std::span<const int> offset) const;

  bool operator==(const Lattice& other) const {
    return shape_ == other.shape_ && origin_ == other.origin_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<long> origin_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Uniform frequency grid on the torus [-pi, pi)^d.
///
/// Quadrature grids use the half-cell-shifted midpoints
/// theta = 2*pi*(i + 1/2)/G - pi, so theta = 0 is never sampled.
/// Lattice grids hold the DFT frequencies theta = 2*pi*i/N in FFT order
/// (wrapped into [-pi, pi)), matching a periodic Lattice of the same shape.
class FrequencyGrid {
 public:
  enum class Kind { quadrature, lattice };

  FrequencyGrid() = default;
  FrequencyGrid(Kind kind, std::vector<std::size_t> counts);

  static FrequencyGrid quadrature(int dimension, std::size_t per_axis);
  static FrequencyGrid for_lattice(const Lattice& lattice);

  Kind kind() const { return kind_; }
  int dimension() const { return static_cast<int>(counts_.size()); }
  std::size_t size() const { return size_; }
  std::size_t count(int axis) const { return counts_[axis]; }
  const std::vector<std::size_t>& counts() const { return counts_; }

  double axis_value(int axis, std::size_t i) const;
  void theta(std::size_t point, std::span<double> out) const;
  std::vector<double> theta(std::size_t point) const;
  /// Point index of theta with coordinate `axis` negated.
  std::size_t reflected(std::size_t point, int axis) const;
  /// Point index of -theta.
  std::size_t negated(std::size_t point) const;
  /// Neighbour along `axis` by `step` cells, periodic.
  std::size_t neighbour(std::size_t point, int axis, long step) const;
  /// Volume weight of one cell divided by (2 pi)^d.
  double weight() const { return 1.0 / static_cast<double>(size_); }

 private:
  Kind kind_ = Kind::quadrature;
  std::vector<std::size_t> counts_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Reservoir label n = (n_1..n_k), n_j in {1,2}. Bit j of `mask` set means
/// n_{j+1} = 2, the reservoir on the positive side of axis j.
struct ReservoirIndex {
  int k = 0;
  unsigned mask = 0;

  int n(int j) const { return (mask >> j) & 1u ? 2 : 1; }
  /// (-1)^{n_j}: +1 on the positive side, -1 on the negative side.
  int parity(int j) const { return (mask >> j) & 1u ? 1 : -1; }
  /// Pattern string such as "+-": '+' for n_j = 2, '-' for n_j = 1.
  std::string pattern() const;
  static ReservoirIndex from_pattern(const std::string& pattern);
  /// Digit string such as "21".
  std::string digits() const;

  bool operator==(const ReservoirIndex&) const = default;
};

/// All 2^k sign patterns in mask order.
std::vector<ReservoirIndex> all_reservoirs(int k);

/// Run body(i) for i in [0, count), chunked over `workers` threads.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };
/// Level from CRYSTALFLOW_LOG (error|warn|info|debug), default warn.
LogLevel log_level();
void log(LogLevel level, const std::string& message);

}  // namespace crystalflow
