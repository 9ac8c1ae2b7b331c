#include "crystalflow/core.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

namespace crystalflow {

namespace {

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> strides(shape.size());
  std::size_t s = 1;
  for (std::size_t j = shape.size(); j-- > 0;) {
    strides[j] = s;
    s *= shape[j];
  }
  return strides;
}

std::size_t product(const std::vector<std::size_t>& v) {
  std::size_t p = 1;
  for (auto x : v) p *= x;
  return p;
}

long wrap(long i, long n) {
  long r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace

Lattice::Lattice(std::vector<std::size_t> shape) : Lattice(shape, {}) {}

Lattice::Lattice(std::vector<std::size_t> shape, std::vector<long> origin)
    : shape_(std::move(shape)), origin_(std::move(origin)) {
  if (shape_.empty()) throw ConfigError("lattice needs at least one axis");
  for (auto n : shape_)
    if (n == 0) throw ConfigError("lattice extents must be positive");
  if (origin_.empty()) {
    origin_.resize(shape_.size());
    for (std::size_t j = 0; j < shape_.size(); ++j) origin_[j] = static_cast<long>(shape_[j] / 2);
  }
  if (origin_.size() != shape_.size()) throw ConfigError("lattice origin rank mismatch");
  strides_ = row_major_strides(shape_);
  size_ = product(shape_);
}

std::size_t Lattice::index(std::span<const long> coords) const {
  std::size_t idx = 0;
  for (std::size_t j = 0; j < shape_.size(); ++j) {
    long n = static_cast<long>(shape_[j]);
    idx += static_cast<std::size_t>(wrap(coords[j] + origin_[j], n)) * strides_[j];
  }
  return idx;
}

void Lattice::coords(std::size_t site, std::span<long> out) const {
  for (std::size_t j = 0; j < shape_.size(); ++j) {
    out[j] = static_cast<long>((site / strides_[j]) % shape_[j]) - origin_[j];
  }
}

std::vector<long> Lattice::coords(std::size_t site) const {
  std::vector<long> c(shape_.size());
  coords(site, c);
  return c;
}

std::size_t Lattice::shifted(std::size_t site, std::span<const int> offset) const {
  std::size_t idx = 0;
  for (std::size_t j = 0; j < shape_.size(); ++j) {
    long n = static_cast<long>(shape_[j]);
    long i = static_cast<long>((site / strides_[j]) % shape_[j]);
    idx += static_cast<std::size_t>(wrap(i + offset[j], n)) * strides_[j];
  }
  return idx;
}

FrequencyGrid::FrequencyGrid(Kind kind, std::vector<std::size_t> counts)
    : kind_(kind), counts_(std::move(counts)) {
  if (counts_.empty()) throw ConfigError("frequency grid needs at least one axis");
  for (auto c : counts_)
    if (c == 0) throw ConfigError("frequency grid counts must be positive");
  strides_ = row_major_strides(counts_);
  size_ = product(counts_);
}

FrequencyGrid FrequencyGrid::quadrature(int dimension, std::size_t per_axis) {
  return FrequencyGrid(Kind::quadrature, std::vector<std::size_t>(dimension, per_axis));
}

FrequencyGrid FrequencyGrid::for_lattice(const Lattice& lattice) {
  return FrequencyGrid(Kind::lattice, lattice.shape());
}

double FrequencyGrid::axis_value(int axis, std::size_t i) const {
  const double n = static_cast<double>(counts_[axis]);
  if (kind_ == Kind::quadrature) return 2.0 * kPi * (static_cast<double>(i) + 0.5) / n - kPi;
  // FFT order: 0, 1, ..., then negative frequencies.
  long il = static_cast<long>(i);
  long nl = static_cast<long>(counts_[axis]);
  if (2 * il >= nl) il -= nl;
  return 2.0 * kPi * static_cast<double>(il) / n;
}

void FrequencyGrid::theta(std::size_t point, std::span<double> out) const {
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    out[j] = axis_value(static_cast<int>(j), (point / strides_[j]) % counts_[j]);
  }
}

std::vector<double> FrequencyGrid::theta(std::size_t point) const {
  std::vector<double> t(counts_.size());
  theta(point, t);
  return t;
}

std::size_t FrequencyGrid::reflected(std::size_t point, int axis) const {
  const std::size_t n = counts_[axis];
  const std::size_t i = (point / strides_[axis]) % n;
  const std::size_t r = kind_ == Kind::quadrature ? n - 1 - i : (n - i) % n;
  return point + (r - i) * strides_[axis];
}

std::size_t FrequencyGrid::negated(std::size_t point) const {
  for (int j = 0; j < dimension(); ++j) point = reflected(point, j);
  return point;
}

std::size_t FrequencyGrid::neighbour(std::size_t point, int axis, long step) const {
  const long n = static_cast<long>(counts_[axis]);
  const long i = static_cast<long>((point / strides_[axis]) % counts_[axis]);
  const long r = wrap(i + step, n);
  return point + static_cast<std::size_t>(r) * strides_[axis] - static_cast<std::size_t>(i) * strides_[axis];
}

std::string ReservoirIndex::pattern() const {
  std::string s(static_cast<std::size_t>(k), '-');
  for (int j = 0; j < k; ++j)
    if (n(j) == 2) s[j] = '+';
  return s;
}

std::string ReservoirIndex::digits() const {
  std::string s(static_cast<std::size_t>(k), '1');
  for (int j = 0; j < k; ++j)
    if (n(j) == 2) s[j] = '2';
  return s;
}

ReservoirIndex ReservoirIndex::from_pattern(const std::string& pattern) {
  ReservoirIndex r;
  r.k = static_cast<int>(pattern.size());
  if (r.k == 0 || r.k > 16) throw ConfigError("reservoir pattern must have 1..16 signs: '" + pattern + "'");
  for (int j = 0; j < r.k; ++j) {
    char c = pattern[j];
    if (c == '+' || c == '2') {
      r.mask |= 1u << j;
    } else if (c != '-' && c != '1') {
      throw ConfigError("reservoir pattern may only contain '+' or '-': '" + pattern + "'");
    }
  }
  return r;
}

std::vector<ReservoirIndex> all_reservoirs(int k) {
  std::vector<ReservoirIndex> out;
  for (unsigned m = 0; m < (1u << k); ++m) out.push_back(ReservoirIndex{k, m});
  return out;
}

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  workers = std::min(workers, count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("CRYSTALFLOW_LOG");
    if (!env) return LogLevel::warn;
    std::string s(env);
    if (s == "error") return LogLevel::error;
    if (s == "info") return LogLevel::info;
    if (s == "debug") return LogLevel::debug;
    return LogLevel::warn;
  }();
  return level;
}

void log(LogLevel level, const std::string& message) {
  if (static_cast<int>(level) > static_cast<int>(log_level())) return;
  static std::mutex mutex;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard lock(mutex);
  std::cerr << "[crystalflow:" << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace crystalflow
