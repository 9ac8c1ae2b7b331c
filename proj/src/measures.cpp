#include "crystalflow/measures.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "crystalflow/fft.hpp"

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

CMatrix block_diag(const CMatrix& a, const CMatrix& b) {
  const auto n = a.rows();
  CMatrix out = CMatrix::Zero(2 * n, 2 * n);
  out.topLeftCorner(n, n) = a;
  out.bottomRightCorner(n, n) = b;
  return out;
}

CMatrix inverse_symbol(const InteractionMatrix& v, std::span<const double> theta) {
  const CMatrix s = v.symbol(theta);
  const int n = v.components();
  if (n == 1) {
    const double lam = s(0, 0).real();
    if (!(std::abs(lam) > 1e-14)) throw ValidationError("det V_hat = 0 at theta = " + format_point(theta));
    return CMatrix::Constant(1, 1, cplx(1.0 / lam, 0.0));
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (s + s.adjoint()));
  const auto& ev = solver.eigenvalues();
  const double norm = ev.cwiseAbs().maxCoeff();
  if (!(ev.cwiseAbs().minCoeff() > 1e-14 * std::max(norm, 1.0)))
    throw ValidationError("det V_hat = 0 at theta = " + format_point(theta));
  return solver.eigenvectors() * ev.cwiseInverse().cast<cplx>().asDiagonal() *
         solver.eigenvectors().adjoint();
}

CMatrix psd_sqrt(const CMatrix& q, std::span<const double> theta) {
  const CMatrix h = 0.5 * (q + q.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
  Eigen::VectorXd ev = solver.eigenvalues();
  const double tol = 1e-10 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) {
      std::ostringstream os;
      os << "spectral density is not positive semidefinite at theta = " << format_point(theta)
         << ": eigenvalue " << ev(i);
      throw ValidationError(os.str());
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return solver.eigenvectors() * ev.cast<cplx>().asDiagonal() * solver.eigenvectors().adjoint();
}

}  // namespace

GaussianMeasureSpec gibbs_spec(const InteractionMatrix& v, double temperature) {
  if (!(temperature >= 0.0) || !std::isfinite(temperature))
    throw ConfigError("gibbs measure: temperature must be a finite nonnegative number");
  GaussianMeasureSpec spec;
  spec.dimension = v.dimension();
  spec.components = v.components();
  spec.label = "gibbs(T=" + std::to_string(temperature) + ")";
  spec.gibbs_temperature = temperature;
  const int n = v.components();
  spec.density = [v, temperature, n](std::span<const double> theta) {
    return block_diag(temperature * inverse_symbol(v, theta),
                      CMatrix::Identity(n, n) * cplx(temperature, 0.0));
  };
  return spec;
}

GaussianMeasureSpec gibbs_spec(const InteractionMatrix& v, const DispersionData& grid,
                               double temperature) {
  const double tol = 1e-14;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto& dec = grid.point(p);
    const double norm = std::max(dec.eigenvalues.cwiseAbs().maxCoeff(), 1.0);
    if (dec.eigenvalues.minCoeff() <= tol * norm)
      throw ValidationError("det V_hat = 0 at theta = " + format_point(grid.grid().theta(p)));
  }
  return gibbs_spec(v, temperature);
}

GaussianMeasureSpec product_spec(int dimension, int components, SpectralFactor factor,
                                 double scale_u, double scale_v, std::string label) {
  if (dimension < 1 || components < 1) throw ConfigError("product measure: bad dimensions");
  if (scale_u < 0.0 || scale_v < 0.0) throw ConfigError("product measure: scales must be >= 0");
  GaussianMeasureSpec spec;
  spec.dimension = dimension;
  spec.components = components;
  spec.label = std::move(label);
  spec.density = [factor, scale_u, scale_v, components](std::span<const double> theta) {
    double f = 1.0;
    for (double t : theta) f *= factor(t);
    const CMatrix id = CMatrix::Identity(components, components);
    return block_diag(id * cplx(scale_u * f, 0.0), id * cplx(scale_v * f, 0.0));
  };
  return spec;
}

SpectralFactor example_correlation(const TriangularCorrelation& c) {
  if (c.n0 < 1) throw ConfigError("triangular correlation: N0 must be >= 1");
  const int n0 = c.n0;
  return [n0](double theta) {
    const double den = 1.0 - std::cos(theta);
    if (den < 1e-8) {
      // sin^2(N0 t / 2) / sin^2(t / 2) near t = 0
      const double s = std::sin(0.5 * theta);
      if (std::abs(s) < 1e-300) return static_cast<double>(n0) * n0;
      const double r = std::sin(0.5 * n0 * theta) / s;
      return r * r;
    }
    return (1.0 - std::cos(n0 * theta)) / den;
  };
}

SpectralFactor example_correlation(const GeometricCorrelation& c) {
  if (!(c.gamma > 0.0 && c.gamma < 1.0))
    throw ConfigError("geometric correlation: gamma must lie in (0, 1)");
  if (!(c.a > 0.0)) throw ConfigError("geometric correlation: a must be > 0");
  if (!(c.b >= 0.0)) throw ConfigError("geometric correlation: b must be >= 0");
  const double bound = 2.0 * c.b * c.gamma / (1.0 - c.gamma * c.gamma);
  if (c.a < bound) {
    std::ostringstream os;
    os << "geometric correlation: a = " << c.a << " violates a >= 2 b gamma / (1 - gamma^2) = "
       << bound;
    throw ConfigError(os.str());
  }
  const GeometricCorrelation p = c;
  return [p](double theta) {
    const double g = p.gamma;
    const double cs = std::cos(theta);
    const double den = 1.0 - 2.0 * g * cs + g * g;
    return p.a * (1.0 - g * g) / den + 2.0 * p.b * g * ((1.0 + g * g) * cs - 2.0 * g) / (den * den);
  };
}

FieldState::FieldState(Lattice lat, int n, bool half)
    : lattice(std::move(lat)), components(n), half_space(half) {
  if (n < 1) throw ConfigError("field: components must be >= 1");
  u.assign(lattice.size() * n, 0.0);
  v.assign(lattice.size() * n, 0.0);
}

bool FieldState::finite() const {
  auto ok = [](double x) { return std::isfinite(x); };
  return std::all_of(u.begin(), u.end(), ok) && std::all_of(v.begin(), v.end(), ok);
}

void FieldState::validate() const {
  const std::size_t expect = lattice.size() * static_cast<std::size_t>(components);
  if (u.size() != expect || v.size() != expect) throw ValidationError("field: array size mismatch");
  if (!finite()) throw ValidationError("field: non-finite values");
  if (half_space) {
    std::vector<long> c(lattice.dimension());
    for (std::size_t s = 0; s < lattice.size(); ++s) {
      lattice.coords(s, c);
      if (c[0] != 0) continue;
      for (int a = 0; a < components; ++a)
        if (u[s * components + a] != 0.0 || v[s * components + a] != 0.0)
          throw ValidationError("half-space field: nonzero data on the boundary plane");
    }
  }
}

std::vector<ReservoirIndex> ReservoirLayout::members() const {
  std::vector<ReservoirIndex> out;
  for (const auto& r : all_reservoirs(k))
    if (!half_space || r.n(0) == 2) out.push_back(r);
  return out;
}

double ReservoirLayout::zeta(int n, long x) const {
  double z2;
  if (profile == SpliceProfile::step || half_width == 0) {
    z2 = x >= 0 ? 1.0 : 0.0;
  } else {
    const double a = static_cast<double>(half_width);
    z2 = std::clamp((static_cast<double>(x) + a) / (2.0 * a), 0.0, 1.0);
  }
  return n == 2 ? z2 : 1.0 - z2;
}

double ReservoirLayout::weight(const ReservoirIndex& r, std::span<const long> coords) const {
  double w = 1.0;
  for (int j = 0; j < k; ++j) w *= zeta(r.n(j), coords[j]);
  return w;
}

void ReservoirLayout::validate() const {
  if (k < 1 || k > 16) throw ConfigError("layout: k must lie in 1..16");
  if (half_width < 0) throw ConfigError("layout: splice half-width must be >= 0");
  const std::size_t slots = std::size_t{1} << k;
  if (temperatures.size() != slots || spectra.size() != slots)
    throw ConfigError("layout: expected 2^k reservoir slots");
  for (const auto& r : members()) {
    const double t = temperatures[r.mask];
    if (!(t > 0.0) || !std::isfinite(t))
      throw ConfigError("layout: temperature of reservoir " + r.pattern() + " must be positive");
    if (!spectra[r.mask].density)
      throw ConfigError("layout: reservoir " + r.pattern() + " has no spectral density");
  }
}

ReservoirLayout gibbs_layout(const InteractionMatrix& v, int k, const std::vector<double>& temps,
                             long half_width, SpliceProfile profile, bool half_space) {
  ReservoirLayout layout;
  layout.k = k;
  layout.half_space = half_space;
  layout.half_width = half_width;
  layout.profile = profile;
  const std::size_t slots = std::size_t{1} << k;
  if (temps.size() != slots) throw ConfigError("layout: expected 2^k temperatures indexed by mask");
  layout.temperatures = temps;
  layout.spectra.resize(slots);
  for (const auto& r : layout.members()) layout.spectra[r.mask] = gibbs_spec(v, temps[r.mask]);
  if (k > v.dimension()) throw ConfigError("layout: k exceeds the lattice dimension");
  layout.validate();
  return layout;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master + (index + 1) * 0x9E3779B97F4A7C15ull);
}

StationarySampler::StationarySampler(const GaussianMeasureSpec& spec, const Lattice& lattice)
    : lattice_(lattice), components_(spec.components) {
  if (spec.dimension != lattice.dimension())
    throw ConfigError("sampler: spec dimension differs from the lattice");
  if (!spec.density) throw ConfigError("sampler: spec has no density");
  const FrequencyGrid grid = FrequencyGrid::for_lattice(lattice);
  coloring_.resize(grid.size());
  density_.resize(grid.size());
  std::vector<double> theta(lattice.dimension());
  for (std::size_t p = 0; p < grid.size(); ++p) {
    grid.theta(p, theta);
    density_[p] = spec(theta);
    if (density_[p].rows() != 2 * components_ || density_[p].cols() != 2 * components_)
      throw ConfigError("sampler: density must be 2n x 2n");
    coloring_[p] = psd_sqrt(density_[p], theta);
  }
}

CMatrix StationarySampler::lattice_covariance_at_zero() const {
  CMatrix sum = CMatrix::Zero(2 * components_, 2 * components_);
  for (const auto& q : density_) sum += q;
  return sum / static_cast<double>(density_.size());
}

FieldState StationarySampler::sample(std::uint64_t seed, double* imaginary_residue) const {
  const std::size_t L = lattice_.size();
  const std::size_t m = 2 * static_cast<std::size_t>(components_);
  const FrequencyGrid grid = FrequencyGrid::for_lattice(lattice_);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));

  std::vector<cplx> z(L * m);
  Eigen::VectorXcd xi(static_cast<Eigen::Index>(m));
  for (std::size_t p = 0; p < L; ++p) {
    for (std::size_t c = 0; c < m; ++c) {
      const double re = normal(rng);
      const double im = normal(rng);
      xi(static_cast<Eigen::Index>(c)) = cplx(re, im);
    }
    Eigen::Map<Eigen::VectorXcd>(z.data() + p * m, static_cast<Eigen::Index>(m)) = coloring_[p] * xi;
  }
  // Hermitian symmetrisation makes the field real while keeping the
  // covariance q_hat at every frequency.
  std::vector<cplx> s(L * m);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (std::size_t p = 0; p < L; ++p) {
    const std::size_t q = grid.negated(p);
    for (std::size_t c = 0; c < m; ++c)
      s[p * m + c] = (z[p * m + c] + std::conj(z[q * m + c])) * inv_sqrt2;
  }
  FftPlan(lattice_.shape(), m, -1).execute(s.data());
  const double scale = 1.0 / std::sqrt(static_cast<double>(L));

  FieldState out(lattice_, components_);
  double max_re = 0.0;
  double max_im = 0.0;
  const std::size_t n = static_cast<std::size_t>(components_);
  for (std::size_t x = 0; x < L; ++x) {
    for (std::size_t c = 0; c < n; ++c) {
      const cplx uu = s[x * m + c] * scale;
      const cplx vv = s[x * m + n + c] * scale;
      out.u[x * n + c] = uu.real();
      out.v[x * n + c] = vv.real();
      max_re = std::max({max_re, std::abs(uu.real()), std::abs(vv.real())});
      max_im = std::max({max_im, std::abs(uu.imag()), std::abs(vv.imag())});
    }
  }
  if (imaginary_residue) *imaginary_residue = max_re > 0.0 ? max_im / max_re : max_im;
  return out;
}

FieldState splice(const std::vector<FieldState>& samples, const ReservoirLayout& layout) {
  const auto members = layout.members();
  if (samples.size() != members.size())
    throw ConfigError("splice: need one sample per reservoir");
  const FieldState& first = samples.front();
  for (const auto& s : samples)
    if (!(s.lattice == first.lattice) || s.components != first.components)
      throw ConfigError("splice: sample shapes differ");
  if (layout.k > first.lattice.dimension()) throw ConfigError("splice: k exceeds dimension");

  FieldState out(first.lattice, first.components, layout.half_space);
  const std::size_t n = static_cast<std::size_t>(first.components);
  std::vector<long> c(first.lattice.dimension());
  std::vector<double> w(members.size());
  for (std::size_t x = 0; x < out.size(); ++x) {
    first.lattice.coords(x, c);
    if (layout.half_space && c[0] <= 0) continue;
    for (std::size_t r = 0; r < members.size(); ++r) w[r] = layout.weight(members[r], c);
    for (std::size_t a = 0; a < n; ++a) {
      double uu = 0.0;
      double vv = 0.0;
      for (std::size_t r = 0; r < members.size(); ++r) {
        if (w[r] == 0.0) continue;
        uu += w[r] * samples[r].u[x * n + a];
        vv += w[r] * samples[r].v[x * n + a];
      }
      out.u[x * n + a] = uu;
      out.v[x * n + a] = vv;
    }
  }
  return out;
}

namespace {

constexpr char kMagic[8] = {'C', 'R', 'Y', 'F', 'I', 'E', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T value) {
  static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes little-endian");
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw IoError("snapshot: truncated header");
  return value;
}

}  // namespace

void write_snapshot(const FieldState& y, const std::string& path) {
  y.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("snapshot: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(y.lattice.dimension()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(y.components));
  put<std::uint32_t>(os, y.half_space ? 1u : 0u);
  for (auto s : y.lattice.shape()) put<std::uint64_t>(os, s);
  os.write(reinterpret_cast<const char*>(y.u.data()), static_cast<std::streamsize>(y.u.size() * 8));
  os.write(reinterpret_cast<const char*>(y.v.data()), static_cast<std::streamsize>(y.v.size() * 8));
  if (!os) throw IoError("snapshot: write failed for '" + path + "'");
}

FieldState read_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("snapshot: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw IoError("snapshot: bad magic in '" + path + "'");
  if (get<std::uint32_t>(is) != kVersion) throw IoError("snapshot: unsupported version");
  const auto d = get<std::uint32_t>(is);
  const auto n = get<std::uint32_t>(is);
  const auto half = get<std::uint32_t>(is);
  if (d < 1 || d > 8 || n < 1 || n > 64 || half > 1) throw IoError("snapshot: bad header fields");
  std::vector<std::size_t> shape(d);
  for (auto& s : shape) {
    s = static_cast<std::size_t>(get<std::uint64_t>(is));
    if (s == 0 || s > (std::size_t{1} << 32)) throw IoError("snapshot: bad extent");
  }
  std::vector<long> origin(d);
  for (std::uint32_t j = 0; j < d; ++j) origin[j] = static_cast<long>(shape[j] / 2);
  if (half) origin[0] = 0;
  FieldState y(Lattice(shape, origin), static_cast<int>(n), half == 1);
  is.read(reinterpret_cast<char*>(y.u.data()), static_cast<std::streamsize>(y.u.size() * 8));
  is.read(reinterpret_cast<char*>(y.v.data()), static_cast<std::streamsize>(y.v.size() * 8));
  if (!is) throw IoError("snapshot: truncated data in '" + path + "'");
  y.validate();
  return y;
}

}  // namespace crystalflow
