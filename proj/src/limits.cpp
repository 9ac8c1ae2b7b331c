#include "crystalflow/limits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace crystalflow {

namespace {

using cplx = std::complex<double>;

CMatrix doubled(const CMatrix& pi) {
  const auto n = pi.rows();
  CMatrix out = CMatrix::Zero(2 * n, 2 * n);
  out.topLeftCorner(n, n) = pi;
  out.bottomRightCorner(n, n) = pi;
  return out;
}

std::vector<int> band_signs(const DispersionData& data, std::size_t p, std::size_t band, int k) {
  std::vector<int> s(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) s[j] = data.velocity_sign(p, band, j);
  return s;
}

// Parallel reduction over grid chunks with a fixed summation order.
template <class F>
std::vector<double> chunked_sum(std::size_t count, std::size_t width, std::size_t workers, F&& body) {
  const std::size_t chunk = 4096;
  const std::size_t chunks = (count + chunk - 1) / chunk;
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(width, 0.0));
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t end = std::min(count, (c + 1) * chunk);
    for (std::size_t p = c * chunk; p < end; ++p) body(p, partial[c]);
  });
  std::vector<double> total(width, 0.0);
  for (const auto& part : partial)
    for (std::size_t i = 0; i < width; ++i) total[i] += part[i];
  return total;
}

double power_of_two_inverse(int k) { return std::ldexp(1.0, -k); }

}  // namespace

SignSums sign_sums(std::span<const int> signs, const ReservoirIndex& n) {
  SignSums out;
  const int k = n.k;
  for (unsigned subset = 1; subset < (1u << k); ++subset) {
    int prod = 1;
    int size = 0;
    for (int j = 0; j < k; ++j) {
      if (!((subset >> j) & 1u)) continue;
      prod *= signs[j] * n.parity(j);
      ++size;
    }
    if (size % 2 == 0) out.even += prod;
    else out.odd += prod;
  }
  return out;
}

CMatrix c_matrix(const SpectralDecomposition& dec) {
  const auto n = dec.vectors.rows();
  CMatrix c = CMatrix::Zero(2 * n, 2 * n);
  c.topRightCorner(n, n) = dec.apply([](double w) {
    if (w < 1e-12) throw ValidationError("C(theta) undefined where omega = 0");
    return cplx(1.0 / w, 0.0);
  });
  c.bottomLeftCorner(n, n) = -dec.omega_matrix();
  return c;
}

CMatrix c_star_matrix(const SpectralDecomposition& dec) { return c_matrix(dec).adjoint(); }

CMatrix l1(const CMatrix& q, const CMatrix& c, const CMatrix& cs, int sign) {
  return 0.5 * (q + static_cast<double>(sign) * (c * q * cs));
}

CMatrix l2(const CMatrix& q, const CMatrix& c, const CMatrix& cs, int sign) {
  return 0.5 * (c * q + static_cast<double>(sign) * (q * cs));
}

ReservoirSpectra ReservoirSpectra::from_layout(const ReservoirLayout& layout) {
  ReservoirSpectra r;
  r.k = layout.k;
  r.members = layout.members();
  for (const auto& m : r.members) r.spectra.push_back(layout.spectra.at(m.mask));
  return r;
}

CMatrix limit_density(const DispersionData& data, std::size_t p, const std::vector<CMatrix>& qn,
                      const ReservoirSpectra& res) {
  const auto& dec = data.point(p);
  const CMatrix c = c_matrix(dec);
  const CMatrix cs = c.adjoint();
  const std::size_t members = res.members.size();
  std::vector<CMatrix> plus(members);
  std::vector<CMatrix> minus(members);
  for (std::size_t i = 0; i < members; ++i) {
    plus[i] = l1(qn[i], c, cs, +1);
    minus[i] = l2(qn[i], c, cs, -1);
  }
  const double norm = power_of_two_inverse(res.k);
  const auto m = qn.front().rows();
  CMatrix out = CMatrix::Zero(m, m);
  for (std::size_t s = 0; s < dec.bands.size(); ++s) {
    const auto signs = band_signs(data, p, s, res.k);
    CMatrix mp = CMatrix::Zero(m, m);
    CMatrix mm = CMatrix::Zero(m, m);
    for (std::size_t i = 0; i < members; ++i) {
      const SignSums ss = sign_sums(signs, res.members[i]);
      mp += plus[i] * static_cast<double>(1 + ss.even);
      mm += minus[i] * static_cast<double>(ss.odd);
    }
    const CMatrix ps = doubled(dec.projector(s));
    out += ps * (norm * (mp + cplx(0.0, 1.0) * mm)) * ps;
  }
  return out;
}

CMatrix limit_density_k1(const DispersionData& data, std::size_t p, const CMatrix& q1,
                         const CMatrix& q2) {
  const auto& dec = data.point(p);
  const CMatrix c = c_matrix(dec);
  const CMatrix cs = c.adjoint();
  const CMatrix mp = 0.5 * l1(q2 + q1, c, cs, +1);
  const CMatrix mm_base = 0.5 * l2(q2 - q1, c, cs, -1);
  CMatrix out = CMatrix::Zero(q1.rows(), q1.cols());
  for (std::size_t s = 0; s < dec.bands.size(); ++s) {
    const double sg = data.velocity_sign(p, s, 0);
    const CMatrix ps = doubled(dec.projector(s));
    out += ps * (mp + cplx(0.0, sg) * mm_base) * ps;
  }
  return out;
}

std::vector<CMatrix> limiting_covariance(const ReservoirSpectra& res, const DispersionData& data,
                                         std::size_t workers) {
  if (res.members.size() != res.spectra.size()) throw ConfigError("limits: spectra mismatch");
  std::vector<CMatrix> out(data.size());
  const std::size_t chunk = 1024;
  const std::size_t chunks = (data.size() + chunk - 1) / chunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<double> theta(data.dimension());
    std::vector<CMatrix> qn(res.members.size());
    const std::size_t end = std::min(data.size(), (c + 1) * chunk);
    for (std::size_t p = c * chunk; p < end; ++p) {
      data.grid().theta(p, theta);
      for (std::size_t i = 0; i < qn.size(); ++i) qn[i] = res.spectra[i](theta);
      out[p] = limit_density(data, p, qn, res);
    }
  });
  return out;
}

std::vector<std::vector<long>> offset_window(int dimension, long radius) {
  std::vector<std::vector<long>> out;
  std::vector<long> z(dimension, -radius);
  for (;;) {
    out.push_back(z);
    int j = dimension - 1;
    for (; j >= 0; --j) {
      if (++z[j] <= radius) break;
      z[j] = -radius;
    }
    if (j < 0) break;
  }
  return out;
}

std::vector<CMatrix> real_space_kernel(const std::vector<CMatrix>& qhat, const FrequencyGrid& grid,
                                       const std::vector<std::vector<long>>& offsets,
                                       double* imaginary_residue, std::size_t workers) {
  const int d = grid.dimension();
  const auto m = qhat.front().rows();
  std::vector<CMatrix> acc(offsets.size(), CMatrix::Zero(m, m));
  parallel_for(offsets.size(), workers, [&](std::size_t o) {
    const auto& z = offsets[o];
    // Separable phases e^{-i z_j theta_j}, one table per axis.
    std::vector<std::vector<cplx>> phase(d);
    for (int j = 0; j < d; ++j) {
      phase[j].resize(grid.count(j));
      for (std::size_t i = 0; i < grid.count(j); ++i)
        phase[j][i] = std::polar(1.0, -static_cast<double>(z[j]) * grid.axis_value(j, i));
    }
    std::vector<std::size_t> idx(d, 0);
    CMatrix sum = CMatrix::Zero(m, m);
    for (std::size_t p = 0; p < grid.size(); ++p) {
      cplx ph(1.0, 0.0);
      for (int j = 0; j < d; ++j) ph *= phase[j][idx[j]];
      sum += ph * qhat[p];
      for (int j = d - 1; j >= 0; --j) {
        if (++idx[j] < grid.count(j)) break;
        idx[j] = 0;
      }
    }
    acc[o] = sum * grid.weight();
  });
  if (imaginary_residue) {
    double re = 0.0;
    double im = 0.0;
    for (const auto& a : acc) {
      re = std::max(re, a.real().cwiseAbs().maxCoeff());
      im = std::max(im, a.imag().cwiseAbs().maxCoeff());
    }
    *imaginary_residue = re > 0.0 ? im / re : im;
  }
  return acc;
}

SymmetryReport shortcut_symmetry_test(const DispersionData& data, int k, double tolerance) {
  const int d = data.dimension();
  SymmetryReport rep;
  rep.reflection_residue.assign(d, 0.0);
  rep.even.assign(d, false);
  double scale = 0.0;
  for (std::size_t p = 0; p < data.size(); ++p)
    scale = std::max(scale, std::sqrt(data.point(p).eigenvalues.maxCoeff()));
  for (int j = 0; j < d; ++j) {
    double worst = 0.0;
    for (std::size_t p = 0; p < data.size(); ++p) {
      const std::size_t q = data.grid().reflected(p, j);
      const auto& a = data.point(p).eigenvalues;
      const auto& b = data.point(q).eigenvalues;
      for (Eigen::Index i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(std::sqrt(a(i)) - std::sqrt(b(i))));
    }
    rep.reflection_residue[j] = worst;
    rep.even[j] = worst <= tolerance * (1.0 + scale);
  }
  rep.sign_separable.assign(k, true);
  for (int j = 0; j < k; ++j) {
    const std::size_t cells = data.grid().count(j);
    std::vector<std::vector<int>> seen(data.components(), std::vector<int>(cells, 0));
    std::size_t stride = 1;
    for (int q = j + 1; q < d; ++q) stride *= data.grid().count(q);
    for (std::size_t p = 0; p < data.size() && rep.sign_separable[j]; ++p) {
      const std::size_t cell = (p / stride) % cells;
      for (std::size_t s = 0; s < data.band_count(p); ++s) {
        const int sg = data.velocity_sign(p, s, j);
        if (sg == 0) continue;
        int& slot = seen[s][cell];
        if (slot == 0) slot = sg;
        else if (slot != sg) rep.sign_separable[j] = false;
      }
    }
  }
  int even_first = 0;
  for (int j = 0; j < k; ++j) even_first += rep.even[j] ? 1 : 0;
  bool even_rest = true;
  for (int j = k; j < d; ++j) even_rest = even_rest && rep.even[j];
  bool separable = true;
  for (int j = 0; j < k; ++j) separable = separable && rep.sign_separable[j];
  rep.a = even_rest && (k < 2 || even_first >= k - 1);
  rep.b = even_first == k;
  rep.c = separable && (k < 3 || even_first >= k - 1);
  return rep;
}

std::map<unsigned, std::vector<double>> current_coefficients(const DispersionData& data, int k,
                                                             const ThetaWeight& weight) {
  const int d = data.dimension();
  const unsigned subsets = 1u << k;
  const auto flat = chunked_sum(data.size(), static_cast<std::size_t>(subsets) * d, 1,
                                [&](std::size_t p, std::vector<double>& acc) {
    const double w = weight ? weight(data.grid().theta(p)) : 1.0;
    for (std::size_t s = 0; s < data.band_count(p); ++s) {
      const double r = data.multiplicity(p, s);
      for (unsigned P = 1; P < subsets; ++P) {
        int prod = 1;
        for (int j = 0; j < k; ++j)
          if ((P >> j) & 1u) prod *= data.velocity_sign(p, s, j);
        if (prod == 0) continue;
        for (int l = 0; l < d; ++l) acc[P * d + l] += w * r * prod * data.velocity(p, s, l);
      }
    }
  });
  std::map<unsigned, std::vector<double>> out;
  for (unsigned P = 1; P < subsets; ++P) {
    std::vector<double> row(d);
    for (int l = 0; l < d; ++l) row[l] = flat[P * d + l] * data.grid().weight();
    out[P] = row;
  }
  return out;
}

std::vector<double> velocity_constants(const DispersionData& data, const ThetaWeight& weight) {
  const int d = data.dimension();
  auto c = chunked_sum(data.size(), d, 1, [&](std::size_t p, std::vector<double>& acc) {
    const double w = weight ? weight(data.grid().theta(p)) : 1.0;
    for (std::size_t s = 0; s < data.band_count(p); ++s)
      for (int l = 0; l < d; ++l)
        acc[l] += w * data.multiplicity(p, s) * std::abs(data.velocity(p, s, l));
  });
  for (double& x : c) x *= data.grid().weight();
  return c;
}

std::vector<double> gibbs_current(const DispersionData& data, const ReservoirSpectra& res,
                                  const std::vector<double>& temperatures,
                                  const ThetaWeight& theta_weight) {
  const int d = data.dimension();
  const double norm = power_of_two_inverse(res.k);
  auto j = chunked_sum(data.size(), d, 1, [&](std::size_t p, std::vector<double>& acc) {
    const double tw = theta_weight ? theta_weight(data.grid().theta(p)) : 1.0;
    for (std::size_t s = 0; s < data.band_count(p); ++s) {
      const auto signs = band_signs(data, p, s, res.k);
      double weight = 0.0;
      for (std::size_t i = 0; i < res.members.size(); ++i)
        weight += temperatures[i] * sign_sums(signs, res.members[i]).odd;
      weight *= tw * data.multiplicity(p, s);
      for (int l = 0; l < d; ++l) acc[l] += weight * data.velocity(p, s, l);
    }
  });
  for (double& x : j) x *= -norm * data.grid().weight();
  return j;
}

std::vector<double> gibbs_current_from_coefficients(
    const std::map<unsigned, std::vector<double>>& coeffs, const ReservoirSpectra& res,
    const std::vector<double>& temperatures, int dimension) {
  std::vector<double> j(dimension, 0.0);
  const double norm = power_of_two_inverse(res.k);
  for (std::size_t i = 0; i < res.members.size(); ++i) {
    const auto& n = res.members[i];
    for (const auto& [P, row] : coeffs) {
      int size = 0;
      int parity = 1;
      for (int q = 0; q < res.k; ++q)
        if ((P >> q) & 1u) {
          ++size;
          parity *= n.parity(q);
        }
      if (size % 2 == 0) continue;
      for (int l = 0; l < dimension; ++l) j[l] -= norm * temperatures[i] * row[l] * parity;
    }
  }
  return j;
}

std::vector<double> shortcut_current(const std::vector<double>& c, const ReservoirSpectra& res,
                                     const std::vector<double>& temperatures, int dimension) {
  std::vector<double> j(dimension, 0.0);
  const double norm = power_of_two_inverse(res.k);
  for (int l = 0; l < res.k && l < dimension; ++l) {
    double s = 0.0;
    for (std::size_t i = 0; i < res.members.size(); ++i) s += res.members[i].parity(l) * temperatures[i];
    j[l] = -c[l] * norm * s;
  }
  return j;
}

std::vector<double> general_current(const DispersionData& data, const ReservoirSpectra& res,
                                    std::size_t workers) {
  const int d = data.dimension();
  const int n = data.components();
  const double norm = power_of_two_inverse(res.k);
  auto j = chunked_sum(data.size(), d, workers, [&](std::size_t p, std::vector<double>& acc) {
    const auto theta = data.grid().theta(p);
    std::vector<CMatrix> qn(res.members.size());
    for (std::size_t i = 0; i < qn.size(); ++i) qn[i] = res.spectra[i](theta);
    const auto& dec = data.point(p);
    for (std::size_t s = 0; s < dec.bands.size(); ++s) {
      const CMatrix pi = dec.projector(s);
      const double w = dec.bands[s].omega;
      const auto signs = band_signs(data, p, s, res.k);
      double a = 0.0;  // multiplies d_l w
      double b = 0.0;  // multiplies w d_l w
      for (std::size_t i = 0; i < qn.size(); ++i) {
        const SignSums ss = sign_sums(signs, res.members[i]);
        const double t00 = (pi * qn[i].topLeftCorner(n, n)).trace().real();
        const double t11 = (pi * qn[i].bottomRightCorner(n, n)).trace().real();
        const double t01 = (pi * qn[i].topRightCorner(n, n)).trace().imag();
        a += 0.5 * (w * w * t00 + t11) * ss.odd;
        b += t01 * (1 + ss.even);
      }
      for (int l = 0; l < d; ++l) {
        const double vel = data.velocity(p, s, l);
        acc[l] += a * vel + b * w * vel;
      }
    }
  });
  for (double& x : j) x *= -norm * data.grid().weight();
  return j;
}

std::vector<double> fourier_current(const InteractionMatrix& v, const DispersionData& data,
                                    const std::vector<CMatrix>& qhat, const ThetaWeight& weight) {
  const int d = data.dimension();
  const int n = data.components();
  std::vector<double> j(d, 0.0);
  for (std::size_t p = 0; p < data.size(); ++p) {
    const auto theta = data.grid().theta(p);
    const double w = weight ? weight(theta) : 1.0;
    const CMatrix q10 = qhat[p].bottomLeftCorner(n, n);
    for (int l = 0; l < d; ++l) {
      const cplx tr = (q10 * v.symbol_derivative(theta, l)).trace();
      j[l] += w * (cplx(0.0, 1.0) * tr).real();
    }
  }
  for (double& x : j) x *= -0.5 * data.grid().weight();
  return j;
}

double kinetic_temperature(const DispersionData& data, const std::vector<CMatrix>& qhat) {
  const int n = data.components();
  double sum = 0.0;
  for (const auto& q : qhat) sum += q.bottomRightCorner(n, n).trace().real();
  return sum * data.grid().weight();
}

double gibbs_kinetic_temperature(const DispersionData& data, const ReservoirSpectra& res,
                                 const std::vector<double>& temperatures) {
  const auto k = chunked_sum(data.size(), 1, 1, [&](std::size_t p, std::vector<double>& acc) {
    for (std::size_t s = 0; s < data.band_count(p); ++s) {
      const auto signs = band_signs(data, p, s, res.k);
      double w = 0.0;
      for (std::size_t i = 0; i < res.members.size(); ++i)
        w += temperatures[i] * (1 + sign_sums(signs, res.members[i]).even);
      acc[0] += w * data.multiplicity(p, s);
    }
  });
  return k[0] * power_of_two_inverse(res.k) * data.grid().weight();
}

LimitReport compute_limits(const InteractionMatrix& v, const ReservoirLayout& layout,
                           const LimitOptions& options) {
  if (layout.half_space) throw ConfigError("limits: use the half-space routines for half-space layouts");
  layout.validate();
  if (options.grid < 4) throw ConfigError("limits: grid must have at least 4 cells per axis");
  const int d = v.dimension();
  LimitReport rep;
  rep.dimension = d;
  rep.components = v.components();
  rep.k = layout.k;
  rep.grid = options.grid;

  const auto fine = DispersionData::build(v, FrequencyGrid::quadrature(d, options.grid),
                                          options.tolerances, options.workers);
  const auto coarse = DispersionData::build(v, FrequencyGrid::quadrature(d, options.grid / 2),
                                            options.tolerances, options.workers);
  const ReservoirSpectra res = ReservoirSpectra::from_layout(layout);
  std::vector<double> temps;
  for (const auto& m : res.members) temps.push_back(layout.temperature(m));

  const bool gibbs = std::all_of(res.spectra.begin(), res.spectra.end(),
                                 [](const GaussianMeasureSpec& s) { return s.gibbs_temperature.has_value(); });
  rep.c = velocity_constants(fine);
  rep.symmetry = shortcut_symmetry_test(fine, layout.k);
  rep.zero_velocity_fraction = fine.zero_velocity_fraction();
  rep.current_error.resize(d);

  if (!gibbs) {
    // Arbitrary reservoir spectra: only the p^{ij} and density routes apply.
    auto density = limiting_covariance(res, fine, options.workers);
    const auto coarse_density = limiting_covariance(res, coarse, options.workers);
    rep.current = general_current(fine, res, options.workers);
    const auto coarse_current = general_current(coarse, res, options.workers);
    for (int l = 0; l < d; ++l) rep.current_error[l] = std::abs(rep.current[l] - coarse_current[l]);
    rep.current_general = rep.current;
    rep.current_fourier = fourier_current(v, fine, density);
    rep.kinetic = kinetic_temperature(fine, density);
    rep.kinetic_error = std::abs(rep.kinetic - kinetic_temperature(coarse, coarse_density));
    rep.kinetic_closed_form = std::numeric_limits<double>::quiet_NaN();
    rep.window_offsets = offset_window(d, options.window);
    rep.window = real_space_kernel(density, fine.grid(), rep.window_offsets,
                                   &rep.window_imaginary_residue, options.workers);
    if (options.keep_density) rep.density = std::move(density);
    return rep;
  }

  rep.current = gibbs_current(fine, res, temps);
  const auto coarse_current = gibbs_current(coarse, res, temps);
  for (int l = 0; l < d; ++l) rep.current_error[l] = std::abs(rep.current[l] - coarse_current[l]);

  rep.coefficients = current_coefficients(fine, layout.k);
  rep.current_coeffs = gibbs_current_from_coefficients(rep.coefficients, res, temps, d);
  if (rep.symmetry.any()) rep.current_shortcut = shortcut_current(rep.c, res, temps, d);

  rep.kinetic = gibbs_kinetic_temperature(fine, res, temps);
  rep.kinetic_error = std::abs(rep.kinetic - gibbs_kinetic_temperature(coarse, res, temps));
  rep.kinetic_closed_form =
      rep.components * power_of_two_inverse(layout.k) * std::accumulate(temps.begin(), temps.end(), 0.0);

  if (options.general_path || options.keep_density) {
    auto density = limiting_covariance(res, fine, options.workers);
    if (options.general_path) {
      rep.current_general = general_current(fine, res, options.workers);
      rep.current_fourier = fourier_current(v, fine, density);
    }
    rep.window_offsets = offset_window(d, options.window);
    rep.window = real_space_kernel(density, fine.grid(), rep.window_offsets,
                                   &rep.window_imaginary_residue, options.workers);
    if (options.keep_density) rep.density = std::move(density);
  }
  return rep;
}

}  // namespace crystalflow
