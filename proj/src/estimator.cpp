#include "crystalflow/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace crystalflow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double component(const FieldState& y, std::size_t site, int a) {
  const std::size_t n = static_cast<std::size_t>(y.components);
  return a < y.components ? y.u[site * n + a] : y.v[site * n + (a - y.components)];
}

std::string coords_label(std::span<const long> c) {
  std::ostringstream os;
  os << '(';
  for (std::size_t j = 0; j < c.size(); ++j) os << (j ? "," : "") << c[j];
  os << ')';
  return os.str();
}

using MomentTable = std::vector<std::vector<Moments>>;

void merge_tables(MomentTable& into, const MomentTable& from) {
  for (std::size_t t = 0; t < into.size(); ++t)
    for (std::size_t o = 0; o < into[t].size(); ++o) into[t][o].merge(from[t][o]);
}

}  // namespace

void Moments::add(double x) {
  const double n1 = count;
  count += 1.0;
  const double delta = x - mean;
  const double dn = delta / count;
  const double dn2 = dn * dn;
  const double term1 = delta * dn * n1;
  mean += dn;
  m4 += term1 * dn2 * (count * count - 3.0 * count + 3.0) + 6.0 * dn2 * m2 - 4.0 * dn * m3;
  m3 += term1 * dn * (count - 2.0) - 3.0 * dn * m2;
  m2 += term1;
}

void Moments::merge(const Moments& o) {
  if (o.count == 0.0) return;
  if (count == 0.0) {
    *this = o;
    return;
  }
  const double na = count;
  const double nb = o.count;
  const double n = na + nb;
  const double delta = o.mean - mean;
  const double d2 = delta * delta;
  const double d3 = d2 * delta;
  const double d4 = d2 * d2;
  const double m2n = m2 + o.m2 + d2 * na * nb / n;
  const double m3n = m3 + o.m3 + d3 * na * nb * (na - nb) / (n * n) +
                     3.0 * delta * (na * o.m2 - nb * m2) / n;
  const double m4n = m4 + o.m4 + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n) +
                     6.0 * d2 * (na * na * o.m2 + nb * nb * m2) / (n * n) +
                     4.0 * delta * (na * o.m3 - nb * m3) / n;
  mean += delta * nb / n;
  m2 = m2n;
  m3 = m3n;
  m4 = m4n;
  count = n;
}

double Moments::variance() const { return count < 2.0 ? kNaN : m2 / (count - 1.0); }

double Moments::standard_error() const {
  return count < 2.0 ? kNaN : std::sqrt(variance() / count);
}

double Moments::kurtosis() const { return m2 > 0.0 ? count * m4 / (m2 * m2) : kNaN; }

std::pair<double, double> two_pass_moments(std::span<const double> xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = xs.size() < 2 ? kNaN : ss / static_cast<double>(xs.size() - 1);
  return {mean, var};
}

std::string kind_name(ObservableSpec::Kind kind) {
  switch (kind) {
    case ObservableSpec::Kind::current: return "current";
    case ObservableSpec::Kind::kinetic: return "kinetic";
    case ObservableSpec::Kind::covariance: return "covariance";
    case ObservableSpec::Kind::functional: return "functional";
  }
  return "unknown";
}

Lattice EnsembleConfig::lattice() const {
  return layout.half_space ? halfspace_lattice(shape) : Lattice(shape);
}

void EnsembleConfig::validate() const {
  if (samples < 1) throw ConfigError("ensemble: samples must be >= 1");
  if (interaction.dimension() < 1) throw ConfigError("ensemble: missing interaction");
  if (static_cast<int>(shape.size()) != interaction.dimension())
    throw ConfigError("ensemble: shape rank does not match the crystal dimension");
  for (std::size_t n : shape)
    if (n < 2) throw ConfigError("ensemble: every lattice extent must be >= 2");
  layout.validate();
  if (layout.k > interaction.dimension()) throw ConfigError("ensemble: k exceeds the dimension");
  if (times.empty()) throw ConfigError("ensemble: no observation times");
  for (double t : times)
    if (!(t >= 0.0) || !std::isfinite(t)) throw ConfigError("ensemble: times must be finite and >= 0");
  if (workers < 1) throw ConfigError("ensemble: workers must be >= 1");
  const int n2 = 2 * interaction.components();
  for (const auto& o : observables) {
    if (o.kind == ObservableSpec::Kind::current && (o.axis < 0 || o.axis >= interaction.dimension()))
      throw ConfigError("ensemble: observable " + o.name + " has a bad axis");
    if ((o.kind == ObservableSpec::Kind::covariance || o.kind == ObservableSpec::Kind::functional) &&
        (o.a < 0 || o.a >= n2 || o.b < 0 || o.b >= n2))
      throw ConfigError("ensemble: observable " + o.name + " has a bad component");
    if (o.kind != ObservableSpec::Kind::functional &&
        static_cast<int>(o.box.lo.size()) != interaction.dimension())
      throw ConfigError("ensemble: observable " + o.name + " has a bad box");
  }
}

Box junction_box(const Lattice& lat, int k, long half_width) {
  Box b = Box::whole(lat);
  for (int j = 0; j < k && j < lat.dimension(); ++j) {
    b.lo[j] = -half_width;
    b.hi[j] = half_width;
  }
  return b;
}

std::vector<ObservableSpec> standard_observables(const EnsembleConfig& config,
                                                 const ObservableOptions& options) {
  const Lattice lat = config.lattice();
  const int d = lat.dimension();
  const int k = config.layout.k;
  const int n2 = 2 * config.interaction.components();
  std::vector<ObservableSpec> out;

  if (!config.layout.half_space) {
    for (int l = 0; l < d; ++l) {
      ObservableSpec o;
      o.kind = ObservableSpec::Kind::current;
      o.name = "J" + std::to_string(l + 1);
      o.axis = l;
      o.box = junction_box(lat, k, options.current_half_width);
      out.push_back(o);
    }
    ObservableSpec kin;
    kin.kind = ObservableSpec::Kind::kinetic;
    kin.name = "K";
    kin.box = junction_box(lat, k, options.kinetic_half_width);
    out.push_back(kin);

    const auto offsets = offset_window(d, options.covariance_radius);
    const Box trans = junction_box(lat, k, options.covariance_half_width);
    const std::vector<long> centre(d, 0);
    for (const auto& z : offsets)
      for (int a = 0; a < n2; ++a)
        for (int b = 0; b < n2; ++b) {
          ObservableSpec o;
          o.kind = ObservableSpec::Kind::covariance;
          o.x = centre;
          o.y.resize(d);
          for (int j = 0; j < d; ++j) o.y[j] = centre[j] + z[j];
          o.a = a;
          o.b = b;
          o.box = trans;
          o.name = "Q" + std::to_string(a) + std::to_string(b) + coords_label(o.x) + coords_label(o.y);
          out.push_back(o);
        }
  } else {
    for (long x1 : options.halfspace_planes) {
      for (int l = 0; l < d; ++l) {
        ObservableSpec o;
        o.kind = ObservableSpec::Kind::current;
        o.name = "J" + std::to_string(l + 1) + "(x1=" + std::to_string(x1) + ")";
        o.axis = l;
        o.box = junction_box(lat, k, options.current_half_width);
        o.box.lo[0] = o.box.hi[0] = x1;
        out.push_back(o);
      }
      for (int a = 0; a < n2; ++a) {
        ObservableSpec o;
        o.kind = ObservableSpec::Kind::covariance;
        o.x.assign(d, 0);
        o.x[0] = x1;
        o.y = o.x;
        o.a = o.b = a;
        o.box = junction_box(lat, k, options.covariance_half_width);
        o.box.lo[0] = o.box.hi[0] = 0;
        o.name = "Q" + std::to_string(a) + std::to_string(a) + coords_label(o.x) + coords_label(o.y);
        out.push_back(o);
      }
    }
  }

  if (options.functional) {
    ObservableSpec f;
    f.kind = ObservableSpec::Kind::functional;
    f.name = "psi";
    f.a = 0;
    f.width = 8.0;
    f.centre.assign(d, 0);
    if (config.layout.half_space) f.centre[0] = std::min<long>(33, static_cast<long>(lat.extent(0)) / 2);
    out.push_back(f);
  }
  return out;
}

double observe(const ObservableSpec& obs, const FieldState& y, const InteractionMatrix& v) {
  switch (obs.kind) {
    case ObservableSpec::Kind::current:
      return box_current(y, v, obs.axis, obs.box);
    case ObservableSpec::Kind::kinetic:
      return box_kinetic(y, obs.box);
    case ObservableSpec::Kind::covariance: {
      const Lattice& lat = y.lattice;
      const int d = lat.dimension();
      std::vector<int> dx(d), dy(d);
      for (int j = 0; j < d; ++j) {
        dx[j] = static_cast<int>(obs.x[j]);
        dy[j] = static_cast<int>(obs.y[j]);
      }
      double sum = 0.0;
      const auto sites = obs.box.sites(lat);
      for (std::size_t s : sites)
        sum += component(y, lat.shifted(s, dx), obs.a) * component(y, lat.shifted(s, dy), obs.b);
      return sites.empty() ? 0.0 : sum / static_cast<double>(sites.size());
    }
    case ObservableSpec::Kind::functional: {
      const Lattice& lat = y.lattice;
      const int d = lat.dimension();
      const long reach = static_cast<long>(std::ceil(4.0 * obs.width));
      Box b;
      b.lo.resize(d);
      b.hi.resize(d);
      for (int j = 0; j < d; ++j) {
        const long half = static_cast<long>(lat.extent(j)) / 2;
        const long r = std::min(reach, half - 1);
        b.lo[j] = obs.centre[j] - r;
        b.hi[j] = obs.centre[j] + r;
      }
      std::vector<long> c(d);
      double sum = 0.0;
      const double inv = 1.0 / (2.0 * obs.width * obs.width);
      for (std::size_t s : b.sites(lat)) {
        lat.coords(s, c);
        double r2 = 0.0;
        for (int j = 0; j < d; ++j) {
          // Nearest periodic image of the displacement from the centre.
          const long n = static_cast<long>(lat.extent(j));
          long dz = ((c[j] - obs.centre[j]) % n + n) % n;
          if (dz > n / 2) dz -= n;
          r2 += static_cast<double>(dz * dz);
        }
        sum += std::exp(-r2 * inv) * component(y, s, obs.a);
      }
      return sum;
    }
  }
  return 0.0;
}

ObservableEstimate EnsembleResult::estimate(std::size_t time, std::size_t observable) const {
  const Moments& m = moments.at(time).at(observable);
  ObservableEstimate e;
  e.mean = m.mean;
  e.se = m.standard_error();
  if (observables.at(observable).kind == ObservableSpec::Kind::functional) {
    e.kurtosis = m.kurtosis();
    e.kurtosis_se = std::sqrt(24.0 / m.count);
  }
  return e;
}

std::vector<StationarySampler> make_samplers(const EnsembleConfig& config) {
  const Lattice lat = config.lattice();
  std::vector<StationarySampler> out;
  for (const auto& m : config.layout.members()) out.emplace_back(config.layout.spectra.at(m.mask), lat);
  return out;
}

FieldState initial_field(const EnsembleConfig& config,
                         const std::vector<StationarySampler>& samplers, std::size_t index,
                         double* imaginary_residue) {
  const std::uint64_t stream = derive_seed(config.seed, index);
  std::vector<FieldState> parts;
  parts.reserve(samplers.size());
  double worst = 0.0;
  for (std::size_t r = 0; r < samplers.size(); ++r) {
    double res = 0.0;
    parts.push_back(samplers[r].sample(derive_seed(stream, r), &res));
    worst = std::max(worst, res);
  }
  if (imaginary_residue) *imaginary_residue = worst;
  return splice(parts, config.layout);
}

EnsembleResult run_ensemble(const EnsembleConfig& config) {
  config.validate();
  const Lattice lat = config.lattice();
  const InteractionMatrix& v = config.interaction;
  const bool half = config.layout.half_space;

  std::optional<HalfSpaceEvolver> half_evolver;
  std::optional<Evolver> full_evolver;
  if (half)
    half_evolver.emplace(v, lat, config.workers);
  else
    full_evolver.emplace(v, lat, SpectralTolerances{}, config.workers);
  const Evolver& evolver = half ? half_evolver->extended() : *full_evolver;

  EnsembleResult result;
  result.samples = config.samples;
  result.times = config.times;
  result.observables = config.observables;
  result.horizon = validity_horizon(lat, config.layout.half_width, v.support_radius(),
                                    evolver.dispersion().max_group_velocity());
  for (double t : config.times)
    if (t > result.horizon && !config.override_horizon) {
      std::ostringstream os;
      os << "ensemble: time " << t << " exceeds the validity horizon " << result.horizon
         << " (override with --override-horizon)";
      throw ConfigError(os.str());
    }

  std::vector<Propagator> props;
  for (double t : config.times) props.push_back(evolver.propagator(t));
  const auto samplers = make_samplers(config);

  const std::size_t T = config.times.size();
  const std::size_t O = config.observables.size();
  const std::size_t blocks = (config.samples + kEnsembleBlock - 1) / kEnsembleBlock;
  std::vector<MomentTable> tables(blocks, MomentTable(T, std::vector<Moments>(O)));
  std::vector<double> residues(blocks, 0.0);

  parallel_for(blocks, config.workers, [&](std::size_t blk) {
    const std::size_t begin = blk * kEnsembleBlock;
    const std::size_t end = std::min(config.samples, begin + kEnsembleBlock);
    for (std::size_t i = begin; i < end; ++i) {
      double res = 0.0;
      FieldState y0 = initial_field(config, samplers, i, &res);
      residues[blk] = std::max(residues[blk], res);
      if (half) y0 = odd_extension(y0);
      const auto spectrum = evolver.transform(y0);
      for (std::size_t ti = 0; ti < T; ++ti) {
        FieldState yt;
        if (config.times[ti] == 0.0) {
          yt = y0;
        } else {
          auto s = spectrum;
          evolver.propagate(s, props[ti]);
          yt = evolver.synthesize(s, false);
          yt.lattice = y0.lattice;
          if (half) clear_reflection_planes(yt);
        }
        for (std::size_t o = 0; o < O; ++o) tables[blk][ti][o].add(observe(config.observables[o], yt, v));
      }
    }
  });

  // Fixed pairwise tree over block indices.
  for (std::size_t step = 1; step < blocks; step *= 2)
    for (std::size_t i = 0; i + step < blocks; i += 2 * step) merge_tables(tables[i], tables[i + step]);
  result.moments = std::move(tables.front());
  result.max_imaginary_residue = *std::max_element(residues.begin(), residues.end());
  return result;
}

std::vector<std::optional<double>> analytic_targets(const EnsembleConfig& config,
                                                    const LimitReport& report) {
  if (config.layout.half_space) throw ConfigError("targets: half-space configs need the grid overload");
  if (report.density.empty()) throw ConfigError("targets: limit report carries no density");
  const int d = config.interaction.dimension();
  const FrequencyGrid grid = FrequencyGrid::quadrature(d, report.grid);
  std::vector<std::vector<long>> offsets;
  std::vector<std::size_t> which;
  for (std::size_t i = 0; i < config.observables.size(); ++i) {
    const auto& o = config.observables[i];
    if (o.kind != ObservableSpec::Kind::covariance) continue;
    std::vector<long> z(d);
    for (int j = 0; j < d; ++j) z[j] = o.x[j] - o.y[j];
    offsets.push_back(z);
    which.push_back(i);
  }
  const auto kernel = real_space_kernel(report.density, grid, offsets);
  std::vector<std::optional<double>> out(config.observables.size());
  for (std::size_t i = 0; i < config.observables.size(); ++i) {
    const auto& o = config.observables[i];
    if (o.kind == ObservableSpec::Kind::current) out[i] = report.current[o.axis];
    if (o.kind == ObservableSpec::Kind::kinetic) out[i] = report.kinetic;
  }
  for (std::size_t c = 0; c < which.size(); ++c) {
    const auto& o = config.observables[which[c]];
    out[which[c]] = kernel[c](o.a, o.b).real();
  }
  return out;
}

std::vector<std::optional<double>> analytic_targets(const EnsembleConfig& config, std::size_t grid,
                                                    std::size_t workers) {
  const InteractionMatrix& v = config.interaction;
  if (!config.layout.half_space) {
    LimitOptions opt;
    opt.grid = grid;
    opt.window = 0;
    opt.keep_density = true;
    opt.workers = workers;
    return analytic_targets(config, compute_limits(v, config.layout, opt));
  }
  const int d = v.dimension();
  std::vector<long> planes;
  for (const auto& o : config.observables)
    if (o.kind == ObservableSpec::Kind::current) planes.push_back(o.box.lo[0]);
  std::sort(planes.begin(), planes.end());
  planes.erase(std::unique(planes.begin(), planes.end()), planes.end());
  const auto profile = halfspace_current(v, config.layout, planes, grid, false, workers);
  const auto data = DispersionData::build(v, FrequencyGrid::quadrature(d, grid), {}, workers);
  const auto density = limiting_covariance(ReservoirSpectra::from_layout(config.layout), data, workers);

  std::vector<std::optional<double>> out(config.observables.size());
  for (std::size_t i = 0; i < config.observables.size(); ++i) {
    const auto& o = config.observables[i];
    if (o.kind == ObservableSpec::Kind::current) {
      const auto it = std::find(profile.x1.begin(), profile.x1.end(), o.box.lo[0]);
      out[i] = profile.current[static_cast<std::size_t>(it - profile.x1.begin())][o.axis];
    } else if (o.kind == ObservableSpec::Kind::covariance) {
      out[i] = halfspace_covariance(density, data.grid(), o.x, o.y)(o.a, o.b).real();
    }
  }
  return out;
}

ComparisonReport compare(const EnsembleResult& result,
                         const std::vector<std::optional<double>>& analytic,
                         const TolerancePolicy& policy, std::size_t time) {
  if (analytic.size() != result.observables.size())
    throw ConfigError("compare: analytic targets do not match the observables");
  ComparisonReport rep;
  for (std::size_t i = 0; i < result.observables.size(); ++i) {
    const auto& o = result.observables[i];
    const auto e = result.estimate(time, i);
    Verdict v;
    v.name = o.name;
    v.kind = kind_name(o.kind);
    v.time = result.times.at(time);
    if (o.kind == ObservableSpec::Kind::functional) {
      v.estimate = e.kurtosis;
      v.se = e.kurtosis_se;
      v.analytic = 3.0;
      v.se_defined = result.samples >= 2;
      v.allowed = policy.z * v.se;
    } else {
      if (!analytic[i]) continue;
      v.estimate = e.mean;
      v.se = e.se;
      v.analytic = *analytic[i];
      v.se_defined = std::isfinite(e.se);
      v.allowed = std::max(v.se_defined ? policy.z * e.se : 0.0, policy.rel_tol * std::abs(v.analytic));
    }
    v.pass = v.se_defined || o.kind != ObservableSpec::Kind::functional
                 ? std::abs(v.estimate - v.analytic) <= v.allowed
                 : false;
    rep.pass = rep.pass && v.pass;
    rep.verdicts.push_back(v);
  }
  return rep;
}

ComparisonReport compare(const EnsembleResult& result, const LimitReport& limit,
                         const EnsembleConfig& config, const TolerancePolicy& policy,
                         std::size_t time) {
  return compare(result, analytic_targets(config, limit), policy, time);
}

}  // namespace crystalflow
