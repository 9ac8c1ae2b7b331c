#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

namespace crystalflow::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kVersion = "1.0.0";

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json numbers(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_number(double x) {
  if (!std::isfinite(x)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

class Csv {
 public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : os_(path, std::ios::binary) {
    if (!os_) throw IoError("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << csv_field(cells[i]);
    os_ << '\n';
  }

 private:
  std::ofstream os_;
};

struct Context {
  Options opt;
  RunConfig config;
  fs::path out;
  bool json_out = true;
  bool csv_out = true;
};

Context make_context(const Options& opt) {
  Context c;
  c.opt = opt;
  c.config = load_config(opt);
  c.out = opt.out.empty() ? fs::path(c.config.output.directory) : fs::path(opt.out);
  fs::create_directories(c.out);
  const auto& f = c.config.output.formats;
  c.json_out = std::find(f.begin(), f.end(), "json") != f.end();
  c.csv_out = std::find(f.begin(), f.end(), "csv") != f.end();
  return c;
}

json header(const Context& c, const std::string& command) {
  json h;
  h["tool"] = "crystalflow";
  h["version"] = kVersion;
  h["command"] = command;
  h["generated_at"] = c.opt.timestamp ? json(timestamp()) : json(nullptr);
  h["config"] = c.config.to_string();
  return h;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << doc.dump(2) << '\n';
}

std::vector<std::string> axis_header(const std::string& prefix, int d) {
  std::vector<std::string> h;
  for (int j = 1; j <= d; ++j) h.push_back(prefix + std::to_string(j));
  return h;
}

json box_json(const Box& b) { return json{{"lo", b.lo}, {"hi", b.hi}}; }

json symmetry_json(const SymmetryReport& s) {
  json e = json::array(), sep = json::array();
  for (bool b : s.even) e.push_back(b);
  for (bool b : s.sign_separable) sep.push_back(b);
  return json{{"reflection_residue", numbers(s.reflection_residue)},
              {"even", e},
              {"sign_separable", sep},
              {"a", s.a},
              {"b", s.b},
              {"c", s.c},
              {"shortcut_applies", s.any()}};
}

json observable_json(const ObservableSpec& o) {
  json j{{"name", o.name}, {"kind", kind_name(o.kind)}};
  switch (o.kind) {
    case ObservableSpec::Kind::current:
      j["axis"] = o.axis + 1;
      j["box"] = box_json(o.box);
      break;
    case ObservableSpec::Kind::kinetic:
      j["box"] = box_json(o.box);
      break;
    case ObservableSpec::Kind::covariance:
      j["x"] = o.x;
      j["y"] = o.y;
      j["a"] = o.a;
      j["b"] = o.b;
      j["translations"] = box_json(o.box);
      break;
    case ObservableSpec::Kind::functional:
      j["component"] = o.a;
      j["centre"] = o.centre;
      j["width"] = o.width;
      break;
  }
  return j;
}

std::vector<long> halfspace_planes(const RunConfig& c) {
  if (!c.ensemble.planes.empty()) return c.ensemble.planes;
  return {0, 1, 2, 4, 8, 16, 32};
}

json limit_json(const LimitReport& r) {
  json coeffs = json::object();
  for (const auto& [mask, row] : r.coefficients) {
    std::string key;
    for (int j = 0; j < r.k; ++j)
      if ((mask >> j) & 1u) key += (key.empty() ? "" : ",") + std::to_string(j + 1);
    coeffs[key] = numbers(row);
  }
  return json{{"dimension", r.dimension},
              {"components", r.components},
              {"k", r.k},
              {"grid", r.grid},
              {"current", numbers(r.current)},
              {"current_coefficients_route", numbers(r.current_coeffs)},
              {"current_general_route", numbers(r.current_general)},
              {"current_fourier_route", numbers(r.current_fourier)},
              {"current_shortcut", numbers(r.current_shortcut)},
              {"current_error", numbers(r.current_error)},
              {"c", numbers(r.c)},
              {"coefficients", coeffs},
              {"kinetic", number(r.kinetic)},
              {"kinetic_closed_form", number(r.kinetic_closed_form)},
              {"kinetic_error", number(r.kinetic_error)},
              {"symmetry", symmetry_json(r.symmetry)},
              {"zero_velocity_fraction", numbers(r.zero_velocity_fraction)},
              {"window_imaginary_residue", number(r.window_imaginary_residue)}};
}

json profile_json(const HalfSpaceProfile& p) {
  json rows = json::array();
  for (std::size_t i = 0; i < p.x1.size(); ++i) {
    json r{{"x1", p.x1[i]}, {"current", numbers(p.current[i])}, {"c", numbers(p.c[i])}};
    if (!p.current_shortcut.empty()) r["current_shortcut"] = numbers(p.current_shortcut[i]);
    if (!p.current_fourier.empty()) r["current_fourier_route"] = numbers(p.current_fourier[i]);
    rows.push_back(r);
  }
  return json{{"profile", rows},
              {"c_limit", numbers(p.c_limit)},
              {"asymptote", numbers(p.asymptote)},
              {"symmetry", symmetry_json(p.symmetry)}};
}

json ensemble_json(const EnsembleResult& res, const std::vector<std::optional<double>>& targets,
                   const std::vector<ComparisonReport>& verdicts) {
  json obs = json::array();
  for (std::size_t o = 0; o < res.observables.size(); ++o) {
    json j = observable_json(res.observables[o]);
    j["analytic"] = o < targets.size() && targets[o] ? number(*targets[o]) : json(nullptr);
    json per = json::array();
    for (std::size_t t = 0; t < res.times.size(); ++t) {
      const auto e = res.estimate(t, o);
      json row{{"t", res.times[t]}, {"estimate", number(e.mean)}, {"se", number(e.se)}};
      if (res.observables[o].kind == ObservableSpec::Kind::functional) {
        row["kurtosis"] = number(e.kurtosis);
        row["kurtosis_se"] = number(e.kurtosis_se);
      }
      if (t < verdicts.size())
        for (const auto& v : verdicts[t].verdicts)
          if (v.name == res.observables[o].name) {
            row["allowed"] = number(v.allowed);
            row["pass"] = v.pass;
          }
      per.push_back(row);
    }
    j["times"] = per;
    obs.push_back(j);
  }
  return obs;
}

}  // namespace

RunConfig load_config(const Options& opt) {
  if (opt.config.empty()) throw ConfigError("--config is required");
  RunConfig c = RunConfig::load(opt.config);
  if (opt.workers) {
    if (*opt.workers < 1) throw ConfigError("--workers must be >= 1");
    c.ensemble.workers = *opt.workers;
  }
  if (opt.seed) c.ensemble.seed = *opt.seed;
  if (opt.override_horizon) c.ensemble.override_horizon = true;
  return c;
}

int cmd_dispersion(const Options& opt) {
  const Context c = make_context(opt);
  const auto v = c.config.interaction();
  const int d = v.dimension();
  const auto data = DispersionData::build(v, FrequencyGrid::quadrature(d, c.config.grid.G), {},
                                          c.config.ensemble.workers);
  const auto report = validate_conditions(v, data);

  if (c.csv_out) {
    auto h = axis_header("theta_", d);
    h.insert(h.end(), {"sigma", "omega", "r"});
    for (auto& s : axis_header("v_", d)) h.push_back(s);
    Csv csv(c.out / "dispersion.csv", h);
    for (std::size_t p = 0; p < data.size(); ++p) {
      const auto th = data.grid().theta(p);
      for (std::size_t s = 0; s < data.band_count(p); ++s) {
        std::vector<std::string> row;
        for (double x : th) row.push_back(csv_number(x));
        row.push_back(std::to_string(s + 1));
        row.push_back(csv_number(data.omega(p, s)));
        row.push_back(std::to_string(data.multiplicity(p, s)));
        for (int l = 0; l < d; ++l) row.push_back(csv_number(data.velocity(p, s, l)));
        csv.row(row);
      }
    }
  }
  if (c.json_out) {
    json doc = header(c, "dispersion");
    json zs = json::array();
    for (const auto& z : report.zero_set) zs.push_back(numbers(z));
    json zvf = json::array();
    for (const auto& row : report.zero_velocity_fraction) zvf.push_back(numbers(row));
    auto est = [](const IntegralEstimate& e) {
      return json{{"grid_sizes", e.grid_sizes}, {"values", numbers(e.values)}, {"converging", e.converging}};
    };
    doc["conditions"] = json{{"min_eigenvalue", number(report.min_eigenvalue)},
                             {"psd", report.psd},
                             {"zero_set", zs},
                             {"inverse_norm", est(report.inverse_norm)},
                             {"weighted_inverse_norm", est(report.weighted_inverse_norm)},
                             {"zero_velocity_fraction", zvf},
                             {"max_group_velocity", number(data.max_group_velocity())},
                             {"mirror_symmetric", v.mirror_symmetric()},
                             {"warnings", report.warnings}};
    write_json(c.out / "conditions.json", doc);
  }
  for (const auto& w : report.warnings) log(LogLevel::warn, "dispersion: " + w);
  return kOk;
}

int cmd_limits(const Options& opt) {
  const Context c = make_context(opt);
  const auto v = c.config.interaction();
  const auto layout = c.config.reservoir_layout(v);
  const int d = v.dimension();
  const int n2 = 2 * v.components();

  if (layout.half_space) {
    const auto planes = halfspace_planes(c.config);
    const auto prof = halfspace_current(v, layout, planes, c.config.grid.G, true, c.config.ensemble.workers);
    if (c.json_out) {
      json doc = header(c, "limits");
      doc["halfspace"] = profile_json(prof);
      write_json(c.out / "limits.json", doc);
    }
    if (c.csv_out) {
      Csv csv(c.out / "halfspace_limits.csv", {"x_1", "axis", "J_analytic", "c"});
      for (std::size_t i = 0; i < prof.x1.size(); ++i)
        for (int l = 0; l < d; ++l)
          csv.row({std::to_string(prof.x1[i]), std::to_string(l + 1), csv_number(prof.current[i][l]),
                   csv_number(prof.c[i][l])});
    }
    return kOk;
  }

  LimitOptions lo;
  lo.grid = c.config.grid.G;
  lo.window = c.config.grid.window;
  lo.keep_density = c.csv_out;
  lo.workers = c.config.ensemble.workers;
  const auto rep = compute_limits(v, layout, lo);
  if (c.json_out) {
    json doc = header(c, "limits");
    doc["limits"] = limit_json(rep);
    write_json(c.out / "limits.json", doc);
  }
  if (c.csv_out) {
    const FrequencyGrid grid = FrequencyGrid::quadrature(d, rep.grid);
    auto h = axis_header("theta_", d);
    for (int a = 0; a < n2; ++a) h.push_back("q_" + std::to_string(a) + std::to_string(a));
    Csv diag(c.out / "qhat_diagonal.csv", h);
    for (std::size_t p = 0; p < rep.density.size(); ++p) {
      std::vector<std::string> row;
      for (double x : grid.theta(p)) row.push_back(csv_number(x));
      for (int a = 0; a < n2; ++a) row.push_back(csv_number(rep.density[p](a, a).real()));
      diag.row(row);
    }
    auto wh = axis_header("z_", d);
    wh.insert(wh.end(), {"a", "b", "q"});
    Csv win(c.out / "window.csv", wh);
    for (std::size_t i = 0; i < rep.window.size(); ++i)
      for (int a = 0; a < n2; ++a)
        for (int b = 0; b < n2; ++b) {
          std::vector<std::string> row;
          for (long z : rep.window_offsets[i]) row.push_back(std::to_string(z));
          row.push_back(std::to_string(a));
          row.push_back(std::to_string(b));
          row.push_back(csv_number(rep.window[i](a, b).real()));
          win.row(row);
        }
  }
  return kOk;
}

int cmd_sample(const Options& opt) {
  const Context c = make_context(opt);
  const auto v = c.config.interaction();
  auto cfg = c.config;
  if (cfg.ensemble.times.empty()) cfg.ensemble.times = {0.0};
  if (cfg.layout.half_space && cfg.ensemble.planes.empty()) cfg.ensemble.planes = {1};
  const auto ens = cfg.ensemble_config(v);
  const auto samplers = make_samplers(ens);
  double residue = 0.0;
  const FieldState y = initial_field(ens, samplers, opt.index, &residue);
  write_snapshot(y, (c.out / "sample.bin").string());
  if (c.json_out) {
    json doc = header(c, "sample");
    doc["index"] = opt.index;
    doc["seed"] = c.config.ensemble.seed;
    doc["stream_seed"] = derive_seed(c.config.ensemble.seed, opt.index);
    doc["imaginary_residue"] = number(residue);
    doc["snapshot"] = "sample.bin";
    if (!ens.layout.half_space) doc["energy"] = number(energy(y, v));
    write_json(c.out / "sample.json", doc);
  }
  return kOk;
}

int cmd_evolve(const Options& opt) {
  const Context c = make_context(opt);
  if (opt.input.empty()) throw ConfigError("evolve: --input snapshot is required");
  if (!opt.time) throw ConfigError("evolve: --time is required");
  const auto v = c.config.interaction();
  const FieldState y0 = read_snapshot(opt.input);
  if (y0.lattice.dimension() != v.dimension() || y0.components != v.components())
    throw ConfigError("evolve: snapshot does not match the configured crystal");
  FieldState yt;
  json doc = header(c, "evolve");
  if (y0.half_space) {
    yt = evolve_halfspace(y0, v, *opt.time);
  } else {
    yt = Evolver(v, y0.lattice, {}, c.config.ensemble.workers).evolve(y0, *opt.time);
    doc["energy_initial"] = number(energy(y0, v));
    doc["energy_final"] = number(energy(yt, v));
  }
  write_snapshot(yt, (c.out / "evolved.bin").string());
  if (c.json_out) {
    doc["input"] = opt.input;
    doc["time"] = *opt.time;
    doc["half_space"] = y0.half_space;
    doc["snapshot"] = "evolved.bin";
    write_json(c.out / "evolve.json", doc);
  }
  return kOk;
}

int cmd_current(const Options& opt) {
  const Context c = make_context(opt);
  const auto v = c.config.interaction();
  auto ens = c.config.ensemble_config(v);
  const Lattice lat = ens.lattice();
  const int d = v.dimension();
  std::vector<std::pair<int, long>> plane_of;
  ens.observables.clear();
  if (ens.layout.half_space) {
    for (long x1 : c.config.ensemble.planes)
      for (int l = 0; l < d; ++l) {
        ObservableSpec o;
        o.kind = ObservableSpec::Kind::current;
        o.axis = l;
        o.box = junction_box(lat, ens.layout.k, c.config.ensemble.current_half_width);
        o.box.lo[0] = o.box.hi[0] = x1;
        o.name = "J" + std::to_string(l + 1) + "@" + std::to_string(x1);
        ens.observables.push_back(o);
        plane_of.emplace_back(l, x1);
      }
  } else {
    const long w = c.config.ensemble.current_half_width;
    for (int l = 0; l < d; ++l)
      for (long p = -w; p <= w; ++p) {
        ObservableSpec o;
        o.kind = ObservableSpec::Kind::current;
        o.axis = l;
        o.box = junction_box(lat, ens.layout.k, w);
        o.box.lo[l] = o.box.hi[l] = p;
        o.name = "J" + std::to_string(l + 1) + "@" + std::to_string(p);
        ens.observables.push_back(o);
        plane_of.emplace_back(l, p);
      }
  }
  const auto res = run_ensemble(ens);
  if (c.csv_out) {
    Csv csv(c.out / "current.csv", {"t", "axis", "plane", "J", "SE"});
    for (std::size_t t = 0; t < res.times.size(); ++t)
      for (std::size_t o = 0; o < res.observables.size(); ++o) {
        const auto e = res.estimate(t, o);
        csv.row({csv_number(res.times[t]), std::to_string(plane_of[o].first + 1),
                 std::to_string(plane_of[o].second), csv_number(e.mean), csv_number(e.se)});
      }
  }
  if (c.json_out) {
    json doc = header(c, "current");
    doc["samples"] = res.samples;
    doc["horizon"] = number(res.horizon);
    doc["observables"] = ensemble_json(res, {}, {});
    write_json(c.out / "current.json", doc);
  }
  return kOk;
}

namespace {

int simulate_like(const Context& c, const std::string& command, bool halfspace) {
  const auto v = c.config.interaction();
  const auto ens = c.config.ensemble_config(v);
  if (halfspace != ens.layout.half_space)
    throw ConfigError(command + (halfspace ? ": layout.half_space must be true" : ": use 'halfspace' for half-space layouts"));
  const auto res = run_ensemble(ens);
  const auto targets = analytic_targets(ens, c.config.grid.G, c.config.ensemble.workers);
  std::vector<ComparisonReport> verdicts;
  for (std::size_t t = 0; t < res.times.size(); ++t) verdicts.push_back(compare(res, targets, c.config.policy(), t));
  const bool pass = verdicts.back().pass;

  json doc = header(c, command);
  doc["samples"] = res.samples;
  doc["seed"] = ens.seed;
  doc["horizon"] = number(res.horizon);
  doc["max_imaginary_residue"] = number(res.max_imaginary_residue);
  doc["policy"] = json{{"z", c.config.ensemble.z}, {"rel_tol", c.config.ensemble.rel_tol}};
  doc["observables"] = ensemble_json(res, targets, verdicts);
  doc["verdict"] = json{{"evaluated", c.config.ensemble.compare}, {"time", res.times.back()}, {"pass", pass}};

  if (halfspace) {
    const auto prof = halfspace_current(v, ens.layout, c.config.ensemble.planes, c.config.grid.G, true,
                                        c.config.ensemble.workers);
    doc["halfspace"] = profile_json(prof);
    // Growth of tr Q+_t(x, x) in x_1 at the last time.
    json growth = json::array();
    const std::size_t last = res.times.size() - 1;
    for (long x1 : c.config.ensemble.planes) {
      double tr = 0.0, an = 0.0;
      for (std::size_t o = 0; o < res.observables.size(); ++o) {
        const auto& ob = res.observables[o];
        if (ob.kind != ObservableSpec::Kind::covariance || ob.x[0] != x1) continue;
        tr += res.estimate(last, o).mean;
        if (targets[o]) an += *targets[o];
      }
      growth.push_back(json{{"x1", x1}, {"trace_empirical", number(tr)}, {"trace_analytic", number(an)}});
    }
    doc["trace_growth"] = growth;
    if (c.csv_out) {
      Csv csv(c.out / "halfspace.csv", {"x_1", "axis", "J_analytic", "J_empirical", "SE"});
      for (std::size_t i = 0; i < prof.x1.size(); ++i)
        for (int l = 0; l < v.dimension(); ++l) {
          double emp = std::nan(""), se = std::nan("");
          for (std::size_t o = 0; o < res.observables.size(); ++o) {
            const auto& ob = res.observables[o];
            if (ob.kind == ObservableSpec::Kind::current && ob.axis == l && ob.box.lo[0] == prof.x1[i]) {
              emp = res.estimate(last, o).mean;
              se = res.estimate(last, o).se;
            }
          }
          csv.row({std::to_string(prof.x1[i]), std::to_string(l + 1), csv_number(prof.current[i][l]),
                   csv_number(emp), csv_number(se)});
        }
    }
  }

  if (c.json_out) write_json(c.out / (halfspace ? "halfspace.json" : "results.json"), doc);
  if (c.csv_out) {
    Csv csv(c.out / (halfspace ? "halfspace_results.csv" : "results.csv"),
            {"t", "observable", "kind", "estimate", "se", "analytic", "pass"});
    for (std::size_t t = 0; t < res.times.size(); ++t)
      for (std::size_t o = 0; o < res.observables.size(); ++o) {
        const auto e = res.estimate(t, o);
        const auto& ob = res.observables[o];
        const bool functional = ob.kind == ObservableSpec::Kind::functional;
        std::string verdict;
        for (const auto& vd : verdicts[t].verdicts)
          if (vd.name == ob.name) verdict = vd.pass ? "true" : "false";
        csv.row({csv_number(res.times[t]), ob.name, kind_name(ob.kind),
                 csv_number(functional ? e.kurtosis : e.mean), csv_number(functional ? e.kurtosis_se : e.se),
                 functional ? "3" : (targets[o] ? csv_number(*targets[o]) : ""), verdict});
      }
  }
  if (c.config.ensemble.compare && !pass) {
    for (const auto& vd : verdicts.back().verdicts)
      if (!vd.pass)
        log(LogLevel::error, "comparison failed: " + vd.name + " estimate " + csv_number(vd.estimate) +
                                 " analytic " + csv_number(vd.analytic) + " allowed " + csv_number(vd.allowed));
    return kComparison;
  }
  return kOk;
}

}  // namespace

int cmd_simulate(const Options& opt) { return simulate_like(make_context(opt), "simulate", false); }

int cmd_halfspace(const Options& opt) { return simulate_like(make_context(opt), "halfspace", true); }

int cmd_compare(const Options& opt) {
  const Context c = make_context(opt);
  if (opt.input.empty()) throw ConfigError("compare: --input results JSON is required");
  std::ifstream is(opt.input);
  if (!is) throw IoError("compare: cannot open " + opt.input);
  json in;
  try {
    is >> in;
  } catch (const json::exception& e) {
    throw IoError(std::string("compare: malformed results JSON: ") + e.what());
  }
  if (!in.contains("observables")) throw IoError("compare: results JSON has no observables");
  const TolerancePolicy policy = c.config.policy();
  json verdicts = json::array();
  bool pass = true;
  for (const auto& o : in["observables"]) {
    if (!o.contains("times") || o["times"].empty()) continue;
    const auto& last = o["times"].back();
    const bool functional = o.value("kind", "") == "functional";
    double estimate, se, analytic;
    if (functional) {
      if (last["kurtosis"].is_null() || last["kurtosis_se"].is_null()) continue;
      estimate = last["kurtosis"].get<double>();
      se = last["kurtosis_se"].get<double>();
      analytic = 3.0;
    } else {
      if (o["analytic"].is_null() || last["estimate"].is_null()) continue;
      estimate = last["estimate"].get<double>();
      se = last["se"].is_null() ? std::nan("") : last["se"].get<double>();
      analytic = o["analytic"].get<double>();
    }
    const double zse = std::isfinite(se) ? policy.z * se : 0.0;
    const double allowed = functional ? zse : std::max(zse, policy.rel_tol * std::abs(analytic));
    const bool ok = (functional && !std::isfinite(se)) ? false : std::abs(estimate - analytic) <= allowed;
    pass = pass && ok;
    verdicts.push_back(json{{"name", o["name"]},
                            {"t", last["t"]},
                            {"estimate", number(estimate)},
                            {"se", number(se)},
                            {"analytic", number(analytic)},
                            {"allowed", number(allowed)},
                            {"pass", ok}});
  }
  json doc = header(c, "compare");
  doc["input"] = opt.input;
  doc["policy"] = json{{"z", policy.z}, {"rel_tol", policy.rel_tol}};
  doc["verdicts"] = verdicts;
  doc["pass"] = pass;
  write_json(c.out / "comparison.json", doc);
  return pass ? kOk : kComparison;
}

int run(int argc, char** argv) {
  CLI::App app{"crystalflow: harmonic crystals with multi-temperature random initial data"};
  app.require_subcommand(1);
  Options opt;
  auto common = [&opt](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Run configuration file")->required();
    sub->add_option("--out", opt.out, "Output directory (default: [output] directory)");
    sub->add_option("--workers", opt.workers, "Worker threads");
    sub->add_option("--seed", opt.seed, "Master seed, overrides the config");
    sub->add_flag("--override-horizon", opt.override_horizon, "Allow times beyond the validity horizon");
    sub->add_flag("--timestamp,!--no-timestamp", opt.timestamp, "Write null for generated_at with --no-timestamp");
  };
  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
  };
  const Sub subs[] = {
      {"dispersion", "Band table CSV and condition report", cmd_dispersion},
      {"limits", "Limit covariance, currents and kinetic temperature", cmd_limits},
      {"sample", "Draw one spliced initial field as a snapshot", cmd_sample},
      {"evolve", "Evolve a snapshot to time t", cmd_evolve},
      {"current", "Ensemble plane currents as CSV", cmd_current},
      {"simulate", "Run the ensemble and compare with the limits", cmd_simulate},
      {"halfspace", "Half-space ensemble and current profile", cmd_halfspace},
      {"compare", "Re-evaluate verdicts of a results JSON", cmd_compare},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> handlers;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    common(sub);
    if (std::string(s.name) == "sample") sub->add_option("--index", opt.index, "Sample index");
    if (std::string(s.name) == "evolve") {
      sub->add_option("--input", opt.input, "Input snapshot")->required();
      sub->add_option("--time", opt.time, "Evolution time")->required();
    }
    if (std::string(s.name) == "compare")
      sub->add_option("--input", opt.input, "Results JSON from simulate or halfspace")->required();
    handlers.emplace_back(sub, s.fn);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  try {
    for (const auto& [sub, fn] : handlers)
      if (sub->parsed()) return fn(opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kConfig;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kConfig;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace crystalflow::cli
