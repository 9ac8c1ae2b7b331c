#include "crystalflow/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace crystalflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& xs, const char* sep = ", ") {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << sep;
    if constexpr (std::is_floating_point_v<T>)
      os << fmt(xs[i]);
    else
      os << xs[i];
  }
  return os.str();
}

struct Entry {
  std::string value;
  int line = 0;
  bool used = false;
};

class Document {
 public:
  explicit Document(const std::string& text) {
    static const std::set<std::string> sections = {"model", "layout", "grid", "ensemble", "output"};
    std::istringstream is(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(is, raw)) {
      ++line;
      const auto hash = raw.find('#');
      std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(where(line) + "malformed section header");
        section = trim(s.substr(1, s.size() - 2));
        if (!sections.count(section)) throw ConfigError(where(line) + "unknown section [" + section + "]");
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError(where(line) + "expected key = value");
      if (section.empty()) throw ConfigError(where(line) + "key outside a section");
      const std::string key = trim(s.substr(0, eq));
      if (key.empty()) throw ConfigError(where(line) + "empty key");
      const std::string full = section + "." + key;
      if (entries_.count(full)) throw ConfigError(where(line) + "duplicate key " + full);
      entries_[full] = {trim(s.substr(eq + 1)), line, false};
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  const std::string* get(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second.value;
  }

  /// Keys of a section starting with `prefix`, e.g. layout.T+-.
  std::vector<std::string> with_prefix(const std::string& section, const std::string& prefix) const {
    std::vector<std::string> out;
    const std::string p = section + "." + prefix;
    for (const auto& [k, e] : entries_)
      if (k.compare(0, p.size(), p) == 0) out.push_back(k);
    return out;
  }

  void reject_unused() const {
    for (const auto& [k, e] : entries_)
      if (!e.used) throw ConfigError(where(e.line) + "unknown key " + k);
  }

  int line_of(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
  }

 private:
  static std::string where(int line) { return "config line " + std::to_string(line) + ": "; }
  std::map<std::string, Entry> entries_;
};

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key " + key + ": " + what);
}

double to_double(const std::string& key, const std::string& s) {
  double x = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(x))
    bad(key, "expected a finite number, got '" + s + "'");
  return x;
}

long to_long(const std::string& key, const std::string& s) {
  long x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad(key, "expected an integer, got '" + s + "'");
  return x;
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
  std::uint64_t x = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    bad(key, "expected an unsigned 64-bit integer, got '" + s + "'");
  return x;
}

std::size_t to_size(const std::string& key, const std::string& s) {
  const long x = to_long(key, s);
  if (x < 0) bad(key, "must be >= 0");
  return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& key, const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  bad(key, "expected true or false, got '" + s + "'");
}

template <class F>
auto list(const std::string& key, const std::string& s, F conv) {
  std::vector<decltype(conv(key, s))> out;
  for (const auto& w : split(s, ',')) out.push_back(conv(key, w));
  return out;
}

std::vector<StencilEntry> parse_stencil(const std::string& key, const std::string& s, int d, int n) {
  std::vector<StencilEntry> out;
  for (const auto& item : split(s, ';')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) bad(key, "stencil entries are 'offset : block'");
    StencilEntry e;
    for (const auto& c : split(item.substr(0, colon), ',')) e.offset.push_back(static_cast<int>(to_long(key, c)));
    if (static_cast<int>(e.offset.size()) != d) bad(key, "stencil offset rank differs from dimension");
    const auto vals = words(item.substr(colon + 1));
    if (static_cast<int>(vals.size()) != n * n) bad(key, "stencil block needs n*n entries");
    e.block.resize(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) e.block(r, c) = to_double(key, vals[r * n + c]);
    out.push_back(std::move(e));
  }
  return out;
}

std::string stencil_text(const std::vector<StencilEntry>& st) {
  std::ostringstream os;
  for (std::size_t i = 0; i < st.size(); ++i) {
    if (i) os << "; ";
    os << join(st[i].offset) << " :";
    for (int r = 0; r < st[i].block.rows(); ++r)
      for (int c = 0; c < st[i].block.cols(); ++c) os << ' ' << fmt(st[i].block(r, c));
  }
  return os.str();
}

bool valid_pattern(const std::string& p, int k) {
  if (static_cast<int>(p.size()) != k) return false;
  return std::all_of(p.begin(), p.end(), [](char c) { return c == '+' || c == '-'; });
}

}  // namespace

bool ModelConfig::operator==(const ModelConfig& o) const {
  if (kind != o.kind || dimension != o.dimension || components != o.components || kappa != o.kappa ||
      mass != o.mass || stencil.size() != o.stencil.size())
    return false;
  for (std::size_t i = 0; i < stencil.size(); ++i)
    if (stencil[i].offset != o.stencil[i].offset || stencil[i].block != o.stencil[i].block) return false;
  return true;
}

bool RunConfig::operator==(const RunConfig& o) const {
  return model == o.model && layout == o.layout && grid == o.grid && ensemble == o.ensemble &&
         output == o.output;
}

RunConfig RunConfig::parse(const std::string& text) {
  Document doc(text);
  RunConfig c;
  const std::string* s;

  if ((s = doc.get("model.kind"))) c.model.kind = *s;
  if ((s = doc.get("model.dimension"))) c.model.dimension = static_cast<int>(to_long("model.dimension", *s));
  if ((s = doc.get("model.components"))) c.model.components = static_cast<int>(to_long("model.components", *s));
  if ((s = doc.get("model.kappa"))) c.model.kappa = list("model.kappa", *s, to_double);
  if ((s = doc.get("model.mass"))) c.model.mass = list("model.mass", *s, to_double);
  if ((s = doc.get("model.stencil")))
    c.model.stencil = parse_stencil("model.stencil", *s, c.model.dimension, c.model.components);

  if ((s = doc.get("layout.k"))) c.layout.k = static_cast<int>(to_long("layout.k", *s));
  if (c.layout.k < 1 || c.layout.k > c.model.dimension) bad("layout.k", "must lie in 1..dimension");
  for (const auto& key : doc.with_prefix("layout", "T")) {
    const std::string pattern = key.substr(std::string("layout.T").size());
    if (!valid_pattern(pattern, c.layout.k)) bad(key, "temperature keys are T<pattern> with k signs");
    c.layout.temperatures[pattern] = to_double(key, *doc.get(key));
  }
  for (const auto& key : doc.with_prefix("layout", "S")) {
    const std::string pattern = key.substr(std::string("layout.S").size());
    if (!valid_pattern(pattern, c.layout.k)) bad(key, "spectrum keys are S<pattern> with k signs");
    c.layout.spectra[pattern] = *doc.get(key);
  }
  if ((s = doc.get("layout.half_width"))) c.layout.half_width = to_long("layout.half_width", *s);
  if ((s = doc.get("layout.profile"))) {
    if (*s == "ramp")
      c.layout.profile = SpliceProfile::ramp;
    else if (*s == "step")
      c.layout.profile = SpliceProfile::step;
    else
      bad("layout.profile", "expected ramp or step");
  }
  if ((s = doc.get("layout.half_space"))) c.layout.half_space = to_bool("layout.half_space", *s);

  if ((s = doc.get("grid.G"))) c.grid.G = to_size("grid.G", *s);
  if ((s = doc.get("grid.window"))) c.grid.window = to_long("grid.window", *s);

  auto& e = c.ensemble;
  if ((s = doc.get("ensemble.samples"))) e.samples = to_size("ensemble.samples", *s);
  if ((s = doc.get("ensemble.seed"))) e.seed = to_u64("ensemble.seed", *s);
  if ((s = doc.get("ensemble.shape"))) e.shape = list("ensemble.shape", *s, to_size);
  if ((s = doc.get("ensemble.times"))) e.times = list("ensemble.times", *s, to_double);
  if ((s = doc.get("ensemble.workers"))) e.workers = to_size("ensemble.workers", *s);
  if ((s = doc.get("ensemble.current_half_width")))
    e.current_half_width = to_long("ensemble.current_half_width", *s);
  if ((s = doc.get("ensemble.kinetic_half_width")))
    e.kinetic_half_width = to_long("ensemble.kinetic_half_width", *s);
  if ((s = doc.get("ensemble.covariance_radius")))
    e.covariance_radius = to_long("ensemble.covariance_radius", *s);
  if ((s = doc.get("ensemble.covariance_half_width")))
    e.covariance_half_width = to_long("ensemble.covariance_half_width", *s);
  if ((s = doc.get("ensemble.functional"))) e.functional = to_bool("ensemble.functional", *s);
  if ((s = doc.get("ensemble.planes"))) e.planes = list("ensemble.planes", *s, to_long);
  if ((s = doc.get("ensemble.override_horizon")))
    e.override_horizon = to_bool("ensemble.override_horizon", *s);
  if ((s = doc.get("ensemble.compare"))) e.compare = to_bool("ensemble.compare", *s);
  if ((s = doc.get("ensemble.z"))) e.z = to_double("ensemble.z", *s);
  if ((s = doc.get("ensemble.rel_tol"))) e.rel_tol = to_double("ensemble.rel_tol", *s);

  if ((s = doc.get("output.directory"))) c.output.directory = *s;
  if ((s = doc.get("output.formats"))) c.output.formats = split(*s, ',');

  doc.reject_unused();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return parse(os.str());
}

void RunConfig::validate() const {
  if (model.kind != "nearest_neighbor" && model.kind != "stencil")
    bad("model.kind", "expected nearest_neighbor or stencil");
  if (model.dimension < 1 || model.dimension > 8) bad("model.dimension", "must lie in 1..8");
  if (model.components < 1 || model.components > 64) bad("model.components", "must lie in 1..64");
  if (model.kind == "nearest_neighbor") {
    if (model.kappa.size() != 1 && static_cast<int>(model.kappa.size()) != model.components)
      bad("model.kappa", "expects 1 or n values");
    if (model.mass.size() != 1 && static_cast<int>(model.mass.size()) != model.components)
      bad("model.mass", "expects 1 or n values");
    if (!model.stencil.empty()) bad("model.stencil", "only valid with kind = stencil");
  } else if (model.stencil.empty()) {
    bad("model.stencil", "required with kind = stencil");
  }
  if (layout.k < 1 || layout.k > model.dimension) bad("layout.k", "must lie in 1..dimension");
  if (layout.half_width < 0) bad("layout.half_width", "must be >= 0");
  for (const auto& r : all_reservoirs(layout.k)) {
    const bool member = !layout.half_space || r.n(0) == 2;
    const std::string key = "layout.T" + r.pattern();
    if (member && !layout.temperatures.count(r.pattern())) bad(key, "missing temperature");
    if (!member && layout.temperatures.count(r.pattern()))
      bad(key, "half-space layouts only carry patterns with a leading '+'");
  }
  for (const auto& [p, t] : layout.temperatures)
    if (!(t > 0.0)) bad("layout.T" + p, "temperature must be positive");
  for (const auto& [p, sp] : layout.spectra)
    if (!layout.temperatures.count(p)) bad("layout.S" + p, "spectrum given for a non-member reservoir");
  if (grid.G < 4) bad("grid.G", "must be >= 4");
  if (grid.window < 0) bad("grid.window", "must be >= 0");
  if (ensemble.samples < 1) bad("ensemble.samples", "must be >= 1");
  if (ensemble.workers < 1) bad("ensemble.workers", "must be >= 1");
  if (!ensemble.shape.empty() && static_cast<int>(ensemble.shape.size()) != model.dimension)
    bad("ensemble.shape", "needs one extent per axis");
  for (double t : ensemble.times)
    if (t < 0.0) bad("ensemble.times", "times must be >= 0");
  for (long p : ensemble.planes)
    if (p < 0) bad("ensemble.planes", "planes must be >= 0");
  if (!(ensemble.z > 0.0)) bad("ensemble.z", "must be positive");
  if (!(ensemble.rel_tol >= 0.0)) bad("ensemble.rel_tol", "must be >= 0");
  for (const auto& f : output.formats)
    if (f != "json" && f != "csv") bad("output.formats", "expected json and/or csv");
}

std::string RunConfig::to_string() const {
  std::ostringstream os;
  os << "[model]\n";
  os << "kind = " << model.kind << "\n";
  os << "dimension = " << model.dimension << "\n";
  os << "components = " << model.components << "\n";
  if (model.kind == "nearest_neighbor") {
    os << "kappa = " << join(model.kappa) << "\n";
    os << "mass = " << join(model.mass) << "\n";
  } else {
    os << "stencil = " << stencil_text(model.stencil) << "\n";
  }
  os << "\n[layout]\n";
  os << "k = " << layout.k << "\n";
  for (const auto& [p, t] : layout.temperatures) os << "T" << p << " = " << fmt(t) << "\n";
  for (const auto& [p, s] : layout.spectra) os << "S" << p << " = " << s << "\n";
  os << "half_width = " << layout.half_width << "\n";
  os << "profile = " << (layout.profile == SpliceProfile::ramp ? "ramp" : "step") << "\n";
  os << "half_space = " << (layout.half_space ? "true" : "false") << "\n";
  os << "\n[grid]\n";
  os << "G = " << grid.G << "\n";
  os << "window = " << grid.window << "\n";
  const auto& e = ensemble;
  os << "\n[ensemble]\n";
  os << "samples = " << e.samples << "\n";
  os << "seed = " << e.seed << "\n";
  if (!e.shape.empty()) os << "shape = " << join(e.shape) << "\n";
  if (!e.times.empty()) os << "times = " << join(e.times) << "\n";
  os << "workers = " << e.workers << "\n";
  os << "current_half_width = " << e.current_half_width << "\n";
  os << "kinetic_half_width = " << e.kinetic_half_width << "\n";
  os << "covariance_radius = " << e.covariance_radius << "\n";
  os << "covariance_half_width = " << e.covariance_half_width << "\n";
  os << "functional = " << (e.functional ? "true" : "false") << "\n";
  if (!e.planes.empty()) os << "planes = " << join(e.planes) << "\n";
  os << "override_horizon = " << (e.override_horizon ? "true" : "false") << "\n";
  os << "compare = " << (e.compare ? "true" : "false") << "\n";
  os << "z = " << fmt(e.z) << "\n";
  os << "rel_tol = " << fmt(e.rel_tol) << "\n";
  os << "\n[output]\n";
  os << "directory = " << output.directory << "\n";
  os << "formats = " << join(output.formats) << "\n";
  return os.str();
}

InteractionMatrix RunConfig::interaction() const {
  if (model.kind == "stencil") return InteractionMatrix(model.dimension, model.components, model.stencil);
  auto widen = [this](const std::vector<double>& xs) {
    return xs.size() == 1 ? std::vector<double>(model.components, xs[0]) : xs;
  };
  const auto kappa = widen(model.kappa);
  const auto mass = widen(model.mass);
  return nearest_neighbor_crystal(model.dimension, model.components, kappa, mass);
}

GaussianMeasureSpec parse_spectrum(const std::string& text, const InteractionMatrix& v,
                                   double temperature, const std::string& key) {
  const auto w = words(text);
  if (w.empty() || w[0] == "gibbs") {
    if (w.size() > 1) bad(key, "gibbs takes no parameters");
    return gibbs_spec(v, temperature);
  }
  const int d = v.dimension();
  const int n = v.components();
  if (w[0] == "triangular") {
    if (w.size() != 4) bad(key, "expected 'triangular N0 scale_u scale_v'");
    TriangularCorrelation c{static_cast<int>(to_long(key, w[1]))};
    if (c.n0 < 1) bad(key, "N0 must be >= 1");
    return product_spec(d, n, example_correlation(c), to_double(key, w[2]), to_double(key, w[3]), text);
  }
  if (w[0] == "geometric") {
    if (w.size() != 6) bad(key, "expected 'geometric a b gamma scale_u scale_v'");
    GeometricCorrelation c{to_double(key, w[1]), to_double(key, w[2]), to_double(key, w[3])};
    try {
      return product_spec(d, n, example_correlation(c), to_double(key, w[4]), to_double(key, w[5]), text);
    } catch (const ConfigError& err) {
      bad(key, err.what());
    }
  }
  bad(key, "unknown spectrum '" + w[0] + "'");
}

ReservoirLayout RunConfig::reservoir_layout(const InteractionMatrix& v) const {
  ReservoirLayout out;
  out.k = layout.k;
  out.half_space = layout.half_space;
  out.half_width = layout.half_width;
  out.profile = layout.profile;
  const std::size_t slots = std::size_t{1} << layout.k;
  out.temperatures.assign(slots, std::numeric_limits<double>::quiet_NaN());
  out.spectra.resize(slots);
  for (const auto& r : out.members()) {
    const double t = layout.temperatures.at(r.pattern());
    out.temperatures[r.mask] = t;
    const auto it = layout.spectra.find(r.pattern());
    out.spectra[r.mask] = parse_spectrum(it == layout.spectra.end() ? "gibbs" : it->second, v, t,
                                         "layout.S" + r.pattern());
  }
  out.validate();
  return out;
}

ObservableOptions RunConfig::observable_options() const {
  ObservableOptions o;
  o.current_half_width = ensemble.current_half_width;
  o.kinetic_half_width = ensemble.kinetic_half_width;
  o.covariance_radius = ensemble.covariance_radius;
  o.covariance_half_width = ensemble.covariance_half_width;
  o.functional = ensemble.functional;
  o.halfspace_planes = ensemble.planes;
  return o;
}

EnsembleConfig RunConfig::ensemble_config(const InteractionMatrix& v) const {
  if (ensemble.shape.empty()) bad("ensemble.shape", "required for ensemble runs");
  if (ensemble.times.empty()) bad("ensemble.times", "required for ensemble runs");
  if (layout.half_space && ensemble.planes.empty()) bad("ensemble.planes", "required in half-space mode");
  EnsembleConfig c;
  c.interaction = v;
  c.layout = reservoir_layout(v);
  c.shape = ensemble.shape;
  c.samples = ensemble.samples;
  c.seed = ensemble.seed;
  c.times = ensemble.times;
  c.workers = ensemble.workers;
  c.override_horizon = ensemble.override_horizon;
  c.observables = standard_observables(c, observable_options());
  return c;
}

}  // namespace crystalflow
