#include "doctest.h"

#include <cmath>

#include "crystalflow/config.hpp"

using namespace crystalflow;

namespace {

const char* kChain = R"(
[model]
kind = nearest_neighbor
dimension = 1
kappa = 1.25
mass = 0.1

[layout]
k = 1
T- = 1
T+ = 2.5   # hot side
half_width = 3
profile = step

[grid]
G = 512
window = 3

[ensemble]
samples = 16
seed = 18446744073709551615
shape = 128
times = 0, 12.5, 25
workers = 2
z = 3.5
rel_tol = 0.1

[output]
directory = out/x
formats = json
)";

const char* kStencil = R"(
[model]
kind = stencil
dimension = 2
components = 2
stencil = 0,0 : 6 0.5 0.5 5; 1,0 : -1 0.3 -0.2 -0.8; -1,0 : -1 -0.2 0.3 -0.8; 0,1 : -0.7 0 0 -0.9; 0,-1 : -0.7 0 0 -0.9

[layout]
k = 2
T-- = 1
T+- = 2
T-+ = 3
T++ = 0.1234567890123456789
S-- = triangular 3 1.0 0.5
S++ = geometric 1 0.3 0.5 2 1
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  return s.replace(pos, from.size(), to);
}

void check_error_names(const std::string& text, const std::string& fragment) {
  try {
    RunConfig::parse(text);
    FAIL("expected ConfigError mentioning " << fragment);
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CAPTURE(what);
    CHECK(what.find(fragment) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("parse reads every section") {
  const auto c = RunConfig::parse(kChain);
  CHECK(c.model.kappa == std::vector<double>{1.25});
  CHECK(c.layout.temperatures.at("+") == 2.5);
  CHECK(c.layout.profile == SpliceProfile::step);
  CHECK(c.grid.G == 512);
  CHECK(c.ensemble.seed == 18446744073709551615ull);
  CHECK(c.ensemble.times == std::vector<double>{0.0, 12.5, 25.0});
  CHECK(c.ensemble.workers == 2);
  CHECK(c.policy().z == 3.5);
  CHECK(c.output.formats == std::vector<std::string>{"json"});
  const auto v = c.interaction();
  const std::vector<double> th{0.4};
  CHECK(v.symbol(th)(0, 0).real() == doctest::Approx(0.01 + 2.5 * (1.0 - std::cos(0.4))));
  const auto layout = c.reservoir_layout(v);
  CHECK(layout.temperatures[1] == 2.5);
  CHECK(layout.half_width == 3);
  const auto e = c.ensemble_config(v);
  CHECK(e.samples == 16);
  CHECK(e.shape == std::vector<std::size_t>{128});
  CHECK_FALSE(e.observables.empty());
}

TEST_CASE("canonical text round-trips losslessly") {
  for (const char* text : {kChain, kStencil}) {
    const auto c = RunConfig::parse(text);
    const auto again = RunConfig::parse(c.to_string());
    CHECK(again == c);
    CHECK(again.to_string() == c.to_string());
  }
  const auto s = RunConfig::parse(kStencil);
  CHECK(s.layout.temperatures.at("++") == 0.1234567890123456789);
  CHECK(s.model.stencil.size() == 5);
}

TEST_CASE("stencil and spectrum descriptors build the expected objects") {
  const auto c = RunConfig::parse(kStencil);
  const auto v = c.interaction();
  CHECK(v.components() == 2);
  CHECK_FALSE(v.diagonal());
  const auto layout = c.reservoir_layout(v);
  // mask 0 is "--" (triangular), mask 3 is "++" (geometric), the rest Gibbs.
  CHECK_FALSE(layout.spectra[0].gibbs_temperature);
  CHECK(layout.spectra[1].gibbs_temperature);
  CHECK_FALSE(layout.spectra[3].gibbs_temperature);
  const std::vector<double> th{0.3, -0.7};
  const auto f = example_correlation(TriangularCorrelation{3});
  CHECK(layout.spectra[0](th)(0, 0).real() == doctest::Approx(1.0 * f(0.3) * f(-0.7)));
  CHECK(layout.spectra[0](th)(2, 2).real() == doctest::Approx(0.5 * f(0.3) * f(-0.7)));
  CHECK_THROWS_AS(parse_spectrum("geometric 0.1 0.3 0.5 1 1", v, 1.0, "layout.S++"), ConfigError);
  CHECK_THROWS_AS(parse_spectrum("lorentzian 2", v, 1.0, "layout.S++"), ConfigError);
}

TEST_CASE("errors name the offending key or line") {
  check_error_names(replace(kChain, "mass = 0.1", "mass = 0.1\nmas = 2"), "model.mas");
  check_error_names(replace(kChain, "[grid]", "[grids]"), "grids");
  check_error_names(replace(kChain, "G = 512", "G = 512\nG = 256"), "duplicate key grid.G");
  check_error_names(replace(kChain, "G = 512", "G = lots"), "grid.G");
  check_error_names(replace(kChain, "T- = 1", "T- = -1"), "layout.T-");
  check_error_names(replace(kChain, "T- = 1", ""), "layout.T-");
  check_error_names(replace(kChain, "k = 1", "k = 2"), "layout.k");
  check_error_names(replace(kChain, "k = 1", "k = 0"), "layout.k");
  check_error_names(replace(kChain, "profile = step", "profile = smooth"), "layout.profile");
  check_error_names(replace(kChain, "shape = 128", "shape = 128, 64"), "ensemble.shape");
  check_error_names(replace(kChain, "formats = json", "formats = xml"), "output.formats");
  check_error_names(replace(kChain, "times = 0, 12.5, 25", "times = 0, -1"), "ensemble.times");
  check_error_names(replace(kChain, "kind = nearest_neighbor", "kind = stencil"), "model.stencil");
  check_error_names(replace(kStencil, "0,-1 : -0.7 0 0 -0.9", "0,-1 : -0.7 0"), "model.stencil");
  check_error_names(std::string("dimension = 1\n") + kChain, "line 1");
  check_error_names(replace(kChain, "window = 3", "window 3"), "line");
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/crystalflow.ini"), ConfigError);
}

TEST_CASE("half-space layouts carry only '+' leading patterns") {
  const std::string half = R"(
[model]
dimension = 2
[layout]
k = 2
half_space = true
T+- = 1
T++ = 2
[ensemble]
shape = 64, 64
planes = 0, 1, 4
)";
  const auto c = RunConfig::parse(half);
  CHECK(c.layout.half_space);
  const auto layout = c.reservoir_layout(c.interaction());
  CHECK(layout.members().size() == 2);
  CHECK(c.ensemble.planes == std::vector<long>{0, 1, 4});
  check_error_names(replace(half, "T++ = 2", "T++ = 2\nT-+ = 3"), "layout.T-+");
}
