#include "crystalflow/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

#include "crystalflow/core.hpp"

namespace crystalflow {

namespace {

using Key = std::tuple<std::vector<std::size_t>, std::size_t, int>;

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans live for the whole process.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

std::map<Key, fftw_plan>& plan_cache() {
  static std::map<Key, fftw_plan> cache;
  return cache;
}

}  // namespace

FftPlan::FftPlan(const std::vector<std::size_t>& shape, std::size_t components, int sign)
    : components_(components) {
  if (shape.empty() || components == 0) throw ConfigError("fft: empty shape");
  sites_ = 1;
  std::vector<int> n;
  for (auto s : shape) {
    sites_ *= s;
    n.push_back(static_cast<int>(s));
  }
  std::lock_guard lock(plan_mutex());
  auto& cache = plan_cache();
  const Key key{shape, components, sign};
  auto it = cache.find(key);
  if (it == cache.end()) {
    std::vector<std::complex<double>> probe(sites_ * components);
    auto* buf = reinterpret_cast<fftw_complex*>(probe.data());
    const int stride = static_cast<int>(components);
    fftw_plan p = fftw_plan_many_dft(static_cast<int>(n.size()), n.data(), stride, buf, nullptr,
                                     stride, 1, buf, nullptr, stride, 1,
                                     sign > 0 ? FFTW_BACKWARD : FFTW_FORWARD,
                                     FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw Error("fft: planning failed");
    it = cache.emplace(key, p).first;
  }
  plan_ = it->second;
}

void FftPlan::execute(std::complex<double>* data) const {
  auto* buf = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(static_cast<fftw_plan>(plan_), buf, buf);
}

}  // namespace crystalflow
