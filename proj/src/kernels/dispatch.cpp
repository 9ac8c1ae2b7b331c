#include <cstdlib>
#include <string>

#include "crystalflow/core.hpp"
#include "crystalflow/kernels.hpp"

namespace crystalflow::kernels {

#ifdef CRYSTALFLOW_HAVE_AVX2
namespace avx2 {
const KernelTable& table();
}
#endif

const KernelTable* avx2_table() {
#if defined(CRYSTALFLOW_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2::table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& chosen = []() -> const KernelTable& {
    const char* env = std::getenv("CRYSTALFLOW_SIMD");
    const std::string request = env ? env : "auto";
    if (request == "scalar") return scalar_table();
    if (const KernelTable* t = avx2_table()) return *t;
    if (request == "avx2") log(LogLevel::warn, "AVX2 kernels unavailable, using scalar");
    return scalar_table();
  }();
  return chosen;
}

}  // namespace crystalflow::kernels
