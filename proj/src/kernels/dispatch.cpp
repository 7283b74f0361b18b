#include <cstdlib>
#include <cstring>

#include "variants.hpp"

namespace braim::kernels {

const Table& scalar() { return detail::kScalarTable; }

const Table* avx2() {
#if defined(BRAIM_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const Table& active() {
  static const Table* chosen = [] {
    const char* env = std::getenv("BRAIM_KERNELS");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar();
    const Table* t = avx2();
    return t != nullptr ? t : &scalar();
  }();
  return *chosen;
}

}  // namespace braim::kernels
