#include "ranet/simd.hpp"

#include <cstdlib>
#include <cstring>

namespace ranet::simd {

bool avx2_available() {
#if defined(RANET_BUILD_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Kernels& choose() {
  const char* env = std::getenv("RANET_SIMD");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return scalar();
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return avx2();
  }
  if (avx2_available()) return avx2();
  return scalar();
}

}  // namespace

const Kernels& active() {
  static const Kernels& table = choose();
  return table;
}

}  // namespace ranet::simd
