#pragma once

#include <cstddef>

namespace ranet::simd {

// Microkernel table backing the tensor kernels. Every entry has a scalar
// reference implementation and, on x86-64, an AVX2 variant selected at
// runtime. The two are equivalence-tested against each other; reductions
// (dot/sum) may differ from the scalar path by reassociation rounding only.
struct Kernels {
  const char* name;

  // Reductions. n == 0 yields 0 for dot/sum; max requires n >= 1.
  float (*dot)(const float* a, const float* b, std::size_t n);
  float (*sum)(const float* x, std::size_t n);
  float (*max)(const float* x, std::size_t n);

  // Elementwise maps, out may alias inputs.
  void (*add)(float* out, const float* a, const float* b, std::size_t n);
  void (*mul)(float* out, const float* a, const float* b, std::size_t n);
  void (*axb)(float* out, const float* x, float a, float b, std::size_t n);  // out = a*x + b
  void (*relu)(float* out, const float* x, std::size_t n);

  // Accumulating updates.
  void (*axpy)(float* y, float a, const float* x, std::size_t n);                       // y += a*x
  void (*fma_acc)(float* out, const float* x, const float* y, std::size_t n);           // out += x*y
  void (*relu_grad_acc)(float* dx, const float* x, const float* dy, std::size_t n);     // dx += x>0 ? dy : 0
};

const Kernels& scalar();

bool avx2_available();       // compiled in and supported by this CPU
const Kernels& avx2();       // valid only when avx2_available()

// Preferred table for this process. Honors RANET_SIMD={auto,scalar,avx2};
// the choice is made once and cached.
const Kernels& active();

}  // namespace ranet::simd
