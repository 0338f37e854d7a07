#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ranet/rng.hpp"
#include "ranet/tensor.hpp"

namespace test_util {

inline ranet::Tensor random_tensor(std::vector<int> shape, ranet::Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  ranet::Tensor t(std::move(shape));
  for (float& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Random tensor with no element within `margin` of zero (keeps finite
// differences away from the relu kink).
inline ranet::Tensor random_tensor_off_zero(std::vector<int> shape, ranet::Rng& rng, float margin) {
  ranet::Tensor t = random_tensor(std::move(shape), rng);
  for (float& v : t.data)
    if (std::fabs(v) < margin) v = v < 0.0f ? v - margin : v + margin;
  return t;
}

inline float max_abs_diff(const ranet::Tensor& a, const ranet::Tensor& b) {
  float m = 0.0f;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

inline bool bit_equal(const ranet::Tensor& a, const ranet::Tensor& b) {
  if (a.shape != b.shape) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

}  // namespace test_util
