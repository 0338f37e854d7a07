#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "ranet/rng.hpp"
#include "ranet/simd.hpp"

using ranet::Rng;
namespace simd = ranet::simd;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng, float lo = -2.0f, float hi = 2.0f) {
  std::vector<float> v(n);
  for (float& x : v) x = rng.uniform(lo, hi);
  return v;
}

// Lengths straddling the 8-lane and 16-lane unroll boundaries.
const std::size_t kLengths[] = {1, 2, 7, 8, 9, 15, 16, 17, 31, 40, 257, 1000};

}  // namespace

TEST_CASE("scalar microkernels match plain loops") {
  const auto& S = simd::scalar();
  Rng rng(7);
  auto a = random_vec(17, rng), b = random_vec(17, rng);
  float dot = 0.0f, sum = 0.0f, mx = a[0];
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    sum += a[i];
    mx = std::max(mx, a[i]);
  }
  CHECK(S.dot(a.data(), b.data(), a.size()) == doctest::Approx(dot).epsilon(1e-6));
  CHECK(S.sum(a.data(), a.size()) == doctest::Approx(sum).epsilon(1e-6));
  CHECK(S.max(a.data(), a.size()) == mx);
}

TEST_CASE("avx2 table matches scalar table") {
  if (!simd::avx2_available()) {
    MESSAGE("avx2 not available on this host; skipping equivalence checks");
    return;
  }
  const auto& A = simd::avx2();
  const auto& S = simd::scalar();
  Rng rng(11);

  for (std::size_t n : kLengths) {
    CAPTURE(n);
    auto a = random_vec(n, rng);
    auto b = random_vec(n, rng);

    SUBCASE("") {}  // keep one loop body; CAPTURE covers the length

    // Bit-exact kernels: lane math identical to the scalar loop.
    {
      std::vector<float> out_s(n), out_a(n);
      S.add(out_s.data(), a.data(), b.data(), n);
      A.add(out_a.data(), a.data(), b.data(), n);
      CHECK(out_s == out_a);

      S.mul(out_s.data(), a.data(), b.data(), n);
      A.mul(out_a.data(), a.data(), b.data(), n);
      CHECK(out_s == out_a);

      S.relu(out_s.data(), a.data(), n);
      A.relu(out_a.data(), a.data(), n);
      CHECK(out_s == out_a);

      CHECK(S.max(a.data(), n) == A.max(a.data(), n));

      std::vector<float> dx_s(n, 0.5f), dx_a(n, 0.5f);
      S.relu_grad_acc(dx_s.data(), a.data(), b.data(), n);
      A.relu_grad_acc(dx_a.data(), a.data(), b.data(), n);
      CHECK(dx_s == dx_a);
    }

    // Reductions and FMA kernels: reassociation/fused rounding only.
    {
      const float ds = S.dot(a.data(), b.data(), n);
      const float da = A.dot(a.data(), b.data(), n);
      CHECK(std::fabs(ds - da) <= 1e-5f * (1.0f + std::fabs(ds)) * static_cast<float>(std::sqrt(double(n))));

      const float ss = S.sum(a.data(), n);
      const float sa = A.sum(a.data(), n);
      CHECK(std::fabs(ss - sa) <= 1e-5f * (1.0f + std::fabs(ss)) * static_cast<float>(std::sqrt(double(n))));

      std::vector<float> y_s = b, y_a = b;
      S.axpy(y_s.data(), 1.7f, a.data(), n);
      A.axpy(y_a.data(), 1.7f, a.data(), n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(y_s[i] == doctest::Approx(y_a[i]).epsilon(1e-6));

      std::vector<float> o_s(n), o_a(n);
      S.axb(o_s.data(), a.data(), 0.3f, -1.1f, n);
      A.axb(o_a.data(), a.data(), 0.3f, -1.1f, n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(o_s[i] == doctest::Approx(o_a[i]).epsilon(1e-6));

      std::vector<float> f_s(n, 0.25f), f_a(n, 0.25f);
      S.fma_acc(f_s.data(), a.data(), b.data(), n);
      A.fma_acc(f_a.data(), a.data(), b.data(), n);
      for (std::size_t i = 0; i < n; ++i)
        CHECK(f_s[i] == doctest::Approx(f_a[i]).epsilon(1e-6));
    }
  }
}

TEST_CASE("zero-length reductions are defined") {
  const auto& S = simd::scalar();
  CHECK(S.dot(nullptr, nullptr, 0) == 0.0f);
  CHECK(S.sum(nullptr, 0) == 0.0f);
  if (simd::avx2_available()) {
    const auto& A = simd::avx2();
    CHECK(A.dot(nullptr, nullptr, 0) == 0.0f);
    CHECK(A.sum(nullptr, 0) == 0.0f);
  }
}

TEST_CASE("active table is one of the registered backends") {
  const auto& K = simd::active();
  const bool known = (&K == &simd::scalar()) || (simd::avx2_available() && &K == &simd::avx2());
  CHECK(known);
  MESSAGE("active simd backend: ", std::string(K.name));
}
