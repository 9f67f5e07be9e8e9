#include <tuple>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "disent/rng.hpp"
#include "disent/simd/kernels.hpp"

using namespace disent;

namespace {

std::vector<float> random_floats(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform() * 2.0 - 1.0);
  return v;
}

double max_rel_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(1.0, std::abs(static_cast<double>(a[i])));
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]) / scale);
  }
  return worst;
}

// Plain triple loop in double, independent of both kernel tables.
std::vector<float> naive_gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                              float alpha, const std::vector<float>& a, const std::vector<float>& b,
                              float beta, std::vector<float> c) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? a[p * m + i] : a[i * k + p];
        const double bv = tb ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = static_cast<float>(alpha * acc + beta * c[i * n + j]);
    }
  return c;
}

}  // namespace

TEST_CASE("scalar gemm matches a naive oracle for every transpose combination") {
  Rng rng(1);
  const auto& k = simd::scalar_kernels();
  for (bool ta : {false, true})
    for (bool tb : {false, true})
      for (auto [m, n, kk] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1},
                              {3, 5, 7}, {17, 9, 33}, {64, 40, 27}}) {
        const auto a = random_floats(m * kk, rng);
        const auto b = random_floats(kk * n, rng);
        const auto c0 = random_floats(m * n, rng);
        auto c = c0;
        k.gemm(ta, tb, m, n, kk, 0.7f, a.data(), ta ? m : kk, b.data(), tb ? kk : n, 0.3f,
               c.data(), n);
        CHECK(max_rel_diff(naive_gemm(ta, tb, m, n, kk, 0.7f, a, b, 0.3f, c0), c) < 1e-5);
      }
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!simd::cpu_has_avx2()) {
    MESSAGE("AVX2 not available; skipped");
    return;
  }
  const auto& s = simd::scalar_kernels();
  const auto& v = simd::avx2_kernels();
  Rng rng(7);

  SUBCASE("gemm") {
    for (bool ta : {false, true})
      for (bool tb : {false, true})
        for (auto [m, n, kk] : {std::tuple<std::size_t, std::size_t, std::size_t>{1, 1, 1},
                                {5, 13, 3}, {31, 17, 65}, {64, 256, 96}, {100, 7, 300}}) {
          const auto a = random_floats(m * kk, rng);
          const auto b = random_floats(kk * n, rng);
          auto c1 = random_floats(m * n, rng);
          auto c2 = c1;
          s.gemm(ta, tb, m, n, kk, 1.0f, a.data(), ta ? m : kk, b.data(), tb ? kk : n, 0.5f,
                 c1.data(), n);
          v.gemm(ta, tb, m, n, kk, 1.0f, a.data(), ta ? m : kk, b.data(), tb ? kk : n, 0.5f,
                 c2.data(), n);
          CHECK(max_rel_diff(c1, c2) < 1e-4);
        }
  }

  SUBCASE("gemm with padded leading dimensions") {
    const std::size_t m = 9, n = 11, kk = 13, ldc = 20;
    const auto a = random_floats(m * kk, rng);
    const auto b = random_floats(kk * n, rng);
    auto c1 = random_floats(m * ldc, rng);
    auto c2 = c1;
    s.gemm(false, false, m, n, kk, 1.0f, a.data(), kk, b.data(), n, 0.0f, c1.data(), ldc);
    v.gemm(false, false, m, n, kk, 1.0f, a.data(), kk, b.data(), n, 0.0f, c2.data(), ldc);
    CHECK(max_rel_diff(c1, c2) < 1e-5);
  }

  SUBCASE("elementwise kernels are bit-identical") {
    for (std::size_t n : {0u, 1u, 7u, 8u, 9u, 1000u}) {
      const auto x = random_floats(n, rng);
      const auto dy = random_floats(n, rng);
      std::vector<float> y1(n), y2(n), d1(n), d2(n);
      s.leaky_relu(x.data(), y1.data(), n, 0.2f);
      v.leaky_relu(x.data(), y2.data(), n, 0.2f);
      CHECK(y1 == y2);
      s.leaky_relu_backward(x.data(), dy.data(), d1.data(), n, 0.2f);
      v.leaky_relu_backward(x.data(), dy.data(), d2.data(), n, 0.2f);
      CHECK(d1 == d2);
      auto a1 = dy, a2 = dy;
      s.axpy(n, -1.5f, x.data(), a1.data());
      v.axpy(n, -1.5f, x.data(), a2.data());
      CHECK(max_rel_diff(a1, a2) < 1e-6);
      double sum_ref = 0;
      for (float f : x) sum_ref += f;
      CHECK(s.sum(x.data(), n) == doctest::Approx(sum_ref).epsilon(1e-12));
      CHECK(v.sum(x.data(), n) == doctest::Approx(sum_ref).epsilon(1e-9));
    }
  }

  SUBCASE("adam update") {
    const std::size_t n = 1027;
    auto p1 = random_floats(n, rng), g = random_floats(n, rng);
    auto m1 = random_floats(n, rng), v1 = random_floats(n, rng);
    for (auto& x : v1) x = std::abs(x);
    auto p2 = p1, m2 = m1, v2 = v1;
    const simd::AdamStep step{1e-3f, 0.9f, 0.999f, 1e-8f, 0.1f, 0.001f};
    s.adam_update(p1.data(), g.data(), m1.data(), v1.data(), n, step);
    v.adam_update(p2.data(), g.data(), m2.data(), v2.data(), n, step);
    CHECK(max_rel_diff(m1, m2) < 1e-6);
    CHECK(max_rel_diff(v1, v2) < 1e-6);
    CHECK(max_rel_diff(p1, p2) < 1e-5);
  }
}

TEST_CASE("dispatch can be forced to either table") {
  simd::select(simd::Isa::scalar);
  CHECK(simd::kernels().isa == simd::Isa::scalar);
  if (simd::cpu_has_avx2()) {
    simd::select(simd::Isa::avx2);
    CHECK(simd::kernels().isa == simd::Isa::avx2);
  }
  CHECK(simd::isa_name(simd::Isa::scalar) == "scalar");
}
