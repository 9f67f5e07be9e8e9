// Compiled with -mavx2 -mfma. Nothing in this file may run before
// cpu_has_avx2() has been checked by the dispatcher.

#include "disent/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace disent::simd {
namespace {

constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 16;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 72;
constexpr std::size_t kNc = 2048;

struct PackBuffers {
  std::vector<float> a;
  std::vector<float> b;
};

PackBuffers& pack_buffers() {
  thread_local PackBuffers buffers;
  return buffers;
}

// Packs op(A)[i0:i0+mc, p0:p0+kc] into MR-row panels, panel-major, zero-padded.
void pack_a(bool trans, const float* a, std::size_t lda, std::size_t i0, std::size_t p0,
            std::size_t mc, std::size_t kc, float* out) {
  for (std::size_t ip = 0; ip < mc; ip += kMr) {
    const std::size_t rows = std::min(kMr, mc - ip);
    for (std::size_t p = 0; p < kc; ++p) {
      float* dst = out + p * kMr;
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = i0 + ip + r;
        const std::size_t col = p0 + p;
        dst[r] = trans ? a[col * lda + i] : a[i * lda + col];
      }
      for (std::size_t r = rows; r < kMr; ++r) dst[r] = 0.0f;
    }
    out += kc * kMr;
  }
}

// Packs op(B)[p0:p0+kc, j0:j0+nc] into NR-column panels, zero-padded.
void pack_b(bool trans, const float* b, std::size_t ldb, std::size_t p0, std::size_t j0,
            std::size_t kc, std::size_t nc, float* out) {
  for (std::size_t jp = 0; jp < nc; jp += kNr) {
    const std::size_t cols = std::min(kNr, nc - jp);
    for (std::size_t p = 0; p < kc; ++p) {
      float* dst = out + p * kNr;
      const std::size_t row = p0 + p;
      if (!trans && cols == kNr) {
        const float* src = b + row * ldb + j0 + jp;
        _mm256_storeu_ps(dst, _mm256_loadu_ps(src));
        _mm256_storeu_ps(dst + 8, _mm256_loadu_ps(src + 8));
        continue;
      }
      for (std::size_t c = 0; c < cols; ++c) {
        const std::size_t j = j0 + jp + c;
        dst[c] = trans ? b[j * ldb + row] : b[row * ldb + j];
      }
      for (std::size_t c = cols; c < kNr; ++c) dst[c] = 0.0f;
    }
    out += kc * kNr;
  }
}

// acc(6x16) = Ap(kc x 6)^T * Bp(kc x 16), written to tile with row stride kNr.
void micro_kernel(std::size_t kc, const float* ap, const float* bp, float* tile) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    __m256 a = _mm256_broadcast_ss(ap + 0);
    c00 = _mm256_fmadd_ps(a, b0, c00);
    c01 = _mm256_fmadd_ps(a, b1, c01);
    a = _mm256_broadcast_ss(ap + 1);
    c10 = _mm256_fmadd_ps(a, b0, c10);
    c11 = _mm256_fmadd_ps(a, b1, c11);
    a = _mm256_broadcast_ss(ap + 2);
    c20 = _mm256_fmadd_ps(a, b0, c20);
    c21 = _mm256_fmadd_ps(a, b1, c21);
    a = _mm256_broadcast_ss(ap + 3);
    c30 = _mm256_fmadd_ps(a, b0, c30);
    c31 = _mm256_fmadd_ps(a, b1, c31);
    a = _mm256_broadcast_ss(ap + 4);
    c40 = _mm256_fmadd_ps(a, b0, c40);
    c41 = _mm256_fmadd_ps(a, b1, c41);
    a = _mm256_broadcast_ss(ap + 5);
    c50 = _mm256_fmadd_ps(a, b0, c50);
    c51 = _mm256_fmadd_ps(a, b1, c51);
    ap += kMr;
    bp += kNr;
  }
  _mm256_storeu_ps(tile + 0 * kNr, c00);
  _mm256_storeu_ps(tile + 0 * kNr + 8, c01);
  _mm256_storeu_ps(tile + 1 * kNr, c10);
  _mm256_storeu_ps(tile + 1 * kNr + 8, c11);
  _mm256_storeu_ps(tile + 2 * kNr, c20);
  _mm256_storeu_ps(tile + 2 * kNr + 8, c21);
  _mm256_storeu_ps(tile + 3 * kNr, c30);
  _mm256_storeu_ps(tile + 3 * kNr + 8, c31);
  _mm256_storeu_ps(tile + 4 * kNr, c40);
  _mm256_storeu_ps(tile + 4 * kNr + 8, c41);
  _mm256_storeu_ps(tile + 5 * kNr, c50);
  _mm256_storeu_ps(tile + 5 * kNr + 8, c51);
}

void store_tile(const float* tile, std::size_t rows, std::size_t cols, float alpha, float beta,
                float* c, std::size_t ldc) {
  const __m256 va = _mm256_set1_ps(alpha);
  const __m256 vb = _mm256_set1_ps(beta);
  for (std::size_t r = 0; r < rows; ++r) {
    float* crow = c + r * ldc;
    const float* trow = tile + r * kNr;
    if (cols == kNr) {
      for (std::size_t h = 0; h < kNr; h += 8) {
        __m256 t = _mm256_mul_ps(va, _mm256_loadu_ps(trow + h));
        if (beta != 0.0f) t = _mm256_fmadd_ps(vb, _mm256_loadu_ps(crow + h), t);
        _mm256_storeu_ps(crow + h, t);
      }
    } else {
      for (std::size_t j = 0; j < cols; ++j) {
        const float t = alpha * trow[j];
        crow[j] = beta == 0.0f ? t : std::fma(beta, crow[j], t);
      }
    }
  }
}

void gemm_avx2(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
               float beta, float* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0 || alpha == 0.0f) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        c[i * ldc + j] = beta == 0.0f ? 0.0f : beta * c[i * ldc + j];
    return;
  }
  auto& buf = pack_buffers();
  alignas(32) float tile[kMr * kNr];
  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = std::min(kNc, n - jc);
    const std::size_t nc_padded = (nc + kNr - 1) / kNr * kNr;
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      const float step_beta = pc == 0 ? beta : 1.0f;
      buf.b.resize(kc * nc_padded);
      pack_b(trans_b, b, ldb, pc, jc, kc, nc, buf.b.data());
      for (std::size_t ic = 0; ic < m; ic += kMc) {
        const std::size_t mc = std::min(kMc, m - ic);
        const std::size_t mc_padded = (mc + kMr - 1) / kMr * kMr;
        buf.a.resize(kc * mc_padded);
        pack_a(trans_a, a, lda, ic, pc, mc, kc, buf.a.data());
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          const float* bp = buf.b.data() + (jr / kNr) * kc * kNr;
          const std::size_t cols = std::min(kNr, nc - jr);
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            const float* ap = buf.a.data() + (ir / kMr) * kc * kMr;
            const std::size_t rows = std::min(kMr, mc - ir);
            micro_kernel(kc, ap, bp, tile);
            store_tile(tile, rows, cols, alpha, step_beta, c + (ic + ir) * ldc + jc + jr, ldc);
          }
        }
      }
    }
  }
}

void leaky_relu_avx2(const float* x, float* y, std::size_t n, float slope) {
  const __m256 vs = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    const __m256 neg = _mm256_mul_ps(vs, v);
    const __m256 keep = _mm256_cmp_ps(v, zero, _CMP_GE_OQ);
    _mm256_storeu_ps(y + i, _mm256_blendv_ps(neg, v, keep));
  }
  for (; i < n; ++i) y[i] = x[i] >= 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward_avx2(const float* x, const float* dy, float* dx, std::size_t n,
                              float slope) {
  const __m256 vs = _mm256_set1_ps(slope);
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(dy + i);
    const __m256 keep = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GE_OQ);
    _mm256_storeu_ps(dx + i, _mm256_blendv_ps(_mm256_mul_ps(vs, g), g, keep));
  }
  for (; i < n; ++i) dx[i] = x[i] >= 0.0f ? dy[i] : slope * dy[i];
}

void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

void adam_update_avx2(float* param, const float* grad, float* m, float* v, std::size_t n,
                      const AdamStep& s) {
  const float step_size = s.lr / s.bias_correction1;
  const float inv_sqrt_bc2 = 1.0f / std::sqrt(s.bias_correction2);
  const __m256 b1 = _mm256_set1_ps(s.beta1), nb1 = _mm256_set1_ps(1.0f - s.beta1);
  const __m256 b2 = _mm256_set1_ps(s.beta2), nb2 = _mm256_set1_ps(1.0f - s.beta2);
  const __m256 vstep = _mm256_set1_ps(step_size), vinv = _mm256_set1_ps(inv_sqrt_bc2);
  const __m256 veps = _mm256_set1_ps(s.eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_fmadd_ps(b1, _mm256_loadu_ps(m + i), _mm256_mul_ps(nb1, g));
    const __m256 vi =
        _mm256_fmadd_ps(b2, _mm256_loadu_ps(v + i), _mm256_mul_ps(_mm256_mul_ps(nb2, g), g));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 denom = _mm256_fmadd_ps(_mm256_sqrt_ps(vi), vinv, veps);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(vstep, mi), denom);
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0f - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0f - s.beta2) * grad[i] * grad[i];
    param[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + s.eps);
  }
}

double sum_avx2(const float* x, std::size_t n) {
  __m256d lo = _mm256_setzero_pd(), hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_loadu_ps(x + i);
    lo = _mm256_add_pd(lo, _mm256_cvtps_pd(_mm256_castps256_ps128(v)));
    hi = _mm256_add_pd(hi, _mm256_cvtps_pd(_mm256_extractf128_ps(v, 1)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(lo, hi));
  double acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) acc += x[i];
  return acc;
}

}  // namespace

const KernelTable& avx2_kernels() {
  static const KernelTable table{Isa::avx2,        gemm_avx2, leaky_relu_avx2,
                                 leaky_relu_backward_avx2, axpy_avx2,
                                 adam_update_avx2, sum_avx2};
  return table;
}

}  // namespace disent::simd
