#include "disent/simd/kernels.hpp"

#include <cmath>

namespace disent::simd {
namespace {

void gemm_scalar(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 float alpha, const float* a, std::size_t lda, const float* b,
                 std::size_t ldb, float beta, float* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    if (beta == 0.0f) {
      for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0f;
    } else if (beta != 1.0f) {
      for (std::size_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (std::size_t p = 0; p < k; ++p) {
      const float aip = alpha * (trans_a ? a[p * lda + i] : a[i * lda + p]);
      if (aip == 0.0f) continue;
      if (!trans_b) {
        const float* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += aip * b[j * ldb + p];
      }
    }
  }
}

void leaky_relu_scalar(const float* x, float* y, std::size_t n, float slope) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] >= 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward_scalar(const float* x, const float* dy, float* dx, std::size_t n,
                                float slope) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] >= 0.0f ? dy[i] : slope * dy[i];
}

void axpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void adam_update_scalar(float* param, const float* grad, float* m, float* v, std::size_t n,
                        const AdamStep& s) {
  const float step_size = s.lr / s.bias_correction1;
  const float inv_sqrt_bc2 = 1.0f / std::sqrt(s.bias_correction2);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = s.beta1 * m[i] + (1.0f - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (1.0f - s.beta2) * grad[i] * grad[i];
    const float denom = std::sqrt(v[i]) * inv_sqrt_bc2 + s.eps;
    param[i] -= step_size * m[i] / denom;
  }
}

double sum_scalar(const float* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::scalar,        gemm_scalar, leaky_relu_scalar,
                                 leaky_relu_backward_scalar, axpy_scalar,
                                 adam_update_scalar, sum_scalar};
  return table;
}

}  // namespace disent::simd
