#pragma once

// Data-parallel inner loops used by the network layers and optimizers.
//
// Every kernel has a portable scalar reference and an AVX2+FMA variant.
// The variant is picked once at startup from CPUID; the environment
// variable DISENT_SIMD=scalar|avx2 overrides the choice.

#include <cstddef>
#include <string_view>

namespace disent::simd {

enum class Isa { scalar, avx2 };

/// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C.
/// op(A) is M x K, op(B) is K x N. lda/ldb/ldc are row strides of the
/// stored (untransposed) matrices.
using GemmFn = void (*)(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                        std::size_t k, float alpha, const float* a, std::size_t lda,
                        const float* b, std::size_t ldb, float beta, float* c,
                        std::size_t ldc);

struct AdamStep {
  float lr;
  float beta1;
  float beta2;
  float eps;
  float bias_correction1;  // 1 - beta1^t
  float bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  GemmFn gemm;
  // y[i] = x[i] >= 0 ? x[i] : slope * x[i]
  void (*leaky_relu)(const float* x, float* y, std::size_t n, float slope);
  // dx[i] = dy[i] * (x[i] >= 0 ? 1 : slope)
  void (*leaky_relu_backward)(const float* x, const float* dy, float* dx, std::size_t n,
                              float slope);
  // y[i] += alpha * x[i]
  void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
  // Adam moment update and parameter step, in place.
  void (*adam_update)(float* param, const float* grad, float* m, float* v, std::size_t n,
                      const AdamStep& step);
  // Sum of x[i]; accumulated in double.
  double (*sum)(const float* x, std::size_t n);
};

const KernelTable& scalar_kernels();
const KernelTable& avx2_kernels();

/// True when the running CPU supports AVX2 and FMA.
bool cpu_has_avx2();

/// The table selected for this process.
const KernelTable& kernels();

/// Force a particular table (tests and benchmarks). Throws if the ISA is
/// unsupported on this CPU.
void select(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace disent::simd
