// Non-x86 targets: the AVX2 table aliases the scalar reference.

#include "disent/simd/kernels.hpp"

namespace disent::simd {

const KernelTable& avx2_kernels() { return scalar_kernels(); }

}  // namespace disent::simd
