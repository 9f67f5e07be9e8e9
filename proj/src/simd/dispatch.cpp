#include "disent/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace disent::simd {
namespace {

const KernelTable* detect() {
  if (const char* forced = std::getenv("DISENT_SIMD")) {
    const std::string want(forced);
    if (want == "scalar") return &scalar_kernels();
    if (want == "avx2" && cpu_has_avx2()) return &avx2_kernels();
  }
  return cpu_has_avx2() ? &avx2_kernels() : &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

void select(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2())
    throw std::runtime_error("avx2 kernels requested on a CPU without AVX2/FMA");
  active().store(isa == Isa::avx2 ? &avx2_kernels() : &scalar_kernels(),
                 std::memory_order_release);
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace disent::simd
