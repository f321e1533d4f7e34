#include "blm/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "blm/error.hpp"

namespace blm::kernels {

namespace {

void gemm_scalar(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b,
                 int ldb, bool accumulate, float* c, int ldc) {
  gemm_reference<float>(ta, tb, m, n, k, a, lda, b, ldb, accumulate, c, ldc);
}

float dot_scalar(const float* x, const float* y, std::size_t n) { return dot_reference(x, y, n); }

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  axpy_reference(alpha, x, y, n);
}

constexpr KernelTable kScalarTable{Isa::kScalar, &gemm_scalar, &dot_scalar, &axpy_scalar};

#ifdef BLM_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2Table{Isa::kAvx2, &detail::gemm_avx2, &detail::dot_avx2,
                                 &detail::axpy_avx2};
#endif

const KernelTable* pick_startup_table() {
  if (const char* env = std::getenv("BLM_ISA"); env != nullptr) {
    const std::string want(env);
    if (want == "scalar") return &kScalarTable;
    if (want == "avx2" && supported(Isa::kAvx2)) return &table(Isa::kAvx2);
  }
  if (supported(Isa::kAvx2)) return &table(Isa::kAvx2);
  return &kScalarTable;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{pick_startup_table()};
  return ptr;
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

bool supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#ifdef BLM_HAVE_AVX2_KERNELS
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw ContractError("kernel ISA '" + std::string(to_string(isa)) +
                        "' is not available on this host");
  }
#ifdef BLM_HAVE_AVX2_KERNELS
  if (isa == Isa::kAvx2) return kAvx2Table;
#endif
  return kScalarTable;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_relaxed); }

}  // namespace blm::kernels
