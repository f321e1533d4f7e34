#pragma once

// Dense inner loops behind every layer: a row-major GEMM plus dot/axpy.
//
// Each kernel exists as a portable scalar reference (templated, also used
// for the 64-bit gradient-check path) and, for float, as an AVX2/FMA variant.
// The float variant is chosen once at startup from CPUID; setting
// BLM_ISA=scalar in the environment pins the reference path.

#include <cstddef>
#include <string_view>
#include <type_traits>

namespace blm::kernels {

enum class Isa { kScalar, kAvx2 };

enum class Trans : bool { kNo = false, kYes = true };

std::string_view to_string(Isa isa);

// C[m×n] = op(A)·op(B), or C += op(A)·op(B) when `accumulate`.
// op(A) is m×k, op(B) is k×n. Storage is row-major with leading dimensions
// lda/ldb/ldc measured in elements of the stored (untransposed) matrix.
using GemmFn = void (*)(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda,
                        const float* b, int ldb, bool accumulate, float* c, int ldc);
using DotFn = float (*)(const float* x, const float* y, std::size_t n);
// y += alpha·x
using AxpyFn = void (*)(float alpha, const float* x, float* y, std::size_t n);

struct KernelTable {
  Isa isa;
  GemmFn gemm;
  DotFn dot;
  AxpyFn axpy;
};

bool supported(Isa isa);

// Table for a specific ISA. Throws ContractError when the host cannot run it.
const KernelTable& table(Isa isa);

// Table in use for float math.
const KernelTable& active();

// Overrides the startup choice. Intended for equivalence tests and benchmarks.
void select(Isa isa);

template <class T>
void gemm_reference(Trans ta, Trans tb, int m, int n, int k, const T* a, int lda, const T* b,
                    int ldb, bool accumulate, T* c, int ldc) {
  const bool trans_b = tb == Trans::kYes;
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::ptrdiff_t>(i) * ldc;
    if (!accumulate) {
      for (int j = 0; j < n; ++j) crow[j] = T(0);
    }
    if (trans_b) {
      for (int j = 0; j < n; ++j) {
        T acc = T(0);
        for (int p = 0; p < k; ++p) {
          const T av = ta == Trans::kYes ? a[static_cast<std::ptrdiff_t>(p) * lda + i]
                                         : a[static_cast<std::ptrdiff_t>(i) * lda + p];
          acc += av * b[static_cast<std::ptrdiff_t>(j) * ldb + p];
        }
        crow[j] += acc;
      }
    } else {
      for (int p = 0; p < k; ++p) {
        const T av = ta == Trans::kYes ? a[static_cast<std::ptrdiff_t>(p) * lda + i]
                                       : a[static_cast<std::ptrdiff_t>(i) * lda + p];
        const T* brow = b + static_cast<std::ptrdiff_t>(p) * ldb;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

template <class T>
T dot_reference(const T* x, const T* y, std::size_t n) {
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void axpy_reference(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Type-generic entry points: float goes through the active table, any other
// type uses the reference loops.
template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, const T* a, int lda, const T* b, int ldb,
          bool accumulate, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>) {
    active().gemm(ta, tb, m, n, k, a, lda, b, ldb, accumulate, c, ldc);
  } else {
    gemm_reference(ta, tb, m, n, k, a, lda, b, ldb, accumulate, c, ldc);
  }
}

template <class T>
T dot(const T* x, const T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    return active().dot(x, y, n);
  } else {
    return dot_reference(x, y, n);
  }
}

template <class T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>) {
    active().axpy(alpha, x, y, n);
  } else {
    axpy_reference(alpha, x, y, n);
  }
}

namespace detail {
#ifdef BLM_HAVE_AVX2_KERNELS
void gemm_avx2(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, bool accumulate, float* c, int ldc);
float dot_avx2(const float* x, const float* y, std::size_t n);
void axpy_avx2(float alpha, const float* x, float* y, std::size_t n);
#endif
}  // namespace detail

}  // namespace blm::kernels
