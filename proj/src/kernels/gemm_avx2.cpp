// AVX2/FMA float kernels. This translation unit is compiled with -mavx2 -mfma
// and is only entered after the dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <algorithm>
#include <cstddef>
#include <vector>

#include "blm/kernels/kernels.hpp"

namespace blm::kernels::detail {

namespace {

constexpr int kMr = 6;
constexpr int kNr = 16;
constexpr int kKc = 256;
constexpr int kMc = 120;
constexpr int kNc = 2048;

// A block [mc×kc] → panels of kMr rows, each stored p-major (kMr floats per p).
void pack_a(Trans ta, const float* a, int lda, int row0, int col0, int mc, int kc, float* dst) {
  for (int panel = 0; panel < mc; panel += kMr) {
    const int rows = std::min(kMr, mc - panel);
    float* out = dst + static_cast<std::ptrdiff_t>(panel) * kc;
    if (ta == Trans::kNo) {
      for (int r = 0; r < kMr; ++r) {
        if (r < rows) {
          const float* src = a + static_cast<std::ptrdiff_t>(row0 + panel + r) * lda + col0;
          for (int p = 0; p < kc; ++p) out[p * kMr + r] = src[p];
        } else {
          for (int p = 0; p < kc; ++p) out[p * kMr + r] = 0.0f;
        }
      }
    } else {
      for (int p = 0; p < kc; ++p) {
        const float* src = a + static_cast<std::ptrdiff_t>(col0 + p) * lda + row0 + panel;
        int r = 0;
        for (; r < rows; ++r) out[p * kMr + r] = src[r];
        for (; r < kMr; ++r) out[p * kMr + r] = 0.0f;
      }
    }
  }
}

// B block [kc×nc] → panels of kNr columns, each stored p-major (kNr floats per p).
void pack_b(Trans tb, const float* b, int ldb, int row0, int col0, int kc, int nc, float* dst) {
  for (int panel = 0; panel < nc; panel += kNr) {
    const int cols = std::min(kNr, nc - panel);
    float* out = dst + static_cast<std::ptrdiff_t>(panel) * kc;
    if (tb == Trans::kNo) {
      for (int p = 0; p < kc; ++p) {
        const float* src = b + static_cast<std::ptrdiff_t>(row0 + p) * ldb + col0 + panel;
        float* o = out + p * kNr;
        if (cols == kNr) {
          _mm256_storeu_ps(o, _mm256_loadu_ps(src));
          _mm256_storeu_ps(o + 8, _mm256_loadu_ps(src + 8));
        } else {
          int j = 0;
          for (; j < cols; ++j) o[j] = src[j];
          for (; j < kNr; ++j) o[j] = 0.0f;
        }
      }
    } else {
      for (int j = 0; j < kNr; ++j) {
        if (j < cols) {
          const float* src = b + static_cast<std::ptrdiff_t>(col0 + panel + j) * ldb + row0;
          for (int p = 0; p < kc; ++p) out[p * kNr + j] = src[p];
        } else {
          for (int p = 0; p < kc; ++p) out[p * kNr + j] = 0.0f;
        }
      }
    }
  }
}

// 6×16 register tile: C[rows×cols] (+)= Apanel·Bpanel over kc.
void micro_kernel(int kc, const float* ap, const float* bp, float* c, int ldc, bool accumulate,
                  int rows, int cols) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();

  for (int p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    __m256 av = _mm256_broadcast_ss(ap + 0);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(ap + 1);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(ap + 2);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(ap + 3);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
    av = _mm256_broadcast_ss(ap + 4);
    c40 = _mm256_fmadd_ps(av, b0, c40);
    c41 = _mm256_fmadd_ps(av, b1, c41);
    av = _mm256_broadcast_ss(ap + 5);
    c50 = _mm256_fmadd_ps(av, b0, c50);
    c51 = _mm256_fmadd_ps(av, b1, c51);
    ap += kMr;
    bp += kNr;
  }

  const __m256 acc[12] = {c00, c01, c10, c11, c20, c21, c30, c31, c40, c41, c50, c51};
  if (rows == kMr && cols == kNr) {
    for (int r = 0; r < kMr; ++r) {
      float* crow = c + static_cast<std::ptrdiff_t>(r) * ldc;
      __m256 lo = acc[2 * r];
      __m256 hi = acc[2 * r + 1];
      if (accumulate) {
        lo = _mm256_add_ps(lo, _mm256_loadu_ps(crow));
        hi = _mm256_add_ps(hi, _mm256_loadu_ps(crow + 8));
      }
      _mm256_storeu_ps(crow, lo);
      _mm256_storeu_ps(crow + 8, hi);
    }
    return;
  }
  alignas(32) float tile[kMr * kNr];
  for (int r = 0; r < kMr; ++r) {
    _mm256_store_ps(tile + r * kNr, acc[2 * r]);
    _mm256_store_ps(tile + r * kNr + 8, acc[2 * r + 1]);
  }
  for (int r = 0; r < rows; ++r) {
    float* crow = c + static_cast<std::ptrdiff_t>(r) * ldc;
    for (int j = 0; j < cols; ++j) {
      crow[j] = accumulate ? crow[j] + tile[r * kNr + j] : tile[r * kNr + j];
    }
  }
}

float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

}  // namespace

void gemm_avx2(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b,
               int ldb, bool accumulate, float* c, int ldc) {
  if (m <= 0 || n <= 0) return;
  if (k <= 0) {
    if (!accumulate) {
      for (int i = 0; i < m; ++i) std::fill_n(c + static_cast<std::ptrdiff_t>(i) * ldc, n, 0.0f);
    }
    return;
  }
  thread_local std::vector<float> a_pack;
  thread_local std::vector<float> b_pack;
  a_pack.resize(static_cast<std::size_t>(kMc + kMr) * kKc);
  b_pack.resize(static_cast<std::size_t>(kNc + kNr) * kKc);

  for (int jc = 0; jc < n; jc += kNc) {
    const int nc = std::min(kNc, n - jc);
    for (int pc = 0; pc < k; pc += kKc) {
      const int kc = std::min(kKc, k - pc);
      const bool acc = accumulate || pc > 0;
      pack_b(tb, b, ldb, pc, jc, kc, nc, b_pack.data());
      for (int ic = 0; ic < m; ic += kMc) {
        const int mc = std::min(kMc, m - ic);
        pack_a(ta, a, lda, ic, pc, mc, kc, a_pack.data());
        for (int jr = 0; jr < nc; jr += kNr) {
          const int cols = std::min(kNr, nc - jr);
          const float* bp = b_pack.data() + static_cast<std::ptrdiff_t>(jr) * kc;
          for (int ir = 0; ir < mc; ir += kMr) {
            const int rows = std::min(kMr, mc - ir);
            const float* ap = a_pack.data() + static_cast<std::ptrdiff_t>(ir) * kc;
            float* ctile = c + static_cast<std::ptrdiff_t>(ic + ir) * ldc + jc + jr;
            micro_kernel(kc, ap, bp, ctile, ldc, acc, rows, cols);
          }
        }
      }
    }
  }
}

float dot_avx2(const float* x, const float* y, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
  }
  float total = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace blm::kernels::detail
