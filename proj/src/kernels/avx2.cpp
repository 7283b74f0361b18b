#include <immintrin.h>

#include "variants.hpp"

namespace braim::kernels::detail {
namespace {


inline __m256d ld(const double* p) { return _mm256_loadu_pd(p); }
inline void st(double* p, __m256d v) { _mm256_storeu_pd(p, v); }

void spd4_solve_avx2(const Spd4Batch& in, const Spd4Out& out) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= in.count; k += 4) {
    const __m256d a00 = ld(in.v[0] + k), a01 = ld(in.v[1] + k), a02 = ld(in.v[2] + k);
    const __m256d a03 = ld(in.v[3] + k), a11 = ld(in.v[4] + k), a12 = ld(in.v[5] + k);
    const __m256d a13 = ld(in.v[6] + k), a22 = ld(in.v[7] + k), a23 = ld(in.v[8] + k);
    const __m256d a33 = ld(in.v[9] + k);

    const __m256d l00 = _mm256_sqrt_pd(a00), i0 = _mm256_div_pd(one, l00);
    const __m256d l10 = _mm256_mul_pd(a01, i0), l20 = _mm256_mul_pd(a02, i0);
    const __m256d l30 = _mm256_mul_pd(a03, i0);
    const __m256d d1 = _mm256_fnmadd_pd(l10, l10, a11);
    const __m256d l11 = _mm256_sqrt_pd(d1), i1 = _mm256_div_pd(one, l11);
    const __m256d l21 = _mm256_mul_pd(_mm256_fnmadd_pd(l20, l10, a12), i1);
    const __m256d l31 = _mm256_mul_pd(_mm256_fnmadd_pd(l30, l10, a13), i1);
    const __m256d d2 = _mm256_fnmadd_pd(l21, l21, _mm256_fnmadd_pd(l20, l20, a22));
    const __m256d l22 = _mm256_sqrt_pd(d2), i2 = _mm256_div_pd(one, l22);
    const __m256d l32 =
        _mm256_mul_pd(_mm256_fnmadd_pd(l31, l21, _mm256_fnmadd_pd(l30, l20, a23)), i2);
    const __m256d d3 = _mm256_fnmadd_pd(
        l32, l32, _mm256_fnmadd_pd(l31, l31, _mm256_fnmadd_pd(l30, l30, a33)));
    const __m256d l33 = _mm256_sqrt_pd(d3), i3 = _mm256_div_pd(one, l33);

    const __m256d m00 = i0;
    const __m256d m11 = i1;
    const __m256d m10 = _mm256_mul_pd(_mm256_mul_pd(_mm256_sub_pd(zero, l10), m00), i1);
    const __m256d m22 = i2;
    const __m256d m21 = _mm256_mul_pd(_mm256_mul_pd(_mm256_sub_pd(zero, l21), m11), i2);
    const __m256d m20 =
        _mm256_mul_pd(_mm256_sub_pd(zero, _mm256_fmadd_pd(l21, m10, _mm256_mul_pd(l20, m00))), i2);
    const __m256d m33 = i3;
    const __m256d m32 = _mm256_mul_pd(_mm256_mul_pd(_mm256_sub_pd(zero, l32), m22), i3);
    const __m256d m31 =
        _mm256_mul_pd(_mm256_sub_pd(zero, _mm256_fmadd_pd(l32, m21, _mm256_mul_pd(l31, m11))), i3);
    const __m256d m30 = _mm256_mul_pd(
        _mm256_sub_pd(zero,
                      _mm256_fmadd_pd(l32, m20, _mm256_fmadd_pd(l31, m10, _mm256_mul_pd(l30, m00)))),
        i3);

    const __m256d s00 = _mm256_fmadd_pd(
        m30, m30, _mm256_fmadd_pd(m20, m20, _mm256_fmadd_pd(m10, m10, _mm256_mul_pd(m00, m00))));
    const __m256d s01 =
        _mm256_fmadd_pd(m30, m31, _mm256_fmadd_pd(m20, m21, _mm256_mul_pd(m10, m11)));
    const __m256d s02 = _mm256_fmadd_pd(m30, m32, _mm256_mul_pd(m20, m22));
    const __m256d s03 = _mm256_mul_pd(m30, m33);
    const __m256d s11 =
        _mm256_fmadd_pd(m31, m31, _mm256_fmadd_pd(m21, m21, _mm256_mul_pd(m11, m11)));
    const __m256d s12 = _mm256_fmadd_pd(m31, m32, _mm256_mul_pd(m21, m22));
    const __m256d s13 = _mm256_mul_pd(m31, m33);
    const __m256d s22 = _mm256_fmadd_pd(m32, m32, _mm256_mul_pd(m22, m22));
    const __m256d s23 = _mm256_mul_pd(m32, m33);
    const __m256d s33 = _mm256_mul_pd(m33, m33);

    // Substitution through L rather than S u: backward stable in the mean.
    const __m256d z0 = _mm256_mul_pd(ld(in.u[0] + k), i0);
    const __m256d z1 = _mm256_mul_pd(_mm256_fnmadd_pd(l10, z0, ld(in.u[1] + k)), i1);
    const __m256d z2 =
        _mm256_mul_pd(_mm256_fnmadd_pd(l21, z1, _mm256_fnmadd_pd(l20, z0, ld(in.u[2] + k))), i2);
    const __m256d z3 = _mm256_mul_pd(
        _mm256_fnmadd_pd(l32, z2, _mm256_fnmadd_pd(l31, z1, _mm256_fnmadd_pd(l30, z0, ld(in.u[3] + k)))), i3);
    const __m256d x3 = _mm256_mul_pd(z3, i3);
    const __m256d x2 = _mm256_mul_pd(_mm256_fnmadd_pd(l32, x3, z2), i2);
    const __m256d x1 = _mm256_mul_pd(_mm256_fnmadd_pd(l31, x3, _mm256_fnmadd_pd(l21, x2, z1)), i1);
    const __m256d x0 = _mm256_mul_pd(
        _mm256_fnmadd_pd(l30, x3, _mm256_fnmadd_pd(l20, x2, _mm256_fnmadd_pd(l10, x1, z0))), i0);

    st(out.mean[0] + k, x0);
    st(out.mean[1] + k, x1);
    st(out.mean[2] + k, x2);
    st(out.mean[3] + k, x3);
    st(out.cov[0] + k, s00);
    st(out.cov[1] + k, s01);
    st(out.cov[2] + k, s02);
    st(out.cov[3] + k, s03);
    st(out.cov[4] + k, s11);
    st(out.cov[5] + k, s12);
    st(out.cov[6] + k, s13);
    st(out.cov[7] + k, s22);
    st(out.cov[8] + k, s23);
    st(out.cov[9] + k, s33);

    const __m256d det = _mm256_mul_pd(_mm256_mul_pd(a00, d1), _mm256_mul_pd(d2, d3));
    const __m256d pd = _mm256_and_pd(
        _mm256_and_pd(_mm256_cmp_pd(a00, zero, _CMP_GT_OQ), _mm256_cmp_pd(d1, zero, _CMP_GT_OQ)),
        _mm256_and_pd(_mm256_cmp_pd(d2, zero, _CMP_GT_OQ), _mm256_cmp_pd(d3, zero, _CMP_GT_OQ)));
    st(out.det + k, _mm256_blendv_pd(_mm256_set1_pd(-1.0), det, pd));
    st(out.quad + k, _mm256_fmadd_pd(
                         z3, z3, _mm256_fmadd_pd(z2, z2, _mm256_fmadd_pd(z1, z1, _mm256_mul_pd(z0, z0)))));
  }
  if (k < in.count) {
    Spd4Batch tail = in;
    Spd4Out tail_out = out;
    tail.count = in.count - k;
    for (auto& p : tail.v) p += k;
    for (auto& p : tail.u) p += k;
    for (auto& p : tail_out.mean) p += k;
    for (auto& p : tail_out.cov) p += k;
    tail_out.det += k;
    tail_out.quad += k;
    kScalarTable.spd4_solve(tail, tail_out);
  }
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(ld(a + i), ld(b + i), acc0);
    acc1 = _mm256_fmadd_pd(ld(a + i + 4), ld(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(ld(a + i), ld(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(a + r * cols, x, cols);
}

}  // namespace

const Table kAvx2Table{"avx2", spd4_solve_avx2, gemv_avx2, dot_avx2};

}  // namespace braim::kernels::detail
