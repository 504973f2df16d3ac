// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#if defined(__x86_64__) || defined(_M_X64)

#include "glmpca/kernels.hpp"

#include <immintrin.h>

namespace glmpca::kernels::avx2 {

namespace {

inline double horizontal_sum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

} // namespace

void weighted_dots(const double* g, const double* q, const double* x, std::size_t n, double* num,
                   double* den) {
    __m256d num0 = _mm256_setzero_pd();
    __m256d num1 = _mm256_setzero_pd();
    __m256d den0 = _mm256_setzero_pd();
    __m256d den1 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        const __m256d x0 = _mm256_loadu_pd(x + j);
        const __m256d x1 = _mm256_loadu_pd(x + j + 4);
        num0 = _mm256_fmadd_pd(_mm256_loadu_pd(g + j), x0, num0);
        num1 = _mm256_fmadd_pd(_mm256_loadu_pd(g + j + 4), x1, num1);
        den0 = _mm256_fmadd_pd(_mm256_loadu_pd(q + j), _mm256_mul_pd(x0, x0), den0);
        den1 = _mm256_fmadd_pd(_mm256_loadu_pd(q + j + 4), _mm256_mul_pd(x1, x1), den1);
    }
    for (; j + 4 <= n; j += 4) {
        const __m256d x0 = _mm256_loadu_pd(x + j);
        num0 = _mm256_fmadd_pd(_mm256_loadu_pd(g + j), x0, num0);
        den0 = _mm256_fmadd_pd(_mm256_loadu_pd(q + j), _mm256_mul_pd(x0, x0), den0);
    }
    double s_num = horizontal_sum(_mm256_add_pd(num0, num1));
    double s_den = horizontal_sum(_mm256_add_pd(den0, den1));
    for (; j < n; ++j) {
        s_num += g[j] * x[j];
        s_den += q[j] * (x[j] * x[j]);
    }
    *num = s_num;
    *den = s_den;
}

void dual_axpy(double a, const double* g, double b, const double* q, std::size_t n, double* num,
               double* den) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(num + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(g + j), _mm256_loadu_pd(num + j)));
        _mm256_storeu_pd(den + j, _mm256_fmadd_pd(vb, _mm256_loadu_pd(q + j), _mm256_loadu_pd(den + j)));
    }
    for (; j < n; ++j) {
        num[j] += a * g[j];
        den[j] += b * q[j];
    }
}

void axpy(double a, const double* x, std::size_t n, double* y) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        _mm256_storeu_pd(y + j, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + j), _mm256_loadu_pd(y + j)));
    }
    for (; j < n; ++j) {
        y[j] += a * x[j];
    }
}

void scoring_step(const double* num, const double* den, const double* current, double lambda,
                  double step, std::size_t n, double* out) {
    const __m256d vl = _mm256_set1_pd(lambda);
    const __m256d vs = _mm256_set1_pd(step);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        // mul then sub (no FMA) keeps this bit-identical to the scalar reference
        const __m256d grad = _mm256_sub_pd(_mm256_loadu_pd(num + i), _mm256_mul_pd(vl, _mm256_loadu_pd(current + i)));
        const __m256d info = _mm256_add_pd(_mm256_loadu_pd(den + i), vl);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(vs, _mm256_div_pd(grad, info)));
    }
    for (; i < n; ++i) {
        out[i] = step * ((num[i] - lambda * current[i]) / (den[i] + lambda));
    }
}

} // namespace glmpca::kernels::avx2

#endif
