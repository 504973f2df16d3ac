#if defined(__aarch64__) || defined(_M_ARM64)

#include "glmpca/kernels.hpp"

#include <arm_neon.h>

namespace glmpca::kernels::neon {

void weighted_dots(const double* g, const double* q, const double* x, std::size_t n, double* num,
                   double* den) {
    float64x2_t num0 = vdupq_n_f64(0.0);
    float64x2_t num1 = vdupq_n_f64(0.0);
    float64x2_t den0 = vdupq_n_f64(0.0);
    float64x2_t den1 = vdupq_n_f64(0.0);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const float64x2_t x0 = vld1q_f64(x + j);
        const float64x2_t x1 = vld1q_f64(x + j + 2);
        num0 = vfmaq_f64(num0, vld1q_f64(g + j), x0);
        num1 = vfmaq_f64(num1, vld1q_f64(g + j + 2), x1);
        den0 = vfmaq_f64(den0, vld1q_f64(q + j), vmulq_f64(x0, x0));
        den1 = vfmaq_f64(den1, vld1q_f64(q + j + 2), vmulq_f64(x1, x1));
    }
    double s_num = vaddvq_f64(vaddq_f64(num0, num1));
    double s_den = vaddvq_f64(vaddq_f64(den0, den1));
    for (; j < n; ++j) {
        s_num += g[j] * x[j];
        s_den += q[j] * (x[j] * x[j]);
    }
    *num = s_num;
    *den = s_den;
}

void dual_axpy(double a, const double* g, double b, const double* q, std::size_t n, double* num,
               double* den) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        vst1q_f64(num + j, vfmaq_f64(vld1q_f64(num + j), va, vld1q_f64(g + j)));
        vst1q_f64(den + j, vfmaq_f64(vld1q_f64(den + j), vb, vld1q_f64(q + j)));
    }
    for (; j < n; ++j) {
        num[j] += a * g[j];
        den[j] += b * q[j];
    }
}

void axpy(double a, const double* x, std::size_t n, double* y) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2) {
        vst1q_f64(y + j, vfmaq_f64(vld1q_f64(y + j), va, vld1q_f64(x + j)));
    }
    for (; j < n; ++j) {
        y[j] += a * x[j];
    }
}

void scoring_step(const double* num, const double* den, const double* current, double lambda,
                  double step, std::size_t n, double* out) {
    const float64x2_t vl = vdupq_n_f64(lambda);
    const float64x2_t vs = vdupq_n_f64(step);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t grad = vsubq_f64(vld1q_f64(num + i), vmulq_f64(vl, vld1q_f64(current + i)));
        const float64x2_t info = vaddq_f64(vld1q_f64(den + i), vl);
        vst1q_f64(out + i, vmulq_f64(vs, vdivq_f64(grad, info)));
    }
    for (; i < n; ++i) {
        out[i] = step * ((num[i] - lambda * current[i]) / (den[i] + lambda));
    }
}

} // namespace glmpca::kernels::neon

#endif
