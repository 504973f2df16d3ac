#include "glmpca/kernels.hpp"

namespace glmpca::kernels::scalar {

void weighted_dots(const double* g, const double* q, const double* x, std::size_t n, double* num,
                   double* den) {
    double s_num = 0.0;
    double s_den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        s_num += g[j] * x[j];
        s_den += q[j] * (x[j] * x[j]);
    }
    *num = s_num;
    *den = s_den;
}

void dual_axpy(double a, const double* g, double b, const double* q, std::size_t n, double* num,
               double* den) {
    for (std::size_t j = 0; j < n; ++j) {
        num[j] += a * g[j];
        den[j] += b * q[j];
    }
}

void axpy(double a, const double* x, std::size_t n, double* y) {
    for (std::size_t j = 0; j < n; ++j) {
        y[j] += a * x[j];
    }
}

void scoring_step(const double* num, const double* den, const double* current, double lambda,
                  double step, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = step * ((num[i] - lambda * current[i]) / (den[i] + lambda));
    }
}

} // namespace glmpca::kernels::scalar
