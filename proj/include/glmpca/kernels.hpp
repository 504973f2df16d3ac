#pragma once

// Data-parallel inner loops of the Fisher-scoring sweep.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2+FMA (x86-64) or NEON (aarch64) variant. The variant is
// chosen once at runtime from CPU feature detection; tests can pin a backend
// with select_backend(). Vector variants reassociate the reductions, so they
// agree with the scalar reference to rounding, not bit-for-bit.

#include <cstddef>
#include <string_view>
#include <vector>

namespace glmpca::kernels {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
    Backend backend;

    /// num = sum_j g[j] * x[j],  den = sum_j q[j] * x[j]^2
    void (*weighted_dots)(const double* g, const double* q, const double* x, std::size_t n,
                          double* num, double* den);

    /// num[j] += a * g[j],  den[j] += b * q[j]
    void (*dual_axpy)(double a, const double* g, double b, const double* q, std::size_t n,
                      double* num, double* den);

    /// y[j] += a * x[j]
    void (*axpy)(double a, const double* x, std::size_t n, double* y);

    /// out[i] = step * (num[i] - lambda * current[i]) / (den[i] + lambda)
    void (*scoring_step)(const double* num, const double* den, const double* current, double lambda,
                         double step, std::size_t n, double* out);
};

namespace scalar {
void weighted_dots(const double* g, const double* q, const double* x, std::size_t n, double* num,
                   double* den);
void dual_axpy(double a, const double* g, double b, const double* q, std::size_t n, double* num,
               double* den);
void axpy(double a, const double* x, std::size_t n, double* y);
void scoring_step(const double* num, const double* den, const double* current, double lambda,
                  double step, std::size_t n, double* out);
} // namespace scalar

/// Kernel table for a specific backend. Throws ConfigError when the backend
/// was not compiled in or the CPU lacks the instructions.
const KernelTable& table(Backend backend);

/// Kernel table currently used by the library.
const KernelTable& active();

bool available(Backend backend);
std::vector<Backend> available_backends();

/// Pins the backend used by active(). Throws ConfigError if unavailable.
void select_backend(Backend backend);

/// Restores the CPU-detected default.
void reset_backend();

std::string_view to_string(Backend backend);

} // namespace glmpca::kernels
