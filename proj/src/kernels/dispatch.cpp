#include "glmpca/errors.hpp"
#include "glmpca/kernels.hpp"

#include <atomic>
#include <string>

namespace glmpca::kernels {

#define GLMPCA_DECLARE_KERNELS                                                                       \
    void weighted_dots(const double*, const double*, const double*, std::size_t, double*, double*); \
    void dual_axpy(double, const double*, double, const double*, std::size_t, double*, double*);    \
    void axpy(double, const double*, std::size_t, double*);                                          \
    void scoring_step(const double*, const double*, const double*, double, double, std::size_t, double*);

#if defined(__x86_64__) || defined(_M_X64)
#define GLMPCA_HAVE_AVX2 1
namespace avx2 {
GLMPCA_DECLARE_KERNELS
}
#endif

#if defined(__aarch64__) || defined(_M_ARM64)
#define GLMPCA_HAVE_NEON 1
namespace neon {
GLMPCA_DECLARE_KERNELS
}
#endif

#undef GLMPCA_DECLARE_KERNELS

namespace {

constexpr KernelTable kScalar{Backend::scalar, scalar::weighted_dots, scalar::dual_axpy, scalar::axpy,
                              scalar::scoring_step};
#ifdef GLMPCA_HAVE_AVX2
constexpr KernelTable kAvx2{Backend::avx2, avx2::weighted_dots, avx2::dual_axpy, avx2::axpy,
                            avx2::scoring_step};
#endif
#ifdef GLMPCA_HAVE_NEON
constexpr KernelTable kNeon{Backend::neon, neon::weighted_dots, neon::dual_axpy, neon::axpy,
                            neon::scoring_step};
#endif

bool cpu_supports(Backend backend) {
    switch (backend) {
    case Backend::scalar:
        return true;
    case Backend::avx2:
#ifdef GLMPCA_HAVE_AVX2
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Backend::neon:
#ifdef GLMPCA_HAVE_NEON
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable* detect() {
    if (cpu_supports(Backend::avx2)) {
        return &table(Backend::avx2);
    }
    if (cpu_supports(Backend::neon)) {
        return &table(Backend::neon);
    }
    return &kScalar;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> selected{detect()};
    return selected;
}

} // namespace

const KernelTable& table(Backend backend) {
    if (!cpu_supports(backend)) {
        throw ConfigError("kernel backend '" + std::string(to_string(backend)) + "' is not available");
    }
    switch (backend) {
#ifdef GLMPCA_HAVE_AVX2
    case Backend::avx2:
        return kAvx2;
#endif
#ifdef GLMPCA_HAVE_NEON
    case Backend::neon:
        return kNeon;
#endif
    default:
        return kScalar;
    }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool available(Backend backend) { return cpu_supports(backend); }

std::vector<Backend> available_backends() {
    std::vector<Backend> out;
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
        if (cpu_supports(b)) {
            out.push_back(b);
        }
    }
    return out;
}

void select_backend(Backend backend) { current().store(&table(backend), std::memory_order_release); }

void reset_backend() { current().store(detect(), std::memory_order_release); }

std::string_view to_string(Backend backend) {
    switch (backend) {
    case Backend::scalar:
        return "scalar";
    case Backend::avx2:
        return "avx2";
    case Backend::neon:
        return "neon";
    }
    return "unknown";
}

} // namespace glmpca::kernels
