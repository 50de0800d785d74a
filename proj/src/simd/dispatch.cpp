#include "confreg/simd/kernels.hpp"

#include <cstdlib>
#include <string>
#include <vector>

#include "gemm_driver.hpp"

namespace confreg::simd {

namespace detail {
void gemm_scalar(Trans, Trans, std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                 const double*, std::size_t, double, double*, std::size_t, double*);
void sincos_scalar(const double*, std::size_t, double, double*, double*);
#ifdef CONFREG_HAVE_AVX2
void gemm_avx2(Trans, Trans, std::size_t, std::size_t, std::size_t, const double*, std::size_t,
               const double*, std::size_t, double, double*, std::size_t, double*);
void sincos_avx2(const double*, std::size_t, double, double*, double*);
#endif
#ifdef CONFREG_HAVE_AVX512
void gemm_avx512(Trans, Trans, std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                 const double*, std::size_t, double, double*, std::size_t, double*);
void sincos_avx512(const double*, std::size_t, double, double*, double*);
#endif
} // namespace detail

namespace {

constexpr KernelTable kScalar{Isa::scalar, "scalar", &detail::gemm_scalar, &detail::sincos_scalar};
#ifdef CONFREG_HAVE_AVX2
constexpr KernelTable kAvx2{Isa::avx2, "avx2", &detail::gemm_avx2, &detail::sincos_avx2};
#endif
#ifdef CONFREG_HAVE_AVX512
constexpr KernelTable kAvx512{Isa::avx512, "avx512", &detail::gemm_avx512, &detail::sincos_avx512};
#endif

const KernelTable& select_default()
{
    if (const char* env = std::getenv("CONFREG_KERNEL")) {
        const std::string want(env);
        if (want == "scalar") {
            return kernels_for(Isa::scalar);
        }
        if (want == "avx2") {
            return kernels_for(Isa::avx2);
        }
        if (want == "avx512") {
            return kernels_for(Isa::avx512);
        }
    }
    if (isa_supported(Isa::avx512)) {
        return kernels_for(Isa::avx512);
    }
    if (isa_supported(Isa::avx2)) {
        return kernels_for(Isa::avx2);
    }
    return kScalar;
}

} // namespace

std::size_t gemm_workspace_size()
{
    return detail::kWorkspace;
}

bool isa_supported(Isa isa)
{
    switch (isa) {
    case Isa::scalar:
        return true;
    case Isa::avx2:
#if defined(CONFREG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Isa::avx512:
#if defined(CONFREG_HAVE_AVX512) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq");
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& kernels_for(Isa isa)
{
    if (!isa_supported(isa)) {
        return kScalar;
    }
    switch (isa) {
#ifdef CONFREG_HAVE_AVX2
    case Isa::avx2:
        return kAvx2;
#endif
#ifdef CONFREG_HAVE_AVX512
    case Isa::avx512:
        return kAvx512;
#endif
    default:
        return kScalar;
    }
}

const KernelTable& kernels()
{
    static const KernelTable& table = select_default();
    return table;
}

void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          std::size_t lda, const double* b, std::size_t ldb, double beta, double* c, std::size_t ldc)
{
    thread_local std::vector<double> work;
    const KernelTable& table = kernels();
    if (table.isa != Isa::scalar && work.empty()) {
        work.resize(gemm_workspace_size());
    }
    table.gemm(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc, work.data());
}

std::string_view isa_name(Isa isa)
{
    switch (isa) {
    case Isa::scalar:
        return "scalar";
    case Isa::avx2:
        return "avx2";
    case Isa::avx512:
        return "avx512";
    }
    return "unknown";
}

} // namespace confreg::simd
