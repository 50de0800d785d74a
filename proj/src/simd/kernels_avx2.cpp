// Compiled with -mavx2 -mfma.

#include <immintrin.h>

#include "gemm_driver.hpp"
#include "sincos_impl.hpp"

namespace confreg::simd::detail {
namespace {

struct MicroAvx2 {
    static constexpr std::size_t MR = 6;
    static constexpr std::size_t NR = 8;

    static void run(std::size_t kc, const double* a, const double* b, double* tile)
    {
        __m256d acc[MR][2];
        for (std::size_t r = 0; r < MR; ++r) {
            acc[r][0] = _mm256_setzero_pd();
            acc[r][1] = _mm256_setzero_pd();
        }
        for (std::size_t p = 0; p < kc; ++p) {
            const __m256d b0 = _mm256_load_pd(b);
            const __m256d b1 = _mm256_load_pd(b + 4);
            for (std::size_t r = 0; r < MR; ++r) {
                const __m256d av = _mm256_broadcast_sd(a + r);
                acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
                acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
            }
            a += MR;
            b += NR;
        }
        for (std::size_t r = 0; r < MR; ++r) {
            _mm256_store_pd(tile + r * NR, acc[r][0]);
            _mm256_store_pd(tile + r * NR + 4, acc[r][1]);
        }
    }
};

struct VecAvx2 {
    using vec = __m256d;
    using mask = __m256d;
    static constexpr std::size_t width = 4;
    static vec set1(double v) { return _mm256_set1_pd(v); }
    static vec load(const double* p) { return _mm256_loadu_pd(p); }
    static void store(double* p, vec v) { _mm256_storeu_pd(p, v); }
    static vec add(vec a, vec b) { return _mm256_add_pd(a, b); }
    static vec sub(vec a, vec b) { return _mm256_sub_pd(a, b); }
    static vec mul(vec a, vec b) { return _mm256_mul_pd(a, b); }
    static vec fmadd(vec a, vec b, vec c) { return _mm256_fmadd_pd(a, b, c); }
    static vec abs(vec a) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), a); }
    static vec floor(vec a) { return _mm256_floor_pd(a); }
    static mask lt(vec a, vec b) { return _mm256_cmp_pd(a, b, _CMP_LT_OQ); }
    static mask eq(vec a, vec b) { return _mm256_cmp_pd(a, b, _CMP_EQ_OQ); }
    static mask mask_or(mask a, mask b) { return _mm256_or_pd(a, b); }
    static vec select(mask m, vec t, vec f) { return _mm256_blendv_pd(f, t, m); }
    static vec neg_if(mask m, vec v) { return _mm256_xor_pd(v, _mm256_and_pd(m, _mm256_set1_pd(-0.0))); }
};

} // namespace

void gemm_avx2(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
               std::size_t ldc, double* work)
{
    gemm_blocked<MicroAvx2>(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc, work);
}

void sincos_avx2(const double* x, std::size_t n, double scale, double* s, double* c)
{
    sincos_array<VecAvx2>(x, n, scale, s, c);
}

} // namespace confreg::simd::detail
