// Compiled with -mavx512f -mavx512dq -mfma.

#include <immintrin.h>

#include "gemm_driver.hpp"
#include "sincos_impl.hpp"

namespace confreg::simd::detail {
namespace {

struct MicroAvx512 {
    static constexpr std::size_t MR = 12;
    static constexpr std::size_t NR = 16;

    static void run(std::size_t kc, const double* a, const double* b, double* tile)
    {
        __m512d acc[MR][2];
        for (std::size_t r = 0; r < MR; ++r) {
            acc[r][0] = _mm512_setzero_pd();
            acc[r][1] = _mm512_setzero_pd();
        }
        for (std::size_t p = 0; p < kc; ++p) {
            const __m512d b0 = _mm512_load_pd(b);
            const __m512d b1 = _mm512_load_pd(b + 8);
            for (std::size_t r = 0; r < MR; ++r) {
                const __m512d av = _mm512_set1_pd(a[r]);
                acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
                acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
            }
            a += MR;
            b += NR;
        }
        for (std::size_t r = 0; r < MR; ++r) {
            _mm512_store_pd(tile + r * NR, acc[r][0]);
            _mm512_store_pd(tile + r * NR + 8, acc[r][1]);
        }
    }
};

struct VecAvx512 {
    using vec = __m512d;
    using mask = __mmask8;
    static constexpr std::size_t width = 8;
    static vec set1(double v) { return _mm512_set1_pd(v); }
    static vec load(const double* p) { return _mm512_loadu_pd(p); }
    static void store(double* p, vec v) { _mm512_storeu_pd(p, v); }
    static vec add(vec a, vec b) { return _mm512_add_pd(a, b); }
    static vec sub(vec a, vec b) { return _mm512_sub_pd(a, b); }
    static vec mul(vec a, vec b) { return _mm512_mul_pd(a, b); }
    static vec fmadd(vec a, vec b, vec c) { return _mm512_fmadd_pd(a, b, c); }
    static vec abs(vec a) { return _mm512_abs_pd(a); }
    static vec floor(vec a) { return _mm512_roundscale_pd(a, _MM_FROUND_TO_NEG_INF | _MM_FROUND_NO_EXC); }
    static mask lt(vec a, vec b) { return _mm512_cmp_pd_mask(a, b, _CMP_LT_OQ); }
    static mask eq(vec a, vec b) { return _mm512_cmp_pd_mask(a, b, _CMP_EQ_OQ); }
    static mask mask_or(mask a, mask b) { return static_cast<mask>(a | b); }
    static vec select(mask m, vec t, vec f) { return _mm512_mask_blend_pd(m, f, t); }
    static vec neg_if(mask m, vec v) { return _mm512_mask_xor_pd(v, m, v, _mm512_set1_pd(-0.0)); }
};

} // namespace

void gemm_avx512(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
                 std::size_t ldc, double* work)
{
    gemm_blocked<MicroAvx512>(ta, tb, m, n, k, a, lda, b, ldb, beta, c, ldc, work);
}

void sincos_avx512(const double* x, std::size_t n, double scale, double* s, double* c)
{
    sincos_array<VecAvx512>(x, n, scale, s, c);
}

} // namespace confreg::simd::detail
