#include <cmath>
#include <cstddef>

#include "confreg/simd/kernels.hpp"

namespace confreg::simd::detail {

void gemm_scalar(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
                 std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
                 std::size_t ldc, double* /*work*/)
{
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = (ta == Trans::no) ? a[i * lda + p] : a[p * lda + i];
                const double bv = (tb == Trans::no) ? b[p * ldb + j] : b[j * ldb + p];
                sum += av * bv;
            }
            double& out = c[i * ldc + j];
            out = (beta == 0.0) ? sum : beta * out + sum;
        }
    }
}

void sincos_scalar(const double* x, std::size_t n, double scale, double* s, double* c)
{
    for (std::size_t i = 0; i < n; ++i) {
        const double arg = scale * x[i];
        s[i] = std::sin(arg);
        c[i] = std::cos(arg);
    }
}

} // namespace confreg::simd::detail
