#pragma once

// Data-parallel inner loops of the engine. Every kernel has a scalar
// reference implementation and optional AVX2 / AVX-512 variants; the
// variant is chosen once at startup from CPUID (override with
// CONFREG_KERNEL=scalar|avx2|avx512).

#include <cstddef>
#include <string_view>

namespace confreg::simd {

enum class Isa { scalar, avx2, avx512 };

enum class Trans { no, yes };

// C = op(A) * op(B) + beta * C, row-major, op(A) is M x K, op(B) is K x N.
// `work` must hold gemm_workspace_size() doubles.
//
// Contract relied on by the network code: every element of C is
// accumulated over k in the same order no matter how large M or N are, so
// a row of C is bitwise independent of the other rows in the call.
using GemmFn = void (*)(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                        const double* a, std::size_t lda, const double* b, std::size_t ldb,
                        double beta, double* c, std::size_t ldc, double* work);

// s[i] = sin(scale * x[i]), c[i] = cos(scale * x[i]).
// Result for an element does not depend on its position in the array.
using SinCosFn = void (*)(const double* x, std::size_t n, double scale, double* s, double* c);

struct KernelTable {
    Isa isa;
    std::string_view name;
    GemmFn gemm;
    SinCosFn sincos;
};

std::size_t gemm_workspace_size();

bool isa_supported(Isa isa);

// Table for a specific ISA; falls back to scalar when unsupported.
const KernelTable& kernels_for(Isa isa);

// The table selected for this process.
const KernelTable& kernels();

// Convenience wrapper using the selected table and a per-thread workspace.
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc);

inline void sincos(const double* x, std::size_t n, double scale, double* s, double* c)
{
    kernels().sincos(x, n, scale, s, c);
}

std::string_view isa_name(Isa isa);

} // namespace confreg::simd
