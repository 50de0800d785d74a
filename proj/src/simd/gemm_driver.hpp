#pragma once

// Packed, cache-blocked GEMM driver shared by the vector kernels. The
// micro-kernel is supplied by the including translation unit, which is
// compiled with the matching -m flags. Nothing here touches the standard
// containers so that no inline library code is emitted with wider ISA
// flags than the caller.

#include <cstddef>

#include "confreg/simd/kernels.hpp"

namespace confreg::simd::detail {

inline constexpr std::size_t kKc = 256;
inline constexpr std::size_t kMc = 96;
inline constexpr std::size_t kNc = 4096;
inline constexpr std::size_t kWorkspace = kMc * kKc + kKc * kNc + 512;

template <int MR>
inline void pack_a(Trans ta, const double* a, std::size_t lda, std::size_t i0, std::size_t mc,
                   std::size_t p0, std::size_t kc, double* dst)
{
    for (std::size_t ir = 0; ir < mc; ir += MR) {
        const std::size_t rows = (mc - ir < MR) ? mc - ir : MR;
        for (std::size_t p = 0; p < kc; ++p) {
            for (std::size_t r = 0; r < MR; ++r) {
                double v = 0.0;
                if (r < rows) {
                    const std::size_t i = i0 + ir + r;
                    v = (ta == Trans::no) ? a[i * lda + p0 + p] : a[(p0 + p) * lda + i];
                }
                *dst++ = v;
            }
        }
    }
}

template <int NR>
inline void pack_b(Trans tb, const double* b, std::size_t ldb, std::size_t j0, std::size_t nc,
                   std::size_t p0, std::size_t kc, double* dst)
{
    for (std::size_t jr = 0; jr < nc; jr += NR) {
        const std::size_t cols = (nc - jr < NR) ? nc - jr : NR;
        for (std::size_t p = 0; p < kc; ++p) {
            if (tb == Trans::no && cols == NR) {
                const double* src = b + (p0 + p) * ldb + j0 + jr;
                for (std::size_t c = 0; c < NR; ++c) {
                    dst[c] = src[c];
                }
                dst += NR;
                continue;
            }
            for (std::size_t c = 0; c < NR; ++c) {
                double v = 0.0;
                if (c < cols) {
                    const std::size_t j = j0 + jr + c;
                    v = (tb == Trans::no) ? b[(p0 + p) * ldb + j] : b[j * ldb + p0 + p];
                }
                *dst++ = v;
            }
        }
    }
}

// Micro::run(kc, a_panel, b_panel, tile) writes the MR x NR product of the
// packed panels into `tile` (row-major, stride NR).
template <class Micro>
void gemm_blocked(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
                  const double* a, std::size_t lda, const double* b, std::size_t ldb,
                  double beta, double* c, std::size_t ldc, double* work)
{
    constexpr std::size_t MR = Micro::MR;
    constexpr std::size_t NR = Micro::NR;
    static_assert(kMc % MR == 0 && kNc % NR == 0);

    if (m == 0 || n == 0) {
        return;
    }
    if (k == 0) {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                c[i * ldc + j] = (beta == 0.0) ? 0.0 : beta * c[i * ldc + j];
            }
        }
        return;
    }

    // 64-byte aligned carve-up of the workspace.
    auto align = [](double* p) {
        auto addr = reinterpret_cast<std::size_t>(p);
        return reinterpret_cast<double*>((addr + 63) & ~std::size_t{63});
    };
    double* a_pack = align(work);
    double* b_pack = align(a_pack + kMc * kKc);
    alignas(64) double tile[MR * NR];

    for (std::size_t jc = 0; jc < n; jc += kNc) {
        const std::size_t nc = (n - jc < kNc) ? n - jc : kNc;
        for (std::size_t pc = 0; pc < k; pc += kKc) {
            const std::size_t kc = (k - pc < kKc) ? k - pc : kKc;
            const bool first = (pc == 0);
            pack_b<NR>(tb, b, ldb, jc, nc, pc, kc, b_pack);
            for (std::size_t ic = 0; ic < m; ic += kMc) {
                const std::size_t mc = (m - ic < kMc) ? m - ic : kMc;
                pack_a<MR>(ta, a, lda, ic, mc, pc, kc, a_pack);
                for (std::size_t jr = 0; jr < nc; jr += NR) {
                    const std::size_t cols = (nc - jr < NR) ? nc - jr : NR;
                    const double* bp = b_pack + (jr / NR) * NR * kc;
                    for (std::size_t ir = 0; ir < mc; ir += MR) {
                        const std::size_t rows = (mc - ir < MR) ? mc - ir : MR;
                        const double* ap = a_pack + (ir / MR) * MR * kc;
                        Micro::run(kc, ap, bp, tile);
                        double* cblk = c + (ic + ir) * ldc + jc + jr;
                        for (std::size_t r = 0; r < rows; ++r) {
                            double* crow = cblk + r * ldc;
                            const double* trow = tile + r * NR;
                            if (!first) {
                                for (std::size_t j = 0; j < cols; ++j) {
                                    crow[j] += trow[j];
                                }
                            } else if (beta == 0.0) {
                                for (std::size_t j = 0; j < cols; ++j) {
                                    crow[j] = trow[j];
                                }
                            } else {
                                for (std::size_t j = 0; j < cols; ++j) {
                                    crow[j] = beta * crow[j] + trow[j];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace confreg::simd::detail
