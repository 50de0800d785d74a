#pragma once

// Vectorised sin/cos pair with the classic three-part pi/4 range
// reduction and the minimax polynomials from Cephes. Accurate to a couple
// of ulp for |x| below kLargeArg; larger arguments are recomputed with libm
// element by element.

#include <cmath>
#include <cstddef>

namespace confreg::simd::detail {

inline constexpr double kLargeArg = 1.0e6;

inline constexpr double kFourOverPi = 1.27323954473516268615;
inline constexpr double kDp1 = 7.85398125648498535156e-1;
inline constexpr double kDp2 = 3.77489470793079817668e-8;
inline constexpr double kDp3 = 2.69515142907905952645e-15;

inline constexpr double kSinCoef[6] = {
    1.58962301576546568060e-10, -2.50507477628578072866e-8, 2.75573136213857245213e-6,
    -1.98412698295895385996e-4, 8.33333333332211858878e-3,  -1.66666666666666307295e-1,
};
inline constexpr double kCosCoef[6] = {
    -1.13585365213876817300e-11, 2.08757008419747316778e-9,  -2.75573141792967388112e-7,
    2.48015872888517045348e-5,   -1.38888888888730564116e-3, 4.16666666666665929218e-2,
};

// V supplies: vec, mask, width, set1, load, store, add, sub, mul, fmadd,
// abs, floor, lt, eq, select(mask, if_true, if_false), neg_if(mask, v).
template <class V>
inline void sincos_block(typename V::vec x, typename V::vec& s_out, typename V::vec& c_out)
{
    using vec = typename V::vec;
    const vec ax = V::abs(x);
    vec j = V::floor(V::mul(ax, V::set1(kFourOverPi)));
    // Round odd octants up so the reduced argument lies in [-pi/4, pi/4].
    const vec half_j = V::floor(V::mul(j, V::set1(0.5)));
    const vec odd = V::sub(j, V::add(half_j, half_j));
    j = V::add(j, odd);

    vec z = V::fmadd(j, V::set1(-kDp1), ax);
    z = V::fmadd(j, V::set1(-kDp2), z);
    z = V::fmadd(j, V::set1(-kDp3), z);

    // quadrant = (j / 2) mod 4
    const vec jh = V::mul(j, V::set1(0.5));
    const vec quad = V::sub(jh, V::mul(V::floor(V::mul(jh, V::set1(0.25))), V::set1(4.0)));

    const vec zz = V::mul(z, z);
    vec ps = V::set1(kSinCoef[0]);
    vec pc = V::set1(kCosCoef[0]);
    for (int i = 1; i < 6; ++i) {
        ps = V::fmadd(ps, zz, V::set1(kSinCoef[i]));
        pc = V::fmadd(pc, zz, V::set1(kCosCoef[i]));
    }
    const vec sin_r = V::fmadd(V::mul(z, zz), ps, z);
    const vec cos_r = V::fmadd(V::mul(zz, zz), pc, V::fmadd(zz, V::set1(-0.5), V::set1(1.0)));

    const auto q1 = V::eq(quad, V::set1(1.0));
    const auto q2 = V::eq(quad, V::set1(2.0));
    const auto q3 = V::eq(quad, V::set1(3.0));
    const auto swap = V::mask_or(q1, q3);

    vec s = V::select(swap, cos_r, sin_r);
    vec c = V::select(swap, sin_r, cos_r);
    s = V::neg_if(V::mask_or(q2, q3), s);
    c = V::neg_if(V::mask_or(q1, q2), c);
    s = V::neg_if(V::lt(x, V::set1(0.0)), s);
    s_out = s;
    c_out = c;
}

template <class V>
void sincos_array(const double* x, std::size_t n, double scale, double* s, double* c)
{
    constexpr std::size_t W = V::width;
    const auto vscale = V::set1(scale);
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        typename V::vec vs, vc;
        sincos_block<V>(V::mul(V::load(x + i), vscale), vs, vc);
        V::store(s + i, vs);
        V::store(c + i, vc);
    }
    if (i < n) {
        alignas(64) double tx[W] = {};
        alignas(64) double ts[W];
        alignas(64) double tc[W];
        for (std::size_t t = 0; i + t < n; ++t) {
            tx[t] = x[i + t];
        }
        typename V::vec vs, vc;
        sincos_block<V>(V::mul(V::load(tx), vscale), vs, vc);
        V::store(ts, vs);
        V::store(tc, vc);
        for (std::size_t t = 0; i + t < n; ++t) {
            s[i + t] = ts[t];
            c[i + t] = tc[t];
        }
    }
    for (std::size_t t = 0; t < n; ++t) {
        const double arg = scale * x[t];
        if (!(std::fabs(arg) < kLargeArg)) {
            s[t] = std::sin(arg);
            c[t] = std::cos(arg);
        }
    }
}

} // namespace confreg::simd::detail
