#include "confreg/energy.hpp"

#include <cmath>
#include <string>

#include "confreg/error.hpp"

namespace confreg {

EnergyParams::EnergyParams(double a1, double a2, double a3, double a4, double alpha, double eps_det)
    : a1_(a1), a2_(a2), a3_(a3), a4_(a4), alpha_(alpha), eps_det_(eps_det)
{
    if (!(a1 > 0 && a2 > 0 && a3 > 0 && a4 > 0)) {
        throw UsageError("energy coefficients a1..a4 must be positive");
    }
    if (!(alpha > 1)) {
        throw UsageError("energy exponent alpha must exceed 1, got " + std::to_string(alpha));
    }
    if (!(eps_det > 0 && eps_det < 1)) {
        throw UsageError("eps_det must lie in (0, 1), got " + std::to_string(eps_det));
    }
    offset_ = std::pow(3.0, 4.5) * a1 + 27.0 * a2 + a4;
}

namespace {

// One term of W seen as a function V(F, d) where d is treated as an
// independent argument: value, dV/dF at fixed d, dV/dd, and d(dV/dd)/dF.
struct TermParts {
    double value = 0.0;
    Mat3 d_f;
    double d_d = 0.0;
    Mat3 d_d_f;
};

struct Invariants {
    Mat3 f;
    Mat3 cof;
    double det;
    double nf2;
    double nc2;
};

Invariants invariants(const Mat3& f)
{
    Invariants inv;
    inv.f = f;
    inv.cof = cofactor(f);
    inv.det = det(f);
    inv.nf2 = frob_sq(f);
    inv.nc2 = frob_sq(inv.cof);
    return inv;
}

TermParts term_parts(const Invariants& inv, const EnergyParams& p, EnergyTerm term, double d)
{
    TermParts t;
    switch (term) {
    case EnergyTerm::length: {
        // |F|^9 = (|F|^2)^4.5, d|F|^9/dF = 9 |F|^7 F
        const double nf7 = std::pow(inv.nf2, 3.5);
        const double nf9 = nf7 * inv.nf2;
        const double d3 = d * d * d;
        const Mat3 dnf9 = (9.0 * nf7) * inv.f;
        t.value = p.a1() * nf9 / d3;
        t.d_f = (p.a1() / d3) * dnf9;
        t.d_d = -3.0 * p.a1() * nf9 / (d3 * d);
        t.d_d_f = (-3.0 * p.a1() / (d3 * d)) * dnf9;
        break;
    }
    case EnergyTerm::area: {
        // d|C|^6/dF = 3 |C|^4 d|C|^2/dF, with d|C|^2/dF pulled back through cof.
        const double nc4 = inv.nc2 * inv.nc2;
        const double nc6 = nc4 * inv.nc2;
        const double d4 = d * d * d * d;
        const Mat3 dnc6 = (3.0 * nc4) * cofactor_vjp(inv.f, 2.0 * inv.cof);
        t.value = p.a2() * nc6 / d4;
        t.d_f = (p.a2() / d4) * dnc6;
        t.d_d = -4.0 * p.a2() * nc6 / (d4 * d);
        t.d_d_f = (-4.0 * p.a2() / (d4 * d)) * dnc6;
        break;
    }
    case EnergyTerm::volume:
        t.value = p.a3() * (d - 1.0) * (d - 1.0);
        t.d_d = 2.0 * p.a3() * (d - 1.0);
        break;
    case EnergyTerm::inverse_volume: {
        const double da = std::pow(d, -p.alpha());
        t.value = p.a4() * da;
        t.d_d = -p.alpha() * p.a4() * da / d;
        break;
    }
    }
    return t;
}

// Value and full gradient of one term including the linear extension below eps_det.
double term_value_grad(const Invariants& inv, const EnergyParams& p, EnergyTerm term, Mat3* grad)
{
    const double eps = p.eps_det();
    if (inv.det > eps) {
        const TermParts t = term_parts(inv, p, term, inv.det);
        if (grad) {
            *grad = t.d_f + t.d_d * inv.cof;
        }
        return t.value;
    }
    // V(F, eps) + s (eps - d), s = -dV/dd(F, eps) >= 0.
    const TermParts t = term_parts(inv, p, term, eps);
    const double slope = -t.d_d;
    const double gap = eps - inv.det;
    if (grad) {
        *grad = t.d_f + (-gap) * t.d_d_f - slope * inv.cof;
    }
    return t.value + slope * gap;
}

constexpr EnergyTerm kTerms[] = {EnergyTerm::length, EnergyTerm::area, EnergyTerm::volume,
                                 EnergyTerm::inverse_volume};

} // namespace

double density(const Mat3& j, const EnergyParams& params)
{
    const Invariants inv = invariants(j);
    double w = 0.0;
    for (EnergyTerm term : kTerms) {
        w += term_value_grad(inv, params, term, nullptr);
    }
    return w - params.offset();
}

double density_with_grad(const Mat3& j, const EnergyParams& params, Mat3& grad)
{
    const Invariants inv = invariants(j);
    double w = 0.0;
    grad = Mat3::zero();
    for (EnergyTerm term : kTerms) {
        Mat3 g;
        w += term_value_grad(inv, params, term, &g);
        grad = grad + g;
    }
    return w - params.offset();
}

Mat3 density_grad(const Mat3& j, const EnergyParams& params)
{
    Mat3 g;
    density_with_grad(j, params, g);
    return g;
}

DensityTerms density_terms(const Mat3& j, const EnergyParams& params)
{
    const Invariants inv = invariants(j);
    DensityTerms out;
    out.length = term_parts(inv, params, EnergyTerm::length, inv.det).value;
    out.area = term_parts(inv, params, EnergyTerm::area, inv.det).value;
    out.volume = term_parts(inv, params, EnergyTerm::volume, inv.det).value;
    out.inverse_volume = term_parts(inv, params, EnergyTerm::inverse_volume, inv.det).value;
    return out;
}

double term_with_grad(const Mat3& j, const EnergyParams& params, EnergyTerm term, Mat3& grad)
{
    return term_value_grad(invariants(j), params, term, &grad);
}

} // namespace confreg
