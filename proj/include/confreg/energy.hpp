#pragma once

#include "confreg/mat3.hpp"

namespace confreg {

// Coefficients of the conformal-invariant hyperelastic stored energy
//
//   W(J) = a1 |J|^9 / d^3 + a2 |cof J|^6 / d^4 + a3 (d - 1)^2 + a4 / d^alpha
//          - 3^(9/2) a1 - 27 a2 - a4,           d = det J.
//
// The first two terms are invariant under similarity transforms c R and
// reach their constants there; the last two control volume change.
// For d <= eps_det the density continues as a C1 linear function of d.
class EnergyParams {
public:
    EnergyParams() : EnergyParams(1.0, 1.0, 1.0, 1.0, 2.0, 1e-6) {}
    EnergyParams(double a1, double a2, double a3, double a4, double alpha, double eps_det = 1e-6);

    double a1() const { return a1_; }
    double a2() const { return a2_; }
    double a3() const { return a3_; }
    double a4() const { return a4_; }
    double alpha() const { return alpha_; }
    double eps_det() const { return eps_det_; }
    // 3^(9/2) a1 + 27 a2 + a4
    double offset() const { return offset_; }

private:
    double a1_, a2_, a3_, a4_, alpha_, eps_det_;
    double offset_;
};

// The four additive pieces of W, in order of appearance.
enum class EnergyTerm { length, area, volume, inverse_volume };

struct DensityTerms {
    double length = 0.0;         // a1 |J|^9 / d^3
    double area = 0.0;           // a2 |cof J|^6 / d^4
    double volume = 0.0;         // a3 (d - 1)^2
    double inverse_volume = 0.0; // a4 / d^alpha
};

double density(const Mat3& j, const EnergyParams& params);
Mat3 density_grad(const Mat3& j, const EnergyParams& params);

// Value and gradient together; cheaper than calling both.
double density_with_grad(const Mat3& j, const EnergyParams& params, Mat3& grad);

// Raw term values for d > eps_det (no constants, no barrier).
DensityTerms density_terms(const Mat3& j, const EnergyParams& params);

// Value and gradient of a single term, each including its share of the
// barrier extension so that the four terms always sum to density() + offset.
double term_with_grad(const Mat3& j, const EnergyParams& params, EnergyTerm term, Mat3& grad);

} // namespace confreg
