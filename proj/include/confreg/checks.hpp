#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace confreg {

// Outcome of one self-verification suite. `worst` is the largest error
// observed, in the same units as `tolerance`.
struct SuiteResult {
    std::string name;
    std::size_t cases = 0;
    std::size_t failures = 0;
    double worst = 0.0;
    double tolerance = 0.0;
    std::string detail;

    bool passed() const { return cases > 0 && failures == 0; }
};

// density(I) for random coefficients; absolute error.
SuiteResult check_energy_normalization(std::uint64_t seed, int cases = 100, double tolerance = 1e-12);

// Distortion terms on random c R against a1 3^(9/2) and 27 a2; relative error.
SuiteResult check_conformal_invariance(std::uint64_t seed, int cases = 200, double tolerance = 1e-9);

// density_grad against central differences, relative to the largest entry.
SuiteResult check_energy_gradients(std::uint64_t seed, int cases = 200, double tolerance = 1e-5);

// check_gradients on random tiny networks (2-3 layers, at most 16 hidden),
// alternating NCC modes, every loss component.
SuiteResult check_network_gradients(std::uint64_t seed, int nets = 20, double tolerance = 1e-4);

// spatial_jacobian against central differences of forward().
SuiteResult check_spatial_jacobian(std::uint64_t seed, int cases = 1000, double tolerance = 1e-6);

// A fresh full-size model is the identity: exact map, unit determinant,
// zero regulariser and total loss -1 on a self-pair.
SuiteResult check_identity_start(std::uint64_t seed, double tolerance = 1e-9);

} // namespace confreg
