#include <array>
#include <cmath>

#include "confreg/mat3.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace confreg;
using testutil::random_mat;
using testutil::rel_err;

namespace {

// Sum over the six permutations of {0, 1, 2}.
double leibniz_det(const Mat3& a)
{
    constexpr std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}, {1, 0, 2}}};
    constexpr std::array<double, 6> sign{1, 1, 1, -1, -1, -1};
    double s = 0.0;
    for (std::size_t p = 0; p < perms.size(); ++p) {
        s += sign[p] * a(0, perms[p][0]) * a(1, perms[p][1]) * a(2, perms[p][2]);
    }
    return s;
}

double max_abs(const Mat3& a)
{
    double m = 0.0;
    for (double v : a.m) {
        m = std::max(m, std::fabs(v));
    }
    return m;
}

} // namespace

TEST_SUITE("mat3")
{
    TEST_CASE("det on fixed matrices")
    {
        CHECK(det(Mat3::identity()) == 1.0);
        CHECK(det(Mat3::diag(1, 2, 3)) == 6.0);
    }

    TEST_CASE("det matches the permutation sum")
    {
        Rng rng(1);
        for (int n = 0; n < 50; ++n) {
            const Mat3 a = random_mat(rng, -2, 2);
            CHECK(rel_err(det(a), leibniz_det(a), 1e-12) <= 1e-12);
        }
    }

    TEST_CASE("cofactor")
    {
        CHECK(cofactor(Mat3::identity()) == Mat3::identity());
        CHECK(cofactor(Mat3::diag(1, 2, 3)) == Mat3::diag(6, 3, 2));

        Rng rng(2);
        for (int n = 0; n < 50; ++n) {
            const Mat3 a = random_mat(rng, -2, 2);
            const Mat3 r = a * transpose(cofactor(a)) - det(a) * Mat3::identity();
            CHECK(max_abs(r) <= 1e-12);
            const double c = rng.uniform(-3, 3);
            const Mat3 diff = cofactor(c * a) - (c * c) * cofactor(a);
            CHECK(max_abs(diff) <= 1e-12 * (1 + c * c) * 8);
        }
    }

    TEST_CASE("frob")
    {
        CHECK(frob(Mat3::identity()) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
        CHECK(frob(Mat3::zero()) == 0.0);
        Mat3 ones;
        ones.m.fill(1.0);
        CHECK(frob(ones) == 3.0);

        Rng rng(3);
        for (int n = 0; n < 50; ++n) {
            const Mat3 a = random_mat(rng, -2, 2);
            const Mat3 r = testutil::random_rotation(rng);
            CHECK(rel_err(frob(r * a), frob(a)) <= 1e-13);
        }
    }

    TEST_CASE("det is multiplicative")
    {
        Rng rng(4);
        for (int n = 0; n < 100; ++n) {
            const Mat3 a = random_mat(rng, -2, 2);
            const Mat3 b = random_mat(rng, -2, 2);
            const double lhs = det(a * b);
            const double rhs = det(a) * det(b);
            // Relative to the size of the products involved, not to a possibly tiny det.
            CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, std::fabs(rhs)) * 16);
        }
    }

    TEST_CASE("rotations are orthonormal with unit determinant")
    {
        Rng rng(5);
        for (int n = 0; n < 20; ++n) {
            const Mat3 r = testutil::random_rotation(rng);
            CHECK(max_abs(r * transpose(r) - Mat3::identity()) <= 1e-14);
            CHECK(det(r) == doctest::Approx(1.0).epsilon(1e-14));
        }
    }

    TEST_CASE("cofactor_vjp matches finite differences")
    {
        Rng rng(6);
        for (int n = 0; n < 20; ++n) {
            const Mat3 a = random_mat(rng, -1.5, 1.5);
            const Mat3 g = random_mat(rng, -1, 1);
            const Mat3 v = cofactor_vjp(a, g);
            for (int e = 0; e < 9; ++e) {
                Mat3 up = a, dn = a;
                up.m[e] += 1e-6;
                dn.m[e] -= 1e-6;
                double fd = 0.0;
                const Mat3 cu = cofactor(up), cd = cofactor(dn);
                for (int k = 0; k < 9; ++k) {
                    fd += g.m[k] * (cu.m[k] - cd.m[k]) / 2e-6;
                }
                CHECK(std::fabs(v.m[e] - fd) <= 1e-8);
            }
        }
    }

    TEST_CASE("is_finite")
    {
        Mat3 a = Mat3::identity();
        CHECK(is_finite(a));
        a(1, 2) = std::nan("");
        CHECK_FALSE(is_finite(a));
    }
}
