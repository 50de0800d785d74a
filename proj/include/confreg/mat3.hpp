#pragma once

#include <array>
#include <cmath>

namespace confreg {

using Vec3 = std::array<double, 3>;

// 3x3 real matrix, row-major; rows index output components, columns input
// components (entry (i, j) holds d phi_i / d x_j for a deformation gradient).
struct Mat3 {
    std::array<double, 9> m{};

    constexpr double& operator()(int r, int c) { return m[r * 3 + c]; }
    constexpr double operator()(int r, int c) const { return m[r * 3 + c]; }

    static constexpr Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }
    static constexpr Mat3 zero() { return Mat3{}; }
    static constexpr Mat3 diag(double a, double b, double c) { return Mat3{{a, 0, 0, 0, b, 0, 0, 0, c}}; }

    friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

constexpr Mat3 operator+(const Mat3& a, const Mat3& b)
{
    Mat3 r;
    for (int i = 0; i < 9; ++i) {
        r.m[i] = a.m[i] + b.m[i];
    }
    return r;
}

constexpr Mat3 operator-(const Mat3& a, const Mat3& b)
{
    Mat3 r;
    for (int i = 0; i < 9; ++i) {
        r.m[i] = a.m[i] - b.m[i];
    }
    return r;
}

constexpr Mat3 operator*(double s, const Mat3& a)
{
    Mat3 r;
    for (int i = 0; i < 9; ++i) {
        r.m[i] = s * a.m[i];
    }
    return r;
}

constexpr Mat3 operator*(const Mat3& a, const Mat3& b)
{
    Mat3 r;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
        }
    }
    return r;
}

constexpr Vec3 operator*(const Mat3& a, const Vec3& v)
{
    return {a(0, 0) * v[0] + a(0, 1) * v[1] + a(0, 2) * v[2],
            a(1, 0) * v[0] + a(1, 1) * v[1] + a(1, 2) * v[2],
            a(2, 0) * v[0] + a(2, 1) * v[1] + a(2, 2) * v[2]};
}

constexpr Mat3 transpose(const Mat3& a)
{
    return Mat3{{a(0, 0), a(1, 0), a(2, 0), a(0, 1), a(1, 1), a(2, 1), a(0, 2), a(1, 2), a(2, 2)}};
}

// Cofactor expansion along the first row.
constexpr double det(const Mat3& a)
{
    return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
         - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
         + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

// Signed 2x2 minors: A * cofactor(A)^T = det(A) I.
constexpr Mat3 cofactor(const Mat3& a)
{
    Mat3 c;
    c(0, 0) = a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1);
    c(0, 1) = a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2);
    c(0, 2) = a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0);
    c(1, 0) = a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2);
    c(1, 1) = a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0);
    c(1, 2) = a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1);
    c(2, 0) = a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1);
    c(2, 1) = a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2);
    c(2, 2) = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    return c;
}

// Vector-Jacobian product of the cofactor map: returns sum_ij g_ij * d cof(A)_ij / dA.
Mat3 cofactor_vjp(const Mat3& a, const Mat3& g);

constexpr double frob_sq(const Mat3& a)
{
    double s = 0.0;
    for (double v : a.m) {
        s += v * v;
    }
    return s;
}

inline double frob(const Mat3& a)
{
    return std::sqrt(frob_sq(a));
}

bool is_finite(const Mat3& a);

// Rotation matrix of a (not necessarily normalised, nonzero) quaternion w + xi + yj + zk.
Mat3 rotation_from_quaternion(double w, double x, double y, double z);

} // namespace confreg
