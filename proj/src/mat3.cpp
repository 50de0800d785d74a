#include "confreg/mat3.hpp"

namespace confreg {

namespace {

constexpr int levi_civita(int i, int j, int k)
{
    return (i - j) * (j - k) * (k - i) / 2;
}

} // namespace

// cof(A)_ij = 1/2 eps_imn eps_jpq A_mp A_nq, so
// d cof(A)_ij / dA_mp = eps_imn eps_jpq A_nq.
Mat3 cofactor_vjp(const Mat3& a, const Mat3& g)
{
    Mat3 out;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) {
                continue;
            }
            for (int m = 0; m < 3; ++m) {
                for (int n = 0; n < 3; ++n) {
                    const int e1 = levi_civita(i, m, n);
                    if (e1 == 0) {
                        continue;
                    }
                    for (int p = 0; p < 3; ++p) {
                        for (int q = 0; q < 3; ++q) {
                            const int e2 = levi_civita(j, p, q);
                            if (e2 != 0) {
                                out(m, p) += gij * e1 * e2 * a(n, q);
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

bool is_finite(const Mat3& a)
{
    for (double v : a.m) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

Mat3 rotation_from_quaternion(double w, double x, double y, double z)
{
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    w /= n;
    x /= n;
    y /= n;
    z /= n;
    return Mat3{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
                 2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                 2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
}

} // namespace confreg
