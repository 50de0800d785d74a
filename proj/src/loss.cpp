#include "confreg/loss.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "confreg/error.hpp"

namespace confreg {

void LossConfig::validate() const
{
    if (!(lambda >= 0) || !std::isfinite(lambda)) {
        throw UsageError("lambda must be a nonnegative number");
    }
    if (ncc_mode == NccMode::windowed && (window_n < 3 || window_n % 2 == 0)) {
        throw UsageError("window_n must be odd and at least 3, got " + std::to_string(window_n));
    }
    if (!(variance_eps > 0)) {
        throw UsageError("variance_eps must be positive");
    }
}

double squared_ncc(std::span<const double> s, std::span<const double> t, double variance_eps,
                   std::span<double> d_ds)
{
    const std::size_t n = s.size();
    double mean_s = 0.0, mean_t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_s += s[i];
        mean_t += t[i];
    }
    mean_s /= static_cast<double>(n);
    mean_t /= static_cast<double>(n);
    double cross = 0.0, vs = 0.0, vt = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ds = s[i] - mean_s;
        const double dt = t[i] - mean_t;
        cross += ds * dt;
        vs += ds * ds;
        vt += dt * dt;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (vs * inv_n < variance_eps || vt * inv_n < variance_eps) {
        for (double& g : d_ds) {
            g = 0.0;
        }
        return 0.0;
    }
    const double denom = vs * vt + variance_eps;
    if (!d_ds.empty()) {
        const double a = 2.0 * cross / denom;
        const double b = -2.0 * cross * cross * vt / (denom * denom);
        for (std::size_t i = 0; i < n; ++i) {
            d_ds[i] = a * (t[i] - mean_t) + b * (s[i] - mean_s);
        }
    }
    return cross * cross / denom;
}

std::vector<Vec3> window_offsets(const Geometry& target, int window_n)
{
    const int h = window_n / 2;
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(window_n) * window_n * window_n);
    for (int k = -h; k <= h; ++k) {
        for (int j = -h; j <= h; ++j) {
            for (int i = -h; i <= h; ++i) {
                out.push_back({i * target.spacing[0], j * target.spacing[1], k * target.spacing[2]});
            }
        }
    }
    return out;
}

double ncc_window(const Volume& source, const Volume& target, const DeformationModel& model,
                  const Vec3& p_world, const LossConfig& cfg)
{
    const auto offsets = window_offsets(target.geometry(), cfg.window_n);
    std::vector<Vec3> pts(offsets.size());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            pts[i][a] = p_world[a] + offsets[i][a];
        }
    }
    std::vector<Vec3> warped(pts.size());
    forward_batch(model, pts, warped);
    std::vector<double> s(pts.size()), t(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        s[i] = sample(source, warped[i]);
        t[i] = sample(target, pts[i]);
    }
    return squared_ncc(s, t, cfg.variance_eps);
}

namespace {

[[noreturn]] void non_finite(const char* what, std::size_t index, const Vec3& p)
{
    std::ostringstream msg;
    msg << "non-finite " << what << " at batch point " << index << " (" << p[0] << ", " << p[1] << ", "
        << p[2] << ")";
    throw NumericalError(msg.str());
}

} // namespace

LossTerms total_loss(const Volume& source, const Volume& target, const DeformationModel& model,
                     std::span<const Vec3> batch, const LossConfig& cfg, int threads)
{
    cfg.validate();
    if (batch.empty()) {
        throw UsageError("loss batch is empty");
    }
    const std::size_t n = batch.size();
    std::vector<Vec3> phi(n);
    std::vector<Mat3> jac(n);
    jacobian_batch(model, batch, phi, jac, threads);

    LossTerms terms;
    double reg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = density(jac[i], cfg.energy);
        if (!std::isfinite(w)) {
            non_finite("regulariser", i, batch[i]);
        }
        reg += w;
    }
    terms.regulariser = reg / static_cast<double>(n);

    if (cfg.ncc_mode == NccMode::batch_global) {
        std::vector<double> s(n), t(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = sample(source, phi[i]);
            t[i] = sample(target, batch[i]);
        }
        terms.similarity = -squared_ncc(s, t, cfg.variance_eps);
    } else {
        const auto offsets = window_offsets(target.geometry(), cfg.window_n);
        const std::size_t w = offsets.size();
        std::vector<Vec3> pts(n * w);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t o = 0; o < w; ++o) {
                for (int a = 0; a < 3; ++a) {
                    pts[i * w + o][a] = batch[i][a] + offsets[o][a];
                }
            }
        }
        std::vector<Vec3> warped(pts.size());
        forward_batch(model, pts, warped, threads);
        std::vector<double> s(w), t(w);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t o = 0; o < w; ++o) {
                s[o] = sample(source, warped[i * w + o]);
                t[o] = sample(target, pts[i * w + o]);
            }
            const double v = squared_ncc(s, t, cfg.variance_eps);
            if (!std::isfinite(v)) {
                non_finite("similarity", i, batch[i]);
            }
            sum += v;
        }
        terms.similarity = -sum / static_cast<double>(n);
    }
    if (!std::isfinite(terms.similarity)) {
        non_finite("similarity", 0, batch[0]);
    }
    terms.total = terms.similarity + cfg.lambda * terms.regulariser;
    return terms;
}

} // namespace confreg
