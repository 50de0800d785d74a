#include "confreg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "confreg/error.hpp"
#include "confreg/rng.hpp"

namespace confreg {

void NetworkMap::evaluate(std::span<const Vec3> points, std::span<Vec3> phi, std::span<Mat3> jacobian) const
{
    if (jacobian.empty()) {
        forward_batch(model_, points, phi, threads_);
    } else {
        jacobian_batch(model_, points, phi, jacobian, threads_);
    }
}

SynthKind parse_synth_kind(const std::string& name)
{
    if (name == "translation") {
        return SynthKind::translation;
    }
    if (name == "scaling") {
        return SynthKind::scaling;
    }
    if (name == "sinusoidal") {
        return SynthKind::sinusoidal;
    }
    throw UsageError("unknown deformation kind '" + name + "' (translation, scaling, sinusoidal)");
}

std::string synth_kind_name(SynthKind kind)
{
    switch (kind) {
    case SynthKind::translation:
        return "translation";
    case SynthKind::scaling:
        return "scaling";
    case SynthKind::sinusoidal:
        return "sinusoidal";
    }
    return "unknown";
}

double SynthDeformation::sinusoidal_bound(double amplitude, const Geometry& geometry)
{
    const Normalization n = Normalization::from_box(geometry.lower(), geometry.upper());
    const double h_min = std::min({n.half_extent[0], n.half_extent[1], n.half_extent[2]});
    return std::fabs(amplitude) * kFrequency / (std::sqrt(3.0) * h_min);
}

SynthDeformation::SynthDeformation(SynthKind kind, double amplitude, const Geometry& geometry, std::uint64_t seed)
    : kind_(kind), amplitude_(amplitude)
{
    geometry.validate();
    if (!std::isfinite(amplitude)) {
        throw UsageError("amplitude must be finite");
    }
    const Normalization n = Normalization::from_box(geometry.lower(), geometry.upper());
    center_ = n.center;
    half_ = n.half_extent;
    Rng rng(seed);
    switch (kind) {
    case SynthKind::translation: {
        Vec3 d{rng.normal(), rng.normal(), rng.normal()};
        const double len = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        for (int a = 0; a < 3; ++a) {
            translation_[a] = amplitude * d[a] / len;
        }
        break;
    }
    case SynthKind::scaling:
        if (!(amplitude > 0)) {
            throw UsageError("scaling factor must be positive");
        }
        break;
    case SynthKind::sinusoidal: {
        const double bound = sinusoidal_bound(amplitude, geometry);
        if (!(bound < 1.0)) {
            throw UsageError("sinusoidal amplitude " + std::to_string(amplitude) +
                             " mm breaks the diffeomorphism bound (amplitude * frequency / (sqrt(3) h_min) = " +
                             std::to_string(bound) + ", must be < 1)");
        }
        // Phases near pi/2 keep the displacement coherent over the grid centre.
        for (double& p : phase_) {
            p = std::numbers::pi / 2 + rng.uniform(-0.5, 0.5);
        }
        break;
    }
    }
}

Vec3 SynthDeformation::apply(const Vec3& x) const
{
    switch (kind_) {
    case SynthKind::translation:
        return {x[0] + translation_[0], x[1] + translation_[1], x[2] + translation_[2]};
    case SynthKind::scaling:
        return {center_[0] + amplitude_ * (x[0] - center_[0]), center_[1] + amplitude_ * (x[1] - center_[1]),
                center_[2] + amplitude_ * (x[2] - center_[2])};
    case SynthKind::sinusoidal: {
        const double a = amplitude_ / std::sqrt(3.0);
        Vec3 out = x;
        for (int i = 0; i < 3; ++i) {
            const int j = (i + 1) % 3;
            const double q = (x[j] - center_[j]) / half_[j];
            out[i] += a * std::sin(kFrequency * q + phase_[i]);
        }
        return out;
    }
    }
    return x;
}

Mat3 SynthDeformation::jacobian(const Vec3& x) const
{
    switch (kind_) {
    case SynthKind::translation:
        return Mat3::identity();
    case SynthKind::scaling:
        return Mat3::diag(amplitude_, amplitude_, amplitude_);
    case SynthKind::sinusoidal: {
        const double a = amplitude_ / std::sqrt(3.0);
        Mat3 j = Mat3::identity();
        for (int i = 0; i < 3; ++i) {
            const int k = (i + 1) % 3;
            const double q = (x[k] - center_[k]) / half_[k];
            j(i, k) = a * kFrequency / half_[k] * std::cos(kFrequency * q + phase_[i]);
        }
        return j;
    }
    }
    return Mat3::identity();
}

void SynthDeformation::evaluate(std::span<const Vec3> points, std::span<Vec3> phi, std::span<Mat3> jacobian) const
{
    for (std::size_t i = 0; i < points.size(); ++i) {
        phi[i] = apply(points[i]);
        if (!jacobian.empty()) {
            jacobian[i] = this->jacobian(points[i]);
        }
    }
}

SynthField synth_deform(SynthKind kind, double amplitude, const Geometry& geometry, std::uint64_t seed)
{
    SynthField f{SynthDeformation(kind, amplitude, geometry, seed), geometry, {}};
    f.displacement.resize(geometry.voxel_count());
    for (std::size_t idx = 0; idx < geometry.voxel_count(); ++idx) {
        const Vec3 x = geometry.world(geometry.unravel(idx));
        const Vec3 y = f.map.apply(x);
        f.displacement[idx] = {y[0] - x[0], y[1] - x[1], y[2] - x[2]};
    }
    return f;
}

void LandmarkSet::validate() const
{
    if (points_target.size() != points_source.size()) {
        throw DataError("landmark lists differ in length: " + std::to_string(points_target.size()) + " target vs " +
                        std::to_string(points_source.size()) + " source");
    }
    if (index_base != 0 && index_base != 1) {
        throw UsageError("index base must be 0 or 1");
    }
}

TreResult tre(const DeformationMap& map, const LandmarkSet& lm, const Vec3& spacing, const Vec3& origin)
{
    lm.validate();
    const std::size_t n = lm.count();
    const auto to_world = [&](const Vec3& v) {
        Vec3 w;
        for (int a = 0; a < 3; ++a) {
            w[a] = origin[a] + spacing[a] * (v[a] - lm.index_base);
        }
        return w;
    };
    std::vector<Vec3> pts(n), phi(n);
    for (std::size_t i = 0; i < n; ++i) {
        pts[i] = to_world(lm.points_target[i]);
    }
    map.evaluate(pts, phi, {});
    TreResult r;
    r.per_landmark.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 s = to_world(lm.points_source[i]);
        double d2 = 0.0;
        for (int a = 0; a < 3; ++a) {
            d2 += (phi[i][a] - s[a]) * (phi[i][a] - s[a]);
        }
        r.per_landmark[i] = std::sqrt(d2);
        sum += r.per_landmark[i];
    }
    r.mean = n ? sum / static_cast<double>(n) : 0.0;
    return r;
}

JacDetField::JacDetField(const Geometry& g, std::vector<double> v) : geometry(g), values(std::move(v))
{
    if (values.size() != geometry.voxel_count()) {
        throw DataError("determinant field size does not match its grid");
    }
    std::size_t negative = 0;
    min_value = values.empty() ? 0.0 : values.front();
    max_value = min_value;
    for (double d : values) {
        negative += !(d > 0);
        min_value = std::min(min_value, d);
        max_value = std::max(max_value, d);
    }
    negative_fraction = values.empty() ? 0.0 : static_cast<double>(negative) / static_cast<double>(values.size());
}

namespace {

// Visits the grid one z-slice at a time to bound memory on large volumes.
template <typename Fn>
void for_each_slice(const Geometry& g, Fn&& fn)
{
    const std::size_t plane = g.dims[0] * g.dims[1];
    std::vector<Vec3> pts(plane);
    for (std::size_t k = 0; k < g.dims[2]; ++k) {
        for (std::size_t j = 0; j < g.dims[1]; ++j) {
            for (std::size_t i = 0; i < g.dims[0]; ++i) {
                pts[i + g.dims[0] * j] = g.world(Index3{i, j, k});
            }
        }
        fn(k * plane, std::span<const Vec3>(pts));
    }
}

} // namespace

JacDetField jacdet_grid(const DeformationMap& map, const Geometry& geometry)
{
    geometry.validate();
    std::vector<double> values(geometry.voxel_count());
    std::vector<Vec3> phi;
    std::vector<Mat3> jac;
    for_each_slice(geometry, [&](std::size_t base, std::span<const Vec3> pts) {
        phi.resize(pts.size());
        jac.resize(pts.size());
        map.evaluate(pts, phi, jac);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            values[base + i] = det(jac[i]);
        }
    });
    return JacDetField(geometry, std::move(values));
}

Volume warp_volume(const Volume& vol, const DeformationMap& map)
{
    const Geometry& g = vol.geometry();
    std::vector<double> out(g.voxel_count());
    std::vector<Vec3> phi;
    for_each_slice(g, [&](std::size_t base, std::span<const Vec3> pts) {
        phi.resize(pts.size());
        map.evaluate(pts, phi, {});
        for (std::size_t i = 0; i < pts.size(); ++i) {
            out[base + i] = sample(vol, phi[i]);
        }
    });
    return Volume(g, std::move(out));
}

namespace {

struct Blob {
    Vec3 center;
    double inv_two_sigma2;
    double weight;
};

std::vector<Blob> make_texture(const Geometry& g, Rng& rng)
{
    const Vec3 lo = g.lower(), hi = g.upper();
    double extent = 0.0;
    for (int a = 0; a < 3; ++a) {
        extent = std::max(extent, hi[a] - lo[a]);
    }
    std::vector<Blob> blobs(96);
    for (Blob& b : blobs) {
        const double sigma = extent * rng.uniform(0.04, 0.1);
        for (int a = 0; a < 3; ++a) {
            b.center[a] = rng.uniform(lo[a] - sigma, hi[a] + sigma);
        }
        b.inv_two_sigma2 = 1.0 / (2.0 * sigma * sigma);
        b.weight = rng.uniform(0.4, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    }
    return blobs;
}

double texture(const std::vector<Blob>& blobs, const Vec3& x)
{
    double v = 0.0;
    for (const Blob& b : blobs) {
        const double dx = x[0] - b.center[0], dy = x[1] - b.center[1], dz = x[2] - b.center[2];
        v += b.weight * std::exp(-(dx * dx + dy * dy + dz * dz) * b.inv_two_sigma2);
    }
    return v;
}

} // namespace

SynthCase make_synthetic_case(SynthKind kind, double amplitude, const Geometry& geometry, std::uint64_t seed,
                              int landmark_stride)
{
    if (landmark_stride < 1) {
        throw UsageError("landmark stride must be positive");
    }
    SynthField truth = synth_deform(kind, amplitude, geometry, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const auto blobs = make_texture(geometry, rng);
    const Normalization norm = Normalization::from_box(geometry.lower(), geometry.upper());

    const std::size_t n = geometry.voxel_count();
    std::vector<double> src(n), tgt(n);
    std::vector<std::uint8_t> mask(n);
    for (std::size_t idx = 0; idx < n; ++idx) {
        const Vec3 x = geometry.world(geometry.unravel(idx));
        src[idx] = texture(blobs, x);
        tgt[idx] = texture(blobs, truth.map.apply(x));
        const Vec3 q = norm.to_unit(x);
        mask[idx] = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]) <= 0.8 * 0.8;
    }

    LandmarkSet lm;
    lm.index_base = 1;
    const auto stride = static_cast<std::size_t>(landmark_stride);
    for (std::size_t k = stride / 2; k < geometry.dims[2]; k += stride) {
        for (std::size_t j = stride / 2; j < geometry.dims[1]; j += stride) {
            for (std::size_t i = stride / 2; i < geometry.dims[0]; i += stride) {
                const Vec3 x = geometry.world(Index3{i, j, k});
                const Vec3 q = norm.to_unit(x);
                if (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] > 0.7 * 0.7) {
                    continue;
                }
                const Vec3 y = geometry.continuous_index(truth.map.apply(x));
                lm.points_target.push_back({i + 1.0, j + 1.0, k + 1.0});
                lm.points_source.push_back({y[0] + 1.0, y[1] + 1.0, y[2] + 1.0});
            }
        }
    }

    SynthCase c{Volume(geometry, std::move(src), mask), Volume(geometry, std::move(tgt), mask), std::move(truth),
                std::move(lm)};
    return c;
}

} // namespace confreg
