#include "confreg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "confreg/error.hpp"

namespace confreg {

void Geometry::validate() const
{
    for (int a = 0; a < 3; ++a) {
        if (dims[a] == 0) {
            throw DataError("volume dimensions must be positive");
        }
        if (!(spacing[a] > 0) || !std::isfinite(spacing[a])) {
            throw DataError("voxel spacing must be positive");
        }
        if (!std::isfinite(origin[a])) {
            throw DataError("volume origin must be finite");
        }
    }
}

Volume::Volume(const Geometry& geometry, std::vector<double> data, std::optional<std::vector<std::uint8_t>> mask)
    : geom_(geometry), data_(std::move(data))
{
    geom_.validate();
    if (data_.size() != geom_.voxel_count()) {
        throw DataError("volume holds " + std::to_string(data_.size()) + " values for " +
                        std::to_string(geom_.voxel_count()) + " voxels");
    }
    if (mask) {
        set_mask(std::move(*mask));
    }
}

Volume Volume::filled(const Geometry& geometry, double value)
{
    return Volume(geometry, std::vector<double>(geometry.voxel_count(), value));
}

const std::vector<std::uint8_t>& Volume::mask() const
{
    if (!mask_) {
        throw UsageError("volume has no mask; supply one (--mask) or pass --whole-domain");
    }
    return *mask_;
}

void Volume::set_mask(std::vector<std::uint8_t> mask)
{
    if (mask.size() != data_.size()) {
        throw DataError("mask holds " + std::to_string(mask.size()) + " values for " +
                        std::to_string(data_.size()) + " voxels");
    }
    mask_ = std::move(mask);
}

namespace {

struct Cell {
    std::size_t lo[3];
    std::size_t hi[3];
    double frac[3];
    bool inside[3];
};

Cell locate(const Geometry& g, const Vec3& x)
{
    const Vec3 c = g.continuous_index(x);
    Cell cell;
    for (int a = 0; a < 3; ++a) {
        const double last = static_cast<double>(g.dims[a] - 1);
        cell.inside[a] = (c[a] >= 0.0 && c[a] <= last);
        const double cc = std::clamp(c[a], 0.0, last);
        if (std::isnan(c[a])) {
            // Propagate NaN through the interpolation weights.
            cell.lo[a] = 0;
            cell.hi[a] = g.dims[a] > 1 ? 1 : 0;
            cell.frac[a] = c[a];
            cell.inside[a] = false;
            continue;
        }
        if (g.dims[a] == 1) {
            cell.lo[a] = cell.hi[a] = 0;
            cell.frac[a] = 0.0;
            cell.inside[a] = false;
            continue;
        }
        auto i0 = static_cast<std::size_t>(std::floor(cc));
        i0 = std::min(i0, g.dims[a] - 2);
        cell.lo[a] = i0;
        cell.hi[a] = i0 + 1;
        cell.frac[a] = cc - static_cast<double>(i0);
    }
    return cell;
}

} // namespace

double sample_with_gradient(const Volume& vol, const Vec3& x_world, Vec3& gradient)
{
    const Geometry& g = vol.geometry();
    const Cell cell = locate(g, x_world);
    const auto& d = vol.data();
    double v[2][2][2];
    for (int dk = 0; dk < 2; ++dk) {
        for (int dj = 0; dj < 2; ++dj) {
            for (int di = 0; di < 2; ++di) {
                v[dk][dj][di] = d[g.linear(di ? cell.hi[0] : cell.lo[0], dj ? cell.hi[1] : cell.lo[1],
                                           dk ? cell.hi[2] : cell.lo[2])];
            }
        }
    }
    const double fx = cell.frac[0], fy = cell.frac[1], fz = cell.frac[2];
    // Interpolate along x, then y, then z.
    double vx[2][2];
    double gx[2][2];
    for (int dk = 0; dk < 2; ++dk) {
        for (int dj = 0; dj < 2; ++dj) {
            vx[dk][dj] = v[dk][dj][0] + fx * (v[dk][dj][1] - v[dk][dj][0]);
            gx[dk][dj] = v[dk][dj][1] - v[dk][dj][0];
        }
    }
    double vy[2], gxy[2], gy[2];
    for (int dk = 0; dk < 2; ++dk) {
        vy[dk] = vx[dk][0] + fy * (vx[dk][1] - vx[dk][0]);
        gxy[dk] = gx[dk][0] + fy * (gx[dk][1] - gx[dk][0]);
        gy[dk] = vx[dk][1] - vx[dk][0];
    }
    const double value = vy[0] + fz * (vy[1] - vy[0]);
    gradient[0] = cell.inside[0] ? (gxy[0] + fz * (gxy[1] - gxy[0])) / g.spacing[0] : 0.0;
    gradient[1] = cell.inside[1] ? (gy[0] + fz * (gy[1] - gy[0])) / g.spacing[1] : 0.0;
    gradient[2] = cell.inside[2] ? (vy[1] - vy[0]) / g.spacing[2] : 0.0;
    return value;
}

double sample(const Volume& vol, const Vec3& x_world)
{
    Vec3 unused;
    return sample_with_gradient(vol, x_world, unused);
}

Vec3 sample_gradient(const Volume& vol, const Vec3& x_world)
{
    Vec3 g;
    sample_with_gradient(vol, x_world, g);
    return g;
}

std::vector<Index3> masked_indices(const Volume& vol)
{
    const auto& mask = vol.mask();
    std::vector<Index3> out;
    for (std::size_t idx = 0; idx < mask.size(); ++idx) {
        if (mask[idx]) {
            out.push_back(vol.geometry().unravel(idx));
        }
    }
    return out;
}

Volume rescale_intensity(const Volume& vol)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    const auto& d = vol.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (vol.has_mask() && !vol.mask()[i]) {
            continue;
        }
        lo = std::min(lo, d[i]);
        hi = std::max(hi, d[i]);
    }
    Volume out = vol;
    if (!(hi > lo)) {
        std::fill(out.data().begin(), out.data().end(), 0.0);
        return out;
    }
    const double scale = 1.0 / (hi - lo);
    for (double& v : out.data()) {
        v = (v - lo) * scale;
    }
    return out;
}

} // namespace confreg
