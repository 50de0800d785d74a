#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "confreg/mat3.hpp"

namespace confreg {

using Index3 = std::array<std::size_t, 3>;

// Voxel (i, j, k) sits at origin + spacing * (i, j, k); i varies fastest in memory.
struct Geometry {
    Index3 dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{0.0, 0.0, 0.0};

    std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    std::size_t linear(std::size_t i, std::size_t j, std::size_t k) const { return i + dims[0] * (j + dims[1] * k); }
    Index3 unravel(std::size_t idx) const { return {idx % dims[0], (idx / dims[0]) % dims[1], idx / (dims[0] * dims[1])}; }
    Vec3 world(double i, double j, double k) const
    {
        return {origin[0] + spacing[0] * i, origin[1] + spacing[1] * j, origin[2] + spacing[2] * k};
    }
    Vec3 world(const Index3& v) const
    {
        return world(static_cast<double>(v[0]), static_cast<double>(v[1]), static_cast<double>(v[2]));
    }
    Vec3 continuous_index(const Vec3& x) const
    {
        return {(x[0] - origin[0]) / spacing[0], (x[1] - origin[1]) / spacing[1], (x[2] - origin[2]) / spacing[2]};
    }
    // First and last voxel centres.
    Vec3 lower() const { return origin; }
    Vec3 upper() const { return world(Index3{dims[0] - 1, dims[1] - 1, dims[2] - 1}); }

    void validate() const;

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

class Volume {
public:
    Volume() = default;
    Volume(const Geometry& geometry, std::vector<double> data,
           std::optional<std::vector<std::uint8_t>> mask = std::nullopt);

    static Volume filled(const Geometry& geometry, double value);

    const Geometry& geometry() const { return geom_; }
    const Index3& dims() const { return geom_.dims; }
    const Vec3& spacing() const { return geom_.spacing; }
    const Vec3& origin() const { return geom_.origin; }
    std::size_t voxel_count() const { return geom_.voxel_count(); }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return data_[geom_.linear(i, j, k)]; }

    bool has_mask() const { return mask_.has_value(); }
    const std::vector<std::uint8_t>& mask() const;
    void set_mask(std::vector<std::uint8_t> mask);
    void clear_mask() { mask_.reset(); }

private:
    Geometry geom_;
    std::vector<double> data_;
    std::optional<std::vector<std::uint8_t>> mask_;
};

// Trilinear interpolation; coordinates outside the grid clamp to the boundary.
double sample(const Volume& vol, const Vec3& x_world);

// Gradient of the trilinear interpolant in intensity per mm. Zero along any
// axis on which x lies outside the grid (the clamped interpolant is flat there).
Vec3 sample_gradient(const Volume& vol, const Vec3& x_world);

double sample_with_gradient(const Volume& vol, const Vec3& x_world, Vec3& gradient);

// Voxels with nonzero mask in storage order. Throws UsageError without a mask.
std::vector<Index3> masked_indices(const Volume& vol);

// Linear rescale to [0, 1] using min/max over the mask (whole grid if none).
Volume rescale_intensity(const Volume& vol);

} // namespace confreg
