#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "confreg/mat3.hpp"
#include "confreg/net.hpp"
#include "confreg/volume.hpp"

namespace confreg {

// A map phi from target space to source space (world mm) with its Jacobian.
class DeformationMap {
public:
    virtual ~DeformationMap() = default;

    // phi at each point and, when `jacobian` is non-empty, the world Jacobian.
    virtual void evaluate(std::span<const Vec3> points, std::span<Vec3> phi, std::span<Mat3> jacobian) const = 0;
};

class NetworkMap final : public DeformationMap {
public:
    explicit NetworkMap(const DeformationModel& model, int threads = 1) : model_(model), threads_(threads) {}

    void evaluate(std::span<const Vec3> points, std::span<Vec3> phi, std::span<Mat3> jacobian) const override;

private:
    const DeformationModel& model_;
    int threads_;
};

enum class SynthKind { translation, scaling, sinusoidal };

SynthKind parse_synth_kind(const std::string& name);
std::string synth_kind_name(SynthKind kind);

// Closed-form deformations used as ground truth.
//
//   translation  phi(x) = x + t,            |t| = amplitude (mm), direction from seed
//   scaling      phi(x) = c + s (x - c),    s = amplitude, c = grid centre
//   sinusoidal   phi_i(x) = x_i + (A / sqrt 3) sin(f q_{i+1} + phase_i),
//                q = (x - c) / h the unit-cube coordinate, A = amplitude (mm)
//
// The sinusoidal Jacobian is I plus a cyclic off-diagonal matrix D with
// |D| row sums <= A f / (sqrt 3 h_min); keeping that below 1 makes every
// Jacobian nonsingular, hence det > 0, so the map is a diffeomorphism.
class SynthDeformation final : public DeformationMap {
public:
    static constexpr double kFrequency = 2.0;

    SynthDeformation(SynthKind kind, double amplitude, const Geometry& geometry, std::uint64_t seed);

    SynthKind kind() const { return kind_; }
    double amplitude() const { return amplitude_; }

    Vec3 apply(const Vec3& x) const;
    Mat3 jacobian(const Vec3& x) const;

    void evaluate(std::span<const Vec3> points, std::span<Vec3> phi, std::span<Mat3> jacobian) const override;

    // A f / (sqrt 3 h_min) for the sinusoidal kind; must stay below 1.
    static double sinusoidal_bound(double amplitude, const Geometry& geometry);

private:
    SynthKind kind_;
    double amplitude_;
    Vec3 center_{};
    Vec3 half_{};
    Vec3 translation_{};
    Vec3 phase_{};
};

struct SynthField {
    SynthDeformation map;
    Geometry geometry;
    std::vector<Vec3> displacement; // phi(x) - x at every voxel centre, storage order
};

// Throws UsageError for amplitudes that break the diffeomorphism bound.
SynthField synth_deform(SynthKind kind, double amplitude, const Geometry& geometry, std::uint64_t seed);

struct LandmarkSet {
    std::vector<Vec3> points_target; // voxel indices, real-valued
    std::vector<Vec3> points_source;
    int index_base = 1;

    std::size_t count() const { return points_target.size(); }
    void validate() const;
};

struct TreResult {
    double mean = 0.0;
    std::vector<double> per_landmark;
};

// Maps each target landmark through phi and measures the distance (mm) to
// its source counterpart. Voxel index v sits at origin + spacing * (v - index_base).
TreResult tre(const DeformationMap& map, const LandmarkSet& lm, const Vec3& spacing, const Vec3& origin = {});

struct JacDetField {
    Geometry geometry;
    std::vector<double> values;
    double negative_fraction = 0.0; // share of values <= 0
    double min_value = 0.0;
    double max_value = 0.0;

    JacDetField() = default;
    JacDetField(const Geometry& geometry, std::vector<double> values);
};

JacDetField jacdet_grid(const DeformationMap& map, const Geometry& geometry);

// Backward warp onto the volume's own grid: out(p) = sample(vol, phi(p)).
Volume warp_volume(const Volume& vol, const DeformationMap& map);

// Synthetic registration case: analytic source texture, target = source o phi,
// ellipsoidal target mask, landmark grid inside the mask.
struct SynthCase {
    Volume source;
    Volume target;
    SynthField truth;
    LandmarkSet landmarks;
};

SynthCase make_synthetic_case(SynthKind kind, double amplitude, const Geometry& geometry, std::uint64_t seed,
                              int landmark_stride = 8);

} // namespace confreg
