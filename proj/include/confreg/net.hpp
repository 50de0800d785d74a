#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "confreg/mat3.hpp"

namespace confreg {

enum class Encoder { periodic, fourier };

struct NetConfig {
    // Linear layers for the periodic encoder. With the Fourier encoder the
    // fixed feature map takes the place of the first layer.
    int num_layers = 4;
    int hidden_units = 256;
    double omega = 32.0;
    Encoder encoder = Encoder::periodic;
    int fourier_features = 128;
    double fourier_sigma = 1.0;
    std::uint64_t seed = 0;

    void validate() const;

    friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

// Affine map between world millimetres and the unit cube [-1, 1]^3.
struct Normalization {
    Vec3 center{0.0, 0.0, 0.0};
    Vec3 half_extent{1.0, 1.0, 1.0};

    // Box spanned by the two corners, e.g. the first and last voxel centres.
    static Normalization from_box(const Vec3& lo, const Vec3& hi);

    Vec3 to_unit(const Vec3& p) const
    {
        return {(p[0] - center[0]) / half_extent[0], (p[1] - center[1]) / half_extent[1],
                (p[2] - center[2]) / half_extent[2]};
    }

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0; // out x in, row-major
    std::size_t bias_offset = 0;
    bool sine = true;

    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

// Coordinate network phi(p) = p + h * u((p - c) / h): sine layers
// sin(omega (W z + b)) followed by a linear head. Parameters of all
// layers live in one flat array, layer after layer, weights before bias.
class DeformationModel {
public:
    static DeformationModel init(const NetConfig& config, const Normalization& norm = {});

    // Rebuilds a model from stored parts; sizes are checked.
    DeformationModel(NetConfig config, Normalization norm, std::vector<double> fourier_matrix,
                     std::vector<double> params);

    const NetConfig& config() const { return config_; }
    const Normalization& normalization() const { return norm_; }
    std::span<const LayerShape> layers() const { return layers_; }
    std::span<double> params() { return params_; }
    std::span<const double> params() const { return params_; }
    std::size_t parameter_count() const { return params_.size(); }

    // F x 3 row-major frequency matrix (empty for the periodic encoder).
    std::span<const double> fourier_matrix() const { return fourier_; }

    // Width of the first trainable layer's input (3, or 2F with Fourier features).
    std::size_t input_width() const;

    friend bool operator==(const DeformationModel&, const DeformationModel&) = default;

private:
    DeformationModel() = default;
    void build_layout();

    NetConfig config_;
    Normalization norm_;
    std::vector<LayerShape> layers_;
    std::vector<double> fourier_;
    std::vector<double> params_;
};

// Closed-form parameter count for a configuration.
std::size_t parameter_count(const NetConfig& config);

// Activations of one batch kept for the reverse sweep.
//
// Rows are grouped in blocks of `points`: block 0 carries the primal values,
// block 1 + k the forward-mode tangent along unit-cube axis k (only when
// tangents were requested).
struct NetworkTape {
    struct Layer {
        std::vector<double> input; // rows x in
        std::vector<double> pre;   // rows x out, pre-activation (tangent rows hold W dz)
        std::vector<double> sin;   // points x out, sin(omega pre), sine layers only
        std::vector<double> cos;   // points x out
    };

    std::size_t points = 0;
    bool tangents = false;
    std::vector<Layer> layers;
    std::vector<double> output; // rows x 3

    std::size_t rows() const { return points * (tangents ? 4 : 1); }
};

// Batched forward pass recording everything the reverse sweep needs.
void forward_tape(const DeformationModel& model, std::span<const Vec3> points_world,
                  bool with_jacobian, NetworkTape& tape);

// phi(p_i) and (optionally) the world-space Jacobian read back from a tape.
Vec3 tape_phi(const DeformationModel& model, const NetworkTape& tape, std::size_t i,
              const Vec3& p_world);
Mat3 tape_jacobian(const DeformationModel& model, const NetworkTape& tape, std::size_t i);

Vec3 forward(const DeformationModel& model, const Vec3& p_world);

// (phi(p), grad phi(p)) with the Jacobian in world coordinates (mm / mm).
std::pair<Vec3, Mat3> spatial_jacobian(const DeformationModel& model, const Vec3& p_world);

void forward_batch(const DeformationModel& model, std::span<const Vec3> points_world,
                   std::span<Vec3> phi, int threads = 1);
void jacobian_batch(const DeformationModel& model, std::span<const Vec3> points_world,
                    std::span<Vec3> phi, std::span<Mat3> jacobian, int threads = 1);

} // namespace confreg
