#pragma once

#include <span>
#include <vector>

#include "confreg/energy.hpp"
#include "confreg/net.hpp"
#include "confreg/volume.hpp"

namespace confreg {

enum class NccMode { windowed, batch_global };

struct LossConfig {
    double lambda = 1e-2;
    int window_n = 5; // NCC window edge in target voxels, odd
    NccMode ncc_mode = NccMode::windowed;
    double variance_eps = 1e-8;
    EnergyParams energy;

    void validate() const;
};

// Which part of the objective to evaluate. `all` is the training loss; the
// others isolate one piece for gradient checking.
enum class LossComponent { all, similarity, length, area, volume, inverse_volume };

struct LossTerms {
    double similarity = 0.0;  // -mean windowed NCC, or -global NCC
    double regulariser = 0.0; // mean density over the batch (unweighted)
    double total = 0.0;       // similarity + lambda * regulariser
};

// Squared-numerator correlation of two equally long samples,
//   (sum s^ t^)^2 / (sum s^^2 sum t^^2 + variance_eps),
// where ^ removes the sample mean. Returns 0 when either sample variance
// (mean squared deviation) is below variance_eps. If d_ds is non-empty it
// receives the derivative with respect to each s_i.
double squared_ncc(std::span<const double> s, std::span<const double> t, double variance_eps,
                   std::span<double> d_ds = {});

// Offsets (mm) of the n^3 window around a point, in target voxel units.
std::vector<Vec3> window_offsets(const Geometry& target, int window_n);

double ncc_window(const Volume& source, const Volume& target, const DeformationModel& model,
                  const Vec3& p_world, const LossConfig& cfg);

LossTerms total_loss(const Volume& source, const Volume& target, const DeformationModel& model,
                     std::span<const Vec3> batch, const LossConfig& cfg, int threads = 1);

} // namespace confreg
