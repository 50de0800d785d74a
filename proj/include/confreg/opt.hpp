#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "confreg/grad.hpp"
#include "confreg/loss.hpp"
#include "confreg/net.hpp"
#include "confreg/rng.hpp"
#include "confreg/volume.hpp"

namespace confreg {

struct TrainConfig {
    int epochs = 6000;             // one epoch = one sampled batch = one Adam step
    int points_per_epoch = 15000;
    double learning_rate = 1e-5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    bool deterministic = true;
    int log_every = 100;
    int threads = 1;

    void validate() const;
};

// Draws points uniformly (with replacement) from the masked voxels of a
// volume, jittered uniformly within half a voxel along each axis.
class MaskSampler {
public:
    explicit MaskSampler(const Volume& vol);

    std::vector<Vec3> sample(std::size_t count, Rng& rng) const;
    std::size_t voxel_count() const { return voxels_.size(); }

private:
    Geometry geom_;
    std::vector<Index3> voxels_;
};

std::vector<Vec3> sample_batch(const Volume& vol, std::size_t count, Rng& rng);

struct AdamState {
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

// Bias-corrected Adam. Throws NumericalError on non-finite gradients and
// UsageError on shape mismatch.
void adam_step(std::span<double> params, const ParamGrads& grads, AdamState& state, const TrainConfig& cfg);

struct LogRecord {
    int epoch = 0;
    double similarity = 0.0;
    double regulariser = 0.0;
    double total = 0.0;
};

struct RegistrationResult {
    DeformationModel model;
    std::vector<LogRecord> log;
};

// Per-epoch observer; receives every epoch's batch loss.
using EpochCallback = std::function<void(const LogRecord&)>;

// Fits phi so that source(phi(x)) matches target(x) over the target mask.
// Intensities of both volumes are rescaled to [0, 1] first. No affine
// pre-alignment is done.
RegistrationResult register_pair(const Volume& source, const Volume& target, const NetConfig& net_cfg,
                                 const LossConfig& loss_cfg, const TrainConfig& train_cfg,
                                 const EpochCallback& on_epoch = {});

} // namespace confreg
