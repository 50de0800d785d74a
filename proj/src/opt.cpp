#include "confreg/opt.hpp"

#include <cmath>
#include <string>

#include "confreg/error.hpp"

namespace confreg {

void TrainConfig::validate() const
{
    if (epochs < 0) {
        throw UsageError("epochs must be nonnegative");
    }
    if (points_per_epoch < 1) {
        throw UsageError("points_per_epoch must be positive");
    }
    if (!(learning_rate > 0)) {
        throw UsageError("learning_rate must be positive");
    }
    if (!(adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 && adam_beta2 < 1)) {
        throw UsageError("adam betas must lie in (0, 1)");
    }
    if (!(adam_eps > 0)) {
        throw UsageError("adam_eps must be positive");
    }
    if (log_every < 1) {
        throw UsageError("log_every must be positive");
    }
}

MaskSampler::MaskSampler(const Volume& vol) : geom_(vol.geometry()), voxels_(masked_indices(vol))
{
}

std::vector<Vec3> MaskSampler::sample(std::size_t count, Rng& rng) const
{
    if (count == 0) {
        return {};
    }
    if (voxels_.empty()) {
        throw DataError("sampling mask is empty");
    }
    std::vector<Vec3> out(count);
    for (auto& p : out) {
        const Index3& v = voxels_[rng.below(voxels_.size())];
        const double ji = rng.uniform(-0.5, 0.5);
        const double jj = rng.uniform(-0.5, 0.5);
        const double jk = rng.uniform(-0.5, 0.5);
        p = geom_.world(static_cast<double>(v[0]) + ji, static_cast<double>(v[1]) + jj,
                        static_cast<double>(v[2]) + jk);
    }
    return out;
}

std::vector<Vec3> sample_batch(const Volume& vol, std::size_t count, Rng& rng)
{
    return MaskSampler(vol).sample(count, rng);
}

void adam_step(std::span<double> params, const ParamGrads& grads, AdamState& state, const TrainConfig& cfg)
{
    const std::size_t n = params.size();
    if (grads.values.size() != n) {
        throw UsageError("gradient shape does not match the parameters");
    }
    if (!grads.all_finite()) {
        throw NumericalError("non-finite gradient passed to the optimiser");
    }
    if (state.m.size() != n) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
        state.step = 0;
    }
    ++state.step;
    const double b1 = cfg.adam_beta1;
    const double b2 = cfg.adam_beta2;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads.values[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
}

RegistrationResult register_pair(const Volume& source, const Volume& target, const NetConfig& net_cfg,
                                 const LossConfig& loss_cfg, const TrainConfig& train_cfg,
                                 const EpochCallback& on_epoch)
{
    net_cfg.validate();
    loss_cfg.validate();
    train_cfg.validate();

    const Volume src = rescale_intensity(source);
    const Volume tgt = rescale_intensity(target);
    const MaskSampler sampler(tgt);
    if (sampler.voxel_count() == 0) {
        throw DataError("target mask is empty");
    }

    const Geometry& g = tgt.geometry();
    RegistrationResult result{DeformationModel::init(net_cfg, Normalization::from_box(g.lower(), g.upper())), {}};
    AdamState adam;
    Rng rng(train_cfg.seed);
    const GradOptions gopts{train_cfg.threads, train_cfg.deterministic};

    for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
        const auto batch = sampler.sample(static_cast<std::size_t>(train_cfg.points_per_epoch), rng);
        LossAndGrads lg;
        try {
            lg = loss_gradients(result.model, src, tgt, batch, loss_cfg, gopts);
            adam_step(result.model.params(), lg.grads, adam, train_cfg);
        } catch (const NumericalError& e) {
            throw NumericalError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const LogRecord rec{epoch, lg.loss.similarity, lg.loss.regulariser, lg.loss.total};
        if (epoch % train_cfg.log_every == 0 || epoch == train_cfg.epochs - 1) {
            result.log.push_back(rec);
        }
        if (on_epoch) {
            on_epoch(rec);
        }
    }
    return result;
}

} // namespace confreg
