#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "confreg/loss.hpp"
#include "confreg/net.hpp"
#include "confreg/volume.hpp"

namespace confreg {

// d(loss)/d(params), laid out exactly like DeformationModel::params().
struct ParamGrads {
    std::vector<double> values;

    ParamGrads() = default;
    explicit ParamGrads(std::size_t n) : values(n, 0.0) {}
    explicit ParamGrads(const DeformationModel& model) : values(model.parameter_count(), 0.0) {}

    bool congruent(const DeformationModel& model) const { return values.size() == model.parameter_count(); }
    bool all_finite() const;
};

struct GradOptions {
    int threads = 1;
    // Fixed-shape pairwise reduction over point chunks: bitwise reproducible
    // for any thread count.
    bool deterministic = true;
};

struct LossAndGrads {
    LossTerms loss;
    ParamGrads grads;
};

// Reverse sweep through a recorded forward pass. `adj_output` holds
// d(loss)/d(network output) for every tape row (rows x 3): the primal block
// takes adjoints of u, tangent block k adjoints of du/dq_k. The tangent
// propagation itself is differentiated, so losses built on the Jacobian get
// exact mixed second derivatives. Writes (not accumulates) into `grads`.
void backward_tape(const DeformationModel& model, NetworkTape& tape, std::span<const double> adj_output,
                   std::span<double> grads);

// Batch loss and its exact parameter gradient. Throws NumericalError naming
// the batch index if any loss contribution is non-finite.
LossAndGrads loss_gradients(const DeformationModel& model, const Volume& source, const Volume& target,
                            std::span<const Vec3> batch, const LossConfig& cfg, const GradOptions& opts = {},
                            LossComponent component = LossComponent::all);

// Loss value only, through the same code path and component selection as
// loss_gradients. Used by finite-difference checks.
double component_loss(const DeformationModel& model, const Volume& source, const Volume& target,
                      std::span<const Vec3> batch, const LossConfig& cfg, LossComponent component);

std::string component_name(LossComponent component);

struct GradCheckProblem {
    Volume source;
    Volume target;
    std::vector<Vec3> batch;
    LossConfig loss;
};

// Small pair for gradient checks: a smooth random target and an affine
// source, whose trilinear interpolant is itself affine, so finite
// differences never straddle an interpolation kink.
GradCheckProblem make_gradcheck_problem(std::uint64_t seed, NccMode mode = NccMode::windowed,
                                        std::size_t points = 6);

struct ComponentCheck {
    LossComponent component = LossComponent::all;
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    double max_abs_grad = 0.0;
    bool passed = true;
};

struct GradCheckReport {
    double tolerance = 0.0;
    double step = 0.0;
    std::size_t parameter_count = 0;
    std::vector<ComponentCheck> components;
    bool passed = true;
};

struct GradCheckOptions {
    double tolerance = 1e-4;
    double step = 1e-5;
    // Test hook applied to the analytic gradient before comparison.
    std::function<void(LossComponent, ParamGrads&)> corrupt;
};

// Central differences over every parameter, for the similarity term and for
// each regulariser term separately. Relative error of entry i is
// |a_i - f_i| / max(|a_i|, |f_i|, 1e-3 max_j |f_j|, 1e-12).
GradCheckReport check_gradients(const DeformationModel& model, const GradCheckProblem& problem,
                                const GradCheckOptions& opts = {});

GradCheckReport check_gradients(const DeformationModel& model, double tolerance);

// Randomises every layer (head included) at small scale; test and selfcheck helper.
void randomize_parameters(DeformationModel& model, std::uint64_t seed, double head_scale = 0.05);

} // namespace confreg
