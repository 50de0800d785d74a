#include "confreg/net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "confreg/error.hpp"
#include "confreg/parallel.hpp"
#include "confreg/rng.hpp"
#include "confreg/simd/kernels.hpp"

namespace confreg {

void NetConfig::validate() const
{
    if (num_layers < 2) {
        throw UsageError("num_layers must be at least 2, got " + std::to_string(num_layers));
    }
    if (hidden_units < 1) {
        throw UsageError("hidden_units must be positive");
    }
    if (!(omega > 0)) {
        throw UsageError("omega must be positive");
    }
    if (encoder == Encoder::fourier && (fourier_features < 1 || !(fourier_sigma > 0))) {
        throw UsageError("fourier_features and fourier_sigma must be positive");
    }
}

Normalization Normalization::from_box(const Vec3& lo, const Vec3& hi)
{
    Normalization n;
    for (int a = 0; a < 3; ++a) {
        n.center[a] = 0.5 * (lo[a] + hi[a]);
        const double h = 0.5 * std::fabs(hi[a] - lo[a]);
        n.half_extent[a] = h > 0 ? h : 1.0;
    }
    return n;
}

namespace {

std::vector<LayerShape> layout(const NetConfig& cfg)
{
    cfg.validate();
    const auto hidden = static_cast<std::size_t>(cfg.hidden_units);
    std::size_t in = (cfg.encoder == Encoder::fourier) ? 2 * static_cast<std::size_t>(cfg.fourier_features) : 3;
    const int trainable = (cfg.encoder == Encoder::fourier) ? cfg.num_layers - 1 : cfg.num_layers;

    std::vector<LayerShape> layers;
    std::size_t offset = 0;
    for (int l = 0; l < trainable; ++l) {
        const bool last = (l == trainable - 1);
        LayerShape s;
        s.in = in;
        s.out = last ? 3 : hidden;
        s.sine = !last;
        s.weight_offset = offset;
        offset += s.in * s.out;
        s.bias_offset = offset;
        offset += s.out;
        layers.push_back(s);
        in = s.out;
    }
    return layers;
}

} // namespace

std::size_t parameter_count(const NetConfig& config)
{
    const auto shapes = layout(config);
    return shapes.back().bias_offset + shapes.back().out;
}

void DeformationModel::build_layout()
{
    layers_ = layout(config_);
}

std::size_t DeformationModel::input_width() const
{
    return layers_.front().in;
}

DeformationModel DeformationModel::init(const NetConfig& config, const Normalization& norm)
{
    DeformationModel model;
    model.config_ = config;
    model.norm_ = norm;
    model.build_layout();
    model.params_.assign(confreg::parameter_count(config), 0.0);

    Rng rng(config.seed);
    if (config.encoder == Encoder::fourier) {
        model.fourier_.resize(3 * static_cast<std::size_t>(config.fourier_features));
        for (double& b : model.fourier_) {
            b = config.fourier_sigma * rng.normal();
        }
    }

    for (std::size_t l = 0; l < model.layers_.size(); ++l) {
        const LayerShape& s = model.layers_[l];
        if (!s.sine) {
            continue; // linear head starts at zero: phi = identity
        }
        const double n_in = static_cast<double>(s.in);
        const bool coordinate_input = (l == 0 && config.encoder == Encoder::periodic);
        const double w_bound = coordinate_input ? 1.0 / n_in : std::sqrt(6.0 / n_in) / config.omega;
        const double b_bound = 1.0 / std::sqrt(n_in);
        double* w = model.params_.data() + s.weight_offset;
        for (std::size_t i = 0; i < s.in * s.out; ++i) {
            w[i] = rng.uniform(-w_bound, w_bound);
        }
        double* b = model.params_.data() + s.bias_offset;
        for (std::size_t i = 0; i < s.out; ++i) {
            b[i] = rng.uniform(-b_bound, b_bound);
        }
    }
    return model;
}

DeformationModel::DeformationModel(NetConfig config, Normalization norm,
                                   std::vector<double> fourier_matrix, std::vector<double> params)
    : config_(config), norm_(norm), fourier_(std::move(fourier_matrix)), params_(std::move(params))
{
    build_layout();
    const std::size_t want_f =
        config_.encoder == Encoder::fourier ? 3 * static_cast<std::size_t>(config_.fourier_features) : 0;
    if (fourier_.size() != want_f) {
        throw DataError("fourier matrix has " + std::to_string(fourier_.size()) + " entries, expected " +
                        std::to_string(want_f));
    }
    if (params_.size() != confreg::parameter_count(config_)) {
        throw DataError("parameter array has " + std::to_string(params_.size()) + " entries, expected " +
                        std::to_string(confreg::parameter_count(config_)));
    }
    for (int a = 0; a < 3; ++a) {
        if (!(norm_.half_extent[a] > 0)) {
            throw DataError("normalization half extent must be positive");
        }
    }
}

void forward_tape(const DeformationModel& model, std::span<const Vec3> points_world,
                  bool with_jacobian, NetworkTape& tape)
{
    const std::size_t m = points_world.size();
    const std::size_t blocks = with_jacobian ? 4 : 1;
    const std::size_t rows = m * blocks;
    const auto layers = model.layers();
    const double omega = model.config().omega;
    const double* params = model.params().data();

    tape.points = m;
    tape.tangents = with_jacobian;
    tape.layers.resize(layers.size());

    // Input rows of the first trainable layer.
    NetworkTape::Layer& first = tape.layers.front();
    const std::size_t in0 = model.input_width();
    first.input.assign(rows * in0, 0.0);
    const Normalization& norm = model.normalization();
    if (model.config().encoder == Encoder::periodic) {
        for (std::size_t i = 0; i < m; ++i) {
            const Vec3 q = norm.to_unit(points_world[i]);
            for (int a = 0; a < 3; ++a) {
                first.input[i * 3 + a] = q[a];
            }
        }
        if (with_jacobian) {
            for (std::size_t k = 0; k < 3; ++k) {
                for (std::size_t i = 0; i < m; ++i) {
                    first.input[((1 + k) * m + i) * 3 + k] = 1.0;
                }
            }
        }
    } else {
        // [sin(2 pi B q), cos(2 pi B q)] and its tangents.
        const std::size_t f = static_cast<std::size_t>(model.config().fourier_features);
        const auto bmat = model.fourier_matrix();
        std::vector<double> arg(m * f), s(m * f), c(m * f);
        for (std::size_t i = 0; i < m; ++i) {
            const Vec3 q = norm.to_unit(points_world[i]);
            for (std::size_t r = 0; r < f; ++r) {
                arg[i * f + r] = bmat[r * 3] * q[0] + bmat[r * 3 + 1] * q[1] + bmat[r * 3 + 2] * q[2];
            }
        }
        const double two_pi = 2.0 * std::numbers::pi;
        simd::sincos(arg.data(), arg.size(), two_pi, s.data(), c.data());
        for (std::size_t i = 0; i < m; ++i) {
            double* row = first.input.data() + i * in0;
            std::copy_n(s.data() + i * f, f, row);
            std::copy_n(c.data() + i * f, f, row + f);
        }
        if (with_jacobian) {
            for (std::size_t k = 0; k < 3; ++k) {
                for (std::size_t i = 0; i < m; ++i) {
                    double* row = first.input.data() + ((1 + k) * m + i) * in0;
                    for (std::size_t r = 0; r < f; ++r) {
                        const double w = two_pi * bmat[r * 3 + k];
                        row[r] = w * c[i * f + r];
                        row[f + r] = -w * s[i * f + r];
                    }
                }
            }
        }
    }

    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerShape& shape = layers[l];
        NetworkTape::Layer& lt = tape.layers[l];
        const double* w = params + shape.weight_offset;
        const double* b = params + shape.bias_offset;

        std::vector<double>& dst = shape.sine ? lt.pre : tape.output;
        dst.resize(rows * shape.out);
        simd::gemm(simd::Trans::no, simd::Trans::yes, rows, shape.out, shape.in, lt.input.data(), shape.in,
                   w, shape.in, 0.0, dst.data(), shape.out);
        for (std::size_t i = 0; i < m; ++i) {
            double* row = dst.data() + i * shape.out;
            for (std::size_t o = 0; o < shape.out; ++o) {
                row[o] += b[o];
            }
        }
        if (!shape.sine) {
            break;
        }

        lt.sin.resize(m * shape.out);
        lt.cos.resize(m * shape.out);
        simd::sincos(lt.pre.data(), m * shape.out, omega, lt.sin.data(), lt.cos.data());

        std::vector<double>& next = tape.layers[l + 1].input;
        next.resize(rows * shape.out);
        std::copy(lt.sin.begin(), lt.sin.end(), next.begin());
        for (std::size_t k = 1; k < blocks; ++k) {
            const double* t = lt.pre.data() + k * m * shape.out;
            double* out = next.data() + k * m * shape.out;
            for (std::size_t e = 0; e < m * shape.out; ++e) {
                out[e] = omega * lt.cos[e] * t[e];
            }
        }
    }
}

Vec3 tape_phi(const DeformationModel& model, const NetworkTape& tape, std::size_t i, const Vec3& p_world)
{
    const Vec3& h = model.normalization().half_extent;
    const double* u = tape.output.data() + i * 3;
    return {p_world[0] + h[0] * u[0], p_world[1] + h[1] * u[1], p_world[2] + h[2] * u[2]};
}

Mat3 tape_jacobian(const DeformationModel& model, const NetworkTape& tape, std::size_t i)
{
    const Vec3& h = model.normalization().half_extent;
    Mat3 j = Mat3::identity();
    for (int k = 0; k < 3; ++k) {
        const double* du = tape.output.data() + ((1 + k) * tape.points + i) * 3;
        for (int r = 0; r < 3; ++r) {
            j(r, k) += h[r] * du[r] / h[k];
        }
    }
    return j;
}

namespace {

constexpr std::size_t kBatchChunk = 256;

} // namespace

void forward_batch(const DeformationModel& model, std::span<const Vec3> points_world, std::span<Vec3> phi,
                   int threads)
{
    const std::size_t n = points_world.size();
    const std::size_t chunks = (n + kBatchChunk - 1) / kBatchChunk;
    parallel_for(chunks, threads, [&](std::size_t c, int) {
        thread_local NetworkTape tape;
        const std::size_t lo = c * kBatchChunk;
        const std::size_t len = std::min(kBatchChunk, n - lo);
        forward_tape(model, points_world.subspan(lo, len), false, tape);
        for (std::size_t i = 0; i < len; ++i) {
            phi[lo + i] = tape_phi(model, tape, i, points_world[lo + i]);
        }
    });
}

void jacobian_batch(const DeformationModel& model, std::span<const Vec3> points_world, std::span<Vec3> phi,
                    std::span<Mat3> jacobian, int threads)
{
    const std::size_t n = points_world.size();
    const std::size_t chunks = (n + kBatchChunk - 1) / kBatchChunk;
    parallel_for(chunks, threads, [&](std::size_t c, int) {
        thread_local NetworkTape tape;
        const std::size_t lo = c * kBatchChunk;
        const std::size_t len = std::min(kBatchChunk, n - lo);
        forward_tape(model, points_world.subspan(lo, len), true, tape);
        for (std::size_t i = 0; i < len; ++i) {
            if (!phi.empty()) {
                phi[lo + i] = tape_phi(model, tape, i, points_world[lo + i]);
            }
            jacobian[lo + i] = tape_jacobian(model, tape, i);
        }
    });
}

Vec3 forward(const DeformationModel& model, const Vec3& p_world)
{
    Vec3 out;
    forward_batch(model, std::span<const Vec3>(&p_world, 1), std::span<Vec3>(&out, 1));
    return out;
}

std::pair<Vec3, Mat3> spatial_jacobian(const DeformationModel& model, const Vec3& p_world)
{
    Vec3 phi;
    Mat3 j;
    jacobian_batch(model, std::span<const Vec3>(&p_world, 1), std::span<Vec3>(&phi, 1),
                   std::span<Mat3>(&j, 1));
    return {phi, j};
}

} // namespace confreg
