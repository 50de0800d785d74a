#include "confreg/grad.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>

#include "confreg/error.hpp"
#include "confreg/parallel.hpp"
#include "confreg/rng.hpp"
#include "confreg/simd/kernels.hpp"

namespace confreg {

bool ParamGrads::all_finite() const
{
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void backward_tape(const DeformationModel& model, NetworkTape& tape, std::span<const double> adj_output,
                   std::span<double> grads)
{
    using simd::Trans;
    const auto layers = model.layers();
    const std::size_t m = tape.points;
    const std::size_t rows = tape.rows();
    const std::size_t blocks = tape.tangents ? 4 : 1;
    const double omega = model.config().omega;
    const double* params = model.params().data();

    thread_local std::vector<double> adj_a;
    thread_local std::vector<double> adj_b;
    adj_a.assign(adj_output.begin(), adj_output.end());

    for (std::size_t l = layers.size(); l-- > 0;) {
        const LayerShape& s = layers[l];
        NetworkTape::Layer& lt = tape.layers[l];
        double* g = adj_a.data(); // rows x out, becomes d(loss)/d(pre-activation)

        if (s.sine) {
            const std::size_t n = m * s.out;
            const double w2 = omega * omega;
            for (std::size_t e = 0; e < n; ++e) {
                double mixed = 0.0;
                for (std::size_t k = 1; k < blocks; ++k) {
                    mixed += lt.pre[k * n + e] * g[k * n + e];
                }
                g[e] = omega * lt.cos[e] * g[e] - w2 * lt.sin[e] * mixed;
            }
            for (std::size_t k = 1; k < blocks; ++k) {
                double* gk = g + k * n;
                for (std::size_t e = 0; e < n; ++e) {
                    gk[e] *= omega * lt.cos[e];
                }
            }
        }

        simd::gemm(Trans::yes, Trans::no, s.out, s.in, rows, g, s.out, lt.input.data(), s.in, 0.0,
                   grads.data() + s.weight_offset, s.in);
        double* gb = grads.data() + s.bias_offset;
        std::fill(gb, gb + s.out, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = g + i * s.out;
            for (std::size_t o = 0; o < s.out; ++o) {
                gb[o] += row[o];
            }
        }

        if (l > 0) {
            adj_b.resize(rows * s.in);
            simd::gemm(Trans::no, Trans::no, rows, s.in, s.out, g, s.out, params + s.weight_offset, s.in, 0.0,
                       adj_b.data(), s.in);
            std::swap(adj_a, adj_b);
        }
    }
}

std::string component_name(LossComponent component)
{
    switch (component) {
    case LossComponent::all:
        return "total";
    case LossComponent::similarity:
        return "similarity";
    case LossComponent::length:
        return "regulariser_length";
    case LossComponent::area:
        return "regulariser_area";
    case LossComponent::volume:
        return "regulariser_volume";
    case LossComponent::inverse_volume:
        return "regulariser_inverse_volume";
    }
    return "unknown";
}

namespace {

struct Partial {
    double sim = 0.0;
    double reg = 0.0;
    std::vector<double> grads;

    void add(const Partial& o)
    {
        sim += o.sim;
        reg += o.reg;
        for (std::size_t i = 0; i < grads.size(); ++i) {
            grads[i] += o.grads[i];
        }
    }
};

struct Context {
    const DeformationModel& model;
    const Volume& source;
    const Volume& target;
    std::span<const Vec3> batch;
    const LossConfig& cfg;
    LossComponent component;
    bool sim_on;
    bool reg_on;
    std::vector<Vec3> offsets;
    // batch_global: d(loss)/d(phi_i), precomputed from the global statistics.
    std::vector<Vec3> global_adj_phi;
};

[[noreturn]] void non_finite(const char* what, std::size_t index, const Vec3& p)
{
    std::ostringstream msg;
    msg << "non-finite " << what << " at batch point " << index << " (" << p[0] << ", " << p[1] << ", " << p[2]
        << ")";
    throw NumericalError(msg.str());
}

double regulariser_value_grad(const Context& ctx, const Mat3& j, Mat3& grad)
{
    switch (ctx.component) {
    case LossComponent::length:
        return term_with_grad(j, ctx.cfg.energy, EnergyTerm::length, grad);
    case LossComponent::area:
        return term_with_grad(j, ctx.cfg.energy, EnergyTerm::area, grad);
    case LossComponent::volume:
        return term_with_grad(j, ctx.cfg.energy, EnergyTerm::volume, grad);
    case LossComponent::inverse_volume:
        return term_with_grad(j, ctx.cfg.energy, EnergyTerm::inverse_volume, grad);
    default:
        return density_with_grad(j, ctx.cfg.energy, grad);
    }
}

struct Workspace {
    NetworkTape window_tape;
    NetworkTape center_tape;
    std::vector<Vec3> points;
    std::vector<double> adj;
    std::vector<double> s, t, d_ds;
    std::vector<Vec3> grad_s;
    std::vector<double> scratch;
};

Workspace& workspace()
{
    thread_local Workspace ws;
    return ws;
}

// Loss contributions and parameter gradient of batch points [lo, lo + len).
void eval_chunk(const Context& ctx, std::size_t lo, std::size_t len, Partial& out)
{
    Workspace& ws = workspace();
    const DeformationModel& model = ctx.model;
    const Vec3& h = model.normalization().half_extent;
    const double inv_n = 1.0 / static_cast<double>(ctx.batch.size());
    const auto centers = ctx.batch.subspan(lo, len);
    const std::size_t p_count = model.parameter_count();

    out.sim = 0.0;
    out.reg = 0.0;
    out.grads.assign(p_count, 0.0);

    const bool windowed = ctx.cfg.ncc_mode == NccMode::windowed;

    if (ctx.sim_on && windowed) {
        const std::size_t w = ctx.offsets.size();
        const std::size_t rows = len * w;
        ws.points.resize(rows);
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t o = 0; o < w; ++o) {
                for (int a = 0; a < 3; ++a) {
                    ws.points[i * w + o][a] = centers[i][a] + ctx.offsets[o][a];
                }
            }
        }
        forward_tape(model, ws.points, false, ws.window_tape);
        ws.adj.assign(rows * 3, 0.0);
        ws.s.resize(w);
        ws.t.resize(w);
        ws.d_ds.resize(w);
        ws.grad_s.resize(w);
        for (std::size_t i = 0; i < len; ++i) {
            for (std::size_t o = 0; o < w; ++o) {
                const std::size_t r = i * w + o;
                const Vec3 phi = tape_phi(model, ws.window_tape, r, ws.points[r]);
                ws.s[o] = sample_with_gradient(ctx.source, phi, ws.grad_s[o]);
                ws.t[o] = sample(ctx.target, ws.points[r]);
            }
            const double f = squared_ncc(ws.s, ws.t, ctx.cfg.variance_eps, ws.d_ds);
            if (!std::isfinite(f)) {
                non_finite("similarity", lo + i, centers[i]);
            }
            out.sim -= f;
            for (std::size_t o = 0; o < w; ++o) {
                const double adj_s = -inv_n * ws.d_ds[o];
                double* a = ws.adj.data() + (i * w + o) * 3;
                for (int c = 0; c < 3; ++c) {
                    a[c] = adj_s * ws.grad_s[o][c] * h[c];
                }
            }
        }
        backward_tape(model, ws.window_tape, ws.adj, out.grads);
    }

    const bool need_center_pass = ctx.reg_on || (ctx.sim_on && !windowed);
    if (!need_center_pass) {
        return;
    }

    forward_tape(model, centers, true, ws.center_tape);
    ws.adj.assign(ws.center_tape.rows() * 3, 0.0);
    const double reg_weight = ctx.reg_on ? ctx.cfg.lambda * inv_n : 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        if (ctx.sim_on && !windowed) {
            const Vec3& ap = ctx.global_adj_phi[lo + i];
            for (int c = 0; c < 3; ++c) {
                ws.adj[i * 3 + c] = ap[c] * h[c];
            }
        }
        if (ctx.reg_on) {
            const Mat3 j = tape_jacobian(model, ws.center_tape, i);
            Mat3 gj;
            const double wv = regulariser_value_grad(ctx, j, gj);
            if (!std::isfinite(wv) || !is_finite(gj)) {
                non_finite("regulariser", lo + i, centers[i]);
            }
            out.reg += wv;
            // J = I + diag(h) dU diag(1/h), dU(r, k) = du_r / dq_k
            for (int k = 0; k < 3; ++k) {
                double* a = ws.adj.data() + ((1 + k) * len + i) * 3;
                for (int r = 0; r < 3; ++r) {
                    a[r] = reg_weight * gj(r, k) * h[r] / h[k];
                }
            }
        }
    }
    if (ctx.sim_on && windowed) {
        ws.scratch.assign(p_count, 0.0);
        backward_tape(model, ws.center_tape, ws.adj, ws.scratch);
        for (std::size_t p = 0; p < p_count; ++p) {
            out.grads[p] += ws.scratch[p];
        }
    } else {
        backward_tape(model, ws.center_tape, ws.adj, out.grads);
    }
}

// Global-NCC statistics and per-point adjoints; returns -NCC^2 over the batch.
double prepare_global(Context& ctx, int threads)
{
    const std::size_t n = ctx.batch.size();
    std::vector<Vec3> phi(n);
    forward_batch(ctx.model, ctx.batch, phi, threads);
    std::vector<double> s(n), t(n), d_ds(n);
    std::vector<Vec3> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i] = sample_with_gradient(ctx.source, phi[i], g[i]);
        t[i] = sample(ctx.target, ctx.batch[i]);
        if (!std::isfinite(s[i])) {
            non_finite("similarity", i, ctx.batch[i]);
        }
    }
    const double f = squared_ncc(s, t, ctx.cfg.variance_eps, d_ds);
    if (!std::isfinite(f)) {
        non_finite("similarity", 0, ctx.batch[0]);
    }
    ctx.global_adj_phi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            ctx.global_adj_phi[i][c] = -d_ds[i] * g[i][c];
        }
    }
    return -f;
}

std::size_t chunk_points(const Context& ctx)
{
    if (ctx.sim_on && ctx.cfg.ncc_mode == NccMode::windowed) {
        return std::max<std::size_t>(1, 2048 / ctx.offsets.size());
    }
    return 256;
}

Partial tree_sum(std::vector<Partial>& parts, std::size_t lo, std::size_t hi)
{
    if (hi - lo == 1) {
        return std::move(parts[lo]);
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    Partial left = tree_sum(parts, lo, mid);
    const Partial right = tree_sum(parts, mid, hi);
    left.add(right);
    return left;
}

} // namespace

LossAndGrads loss_gradients(const DeformationModel& model, const Volume& source, const Volume& target,
                            std::span<const Vec3> batch, const LossConfig& cfg, const GradOptions& opts,
                            LossComponent component)
{
    cfg.validate();
    if (batch.empty()) {
        throw UsageError("gradient batch is empty");
    }
    Context ctx{model, source, target, batch, cfg, component,
                component == LossComponent::all || component == LossComponent::similarity,
                component != LossComponent::similarity, {}, {}};
    if (cfg.ncc_mode == NccMode::windowed) {
        ctx.offsets = window_offsets(target.geometry(), cfg.window_n);
    }

    double global_sim = 0.0;
    if (ctx.sim_on && cfg.ncc_mode == NccMode::batch_global) {
        global_sim = prepare_global(ctx, opts.threads);
    }

    const std::size_t n = batch.size();
    const std::size_t per_chunk = chunk_points(ctx);
    const std::size_t chunks = (n + per_chunk - 1) / per_chunk;
    auto chunk_range = [&](std::size_t c) {
        const std::size_t lo = c * per_chunk;
        return std::pair{lo, std::min(per_chunk, n - lo)};
    };

    Partial total;
    if (opts.deterministic) {
        // Groups of consecutive chunks, each reduced pairwise by one worker;
        // the group layout depends only on the batch size.
        const std::size_t group = std::max<std::size_t>(1, (chunks + 63) / 64);
        const std::size_t groups = (chunks + group - 1) / group;
        std::vector<Partial> results(groups);
        parallel_for(groups, opts.threads, [&](std::size_t gi, int) {
            std::vector<std::pair<int, Partial>> stack;
            const std::size_t c_end = std::min(chunks, (gi + 1) * group);
            for (std::size_t c = gi * group; c < c_end; ++c) {
                Partial p;
                const auto [lo, len] = chunk_range(c);
                eval_chunk(ctx, lo, len, p);
                int level = 0;
                while (!stack.empty() && stack.back().first == level) {
                    Partial prev = std::move(stack.back().second);
                    stack.pop_back();
                    prev.add(p);
                    p = std::move(prev);
                    ++level;
                }
                stack.emplace_back(level, std::move(p));
            }
            Partial acc = std::move(stack.back().second);
            stack.pop_back();
            while (!stack.empty()) {
                Partial prev = std::move(stack.back().second);
                stack.pop_back();
                prev.add(acc);
                acc = std::move(prev);
            }
            results[gi] = std::move(acc);
        });
        total = tree_sum(results, 0, groups);
    } else {
        const int workers = std::max(1, opts.threads);
        std::vector<std::optional<Partial>> acc(workers);
        parallel_for(chunks, workers, [&](std::size_t c, int worker) {
            Partial p;
            const auto [lo, len] = chunk_range(c);
            eval_chunk(ctx, lo, len, p);
            if (acc[worker]) {
                acc[worker]->add(p);
            } else {
                acc[worker] = std::move(p);
            }
        });
        bool first = true;
        for (auto& a : acc) {
            if (!a) {
                continue;
            }
            if (first) {
                total = std::move(*a);
                first = false;
            } else {
                total.add(*a);
            }
        }
    }

    LossAndGrads result;
    const double inv_n = 1.0 / static_cast<double>(n);
    result.loss.similarity = ctx.sim_on ? (cfg.ncc_mode == NccMode::batch_global ? global_sim : total.sim * inv_n) : 0.0;
    result.loss.regulariser = ctx.reg_on ? total.reg * inv_n : 0.0;
    result.loss.total = result.loss.similarity + cfg.lambda * result.loss.regulariser;
    result.grads.values = std::move(total.grads);
    if (!std::isfinite(result.loss.total)) {
        throw NumericalError("non-finite batch loss");
    }
    if (!result.grads.all_finite()) {
        throw NumericalError("non-finite parameter gradient");
    }
    return result;
}

double component_loss(const DeformationModel& model, const Volume& source, const Volume& target,
                      std::span<const Vec3> batch, const LossConfig& cfg, LossComponent component)
{
    return loss_gradients(model, source, target, batch, cfg, {}, component).loss.total;
}

void randomize_parameters(DeformationModel& model, std::uint64_t seed, double head_scale)
{
    Rng rng(seed);
    const double omega = model.config().omega;
    auto params = model.params();
    for (const LayerShape& s : model.layers()) {
        const double n_in = static_cast<double>(s.in);
        double bound;
        if (!s.sine) {
            bound = head_scale / std::sqrt(n_in);
        } else if (s.weight_offset == 0 && model.config().encoder == Encoder::periodic) {
            bound = 1.0 / n_in;
        } else {
            bound = std::sqrt(6.0 / n_in) / omega;
        }
        for (std::size_t i = 0; i < s.in * s.out; ++i) {
            params[s.weight_offset + i] = rng.uniform(-bound, bound);
        }
        for (std::size_t i = 0; i < s.out; ++i) {
            params[s.bias_offset + i] = rng.uniform(-bound, bound);
        }
    }
}

GradCheckProblem make_gradcheck_problem(std::uint64_t seed, NccMode mode, std::size_t points)
{
    Rng rng(seed);
    Geometry g;
    g.dims = {12, 12, 12};
    g.spacing = {2.0, 2.0, 2.0};
    g.origin = {-11.0, -11.0, -11.0};

    // Affine source: its trilinear interpolant is the same affine function.
    const Vec3 slope{rng.uniform(0.5, 1.0), rng.uniform(-1.0, -0.5), rng.uniform(0.2, 0.6)};
    std::vector<double> src(g.voxel_count()), tgt(g.voxel_count());
    Vec3 f1{rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3)};
    Vec3 f2{rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3), rng.uniform(0.1, 0.3)};
    for (std::size_t idx = 0; idx < g.voxel_count(); ++idx) {
        const Vec3 x = g.world(g.unravel(idx));
        src[idx] = 5.0 + slope[0] * x[0] + slope[1] * x[1] + slope[2] * x[2];
        tgt[idx] = std::sin(f1[0] * x[0] + f1[1] * x[1]) + std::cos(f2[1] * x[1] - f2[2] * x[2]) + 0.03 * x[0];
    }

    GradCheckProblem p{Volume(g, std::move(src)), Volume(g, std::move(tgt)), {}, LossConfig{}};
    p.loss.lambda = 1.0;
    p.loss.window_n = 3;
    p.loss.ncc_mode = mode;
    // Interior points only: windows and warped samples stay inside the grid.
    for (std::size_t i = 0; i < points; ++i) {
        p.batch.push_back({rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)});
    }
    return p;
}

GradCheckReport check_gradients(const DeformationModel& model, const GradCheckProblem& problem,
                                const GradCheckOptions& opts)
{
    GradCheckReport report;
    report.tolerance = opts.tolerance;
    report.step = opts.step;
    report.parameter_count = model.parameter_count();

    const LossComponent components[] = {LossComponent::similarity, LossComponent::length, LossComponent::area,
                                        LossComponent::volume, LossComponent::inverse_volume};
    DeformationModel probe = model;
    for (LossComponent comp : components) {
        LossAndGrads analytic =
            loss_gradients(model, problem.source, problem.target, problem.batch, problem.loss, {}, comp);
        if (opts.corrupt) {
            opts.corrupt(comp, analytic.grads);
        }
        const std::size_t n = model.parameter_count();
        std::vector<double> fd(n);
        double max_fd = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double orig = probe.params()[i];
            probe.params()[i] = orig + opts.step;
            const double up = component_loss(probe, problem.source, problem.target, problem.batch, problem.loss, comp);
            probe.params()[i] = orig - opts.step;
            const double down =
                component_loss(probe, problem.source, problem.target, problem.batch, problem.loss, comp);
            probe.params()[i] = orig;
            fd[i] = (up - down) / (2.0 * opts.step);
            max_fd = std::max(max_fd, std::fabs(fd[i]));
        }
        ComponentCheck check;
        check.component = comp;
        check.max_abs_grad = max_fd;
        const double floor = std::max(1e-3 * max_fd, 1e-12);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = analytic.grads.values[i];
            const double denom = std::max({std::fabs(a), std::fabs(fd[i]), floor});
            const double rel = std::fabs(a - fd[i]) / denom;
            if (rel > check.max_rel_error || std::isnan(rel)) {
                check.max_rel_error = rel;
                check.worst_index = i;
            }
        }
        check.passed = check.max_rel_error <= opts.tolerance;
        report.passed = report.passed && check.passed;
        report.components.push_back(check);
    }
    return report;
}

GradCheckReport check_gradients(const DeformationModel& model, double tolerance)
{
    GradCheckOptions opts;
    opts.tolerance = tolerance;
    return check_gradients(model, make_gradcheck_problem(model.config().seed), opts);
}

} // namespace confreg
