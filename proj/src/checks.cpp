#include "confreg/checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "confreg/energy.hpp"
#include "confreg/grad.hpp"
#include "confreg/loss.hpp"
#include "confreg/mat3.hpp"
#include "confreg/net.hpp"
#include "confreg/rng.hpp"
#include "confreg/volume.hpp"

namespace confreg {

namespace {

EnergyParams random_params(Rng& rng)
{
    return EnergyParams(rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 3),
                        rng.uniform(1.1, 4));
}

Mat3 random_rotation(Rng& rng)
{
    return rotation_from_quaternion(rng.normal(), rng.normal(), rng.normal(), rng.normal());
}

Mat3 random_near_identity(Rng& rng, double det_lo, double det_hi)
{
    for (;;) {
        Mat3 a = Mat3::identity();
        for (double& v : a.m) {
            v += rng.uniform(-0.6, 0.6);
        }
        a = std::cbrt(rng.uniform(det_lo, det_hi) / std::fabs(det(a))) * a;
        const double d = det(a);
        if (d > det_lo && d < det_hi) {
            return a;
        }
    }
}

void record(SuiteResult& r, double err, const std::string& where)
{
    ++r.cases;
    if (!(err <= r.tolerance)) {
        if (r.failures == 0) {
            std::ostringstream s;
            s << where << ": error " << err;
            r.detail = s.str();
        }
        ++r.failures;
    }
    if (std::isnan(err)) {
        r.worst = err;
    } else if (!std::isnan(r.worst)) {
        r.worst = std::max(r.worst, err);
    }
}

SuiteResult start(const char* name, double tolerance)
{
    SuiteResult r;
    r.name = name;
    r.tolerance = tolerance;
    return r;
}

} // namespace

SuiteResult check_energy_normalization(std::uint64_t seed, int cases, double tolerance)
{
    SuiteResult r = start("energy_normalization", tolerance);
    Rng rng(seed);
    for (int n = 0; n < cases; ++n) {
        const EnergyParams p = random_params(rng);
        record(r, std::fabs(density(Mat3::identity(), p)), "case " + std::to_string(n));
    }
    return r;
}

SuiteResult check_conformal_invariance(std::uint64_t seed, int cases, double tolerance)
{
    SuiteResult r = start("conformal_invariance", tolerance);
    Rng rng(seed);
    for (int n = 0; n < cases; ++n) {
        const EnergyParams p = random_params(rng);
        const double c = rng.uniform(0.5, 2.0);
        const DensityTerms t = density_terms(c * random_rotation(rng), p);
        const double want_len = p.a1() * std::pow(3.0, 4.5);
        const double want_area = 27.0 * p.a2();
        const double err = std::max(std::fabs(t.length - want_len) / want_len,
                                    std::fabs(t.area - want_area) / want_area);
        record(r, err, "case " + std::to_string(n) + " (c = " + std::to_string(c) + ")");
    }
    return r;
}

SuiteResult check_energy_gradients(std::uint64_t seed, int cases, double tolerance)
{
    SuiteResult r = start("energy_gradients", tolerance);
    Rng rng(seed);
    const double h = 1e-6;
    for (int n = 0; n < cases; ++n) {
        const EnergyParams p = random_params(rng);
        const Mat3 j = random_near_identity(rng, 0.1, 5.0);
        const Mat3 g = density_grad(j, p);
        double scale = 0.0;
        for (double v : g.m) {
            scale = std::max(scale, std::fabs(v));
        }
        double err = 0.0;
        for (int e = 0; e < 9; ++e) {
            Mat3 up = j, dn = j;
            up.m[e] += h;
            dn.m[e] -= h;
            const double fd = (density(up, p) - density(dn, p)) / (2 * h);
            err = std::max(err, std::fabs(g.m[e] - fd) / std::max(scale, 1e-12));
        }
        record(r, err, "case " + std::to_string(n));
    }
    return r;
}

SuiteResult check_network_gradients(std::uint64_t seed, int nets, double tolerance)
{
    SuiteResult r = start("network_gradients", tolerance);
    Rng rng(seed);
    for (int n = 0; n < nets; ++n) {
        NetConfig c;
        c.num_layers = 2 + static_cast<int>(rng.below(2));
        c.hidden_units = 4 + static_cast<int>(rng.below(13));
        c.encoder = n % 4 == 3 ? Encoder::fourier : Encoder::periodic;
        c.fourier_features = 4;
        c.omega = 3.0;
        c.seed = rng.next_u64();
        auto model = DeformationModel::init(c, Normalization{{0, 0, 0}, {11.0, 11.0, 11.0}});
        randomize_parameters(model, rng.next_u64());
        const NccMode mode = n % 2 == 0 ? NccMode::windowed : NccMode::batch_global;
        GradCheckOptions opts;
        opts.tolerance = tolerance;
        const auto report = check_gradients(model, make_gradcheck_problem(rng.next_u64(), mode), opts);
        for (const auto& comp : report.components) {
            record(r, comp.max_rel_error,
                   "net " + std::to_string(n) + " " + component_name(comp.component) + " parameter " +
                       std::to_string(comp.worst_index));
        }
    }
    return r;
}

SuiteResult check_spatial_jacobian(std::uint64_t seed, int cases, double tolerance)
{
    SuiteResult r = start("spatial_jacobian", tolerance);
    Rng rng(seed);
    const Normalization norm{{1.0, -2.0, 0.5}, {20.0, 15.0, 30.0}};
    const double h = 1e-4;
    for (int n = 0; n < cases; ++n) {
        NetConfig c;
        c.num_layers = 2 + static_cast<int>(rng.below(3));
        c.hidden_units = 4 + static_cast<int>(rng.below(13));
        c.encoder = n % 4 == 3 ? Encoder::fourier : Encoder::periodic;
        c.fourier_features = 6;
        c.seed = rng.next_u64();
        auto model = DeformationModel::init(c, norm);
        randomize_parameters(model, rng.next_u64(), 0.3);
        const Vec3 p{rng.uniform(-18, 20), rng.uniform(-16, 12), rng.uniform(-28, 29)};
        const auto [phi, j] = spatial_jacobian(model, p);
        double err = 0.0;
        for (int k = 0; k < 3; ++k) {
            Vec3 up = p, dn = p;
            up[k] += h;
            dn[k] -= h;
            const Vec3 fu = forward(model, up), fd = forward(model, dn);
            for (int row = 0; row < 3; ++row) {
                const double num = (fu[row] - fd[row]) / (2 * h);
                err = std::max(err, std::fabs(j(row, k) - num) / std::max(1.0, std::fabs(num)));
            }
        }
        record(r, err, "case " + std::to_string(n));
    }
    return r;
}

SuiteResult check_identity_start(std::uint64_t seed, double tolerance)
{
    SuiteResult r = start("identity_start", tolerance);
    const Geometry geom{{24, 24, 24}, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}};
    std::vector<double> data(geom.voxel_count());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec3 x = geom.world(geom.unravel(i));
        data[i] = std::sin(0.7 * x[0]) * std::cos(0.45 * x[1]) + 0.3 * std::sin(0.9 * x[2] - 0.4 * x[0]);
    }
    const Volume vol(geom, std::move(data), std::vector<std::uint8_t>(geom.voxel_count(), 1));

    NetConfig cfg; // full-size default network
    cfg.seed = seed;
    const auto model = DeformationModel::init(cfg, Normalization::from_box(geom.lower(), geom.upper()));

    Rng rng(seed);
    std::vector<Vec3> pts(256);
    for (Vec3& p : pts) {
        p = {rng.uniform(2, 21), rng.uniform(2, 21), rng.uniform(2, 21)};
    }
    std::vector<Vec3> phi(pts.size());
    std::vector<Mat3> jac(pts.size());
    jacobian_batch(model, pts, phi, jac);
    double map_err = 0.0, det_err = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (int k = 0; k < 3; ++k) {
            map_err = std::max(map_err, std::fabs(phi[i][k] - pts[i][k]));
        }
        det_err = std::max(det_err, std::fabs(det(jac[i]) - 1.0));
    }
    record(r, map_err, "max |phi(p) - p|");
    record(r, det_err, "max |det - 1|");

    const LossConfig loss; // windowed NCC, defaults
    const LossTerms terms = total_loss(vol, vol, model, pts, loss);
    record(r, std::fabs(terms.regulariser), "regulariser");
    record(r, std::fabs(terms.total + 1.0), "total loss + 1");
    std::ostringstream s;
    s << "map " << map_err << ", det " << det_err << ", regulariser " << terms.regulariser << ", total "
      << terms.total;
    if (r.failures == 0) {
        r.detail = s.str();
    }
    return r;
}

} // namespace confreg
