#include "confreg/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "confreg/checks.hpp"
#include "confreg/config.hpp"
#include "confreg/error.hpp"
#include "confreg/eval.hpp"
#include "confreg/io.hpp"
#include "confreg/opt.hpp"
#include "confreg/simd/kernels.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace confreg::cli {

namespace {

class IdentityMap final : public DeformationMap {
public:
    void evaluate(std::span<const Vec3> points, std::span<Vec3> phi, std::span<Mat3> jacobian) const override
    {
        for (std::size_t i = 0; i < points.size(); ++i) {
            phi[i] = points[i];
            if (!jacobian.empty()) {
                jacobian[i] = Mat3::identity();
            }
        }
    }
};

Vec3 triple(const std::vector<double>& v, const char* flag)
{
    if (v.size() == 1) {
        return {v[0], v[0], v[0]};
    }
    if (v.size() == 3) {
        return {v[0], v[1], v[2]};
    }
    throw UsageError(std::string(flag) + " takes one or three values");
}

Index3 dims_of(const std::vector<long long>& v, const char* flag)
{
    if (v.size() != 1 && v.size() != 3) {
        throw UsageError(std::string(flag) + " takes one or three values");
    }
    Index3 d{};
    for (int k = 0; k < 3; ++k) {
        const long long x = v[v.size() == 1 ? 0 : k];
        if (x < 1) {
            throw UsageError(std::string(flag) + " must be positive");
        }
        d[k] = static_cast<std::size_t>(x);
    }
    return d;
}

// Path with the extension swapped for `suffix` + `ext`.
fs::path sibling(const fs::path& p, const std::string& suffix, const std::string& ext)
{
    fs::path out = p;
    out.replace_filename(p.stem().string() + suffix + ext);
    return out;
}

struct Common {
    int threads = 0;
    bool deterministic = false;
};

struct RegisterArgs {
    std::string source, target, mask, config, out_model, out_log;
    std::string preset;
    std::optional<int> epochs, points, window, log_every;
    std::optional<double> lr, lambda;
    std::optional<std::string> ncc_mode, encoder;
    std::optional<std::uint64_t> seed;
    bool whole_domain = false;
    std::vector<long long> raw_dims;
    std::vector<double> raw_spacing{1.0};
    std::string raw_type = "int16";
    bool raw_big_endian = false;
};

struct WarpArgs {
    std::string volume, model, out;
};

struct TreArgs {
    std::string model, landmarks_target, landmarks_source, out;
    std::vector<double> spacing;
    std::vector<double> origin{0.0};
    int index_base = 1;
};

struct JacdetArgs {
    std::string model, geometry_from, out;
};

struct SynthArgs {
    std::string kind = "sinusoidal";
    double amplitude = 8.0;
    std::vector<long long> dims{64};
    std::vector<double> spacing{1.0};
    std::uint64_t seed = 1;
    int landmark_stride = 8;
    std::string out_prefix;
};

struct SelfcheckArgs {
    std::uint64_t seed = 7;
    std::string out;
};

Volume load_volume(const std::string& path, const RegisterArgs& a)
{
    if (a.raw_dims.empty()) {
        return read_volume(path);
    }
    VolumeHeader spec;
    spec.dims = dims_of(a.raw_dims, "--raw-dims");
    spec.spacing = triple(a.raw_spacing, "--raw-spacing");
    spec.element_type = parse_element_type(a.raw_type);
    spec.byte_order = a.raw_big_endian ? ByteOrder::big : ByteOrder::little;
    return read_raw_volume(path, spec);
}

std::string encoder_name(Encoder e)
{
    return e == Encoder::fourier ? "fourier" : "periodic";
}

int do_register(const RegisterArgs& a, const Common& c, std::ostream& out)
{
    RunConfig cfg = a.config.empty() ? default_config() : read_config(a.config);
    for (const auto& w : cfg.warnings) {
        out << "warning: " << w << '\n';
    }
    for (const auto& line : cfg.defaults_applied) {
        out << "config: " << line << '\n';
    }

    std::vector<std::string> flags;
    if (!a.preset.empty()) {
        apply_preset(cfg, a.preset);
        flags.push_back("preset = " + a.preset);
    }
    if (a.epochs) {
        cfg.train.epochs = *a.epochs;
        flags.push_back("train.epochs = " + std::to_string(*a.epochs));
    }
    if (a.points) {
        cfg.train.points_per_epoch = *a.points;
        flags.push_back("train.points_per_epoch = " + std::to_string(*a.points));
    }
    if (a.log_every) {
        cfg.train.log_every = *a.log_every;
        flags.push_back("train.log_every = " + std::to_string(*a.log_every));
    }
    if (a.lr) {
        cfg.train.learning_rate = *a.lr;
        flags.push_back("train.learning_rate = " + std::to_string(*a.lr));
    }
    if (a.seed) {
        cfg.train.seed = *a.seed;
        cfg.net.seed = *a.seed;
        flags.push_back("net.seed = train.seed = " + std::to_string(*a.seed));
    }
    if (a.lambda) {
        cfg.loss.lambda = *a.lambda;
        flags.push_back("loss.lambda = " + std::to_string(*a.lambda));
    }
    if (a.window) {
        cfg.loss.window_n = *a.window;
        flags.push_back("loss.window_n = " + std::to_string(*a.window));
    }
    if (a.ncc_mode) {
        if (*a.ncc_mode == "windowed") {
            cfg.loss.ncc_mode = NccMode::windowed;
        } else if (*a.ncc_mode == "batch_global") {
            cfg.loss.ncc_mode = NccMode::batch_global;
        } else {
            throw UsageError("--ncc-mode must be windowed or batch_global");
        }
        flags.push_back("loss.ncc_mode = " + *a.ncc_mode);
    }
    if (a.encoder) {
        if (*a.encoder == "periodic") {
            cfg.net.encoder = Encoder::periodic;
        } else if (*a.encoder == "fourier") {
            cfg.net.encoder = Encoder::fourier;
        } else {
            throw UsageError("--encoder must be periodic or fourier");
        }
        flags.push_back("net.encoder = " + *a.encoder);
    }
    if (c.deterministic) {
        cfg.train.deterministic = true;
    }
    cfg.train.threads = c.threads;
    for (const auto& f : flags) {
        out << "config: " << f << " (flag)\n";
    }
    cfg.net.validate();
    cfg.loss.validate();
    cfg.train.validate();

    Volume source = load_volume(a.source, a);
    Volume target = load_volume(a.target, a);
    if (!a.mask.empty()) {
        target.set_mask(read_mask(a.mask, target.geometry()));
    } else if (a.whole_domain) {
        target.set_mask(std::vector<std::uint8_t>(target.voxel_count(), 1));
    } else {
        throw UsageError("register needs --mask, or --whole-domain to sample every voxel");
    }

    out << "register: " << cfg.net.num_layers << " layers x " << cfg.net.hidden_units << " ("
        << encoder_name(cfg.net.encoder) << "), " << cfg.train.epochs << " epochs x "
        << cfg.train.points_per_epoch << " points, threads " << cfg.train.threads
        << (cfg.train.deterministic ? ", deterministic" : "") << ", kernels " << simd::kernels().name << '\n';

    const auto t0 = std::chrono::steady_clock::now();
    const int every = cfg.train.log_every;
    const int last = cfg.train.epochs - 1;
    const auto result = register_pair(source, target, cfg.net, cfg.loss, cfg.train, [&](const LogRecord& r) {
        if (r.epoch % every == 0 || r.epoch == last) {
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            out << "epoch " << r.epoch << " similarity " << r.similarity << " regulariser " << r.regulariser
                << " total " << r.total << " (" << std::fixed << std::setprecision(1) << s << " s)"
                << std::defaultfloat << std::setprecision(6) << '\n';
        }
    });
    write_checkpoint(a.out_model, result.model);
    if (!a.out_log.empty()) {
        write_training_log(a.out_log, result.log);
    }
    out << "wrote " << a.out_model << '\n';
    return ok;
}

int do_warp(const WarpArgs& a, const Common& c, std::ostream& out)
{
    const Volume vol = read_volume(a.volume);
    const DeformationModel model = read_checkpoint(a.model);
    const Volume warped = warp_volume(vol, NetworkMap(model, c.threads));
    write_volume(a.out, warped);
    out << "wrote " << a.out << '\n';
    return ok;
}

int do_tre(const TreArgs& a, const Common& c, std::ostream& out)
{
    LandmarkSet lm;
    lm.points_target = read_landmarks(a.landmarks_target);
    lm.points_source = read_landmarks(a.landmarks_source);
    lm.index_base = a.index_base;
    lm.validate();
    const Vec3 spacing = triple(a.spacing, "--spacing");
    const Vec3 origin = triple(a.origin, "--origin");

    TreResult r;
    if (a.model.empty()) {
        r = tre(IdentityMap{}, lm, spacing, origin);
    } else {
        const DeformationModel model = read_checkpoint(a.model);
        r = tre(NetworkMap(model, c.threads), lm, spacing, origin);
    }
    if (!a.out.empty()) {
        const fs::path json = a.out;
        write_tre_report(json, sibling(json, "", ".csv"), r);
    }
    out << "tre: mean " << std::fixed << std::setprecision(4) << r.mean << " mm over " << r.per_landmark.size()
        << " landmarks" << std::defaultfloat << std::setprecision(6) << '\n';
    return ok;
}

int do_jacdet(const JacdetArgs& a, const Common& c, std::ostream& out)
{
    const VolumeHeader h = read_header(a.geometry_from);
    const DeformationModel model = read_checkpoint(a.model);
    const JacDetField field = jacdet_grid(NetworkMap(model, c.threads), h.geometry());
    const fs::path mhd = a.out;
    write_volume(mhd, Volume(field.geometry, field.values));
    write_jacdet_summary(sibling(mhd, "_summary", ".json"), sibling(mhd, "_summary", ".csv"), field);
    out << "jacdet: negative_fraction " << field.negative_fraction << " min " << std::setprecision(17)
        << field.min_value << " max " << field.max_value << std::setprecision(6) << " over " << field.values.size()
        << " points\n";
    return ok;
}

int do_synth(const SynthArgs& a, std::ostream& out)
{
    if (a.out_prefix.empty()) {
        throw UsageError("synth needs --out-prefix");
    }
    const Geometry geom{dims_of(a.dims, "--dims"), triple(a.spacing, "--spacing"), {0.0, 0.0, 0.0}};
    geom.validate();
    const SynthCase sc = make_synthetic_case(parse_synth_kind(a.kind), a.amplitude, geom, a.seed, a.landmark_stride);

    const std::string p = a.out_prefix;
    if (const fs::path dir = fs::path(p).parent_path(); !dir.empty()) {
        fs::create_directories(dir);
    }
    write_volume(p + "_source.mhd", sc.source);
    write_volume(p + "_target.mhd", sc.target);
    std::vector<double> mask(sc.target.mask().begin(), sc.target.mask().end());
    write_volume(p + "_mask.mhd", Volume(geom, std::move(mask)), ElementType::uint8);
    write_vector_field(p + "_field.mhd", geom, sc.truth.displacement);
    write_landmarks(p + "_landmarks_target.txt", sc.landmarks.points_target);
    write_landmarks(p + "_landmarks_source.txt", sc.landmarks.points_source);

    const TreResult init = tre(IdentityMap{}, sc.landmarks, geom.spacing, geom.origin);
    const TreResult truth = tre(sc.truth.map, sc.landmarks, geom.spacing, geom.origin);
    out << "synth: " << a.kind << " amplitude " << a.amplitude << ", " << sc.landmarks.count()
        << " landmarks, initial tre " << init.mean << " mm, true-field tre " << truth.mean << " mm\n";
    return ok;
}

int do_selfcheck(const SelfcheckArgs& a, std::ostream& out)
{
    const std::vector<SuiteResult> suites{
        check_energy_normalization(a.seed),       check_conformal_invariance(a.seed + 1),
        check_energy_gradients(a.seed + 2),       check_network_gradients(a.seed + 3),
        check_spatial_jacobian(a.seed + 4, 200),  check_identity_start(a.seed + 5),
    };
    nlohmann::json report;
    report["kernels"] = std::string(simd::kernels().name);
    bool all = true;
    for (const auto& s : suites) {
        all = all && s.passed();
        out << (s.passed() ? "PASS " : "FAIL ") << s.name << ": " << s.cases << " cases, worst " << s.worst
            << " (tolerance " << s.tolerance << ")";
        if (!s.detail.empty() && !s.passed()) {
            out << ", first failure " << s.detail;
        }
        out << '\n';
        report["suites"].push_back({{"name", s.name},
                                    {"passed", s.passed()},
                                    {"cases", s.cases},
                                    {"failures", s.failures},
                                    {"worst", s.worst},
                                    {"tolerance", s.tolerance},
                                    {"detail", s.detail}});
    }
    report["passed"] = all;
    if (!a.out.empty()) {
        std::ofstream f(a.out);
        if (!f) {
            throw UnreadableFileError("cannot write '" + a.out + "'");
        }
        f << report.dump(2) << '\n';
    } else {
        out << report.dump() << '\n';
    }
    return all ? ok : numerical;
}

} // namespace

int default_threads()
{
    if (const char* env = std::getenv("CONFREG_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) {
                return n;
            }
        } catch (const std::exception&) {
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Deformable registration with a coordinate network and a hyperelastic regulariser", "confreg"};
    app.require_subcommand(1, 1);

    Common common;
    common.threads = default_threads();
    app.add_option("--threads", common.threads, "Worker threads (default: CONFREG_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", common.deterministic, "Force the reproducible reduction order");

    RegisterArgs ra;
    auto* reg = app.add_subcommand("register", "Fit a deformation from target to source space");
    reg->add_option("--source", ra.source, "Moving volume")->required();
    reg->add_option("--target", ra.target, "Fixed volume")->required();
    reg->add_option("--mask", ra.mask, "Target mask volume");
    reg->add_flag("--whole-domain", ra.whole_domain, "Sample every target voxel when no mask is given");
    reg->add_option("--config", ra.config, "TOML-style configuration file");
    reg->add_option("--out-model", ra.out_model, "Checkpoint to write")->required();
    reg->add_option("--out-log", ra.out_log, "Training log CSV");
    reg->add_option("--preset", ra.preset, "large-motion or small-motion");
    reg->add_option("--epochs", ra.epochs)->check(CLI::NonNegativeNumber);
    reg->add_option("--points", ra.points, "Points per epoch")->check(CLI::PositiveNumber);
    reg->add_option("--lr", ra.lr, "Learning rate");
    reg->add_option("--lambda", ra.lambda, "Regulariser weight");
    reg->add_option("--ncc-mode", ra.ncc_mode, "windowed or batch_global");
    reg->add_option("--window", ra.window, "NCC window edge (odd)");
    reg->add_option("--encoder", ra.encoder, "periodic or fourier");
    reg->add_option("--seed", ra.seed, "Seed for initialisation and sampling");
    reg->add_option("--log-every", ra.log_every)->check(CLI::PositiveNumber);
    reg->add_option("--raw-dims", ra.raw_dims, "Read inputs as headerless raw with these dims")->expected(1, 3);
    reg->add_option("--raw-spacing", ra.raw_spacing, "Raw voxel spacing (mm)")->expected(1, 3);
    reg->add_option("--raw-type", ra.raw_type, "Raw element type");
    reg->add_flag("--raw-big-endian", ra.raw_big_endian);

    WarpArgs wa;
    auto* warp = app.add_subcommand("warp", "Resample a source volume into target space");
    warp->add_option("--volume", wa.volume)->required();
    warp->add_option("--model", wa.model)->required();
    warp->add_option("--out", wa.out)->required();

    TreArgs ta;
    auto* tre_cmd = app.add_subcommand("tre", "Landmark target registration error");
    tre_cmd->add_option("--model", ta.model, "Checkpoint (identity if omitted)");
    tre_cmd->add_option("--landmarks-target", ta.landmarks_target)->required();
    tre_cmd->add_option("--landmarks-source", ta.landmarks_source)->required();
    tre_cmd->add_option("--spacing", ta.spacing, "Voxel spacing (mm)")->required()->expected(1, 3);
    tre_cmd->add_option("--origin", ta.origin, "World position of the first voxel")->expected(1, 3);
    tre_cmd->add_option("--index-base", ta.index_base, "0 or 1");
    tre_cmd->add_option("--out", ta.out, "JSON report; a CSV is written next to it");

    JacdetArgs ja;
    auto* jac = app.add_subcommand("jacdet", "Jacobian determinant of a model on a grid");
    jac->add_option("--model", ja.model)->required();
    jac->add_option("--geometry-from", ja.geometry_from, "Volume header supplying the grid")->required();
    jac->add_option("--out", ja.out, "Determinant volume (.mhd)")->required();

    SynthArgs sa;
    auto* syn = app.add_subcommand("synth", "Synthetic pair with a known deformation");
    syn->add_option("--kind", sa.kind, "translation, scaling or sinusoidal");
    syn->add_option("--amplitude", sa.amplitude, "mm, or the factor for scaling");
    syn->add_option("--dims", sa.dims)->expected(1, 3);
    syn->add_option("--spacing", sa.spacing)->expected(1, 3);
    syn->add_option("--seed", sa.seed);
    syn->add_option("--landmark-stride", sa.landmark_stride)->check(CLI::PositiveNumber);
    syn->add_option("--out-prefix", sa.out_prefix)->required();

    SelfcheckArgs ca;
    auto* self = app.add_subcommand("selfcheck", "Gradient, energy and invariance checks");
    self->add_option("--seed", ca.seed);
    self->add_option("--out", ca.out, "JSON report");

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? ok : usage;
    }

    try {
        if (reg->parsed()) {
            return do_register(ra, common, out);
        }
        if (warp->parsed()) {
            return do_warp(wa, common, out);
        }
        if (tre_cmd->parsed()) {
            return do_tre(ta, common, out);
        }
        if (jac->parsed()) {
            return do_jacdet(ja, common, out);
        }
        if (syn->parsed()) {
            return do_synth(sa, out);
        }
        return do_selfcheck(ca, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return usage;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return data;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return numerical;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return data;
    }
}

int run(int argc, const char* const* argv)
{
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run(args, std::cout, std::cerr);
}

} // namespace confreg::cli
