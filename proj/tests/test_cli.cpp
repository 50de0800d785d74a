#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "confreg/cli.hpp"
#include "confreg/io.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace confreg;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// One synthetic case shared by the tests below.
struct Workspace {
    fs::path dir;

    Workspace()
    {
        dir = fs::temp_directory_path() / ("confreg_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        const Run r = run({"synth", "--kind", "sinusoidal", "--amplitude", "1.5", "--dims", "16", "--spacing", "1",
                           "--seed", "4", "--landmark-stride", "4", "--out-prefix", p("case")});
        REQUIRE(r.code == 0);
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string p(const std::string& name) const { return (dir / name).string(); }
};

Workspace& ws()
{
    static Workspace w;
    return w;
}

std::vector<std::string> register_args(const std::string& out_model, int epochs)
{
    const auto& w = ws();
    return {"--threads", "1", "register", "--source", w.p("case_source.mhd"), "--target", w.p("case_target.mhd"),
            "--mask", w.p("case_mask.mhd"), "--out-model", out_model, "--epochs", std::to_string(epochs),
            "--points", "128", "--preset", "small-motion", "--log-every", "1"};
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_SUITE("cli")
{
    TEST_CASE("usage errors exit with 1")
    {
        CHECK(run({}).code == 1);
        CHECK(run({"frobnicate"}).code == 1);
        CHECK(run({"tre"}).code == 1);
        CHECK(run({"synth", "--out-prefix", ws().p("x"), "--dims", "1", "2"}).code == 1);
        CHECK(run({"--help"}).code == 0);
    }

    TEST_CASE("synth writes the pair, field and landmark grid")
    {
        for (const char* f : {"case_source.mhd", "case_target.mhd", "case_mask.mhd", "case_field.mhd",
                              "case_landmarks_target.txt", "case_landmarks_source.txt"}) {
            CHECK(fs::exists(ws().p(f)));
        }
        CHECK(read_header(ws().p("case_field.mhd")).channels == 3);
        CHECK(read_header(ws().p("case_mask.mhd")).element_type == ElementType::uint8);
        CHECK(read_landmarks(ws().p("case_landmarks_target.txt")).size() ==
              read_landmarks(ws().p("case_landmarks_source.txt")).size());
        // Amplitude beyond the diffeomorphism bound.
        const Run r = run({"synth", "--amplitude", "9", "--dims", "16", "--out-prefix", ws().p("big")});
        CHECK(r.code == 1);
        CHECK(r.err.find("bound") != std::string::npos);
    }

    TEST_CASE("identity checkpoint: unit jacdet, identity warp and TRE")
    {
        const std::string model = ws().p("identity.ckpt");
        const Run reg = run(register_args(model, 0));
        REQUIRE(reg.code == 0);
        CHECK(reg.out.find("config: net.omega = 32 (default)") != std::string::npos);
        CHECK(reg.out.find("config: preset = small-motion (flag)") != std::string::npos);

        const Run jd = run({"jacdet", "--model", model, "--geometry-from", ws().p("case_target.mhd"), "--out",
                            ws().p("jd.mhd")});
        REQUIRE(jd.code == 0);
        const auto s = nlohmann::json::parse(slurp(ws().p("jd_summary.json")));
        CHECK(s["negative_fraction"].get<double>() == 0.0);
        CHECK(s["min"].get<double>() == 1.0);
        CHECK(s["max"].get<double>() == 1.0);
        CHECK(fs::exists(ws().p("jd_summary.csv")));
        CHECK(read_volume(ws().p("jd.mhd")).voxel_count() == 16 * 16 * 16);

        const Run wp = run({"warp", "--volume", ws().p("case_source.mhd"), "--model", model, "--out", ws().p("w.mhd")});
        REQUIRE(wp.code == 0);
        CHECK(read_volume(ws().p("w.mhd")).data() == read_volume(ws().p("case_source.mhd")).data());

        const std::vector<std::string> lm{"--landmarks-target", ws().p("case_landmarks_target.txt"),
                                          "--landmarks-source", ws().p("case_landmarks_source.txt"), "--spacing", "1"};
        std::vector<std::string> with_model{"tre", "--model", model, "--out", ws().p("tre.json")};
        with_model.insert(with_model.end(), lm.begin(), lm.end());
        std::vector<std::string> without{"tre", "--out", ws().p("tre0.json")};
        without.insert(without.end(), lm.begin(), lm.end());
        REQUIRE(run(with_model).code == 0);
        REQUIRE(run(without).code == 0);
        const auto a = nlohmann::json::parse(slurp(ws().p("tre.json")));
        const auto b = nlohmann::json::parse(slurp(ws().p("tre0.json")));
        CHECK(a["mean_mm"].get<double>() == b["mean_mm"].get<double>());
        CHECK(a["mean_mm"].get<double>() > 0.5);
        CHECK(fs::exists(ws().p("tre.csv")));
    }

    TEST_CASE("register is reproducible across runs and thread counts")
    {
        REQUIRE(run(register_args(ws().p("a.ckpt"), 3)).code == 0);
        REQUIRE(run(register_args(ws().p("b.ckpt"), 3)).code == 0);
        auto args = register_args(ws().p("c.ckpt"), 3);
        args[1] = "3";
        args.push_back("--out-log");
        args.push_back(ws().p("log.csv"));
        const Run r = run(args);
        REQUIRE(r.code == 0);
        CHECK(r.out.find("epoch 2 ") != std::string::npos);
        const std::string a = slurp(ws().p("a.ckpt"));
        CHECK(a == slurp(ws().p("b.ckpt")));
        CHECK(a == slurp(ws().p("c.ckpt")));
        CHECK(a != slurp(ws().p("identity.ckpt")));
        CHECK(slurp(ws().p("log.csv")).rfind("epoch,similarity,regulariser,total\n", 0) == 0);
    }

    TEST_CASE("register input errors")
    {
        auto args = register_args(ws().p("m.ckpt"), 1);
        args[6] = ws().p("missing.mhd"); // --target
        CHECK(run(args).code == 2);

        args = register_args(ws().p("m.ckpt"), 1);
        args.erase(args.begin() + 7, args.begin() + 9); // drop --mask
        const Run r = run(args);
        CHECK(r.code == 1);
        CHECK(r.err.find("--whole-domain") != std::string::npos);
        args.push_back("--whole-domain");
        CHECK(run(args).code == 0);

        {
            std::ofstream cfg(ws().p("bad.toml"));
            cfg << "[train]\nepochs = many\n";
        }
        args = register_args(ws().p("m.ckpt"), 1);
        args.push_back("--config");
        args.push_back(ws().p("bad.toml"));
        const Run bad = run(args);
        CHECK(bad.code == 1);
        CHECK(bad.err.find("train.epochs") != std::string::npos);

        args = register_args(ws().p("m.ckpt"), 1);
        args.push_back("--ncc-mode");
        args.push_back("cosine");
        CHECK(run(args).code == 1);
    }

    TEST_CASE("non-finite data is a numerical failure with context")
    {
        Volume v = read_volume(ws().p("case_source.mhd"));
        v.data()[v.voxel_count() / 2 + 8 * 16] = std::numeric_limits<double>::quiet_NaN();
        write_volume(ws().p("nan.mhd"), v);
        auto args = register_args(ws().p("m.ckpt"), 2);
        args[4] = ws().p("nan.mhd");
        args.push_back("--whole-domain");
        args.erase(args.begin() + 7, args.begin() + 9);
        const Run r = run(args);
        CHECK(r.code == 3);
        CHECK(r.err.find("epoch 0") != std::string::npos);
    }

    TEST_CASE("tre data errors")
    {
        {
            std::ofstream f(ws().p("short.txt"));
            f << "1 2 3\n";
        }
        const Run r = run({"tre", "--landmarks-target", ws().p("case_landmarks_target.txt"), "--landmarks-source",
                           ws().p("short.txt"), "--spacing", "1"});
        CHECK(r.code == 2);
        CHECK(run({"tre", "--landmarks-target", ws().p("short.txt"), "--landmarks-source", ws().p("short.txt"),
                   "--spacing", "1", "2"})
                  .code == 1);
    }

    TEST_CASE("selfcheck passes and writes a report")
    {
        const Run r = run({"selfcheck", "--out", ws().p("self.json")});
        CHECK(r.code == 0);
        const auto j = nlohmann::json::parse(slurp(ws().p("self.json")));
        CHECK(j["passed"].get<bool>());
        CHECK(j["suites"].size() == 6);
    }
}
