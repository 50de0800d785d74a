#include <algorithm>
#include <string>

#include "confreg/config.hpp"
#include "confreg/error.hpp"
#include "doctest.h"

using namespace confreg;

namespace {

bool has_line(const RunConfig& c, const std::string& line)
{
    return std::find(c.defaults_applied.begin(), c.defaults_applied.end(), line) != c.defaults_applied.end();
}

std::string usage_message(const std::string& text)
{
    try {
        parse_config(text, "run.toml");
    } catch (const UsageError& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_SUITE("config")
{
    TEST_CASE("empty file yields the documented defaults")
    {
        const RunConfig c = parse_config("", "empty.toml");
        CHECK(c.net.omega == 32.0);
        CHECK(c.net.num_layers == 4);
        CHECK(c.net.hidden_units == 256);
        CHECK(c.net.encoder == Encoder::periodic);
        CHECK(c.loss.window_n == 5);
        CHECK(c.loss.lambda == 1e-2);
        CHECK(c.loss.ncc_mode == NccMode::windowed);
        CHECK(c.loss.energy.alpha() == 2.0);
        CHECK(c.loss.energy.a1() == 1.0);
        CHECK(c.loss.energy.a2() == 1.0);
        CHECK(c.loss.energy.a3() == 1.0);
        CHECK(c.loss.energy.a4() == 1.0);
        CHECK(c.train.learning_rate == 1e-5);
        CHECK(c.train.deterministic);
        CHECK(c.preset.empty());
        // Every key is echoed once.
        CHECK(c.defaults_applied.size() == 26);
        CHECK(has_line(c, "net.omega = 32 (default)"));
        CHECK(has_line(c, "loss.ncc_mode = \"windowed\" (default)"));
        CHECK(default_config().net == c.net);
    }

    TEST_CASE("presets")
    {
        const RunConfig large = parse_config("preset = \"large-motion\"\n", "p.toml");
        CHECK(large.net.num_layers == 4);
        CHECK(large.net.hidden_units == 256);
        CHECK(large.train.points_per_epoch == 15000);
        CHECK(large.train.epochs == 6000);
        CHECK(has_line(large, "train.epochs = 6000 (preset large-motion)"));

        const RunConfig small = parse_config("preset = \"small-motion\"\n", "p.toml");
        CHECK(small.net.num_layers == 3);
        CHECK(small.train.points_per_epoch == 10000);
        CHECK(small.train.epochs == 3000);

        // Explicit keys beat the preset whatever their order in the file.
        const RunConfig mixed = parse_config("[train]\nepochs = 12\n", "p.toml");
        CHECK(mixed.train.epochs == 12);
        const RunConfig both = parse_config("preset = \"small-motion\"\n[train]\nepochs = 12\n", "p.toml");
        CHECK(both.train.epochs == 12);
        CHECK(both.net.num_layers == 3);
        CHECK_FALSE(has_line(both, "train.epochs = 3000 (preset small-motion)"));

        RunConfig c;
        CHECK_THROWS_AS(apply_preset(c, "medium"), UsageError);
        CHECK(usage_message("preset = \"medium\"\n").find("run.toml:1") != std::string::npos);
    }

    TEST_CASE("values of every type")
    {
        const RunConfig c = parse_config(R"(# comment
[net]
omega = 30          # trailing comment
encoder = "fourier"
fourier_sigma = 2.5e0
seed = 18446744073709551615

[loss]
lambda = 0.05
ncc_mode = "batch_global"
window_n = 7

[energy]
a3 = 2
alpha = 1.5

[train]
deterministic = false
learning_rate = +3e-4
)",
                                         "all.toml");
        CHECK(c.net.omega == 30.0);
        CHECK(c.net.encoder == Encoder::fourier);
        CHECK(c.net.fourier_sigma == 2.5);
        CHECK(c.net.seed == 18446744073709551615ULL);
        CHECK(c.loss.lambda == 0.05);
        CHECK(c.loss.ncc_mode == NccMode::batch_global);
        CHECK(c.loss.window_n == 7);
        CHECK(c.loss.energy.a3() == 2.0);
        CHECK(c.loss.energy.alpha() == 1.5);
        CHECK(c.loss.energy.a1() == 1.0);
        CHECK_FALSE(c.train.deterministic);
        CHECK(c.train.learning_rate == 3e-4);
        CHECK_FALSE(has_line(c, "net.omega = 32 (default)"));
    }

    TEST_CASE("type mismatches name the key path and line")
    {
        std::string m = usage_message("[train]\nepochs = 1x0\n");
        CHECK(m.find("run.toml:2") != std::string::npos);
        CHECK(m.find("train.epochs") != std::string::npos);
        m = usage_message("[loss]\nlambda = \"big\"\n");
        CHECK(m.find("loss.lambda") != std::string::npos);
        m = usage_message("[train]\nepochs = 2.5\n");
        CHECK(m.find("train.epochs") != std::string::npos);
        CHECK(m.find("integer") != std::string::npos);
        m = usage_message("[train]\ndeterministic = 1\n");
        CHECK(m.find("train.deterministic") != std::string::npos);
        m = usage_message("[net]\nencoder = \"wavelet\"\n");
        CHECK(m.find("net.encoder") != std::string::npos);
        m = usage_message("[train]\nepochs = -4\n");
        CHECK(m.find("train.epochs") != std::string::npos);
    }

    TEST_CASE("strict mode rejects unknown keys and sections")
    {
        CHECK(usage_message("[net]\nomgea = 3\n").find("unknown key 'net.omgea'") != std::string::npos);
        CHECK(usage_message("[nett]\n").find("unknown section") != std::string::npos);
        CHECK(usage_message("bogus = 1\n").find("unknown key 'bogus'") != std::string::npos);

        const RunConfig lax = parse_config("strict = false\n[net]\nomgea = 3\n[extra]\nx = 1\n", "lax.toml");
        CHECK(lax.warnings.size() == 3);
        CHECK(lax.net.omega == 32.0);
    }

    TEST_CASE("structural errors")
    {
        CHECK(usage_message("[net\n").find("malformed section") != std::string::npos);
        CHECK(usage_message("[net]\nomega\n").find("expected 'key = value'") != std::string::npos);
        CHECK(usage_message("[net]\nomega = 3\nomega = 4\n").find("already set") != std::string::npos);
        CHECK(usage_message("[net]\nencoder = \"fourier\n").find("net.encoder") != std::string::npos);
        // Values that parse but fail validation.
        CHECK(usage_message("[loss]\nwindow_n = 4\n").find("run.toml") != std::string::npos);
        CHECK(usage_message("[energy]\na1 = -1\n").find("run.toml") != std::string::npos);
        CHECK_THROWS_AS(read_config("/nonexistent/dir/run.toml"), DataError);
    }

    TEST_CASE("comments inside strings are kept")
    {
        CHECK(usage_message("[net]\nencoder = \"four#ier\"\n").find("four#ier") != std::string::npos);
    }
}
