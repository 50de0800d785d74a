#include "confreg/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "confreg/error.hpp"
#include "confreg/io.hpp"

namespace confreg {

namespace {

enum class Kind { integer, real, string, boolean };

struct Value {
    Kind kind;
    std::string text; // raw token, or the unquoted string
    long long i = 0;
    std::uint64_t u = 0; // integers beyond long long, for seeds
    bool wide = false;
    double d = 0.0;
    bool b = false;
};

struct Energy {
    double a1 = 1.0, a2 = 1.0, a3 = 1.0, a4 = 1.0, alpha = 2.0, eps_det = 1e-6;
};

struct Key {
    std::string path; // section.name
    Kind kind;
    std::function<void(RunConfig&, Energy&, const Value&)> set;
    std::function<std::string(const RunConfig&, const Energy&)> show;
};

std::string num(double v)
{
    std::ostringstream s;
    s << v;
    return s.str();
}

std::string encoder_name(Encoder e)
{
    return e == Encoder::fourier ? "fourier" : "periodic";
}

std::string mode_name(NccMode m)
{
    return m == NccMode::batch_global ? "batch_global" : "windowed";
}

[[noreturn]] void bad_value(const std::string& where, const std::string& key, const std::string& want,
                            const std::string& got)
{
    throw UsageError(where + ": key '" + key + "' expects " + want + ", got '" + got + "'");
}

int to_int(const Value& v)
{
    return static_cast<int>(v.i);
}

const std::vector<Key>& keys()
{
    static const std::vector<Key> table = [] {
        std::vector<Key> k;
        const auto add = [&](std::string path, Kind kind, auto set, auto show) {
            k.push_back(Key{std::move(path), kind, set, show});
        };
        add("net.num_layers", Kind::integer, [](RunConfig& c, Energy&, const Value& v) { c.net.num_layers = to_int(v); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.net.num_layers); });
        add("net.hidden_units", Kind::integer,
            [](RunConfig& c, Energy&, const Value& v) { c.net.hidden_units = to_int(v); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.net.hidden_units); });
        add("net.omega", Kind::real, [](RunConfig& c, Energy&, const Value& v) { c.net.omega = v.d; },
            [](const RunConfig& c, const Energy&) { return num(c.net.omega); });
        add("net.encoder", Kind::string, [](RunConfig&, Energy&, const Value&) {},
            [](const RunConfig& c, const Energy&) { return "\"" + encoder_name(c.net.encoder) + "\""; });
        add("net.fourier_features", Kind::integer,
            [](RunConfig& c, Energy&, const Value& v) { c.net.fourier_features = to_int(v); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.net.fourier_features); });
        add("net.fourier_sigma", Kind::real, [](RunConfig& c, Energy&, const Value& v) { c.net.fourier_sigma = v.d; },
            [](const RunConfig& c, const Energy&) { return num(c.net.fourier_sigma); });
        add("net.seed", Kind::integer,
            [](RunConfig& c, Energy&, const Value& v) { c.net.seed = v.wide ? v.u : static_cast<std::uint64_t>(v.i); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.net.seed); });

        add("loss.lambda", Kind::real, [](RunConfig& c, Energy&, const Value& v) { c.loss.lambda = v.d; },
            [](const RunConfig& c, const Energy&) { return num(c.loss.lambda); });
        add("loss.window_n", Kind::integer, [](RunConfig& c, Energy&, const Value& v) { c.loss.window_n = to_int(v); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.loss.window_n); });
        add("loss.ncc_mode", Kind::string, [](RunConfig&, Energy&, const Value&) {},
            [](const RunConfig& c, const Energy&) { return "\"" + mode_name(c.loss.ncc_mode) + "\""; });
        add("loss.variance_eps", Kind::real, [](RunConfig& c, Energy&, const Value& v) { c.loss.variance_eps = v.d; },
            [](const RunConfig& c, const Energy&) { return num(c.loss.variance_eps); });

        add("energy.a1", Kind::real, [](RunConfig&, Energy& e, const Value& v) { e.a1 = v.d; },
            [](const RunConfig&, const Energy& e) { return num(e.a1); });
        add("energy.a2", Kind::real, [](RunConfig&, Energy& e, const Value& v) { e.a2 = v.d; },
            [](const RunConfig&, const Energy& e) { return num(e.a2); });
        add("energy.a3", Kind::real, [](RunConfig&, Energy& e, const Value& v) { e.a3 = v.d; },
            [](const RunConfig&, const Energy& e) { return num(e.a3); });
        add("energy.a4", Kind::real, [](RunConfig&, Energy& e, const Value& v) { e.a4 = v.d; },
            [](const RunConfig&, const Energy& e) { return num(e.a4); });
        add("energy.alpha", Kind::real, [](RunConfig&, Energy& e, const Value& v) { e.alpha = v.d; },
            [](const RunConfig&, const Energy& e) { return num(e.alpha); });
        add("energy.eps_det", Kind::real, [](RunConfig&, Energy& e, const Value& v) { e.eps_det = v.d; },
            [](const RunConfig&, const Energy& e) { return num(e.eps_det); });

        add("train.epochs", Kind::integer, [](RunConfig& c, Energy&, const Value& v) { c.train.epochs = to_int(v); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.train.epochs); });
        add("train.points_per_epoch", Kind::integer,
            [](RunConfig& c, Energy&, const Value& v) { c.train.points_per_epoch = to_int(v); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.train.points_per_epoch); });
        add("train.learning_rate", Kind::real,
            [](RunConfig& c, Energy&, const Value& v) { c.train.learning_rate = v.d; },
            [](const RunConfig& c, const Energy&) { return num(c.train.learning_rate); });
        add("train.adam_beta1", Kind::real, [](RunConfig& c, Energy&, const Value& v) { c.train.adam_beta1 = v.d; },
            [](const RunConfig& c, const Energy&) { return num(c.train.adam_beta1); });
        add("train.adam_beta2", Kind::real, [](RunConfig& c, Energy&, const Value& v) { c.train.adam_beta2 = v.d; },
            [](const RunConfig& c, const Energy&) { return num(c.train.adam_beta2); });
        add("train.adam_eps", Kind::real, [](RunConfig& c, Energy&, const Value& v) { c.train.adam_eps = v.d; },
            [](const RunConfig& c, const Energy&) { return num(c.train.adam_eps); });
        add("train.seed", Kind::integer,
            [](RunConfig& c, Energy&, const Value& v) { c.train.seed = v.wide ? v.u : static_cast<std::uint64_t>(v.i); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.train.seed); });
        add("train.deterministic", Kind::boolean,
            [](RunConfig& c, Energy&, const Value& v) { c.train.deterministic = v.b; },
            [](const RunConfig& c, const Energy&) { return std::string(c.train.deterministic ? "true" : "false"); });
        add("train.log_every", Kind::integer,
            [](RunConfig& c, Energy&, const Value& v) { c.train.log_every = to_int(v); },
            [](const RunConfig& c, const Energy&) { return std::to_string(c.train.log_every); });
        return k;
    }();
    return table;
}

const Key* find_key(const std::string& path)
{
    for (const Key& k : keys()) {
        if (k.path == path) {
            return &k;
        }
    }
    return nullptr;
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

// Parses a scalar TOML value; `where` prefixes errors.
Value parse_value(const std::string& raw, const std::string& where, const std::string& key)
{
    Value v;
    v.text = raw;
    if (raw.empty()) {
        bad_value(where, key, "a value", raw);
    }
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') {
            bad_value(where, key, "a closed string", raw);
        }
        v.kind = Kind::string;
        v.text = raw.substr(1, raw.size() - 2);
        return v;
    }
    if (raw == "true" || raw == "false") {
        v.kind = Kind::boolean;
        v.b = raw == "true";
        return v;
    }
    const char* first = raw.data();
    const char* last = raw.data() + raw.size();
    const char* start = (*first == '+') ? first + 1 : first;
    {
        long long i = 0;
        const auto [p, ec] = std::from_chars(start, last, i);
        if (ec == std::errc() && p == last) {
            v.kind = Kind::integer;
            v.i = i;
            v.d = static_cast<double>(i);
            return v;
        }
        std::uint64_t u = 0;
        const auto [pu, ecu] = std::from_chars(start, last, u);
        if (ecu == std::errc() && pu == last && *start != '-') {
            v.kind = Kind::integer;
            v.u = u;
            v.wide = true;
            v.d = static_cast<double>(u);
            return v;
        }
    }
    double d = 0.0;
    const auto [p, ec] = std::from_chars(start, last, d);
    if (ec == std::errc() && p == last && std::isfinite(d)) {
        v.kind = Kind::real;
        v.d = d;
        return v;
    }
    bad_value(where, key, "a number, boolean or quoted string", raw);
}

std::string kind_name(Kind k)
{
    switch (k) {
    case Kind::integer:
        return "an integer";
    case Kind::real:
        return "a number";
    case Kind::string:
        return "a quoted string";
    case Kind::boolean:
        return "true or false";
    }
    return "a value";
}

struct Entry {
    std::string path;
    Value value;
    std::string where;
};

void apply_entry(RunConfig& cfg, Energy& e, const Key& key, const Entry& entry)
{
    const Value& v = entry.value;
    const bool ok = v.kind == key.kind || (key.kind == Kind::real && v.kind == Kind::integer);
    if (!ok) {
        bad_value(entry.where, key.path, kind_name(key.kind), v.text);
    }
    if (key.kind == Kind::integer) {
        const bool is_seed = key.path.ends_with(".seed");
        if (v.i < 0 || (!is_seed && (v.wide || v.i > 2147483647LL))) {
            bad_value(entry.where, key.path, "a nonnegative integer in range", v.text);
        }
    }
    if (key.path == "net.encoder") {
        if (v.text == "periodic") {
            cfg.net.encoder = Encoder::periodic;
        } else if (v.text == "fourier") {
            cfg.net.encoder = Encoder::fourier;
        } else {
            bad_value(entry.where, key.path, "\"periodic\" or \"fourier\"", v.text);
        }
        return;
    }
    if (key.path == "loss.ncc_mode") {
        if (v.text == "windowed") {
            cfg.loss.ncc_mode = NccMode::windowed;
        } else if (v.text == "batch_global") {
            cfg.loss.ncc_mode = NccMode::batch_global;
        } else {
            bad_value(entry.where, key.path, "\"windowed\" or \"batch_global\"", v.text);
        }
        return;
    }
    key.set(cfg, e, v);
}

} // namespace

void apply_preset(RunConfig& cfg, std::string_view name)
{
    if (name == "large-motion") {
        cfg.net.num_layers = 4;
        cfg.net.hidden_units = 256;
        cfg.train.points_per_epoch = 15000;
        cfg.train.epochs = 6000;
    } else if (name == "small-motion") {
        cfg.net.num_layers = 3;
        cfg.net.hidden_units = 256;
        cfg.train.points_per_epoch = 10000;
        cfg.train.epochs = 3000;
    } else {
        throw UsageError("unknown preset '" + std::string(name) + "' (large-motion, small-motion)");
    }
    cfg.preset = std::string(name);
}

RunConfig parse_config(std::string_view text, const std::string& origin)
{
    RunConfig cfg;
    std::vector<Entry> entries;
    std::map<std::string, std::string> seen;
    std::string section;
    std::string preset;
    bool strict = true;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string line(text.substr(pos, (nl == std::string_view::npos ? text.size() : nl) - pos));
        ++line_no;
        pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
        const std::string where = origin + ":" + std::to_string(line_no);

        // Strip a comment that is not inside a string.
        bool in_string = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') {
                in_string = !in_string;
            } else if (line[i] == '#' && !in_string) {
                line.resize(i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw UsageError(where + ": malformed section header '" + line + "'");
            }
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section != "net" && section != "loss" && section != "energy" && section != "train") {
                if (strict) {
                    throw UsageError(where + ": unknown section [" + section + "]");
                }
                cfg.warnings.push_back(where + ": ignoring unknown section [" + section + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError(where + ": expected 'key = value', got '" + line + "'");
        }
        const std::string name = trim(std::string_view(line).substr(0, eq));
        const std::string path = section.empty() ? name : section + "." + name;
        const Value value = parse_value(trim(std::string_view(line).substr(eq + 1)), where, path);
        if (const auto it = seen.find(path); it != seen.end()) {
            throw UsageError(where + ": key '" + path + "' already set at " + it->second);
        }
        seen[path] = where;

        if (path == "preset") {
            if (value.kind != Kind::string) {
                bad_value(where, path, kind_name(Kind::string), value.text);
            }
            preset = value.text;
            continue;
        }
        if (path == "strict") {
            if (value.kind != Kind::boolean) {
                bad_value(where, path, kind_name(Kind::boolean), value.text);
            }
            strict = value.b;
            continue;
        }
        if (!find_key(path)) {
            if (strict) {
                throw UsageError(where + ": unknown key '" + path + "'");
            }
            cfg.warnings.push_back(where + ": ignoring unknown key '" + path + "'");
            continue;
        }
        entries.push_back(Entry{path, value, where});
    }

    if (!preset.empty()) {
        try {
            apply_preset(cfg, preset);
        } catch (const UsageError& e) {
            throw UsageError(seen["preset"] + ": " + e.what());
        }
    }
    Energy energy;
    for (const Entry& e : entries) {
        apply_entry(cfg, energy, *find_key(e.path), e);
    }
    try {
        cfg.loss.energy = EnergyParams(energy.a1, energy.a2, energy.a3, energy.a4, energy.alpha, energy.eps_det);
        cfg.net.validate();
        cfg.loss.validate();
        cfg.train.validate();
    } catch (const UsageError& e) {
        throw UsageError(origin + ": " + e.what());
    }

    const std::string source = preset.empty() ? "default" : "preset " + preset;
    for (const Key& k : keys()) {
        if (seen.contains(k.path)) {
            continue;
        }
        const bool from_preset = !preset.empty() &&
                                 (k.path == "net.num_layers" || k.path == "net.hidden_units" ||
                                  k.path == "train.points_per_epoch" || k.path == "train.epochs");
        cfg.defaults_applied.push_back(k.path + " = " + k.show(cfg, energy) + " (" +
                                       (from_preset ? source : std::string("default")) + ")");
    }
    return cfg;
}

RunConfig read_config(const std::filesystem::path& path)
{
    return parse_config(read_text_file(path), path.string());
}

RunConfig default_config()
{
    return parse_config("", "<defaults>");
}

} // namespace confreg
