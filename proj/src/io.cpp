#include "confreg/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "json.hpp"

namespace confreg {

namespace fs = std::filesystem;

ElementType parse_element_type(const std::string& name)
{
    if (name == "MET_UCHAR" || name == "uint8") {
        return ElementType::uint8;
    }
    if (name == "MET_SHORT" || name == "int16") {
        return ElementType::int16;
    }
    if (name == "MET_USHORT" || name == "uint16") {
        return ElementType::uint16;
    }
    if (name == "MET_FLOAT" || name == "float32") {
        return ElementType::float32;
    }
    throw UnknownElementTypeError("unknown element type '" + name + "' (MET_UCHAR, MET_SHORT, MET_USHORT, MET_FLOAT)");
}

std::string element_type_name(ElementType type)
{
    switch (type) {
    case ElementType::uint8:
        return "MET_UCHAR";
    case ElementType::int16:
        return "MET_SHORT";
    case ElementType::uint16:
        return "MET_USHORT";
    case ElementType::float32:
        return "MET_FLOAT";
    }
    return "unknown";
}

std::size_t element_size(ElementType type)
{
    switch (type) {
    case ElementType::uint8:
        return 1;
    case ElementType::int16:
    case ElementType::uint16:
        return 2;
    case ElementType::float32:
        return 4;
    }
    return 0;
}

std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw UnreadableFileError("cannot open '" + path.string() + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw UnreadableFileError("cannot read '" + path.string() + "'");
    }
    return ss.str();
}

namespace {

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n')) {
            ++i;
        }
        const std::size_t b = i;
        while (i < s.size() && !(s[i] == ' ' || s[i] == '\t' || s[i] == '\r' || s[i] == '\n')) {
            ++i;
        }
        if (i > b) {
            out.emplace_back(s.substr(b, i - b));
        }
    }
    return out;
}

bool parse_double(const std::string& tok, double& out)
{
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    if (first != last && *first == '+') {
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

template <std::size_t N, typename T>
std::array<T, N> parse_tuple(const std::string& key, const std::string& value, const fs::path& where)
{
    const auto toks = split_ws(value);
    if (toks.size() != N) {
        throw DataError(where.string() + ": " + key + " needs " + std::to_string(N) + " values, got '" + value + "'");
    }
    std::array<T, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        double v;
        if (!parse_double(toks[i], v)) {
            throw DataError(where.string() + ": " + key + " has non-numeric value '" + toks[i] + "'");
        }
        if constexpr (std::is_integral_v<T>) {
            if (v < 1 || v != std::floor(v)) {
                throw DataError(where.string() + ": " + key + " must hold positive integers, got '" + value + "'");
            }
        }
        out[i] = static_cast<T>(v);
    }
    return out;
}

bool parse_bool(const std::string& v)
{
    return v == "True" || v == "true" || v == "1";
}

std::vector<double> decode(const std::vector<char>& bytes, ElementType type, ByteOrder order, std::size_t count)
{
    const std::size_t sz = element_size(type);
    const bool swap = (order == ByteOrder::big) != (std::endian::native == std::endian::big);
    std::vector<double> out(count);
    char buf[8];
    for (std::size_t i = 0; i < count; ++i) {
        std::memcpy(buf, bytes.data() + i * sz, sz);
        if (swap) {
            std::reverse(buf, buf + sz);
        }
        switch (type) {
        case ElementType::uint8:
            out[i] = static_cast<unsigned char>(buf[0]);
            break;
        case ElementType::int16: {
            std::int16_t v;
            std::memcpy(&v, buf, 2);
            out[i] = v;
            break;
        }
        case ElementType::uint16: {
            std::uint16_t v;
            std::memcpy(&v, buf, 2);
            out[i] = v;
            break;
        }
        case ElementType::float32: {
            float v;
            std::memcpy(&v, buf, 4);
            out[i] = v;
            break;
        }
        }
    }
    return out;
}

std::vector<double> read_payload(const fs::path& raw, const VolumeHeader& h)
{
    std::ifstream in(raw, std::ios::binary);
    if (!in) {
        throw UnreadableFileError("cannot open volume data '" + raw.string() + "'");
    }
    in.seekg(0, std::ios::end);
    const auto file_size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    const std::size_t count = h.dims[0] * h.dims[1] * h.dims[2] * static_cast<std::size_t>(h.channels);
    const std::size_t want = count * element_size(h.element_type);
    if (file_size != want) {
        throw SizeMismatchError("'" + raw.string() + "' holds " + std::to_string(file_size) + " bytes, header declares " +
                                std::to_string(count) + " values of " + element_type_name(h.element_type) + " (" +
                                std::to_string(want) + " bytes)");
    }
    std::vector<char> bytes(want);
    if (!in.read(bytes.data(), static_cast<std::streamsize>(want))) {
        throw UnreadableFileError("cannot read '" + raw.string() + "'");
    }
    return decode(bytes, h.element_type, h.byte_order, count);
}

void check_header(const VolumeHeader& h, const fs::path& where)
{
    try {
        h.geometry().validate();
    } catch (const std::exception& e) {
        throw DataError(where.string() + ": " + e.what());
    }
    if (h.channels < 1) {
        throw DataError(where.string() + ": ElementNumberOfChannels must be positive");
    }
}

} // namespace

VolumeHeader read_header(const fs::path& header_path)
{
    const std::string text = read_text_file(header_path);
    std::map<std::string, std::string> kv;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        kv[trim(std::string_view(line).substr(0, eq))] = trim(std::string_view(line).substr(eq + 1));
    }
    const auto get = [&](const char* key) -> const std::string* {
        const auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    VolumeHeader h;
    if (const auto* nd = get("NDims"); nd && trim(*nd) != "3") {
        throw DataError(header_path.string() + ": only 3-D volumes are supported (NDims = " + *nd + ")");
    }
    const auto* dims = get("DimSize");
    const auto* type = get("ElementType");
    const auto* file = get("ElementDataFile");
    if (!dims || !type || !file) {
        throw DataError(header_path.string() + ": header needs DimSize, ElementType and ElementDataFile");
    }
    h.dims = parse_tuple<3, std::size_t>("DimSize", *dims, header_path);
    h.element_type = parse_element_type(*type);
    if (const auto* s = get("ElementSpacing")) {
        h.spacing = parse_tuple<3, double>("ElementSpacing", *s, header_path);
    }
    for (const char* key : {"Offset", "Origin", "Position"}) {
        if (const auto* o = get(key)) {
            h.origin = parse_tuple<3, double>(key, *o, header_path);
            break;
        }
    }
    for (const char* key : {"BinaryDataByteOrderMSB", "ElementByteOrderMSB"}) {
        if (const auto* b = get(key)) {
            h.byte_order = parse_bool(*b) ? ByteOrder::big : ByteOrder::little;
            break;
        }
    }
    if (const auto* c = get("ElementNumberOfChannels")) {
        h.channels = static_cast<int>(parse_tuple<1, std::size_t>("ElementNumberOfChannels", *c, header_path)[0]);
    }
    if (const auto* c = get("CompressedData"); c && parse_bool(*c)) {
        throw DataError(header_path.string() + ": compressed payloads are not supported");
    }
    if (*file == "LOCAL" || *file == "LIST") {
        throw DataError(header_path.string() + ": ElementDataFile = " + *file + " is not supported");
    }
    const fs::path data(*file);
    h.data_path = data.is_absolute() ? data : header_path.parent_path() / data;
    check_header(h, header_path);
    return h;
}

Volume read_volume(const fs::path& header_path)
{
    const VolumeHeader h = read_header(header_path);
    if (h.channels != 1) {
        throw DataError(header_path.string() + ": expected a scalar volume, found " + std::to_string(h.channels) +
                        " channels");
    }
    return Volume(h.geometry(), read_payload(h.data_path, h));
}

Volume read_raw_volume(const fs::path& raw_path, const VolumeHeader& spec)
{
    VolumeHeader h = spec;
    h.channels = 1;
    check_header(h, raw_path);
    return Volume(h.geometry(), read_payload(raw_path, h));
}

namespace {

void write_header(const fs::path& header_path, const Geometry& g, ElementType type, int channels,
                  const std::string& data_file)
{
    std::ofstream out(header_path);
    if (!out) {
        throw UnreadableFileError("cannot write '" + header_path.string() + "'");
    }
    out << std::setprecision(17);
    out << "ObjectType = Image\n";
    out << "NDims = 3\n";
    out << "BinaryData = True\n";
    out << "BinaryDataByteOrderMSB = False\n";
    out << "CompressedData = False\n";
    out << "Offset = " << g.origin[0] << ' ' << g.origin[1] << ' ' << g.origin[2] << '\n';
    out << "ElementSpacing = " << g.spacing[0] << ' ' << g.spacing[1] << ' ' << g.spacing[2] << '\n';
    out << "DimSize = " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n';
    if (channels != 1) {
        out << "ElementNumberOfChannels = " << channels << '\n';
    }
    out << "ElementType = " << element_type_name(type) << '\n';
    out << "ElementDataFile = " << data_file << '\n';
    if (!out) {
        throw UnreadableFileError("cannot write '" + header_path.string() + "'");
    }
}

template <typename T>
void put_le(std::vector<char>& buf, T v)
{
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(b, b + sizeof(T));
    }
    buf.insert(buf.end(), b, b + sizeof(T));
}

void encode(std::vector<char>& buf, double v, ElementType type)
{
    if (!std::isfinite(v) && type != ElementType::float32) {
        throw DataError("cannot store a non-finite value as an integer voxel");
    }
    const auto fit = [&](double lo, double hi) {
        const double r = std::nearbyint(v);
        if (r < lo || r > hi) {
            throw DataError("voxel value " + std::to_string(v) + " does not fit " + element_type_name(type));
        }
        return r;
    };
    switch (type) {
    case ElementType::uint8:
        buf.push_back(static_cast<char>(static_cast<unsigned char>(fit(0, 255))));
        break;
    case ElementType::int16:
        put_le(buf, static_cast<std::int16_t>(fit(-32768, 32767)));
        break;
    case ElementType::uint16:
        put_le(buf, static_cast<std::uint16_t>(fit(0, 65535)));
        break;
    case ElementType::float32:
        put_le(buf, static_cast<float>(v));
        break;
    }
}

void write_bytes(const fs::path& path, const std::vector<char>& buf)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(buf.data(), static_cast<std::streamsize>(buf.size()))) {
        throw UnreadableFileError("cannot write '" + path.string() + "'");
    }
}

fs::path raw_path_for(const fs::path& header_path)
{
    fs::path raw = header_path;
    raw.replace_extension(".raw");
    return raw;
}

} // namespace

void write_volume(const fs::path& header_path, const Volume& vol, ElementType type)
{
    std::vector<char> buf;
    buf.reserve(vol.voxel_count() * element_size(type));
    for (double v : vol.data()) {
        encode(buf, v, type);
    }
    const fs::path raw = raw_path_for(header_path);
    write_bytes(raw, buf);
    write_header(header_path, vol.geometry(), type, 1, raw.filename().string());
}

void write_vector_field(const fs::path& header_path, const Geometry& geometry, std::span<const Vec3> field)
{
    if (field.size() != geometry.voxel_count()) {
        throw DataError("vector field size does not match its grid");
    }
    std::vector<char> buf;
    buf.reserve(field.size() * 12);
    for (const Vec3& v : field) {
        for (double c : v) {
            encode(buf, c, ElementType::float32);
        }
    }
    const fs::path raw = raw_path_for(header_path);
    write_bytes(raw, buf);
    write_header(header_path, geometry, ElementType::float32, 3, raw.filename().string());
}

std::vector<std::uint8_t> read_mask(const fs::path& path, const Geometry& expected)
{
    const Volume m = read_volume(path);
    if (m.dims() != expected.dims) {
        throw SizeMismatchError("mask '" + path.string() + "' grid " + std::to_string(m.dims()[0]) + "x" +
                                std::to_string(m.dims()[1]) + "x" + std::to_string(m.dims()[2]) +
                                " does not match the target grid");
    }
    std::vector<std::uint8_t> out(m.voxel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = m.data()[i] != 0.0;
    }
    return out;
}

std::vector<Vec3> parse_landmarks(const std::string& text, const std::string& origin)
{
    std::vector<Vec3> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view line(text.data() + pos, (nl == std::string::npos ? text.size() : nl) - pos);
        ++line_no;
        const auto toks = split_ws(line);
        if (!toks.empty()) {
            if (toks.size() != 3) {
                throw DataError(origin + ":" + std::to_string(line_no) + ": expected 3 values, got " +
                                std::to_string(toks.size()));
            }
            Vec3 p;
            for (int a = 0; a < 3; ++a) {
                if (!parse_double(toks[a], p[a])) {
                    throw DataError(origin + ":" + std::to_string(line_no) + ": non-numeric token '" + toks[a] + "'");
                }
            }
            out.push_back(p);
        }
        if (nl == std::string::npos) {
            break;
        }
        pos = nl + 1;
    }
    return out;
}

std::vector<Vec3> read_landmarks(const fs::path& path)
{
    return parse_landmarks(read_text_file(path), path.string());
}

void write_landmarks(const fs::path& path, std::span<const Vec3> points)
{
    std::ofstream out(path);
    if (!out) {
        throw UnreadableFileError("cannot write '" + path.string() + "'");
    }
    out << std::setprecision(17);
    for (const Vec3& p : points) {
        out << p[0] << '\t' << p[1] << '\t' << p[2] << '\n';
    }
}

namespace {

constexpr char kMagic[8] = {'C', 'O', 'N', 'F', 'R', 'E', 'G', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

class Reader {
public:
    Reader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}

    template <typename T>
    T get()
    {
        if (pos_ + sizeof(T) > bytes_.size()) {
            throw DataError("checkpoint '" + name_ + "' is truncated");
        }
        char b[sizeof(T)];
        std::memcpy(b, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            std::reverse(b, b + sizeof(T));
        }
        pos_ += sizeof(T);
        T v;
        std::memcpy(&v, b, sizeof(T));
        return v;
    }

    std::vector<double> doubles(std::uint64_t n)
    {
        if (n > (bytes_.size() - pos_) / 8) {
            throw DataError("checkpoint '" + name_ + "' is truncated");
        }
        std::vector<double> v(n);
        for (double& x : v) {
            x = get<double>();
        }
        return v;
    }

    bool at_end() const { return pos_ == bytes_.size(); }
    const std::string& bytes() const { return bytes_; }

private:
    std::string bytes_;
    std::string name_;
    std::size_t pos_ = 0;
};

} // namespace

void write_checkpoint(const fs::path& path, const DeformationModel& model)
{
    const NetConfig& c = model.config();
    std::vector<char> buf(kMagic, kMagic + 8);
    put_le<std::uint32_t>(buf, kCheckpointVersion);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.num_layers));
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.hidden_units));
    put_le<std::uint32_t>(buf, c.encoder == Encoder::fourier ? 1u : 0u);
    put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(c.fourier_features));
    put_le<std::uint32_t>(buf, 0u);
    put_le<double>(buf, c.omega);
    put_le<double>(buf, c.fourier_sigma);
    put_le<std::uint64_t>(buf, c.seed);
    for (double v : model.normalization().center) {
        put_le<double>(buf, v);
    }
    for (double v : model.normalization().half_extent) {
        put_le<double>(buf, v);
    }
    put_le<std::uint64_t>(buf, model.fourier_matrix().size());
    for (double v : model.fourier_matrix()) {
        put_le<double>(buf, v);
    }
    put_le<std::uint64_t>(buf, model.parameter_count());
    for (double v : model.params()) {
        put_le<double>(buf, v);
    }
    write_bytes(path, buf);
}

DeformationModel read_checkpoint(const fs::path& path)
{
    Reader r(read_text_file(path), path.string());
    if (r.bytes().size() < 8 || std::memcmp(r.bytes().data(), kMagic, 8) != 0) {
        throw DataError("'" + path.string() + "' is not a checkpoint (bad magic)");
    }
    for (int i = 0; i < 8; ++i) {
        r.get<char>();
    }
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint '" + path.string() + "' has unsupported version " + std::to_string(version));
    }
    NetConfig c;
    c.num_layers = static_cast<int>(r.get<std::uint32_t>());
    c.hidden_units = static_cast<int>(r.get<std::uint32_t>());
    const auto enc = r.get<std::uint32_t>();
    if (enc > 1) {
        throw DataError("checkpoint '" + path.string() + "' has unknown encoder " + std::to_string(enc));
    }
    c.encoder = enc == 1 ? Encoder::fourier : Encoder::periodic;
    c.fourier_features = static_cast<int>(r.get<std::uint32_t>());
    r.get<std::uint32_t>();
    c.omega = r.get<double>();
    c.fourier_sigma = r.get<double>();
    c.seed = r.get<std::uint64_t>();
    Normalization n;
    for (double& v : n.center) {
        v = r.get<double>();
    }
    for (double& v : n.half_extent) {
        v = r.get<double>();
    }
    auto fourier = r.doubles(r.get<std::uint64_t>());
    auto params = r.doubles(r.get<std::uint64_t>());
    if (!r.at_end()) {
        throw DataError("checkpoint '" + path.string() + "' has trailing bytes");
    }
    try {
        return DeformationModel(c, n, std::move(fourier), std::move(params));
    } catch (const UsageError& e) {
        throw DataError("checkpoint '" + path.string() + "': " + e.what());
    }
}

namespace {

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    if (!out || !(out << text)) {
        throw UnreadableFileError("cannot write '" + path.string() + "'");
    }
}

std::string fmt(double v)
{
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

} // namespace

void write_tre_report(const fs::path& json_path, const fs::path& csv_path, const TreResult& result)
{
    nlohmann::json j;
    j["mean_mm"] = result.mean;
    j["count"] = result.per_landmark.size();
    j["per_landmark_mm"] = result.per_landmark;
    if (!json_path.empty()) {
        write_text(json_path, j.dump(2) + "\n");
    }
    if (!csv_path.empty()) {
        std::string csv = "index,tre_mm\n";
        for (std::size_t i = 0; i < result.per_landmark.size(); ++i) {
            csv += std::to_string(i) + "," + fmt(result.per_landmark[i]) + "\n";
        }
        write_text(csv_path, csv);
    }
}

void write_jacdet_summary(const fs::path& json_path, const fs::path& csv_path, const JacDetField& field)
{
    nlohmann::json j;
    j["negative_fraction"] = field.negative_fraction;
    j["min"] = field.min_value;
    j["max"] = field.max_value;
    j["count"] = field.values.size();
    j["dims"] = field.geometry.dims;
    if (!json_path.empty()) {
        write_text(json_path, j.dump(2) + "\n");
    }
    if (!csv_path.empty()) {
        write_text(csv_path, "negative_fraction,min,max,count\n" + fmt(field.negative_fraction) + "," +
                                 fmt(field.min_value) + "," + fmt(field.max_value) + "," +
                                 std::to_string(field.values.size()) + "\n");
    }
}

void write_training_log(const fs::path& csv_path, std::span<const LogRecord> log)
{
    std::string csv = "epoch,similarity,regulariser,total\n";
    for (const LogRecord& r : log) {
        csv += std::to_string(r.epoch) + "," + fmt(r.similarity) + "," + fmt(r.regulariser) + "," + fmt(r.total) + "\n";
    }
    write_text(csv_path, csv);
}

} // namespace confreg
