#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <unistd.h>

#include "confreg/grad.hpp"
#include "confreg/io.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace confreg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;

    explicit TempDir(const char* tag)
    {
        path = fs::temp_directory_path() / (std::string("confreg_") + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }

    fs::path operator/(const std::string& name) const { return path / name; }
};

void write_bytes(const fs::path& p, const void* data, std::size_t n)
{
    std::ofstream out(p, std::ios::binary);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void write_text(const fs::path& p, const std::string& s)
{
    std::ofstream out(p);
    out << s;
}

std::string header(const std::string& dims, const std::string& type, const std::string& file,
                    const std::string& extra = "")
{
    return "ObjectType = Image\nNDims = 3\nDimSize = " + dims + "\nElementType = " + type +
           "\nElementSpacing = 1 1 1\n" + extra + "ElementDataFile = " + file + "\n";
}

} // namespace

TEST_SUITE("io")
{
    TEST_CASE("int16 payload keeps x-fastest index order")
    {
        TempDir dir("order");
        const std::int16_t v[8] = {0, 1, 2, 3, 4, 5, 6, 7};
        write_bytes(dir / "a.raw", v, sizeof v);
        write_text(dir / "a.mhd", header("2 2 2", "MET_SHORT", "a.raw"));
        const Volume vol = read_volume(dir / "a.mhd");
        CHECK(vol.at(1, 0, 0) == 1.0);
        CHECK(vol.at(0, 1, 0) == 2.0);
        CHECK(vol.at(0, 0, 1) == 4.0);
        CHECK(vol.at(1, 1, 1) == 7.0);

        VolumeHeader spec;
        spec.dims = {2, 2, 2};
        spec.element_type = ElementType::int16;
        const Volume raw = read_raw_volume(dir / "a.raw", spec);
        CHECK(raw.data() == vol.data());
    }

    TEST_CASE("big-endian payloads are swapped")
    {
        TempDir dir("endian");
        const unsigned char be[4] = {0x01, 0x02, 0xff, 0xfe}; // 258, -2
        write_bytes(dir / "b.raw", be, sizeof be);
        VolumeHeader spec;
        spec.dims = {2, 1, 1};
        spec.element_type = ElementType::int16;
        spec.byte_order = ByteOrder::big;
        const Volume v = read_raw_volume(dir / "b.raw", spec);
        CHECK(v.data() == std::vector<double>{258.0, -2.0});
        write_text(dir / "b.mhd", header("2 1 1", "MET_SHORT", "b.raw", "BinaryDataByteOrderMSB = True\n"));
        CHECK(read_volume(dir / "b.mhd").data() == v.data());
    }

    TEST_CASE("header geometry fields")
    {
        TempDir dir("geom");
        const float v[6] = {1, 2, 3, 4, 5, 6};
        write_bytes(dir / "g.raw", v, sizeof v);
        write_text(dir / "g.mhd", "NDims = 3\nDimSize = 3 2 1\nElementSpacing = 0.5 1.5 2.5\nOffset = -1 2 3.5\n"
                                  "ElementType = MET_FLOAT\nElementDataFile = g.raw\n");
        const VolumeHeader h = read_header(dir / "g.mhd");
        CHECK(h.dims == Index3{3, 2, 1});
        CHECK(h.spacing == Vec3{0.5, 1.5, 2.5});
        CHECK(h.origin == Vec3{-1, 2, 3.5});
        CHECK(h.element_type == ElementType::float32);
        CHECK(h.data_path == dir / "g.raw");
    }

    TEST_CASE("size mismatch is its own error")
    {
        TempDir dir("size");
        const std::int16_t v[8] = {};
        write_bytes(dir / "s.raw", v, sizeof v);
        write_text(dir / "s.mhd", header("10 1 1", "MET_SHORT", "s.raw"));
        CHECK_THROWS_AS(read_volume(dir / "s.mhd"), SizeMismatchError);
        VolumeHeader spec;
        spec.dims = {3, 3, 1};
        spec.element_type = ElementType::int16;
        CHECK_THROWS_AS(read_raw_volume(dir / "s.raw", spec), SizeMismatchError);
    }

    TEST_CASE("unknown element type is its own error")
    {
        TempDir dir("type");
        write_text(dir / "t.mhd", header("2 2 2", "MET_COMPLEX", "t.raw"));
        CHECK_THROWS_AS(read_volume(dir / "t.mhd"), UnknownElementTypeError);
        CHECK_THROWS_AS(parse_element_type("float64"), UnknownElementTypeError);
        CHECK(parse_element_type("MET_UCHAR") == ElementType::uint8);
        CHECK(parse_element_type("uint16") == ElementType::uint16);
        CHECK(element_type_name(ElementType::int16) == "MET_SHORT");
        CHECK(element_size(ElementType::float32) == 4);
    }

    TEST_CASE("unreadable file is its own error")
    {
        TempDir dir("missing");
        CHECK_THROWS_AS(read_volume(dir / "nope.mhd"), UnreadableFileError);
        write_text(dir / "m.mhd", header("2 2 2", "MET_SHORT", "gone.raw"));
        CHECK_THROWS_AS(read_volume(dir / "m.mhd"), UnreadableFileError);
    }

    TEST_CASE("malformed headers are data errors")
    {
        TempDir dir("bad");
        write_text(dir / "a.mhd", "NDims = 3\nElementType = MET_SHORT\n");
        CHECK_THROWS_AS(read_header(dir / "a.mhd"), DataError);
        write_text(dir / "b.mhd", header("2 2", "MET_SHORT", "b.raw"));
        CHECK_THROWS_AS(read_header(dir / "b.mhd"), DataError);
        write_text(dir / "c.mhd", header("2 2 2", "MET_SHORT", "c.raw", "CompressedData = True\n"));
        CHECK_THROWS_AS(read_header(dir / "c.mhd"), DataError);
        write_text(dir / "d.mhd", header("2 x 2", "MET_SHORT", "d.raw"));
        CHECK_THROWS_AS(read_header(dir / "d.mhd"), DataError);
        write_text(dir / "e.mhd", "NDims = 2\nDimSize = 2 2\nElementType = MET_SHORT\nElementDataFile = e.raw\n");
        CHECK_THROWS_AS(read_header(dir / "e.mhd"), DataError);
    }

    TEST_CASE("float32 round trip is exact")
    {
        TempDir dir("float");
        const Geometry g{{5, 4, 3}, {0.7, 1.1, 2.5}, {-3.25, 0.5, 10.0}};
        std::vector<double> d(g.voxel_count());
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = static_cast<double>(static_cast<float>(std::sin(0.37 * static_cast<double>(i)) * 1e3));
        }
        write_volume(dir / "f.mhd", Volume(g, d));
        CHECK(fs::exists(dir / "f.raw"));
        const Volume back = read_volume(dir / "f.mhd");
        CHECK(back.geometry() == g);
        CHECK(back.data() == d);
    }

    TEST_CASE("integer round trips and range checks")
    {
        TempDir dir("int");
        const Geometry g{{4, 1, 1}, {1, 1, 1}, {0, 0, 0}};
        write_volume(dir / "i.mhd", Volume(g, {-32768.0, -1.0, 0.0, 32767.0}), ElementType::int16);
        CHECK(read_volume(dir / "i.mhd").data() == std::vector<double>{-32768.0, -1.0, 0.0, 32767.0});
        write_volume(dir / "u.mhd", Volume(g, {0.0, 1.0, 200.0, 255.0}), ElementType::uint8);
        CHECK(read_volume(dir / "u.mhd").data() == std::vector<double>{0.0, 1.0, 200.0, 255.0});
        CHECK_THROWS_AS(write_volume(dir / "x.mhd", Volume(g, {0.0, 1.0, 2.0, 40000.0}), ElementType::int16),
                        DataError);
        CHECK_THROWS_AS(write_volume(dir / "y.mhd", Volume(g, {0.0, -1.0, 2.0, 3.0}), ElementType::uint8),
                        DataError);
    }

    TEST_CASE("vector field and mask files")
    {
        TempDir dir("field");
        const Geometry g{{3, 2, 1}, {1, 1, 1}, {0, 0, 0}};
        std::vector<Vec3> f(6);
        for (std::size_t i = 0; i < 6; ++i) {
            f[i] = {static_cast<double>(i), -0.5 * static_cast<double>(i), 2.0};
        }
        write_vector_field(dir / "v.mhd", g, f);
        const VolumeHeader h = read_header(dir / "v.mhd");
        CHECK(h.channels == 3);
        CHECK(fs::file_size(h.data_path) == 6 * 3 * 4);
        CHECK_THROWS_AS(read_volume(dir / "v.mhd"), DataError);

        write_volume(dir / "m.mhd", Volume(g, {0, 1, 0, 2, 0, 1}), ElementType::uint8);
        CHECK(read_mask(dir / "m.mhd", g) == std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1});
        const Geometry other{{2, 3, 1}, {1, 1, 1}, {0, 0, 0}};
        CHECK_THROWS_AS(read_mask(dir / "m.mhd", other), SizeMismatchError);
    }

    TEST_CASE("landmark parsing")
    {
        const auto two = parse_landmarks("1 2 3\n4 5 6\n");
        REQUIRE(two.size() == 2);
        CHECK(two[1] == Vec3{4, 5, 6});
        const auto mixed = parse_landmarks("  1.5\t2 3 \r\n\n\t4e1 -5 +6\r\n");
        REQUIRE(mixed.size() == 2);
        CHECK(mixed[0] == Vec3{1.5, 2, 3});
        CHECK(mixed[1] == Vec3{40, -5, 6});
        CHECK(parse_landmarks("1 2 3\r\n4 5 6") == two);

        try {
            parse_landmarks("1 2\n", "lm.txt");
            FAIL("expected an arity error");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("lm.txt:1") != std::string::npos);
            CHECK(std::string(e.what()).find("expected 3 values, got 2") != std::string::npos);
        }
        try {
            parse_landmarks("1 2 3\n\n4 x 6\n", "lm.txt");
            FAIL("expected a token error");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find("lm.txt:3") != std::string::npos);
            CHECK(std::string(e.what()).find("'x'") != std::string::npos);
        }
    }

    TEST_CASE("landmark files round trip")
    {
        TempDir dir("lm");
        const std::vector<Vec3> pts{{1.25, 2, 3}, {0.1, 1e-7, 123456.789}};
        write_landmarks(dir / "p.txt", pts);
        CHECK(read_landmarks(dir / "p.txt") == pts);
        CHECK_THROWS_AS(read_landmarks(dir / "q.txt"), UnreadableFileError);
    }

    TEST_CASE("checkpoint round trip is bitwise")
    {
        TempDir dir("ckpt");
        for (Encoder enc : {Encoder::periodic, Encoder::fourier}) {
            NetConfig c;
            c.num_layers = 3;
            c.hidden_units = 10;
            c.encoder = enc;
            c.fourier_features = 5;
            c.seed = 99;
            auto m = DeformationModel::init(c, Normalization{{1, 2, 3}, {10, 20, 30}});
            randomize_parameters(m, 4);
            write_checkpoint(dir / "m.ckpt", m);
            const DeformationModel back = read_checkpoint(dir / "m.ckpt");
            CHECK(back == m);
            CHECK(std::memcmp(back.params().data(), m.params().data(), m.parameter_count() * sizeof(double)) == 0);
        }
    }

    TEST_CASE("damaged checkpoints are rejected")
    {
        TempDir dir("ckbad");
        NetConfig c;
        c.num_layers = 2;
        c.hidden_units = 4;
        write_checkpoint(dir / "m.ckpt", DeformationModel::init(c));
        const auto size = fs::file_size(dir / "m.ckpt");
        std::vector<char> bytes(size);
        std::ifstream(dir / "m.ckpt", std::ios::binary).read(bytes.data(), static_cast<std::streamsize>(size));

        write_bytes(dir / "short.ckpt", bytes.data(), size - 5);
        CHECK_THROWS_AS(read_checkpoint(dir / "short.ckpt"), DataError);
        bytes.push_back(0);
        write_bytes(dir / "long.ckpt", bytes.data(), bytes.size());
        CHECK_THROWS_AS(read_checkpoint(dir / "long.ckpt"), DataError);
        bytes.pop_back();
        bytes[0] = 'X';
        write_bytes(dir / "magic.ckpt", bytes.data(), bytes.size());
        CHECK_THROWS_AS(read_checkpoint(dir / "magic.ckpt"), DataError);
        CHECK_THROWS_AS(read_checkpoint(dir / "absent.ckpt"), UnreadableFileError);
    }

    TEST_CASE("metric reports")
    {
        TempDir dir("report");
        TreResult r;
        r.per_landmark = {1.0, 2.0, 4.5};
        r.mean = 2.5;
        write_tre_report(dir / "t.json", dir / "t.csv", r);
        const auto j = nlohmann::json::parse(read_text_file(dir / "t.json"));
        CHECK(j["mean_mm"].get<double>() == 2.5);
        CHECK(j["count"].get<int>() == 3);
        CHECK(j["per_landmark_mm"][2].get<double>() == 4.5);
        CHECK(read_text_file(dir / "t.csv").rfind("index,tre_mm\n0,1", 0) == 0);

        const JacDetField f(Geometry{{2, 1, 1}, {1, 1, 1}, {0, 0, 0}}, {0.5, -1.0});
        write_jacdet_summary(dir / "j.json", dir / "j.csv", f);
        const auto s = nlohmann::json::parse(read_text_file(dir / "j.json"));
        CHECK(s["negative_fraction"].get<double>() == 0.5);
        CHECK(s["min"].get<double>() == -1.0);
        CHECK(s["max"].get<double>() == 0.5);

        const std::vector<LogRecord> log{{0, -0.5, 1.0, -0.49}, {10, -0.9, 2.0, -0.88}};
        write_training_log(dir / "l.csv", log);
        const std::string csv = read_text_file(dir / "l.csv");
        CHECK(csv.rfind("epoch,similarity,regulariser,total\n", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    }
}
