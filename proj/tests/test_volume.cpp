#include <cmath>
#include <vector>

#include "confreg/error.hpp"
#include "confreg/rng.hpp"
#include "confreg/volume.hpp"
#include "doctest.h"

using namespace confreg;

namespace {

Geometry geom(Index3 dims, Vec3 spacing = {1, 1, 1}, Vec3 origin = {0, 0, 0})
{
    Geometry g;
    g.dims = dims;
    g.spacing = spacing;
    g.origin = origin;
    return g;
}

Volume affine_volume(const Geometry& g, const Vec3& slope, double c)
{
    std::vector<double> d(g.voxel_count());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Vec3 x = g.world(g.unravel(i));
        d[i] = c + slope[0] * x[0] + slope[1] * x[1] + slope[2] * x[2];
    }
    return Volume(g, std::move(d));
}

} // namespace

TEST_SUITE("volume")
{
    TEST_CASE("construction checks")
    {
        CHECK_THROWS_AS(Volume(geom({2, 2, 2}), std::vector<double>(7)), DataError);
        CHECK_THROWS_AS(Volume(geom({2, 2, 2}, {1, 0, 1}), std::vector<double>(8)), DataError);
        CHECK_THROWS_AS(Volume(geom({2, 2, 2}), std::vector<double>(8), std::vector<std::uint8_t>(5)), DataError);
        CHECK_NOTHROW(Volume(geom({2, 2, 2}), std::vector<double>(8), std::vector<std::uint8_t>(8)));
    }

    TEST_CASE("index order is x fastest")
    {
        const Geometry g = geom({3, 4, 5});
        CHECK(g.linear(1, 0, 0) == 1);
        CHECK(g.linear(0, 1, 0) == 3);
        CHECK(g.linear(0, 0, 1) == 12);
        CHECK(g.unravel(g.linear(2, 3, 4)) == Index3{2, 3, 4});
    }

    TEST_CASE("constant, nodes and ramp")
    {
        const Geometry g = geom({5, 4, 3}, {2, 1, 3}, {-1, 2, 0.5});
        const Volume c = Volume::filled(g, 4.25);
        Rng rng(61);
        for (int n = 0; n < 20; ++n) {
            const Vec3 x{rng.uniform(-10, 20), rng.uniform(-10, 20), rng.uniform(-10, 20)};
            CHECK(sample(c, x) == 4.25);
            CHECK(sample_gradient(c, x) == Vec3{0, 0, 0});
        }

        std::vector<double> d(g.voxel_count());
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = rng.uniform(-1, 1);
        }
        const Volume v(g, d);
        for (std::size_t i = 0; i < d.size(); ++i) {
            CHECK(sample(v, g.world(g.unravel(i))) == d[i]);
        }

        const Geometry rg = geom({6, 3, 3});
        std::vector<double> ramp(rg.voxel_count());
        for (std::size_t i = 0; i < ramp.size(); ++i) {
            ramp[i] = static_cast<double>(rg.unravel(i)[0]);
        }
        const Volume r(rg, ramp);
        CHECK(sample(r, {2.5, 1, 1}) == doctest::Approx(2.5).epsilon(1e-15));

        const Geometry sg = geom({6, 3, 3}, {2, 1, 1});
        const Volume rs(sg, ramp);
        const Vec3 gr = sample_gradient(rs, {3.3, 1.2, 0.7});
        CHECK(gr[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(gr[1] == 0.0);
        CHECK(gr[2] == 0.0);
    }

    TEST_CASE("affine fields are reproduced exactly")
    {
        const Geometry g = geom({7, 6, 5}, {1.5, 0.7, 2.0}, {3, -2, 1});
        const Vec3 slope{0.3, -1.2, 0.8};
        const Volume v = affine_volume(g, slope, 2.0);
        Rng rng(62);
        for (int n = 0; n < 200; ++n) {
            const Vec3 x = g.world(rng.uniform(0, 6), rng.uniform(0, 5), rng.uniform(0, 4));
            const double want = 2.0 + slope[0] * x[0] + slope[1] * x[1] + slope[2] * x[2];
            CHECK(std::fabs(sample(v, x) - want) <= 1e-12 * 10);
            const Vec3 gr = sample_gradient(v, x);
            for (int a = 0; a < 3; ++a) {
                CHECK(std::fabs(gr[a] - slope[a]) <= 1e-12);
            }
        }
    }

    TEST_CASE("gradient matches central differences away from faces")
    {
        const Geometry g = geom({6, 5, 7}, {1.2, 0.8, 1.5}, {0, 1, -3});
        Rng rng(63);
        std::vector<double> d(g.voxel_count());
        for (double& x : d) {
            x = rng.uniform(-1, 1);
        }
        const Volume v(g, d);
        int checked = 0;
        while (checked < 200) {
            const Vec3 c{rng.uniform(0.01, 4.99), rng.uniform(0.01, 3.99), rng.uniform(0.01, 5.99)};
            bool near_face = false;
            for (double ci : c) {
                near_face = near_face || std::fabs(ci - std::round(ci)) < 1e-3;
            }
            if (near_face) {
                continue;
            }
            const Vec3 x = g.world(c[0], c[1], c[2]);
            const Vec3 gr = sample_gradient(v, x);
            for (int a = 0; a < 3; ++a) {
                Vec3 up = x, dn = x;
                up[a] += 1e-4;
                dn[a] -= 1e-4;
                CHECK(std::fabs(gr[a] - (sample(v, up) - sample(v, dn)) / 2e-4) <= 1e-8);
            }
            ++checked;
        }
    }

    TEST_CASE("clamping outside the grid")
    {
        const Geometry g = geom({4, 4, 4});
        const Volume v = affine_volume(g, {1, 2, 3}, 0.0);
        CHECK(sample(v, {-5, 1, 1}) == sample(v, {0, 1, 1}));
        CHECK(sample(v, {1, 9, 1}) == sample(v, {1, 3, 1}));
        const Vec3 gr = sample_gradient(v, {-5, 1.5, 1.5});
        CHECK(gr[0] == 0.0);
        CHECK(gr[1] == doctest::Approx(2.0));
        // The upper face uses the last cell.
        CHECK(sample_gradient(v, {3, 1.5, 1.5})[0] == doctest::Approx(1.0));
    }

    TEST_CASE("continuity across cell boundaries")
    {
        const Geometry g = geom({5, 5, 5});
        Rng rng(64);
        std::vector<double> d(g.voxel_count());
        for (double& x : d) {
            x = rng.uniform(-1, 1);
        }
        const Volume v(g, d);
        for (double delta : {1e-4, 1e-8, 1e-12}) {
            for (int n = 0; n < 20; ++n) {
                const Vec3 x{2.0, rng.uniform(0, 4), rng.uniform(0, 4)};
                CHECK(std::fabs(sample(v, x) - sample(v, {2.0 + delta, x[1], x[2]})) <= 10 * delta);
                CHECK(std::fabs(sample(v, x) - sample(v, {2.0 - delta, x[1], x[2]})) <= 10 * delta);
            }
        }
    }

    TEST_CASE("NaN coordinates give NaN")
    {
        const Volume v = Volume::filled(geom({3, 3, 3}), 1.0);
        CHECK(std::isnan(sample(v, {std::nan(""), 1, 1})));
    }

    TEST_CASE("masked indices")
    {
        const Geometry g = geom({2, 2, 2});
        Volume v = Volume::filled(g, 0.0);
        CHECK_THROWS_WITH_AS(masked_indices(v), doctest::Contains("whole-domain"), UsageError);

        v.set_mask(std::vector<std::uint8_t>(8, 1));
        const auto all = masked_indices(v);
        REQUIRE(all.size() == 8);
        for (std::size_t i = 0; i < 8; ++i) {
            CHECK(all[i] == g.unravel(i));
        }
        v.set_mask(std::vector<std::uint8_t>(8, 0));
        CHECK(masked_indices(v).empty());

        const Geometry cg = geom({5, 4, 3});
        std::vector<std::uint8_t> checker(cg.voxel_count());
        std::vector<Index3> brute;
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t j = 0; j < 4; ++j) {
                for (std::size_t i = 0; i < 5; ++i) {
                    const bool on = (i + j + k) % 2 == 0;
                    checker[cg.linear(i, j, k)] = on;
                    if (on) {
                        brute.push_back({i, j, k});
                    }
                }
            }
        }
        const Volume cv(cg, std::vector<double>(cg.voxel_count()), checker);
        CHECK(masked_indices(cv) == brute);
        CHECK(brute.size() == 30);
    }

    TEST_CASE("intensity rescale uses the mask interior")
    {
        const Geometry g = geom({4, 1, 1});
        const Volume v(g, {10, 20, 30, 1000}, std::vector<std::uint8_t>{1, 1, 1, 0});
        const Volume r = rescale_intensity(v);
        CHECK(r.data()[0] == 0.0);
        CHECK(r.data()[1] == 0.5);
        CHECK(r.data()[2] == 1.0);
        CHECK(r.data()[3] == doctest::Approx(49.5));
        const Volume flat = rescale_intensity(Volume::filled(g, 3.0));
        CHECK(flat.data() == std::vector<double>(4, 0.0));
    }
}
