#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <tuple>

#include "doctest.h"
#include "sslnbv/point_cloud.hpp"
#include "sslnbv/rng.hpp"

using namespace sslnbv;

namespace {

PointCloud random_cloud(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    PointCloud c;
    c.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        c.points.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
    return c;
}

double brute_nearest(const Point3& q, const PointCloud& c) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : c.points) best = std::min(best, distance(q, p));
    return best;
}

}  // namespace

TEST_CASE("kd-tree nearest distance matches a linear scan") {
    Rng rng(42);
    for (std::size_t n : {1u, 2u, 7u, 100u, 1000u}) {
        PointCloud c = random_cloud(n, rng);
        NNIndex index(c);
        REQUIRE(index.size() == n);
        for (int q = 0; q < 50; ++q) {
            Point3 p{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
            const double want = brute_nearest(p, c);
            CHECK(index.nearest_distance(p) == doctest::Approx(want).epsilon(1e-12));
            CHECK(index.nearest_squared_distance(p) ==
                  doctest::Approx(want * want).epsilon(1e-12));
        }
        // indexed points are at distance zero from themselves
        for (const auto& p : c.points) CHECK(index.nearest_distance(p) == 0.0);
    }
}

TEST_CASE("empty index returns infinity") {
    NNIndex index{PointCloud{}};
    CHECK(std::isinf(index.nearest_distance({0, 0, 0})));
    CHECK(index.empty());
}

TEST_CASE("mean knn distance matches a sorted linear scan") {
    Rng rng(7);
    PointCloud c = random_cloud(60, rng);
    NNIndex index(c);
    for (int qi = 0; qi < 20; ++qi) {
        const Point3 q = c.points[static_cast<std::size_t>(rng.uniform_index(c.size()))];
        for (std::size_t k : {1u, 3u, 10u}) {
            std::vector<double> d;
            for (const auto& p : c.points) d.push_back(distance(q, p));
            std::sort(d.begin(), d.end());
            // skip_self drops the single zero-distance self hit
            double sum_skip = 0.0, sum_keep = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                sum_keep += d[i];
                sum_skip += d[i + 1];
            }
            CHECK(index.mean_knn_distance(q, k, true) ==
                  doctest::Approx(sum_skip / k).epsilon(1e-12));
            CHECK(index.mean_knn_distance(q, k, false) ==
                  doctest::Approx(sum_keep / k).epsilon(1e-12));
        }
    }
}

TEST_CASE("voxel downsample bins by floor(coord / size) and averages") {
    PointCloud c;
    // two points in voxel (0,0,0), one in voxel (1,0,0), one at a negative bin
    c.points = {{0.01, 0.02, 0.03}, {0.07, 0.04, 0.01}, {0.15, 0.05, 0.05}, {-0.01, 0.0, 0.0}};
    PointCloud d = voxel_downsample(c, 0.1);
    REQUIRE(d.size() == 3);
    // first-seen order: bin of point 0, then point 2's bin, then point 3's bin
    CHECK(d.points[0].x == doctest::Approx(0.04));
    CHECK(d.points[0].y == doctest::Approx(0.03));
    CHECK(d.points[0].z == doctest::Approx(0.02));
    CHECK(d.points[1].x == doctest::Approx(0.15));
    CHECK(d.points[2].x == doctest::Approx(-0.01));
}

TEST_CASE("voxel downsample matches a hash-map oracle") {
    Rng rng(11);
    PointCloud c = random_cloud(500, rng);
    const double vs = 0.2;
    PointCloud d = voxel_downsample(c, vs);

    std::map<std::tuple<long, long, long>, std::pair<Point3, int>> bins;
    std::vector<std::tuple<long, long, long>> order;
    for (const auto& p : c.points) {
        auto key = std::make_tuple(static_cast<long>(std::floor(p.x / vs)),
                                   static_cast<long>(std::floor(p.y / vs)),
                                   static_cast<long>(std::floor(p.z / vs)));
        auto it = bins.find(key);
        if (it == bins.end()) {
            bins[key] = {p, 1};
            order.push_back(key);
        } else {
            it->second.first.x += p.x;
            it->second.first.y += p.y;
            it->second.first.z += p.z;
            it->second.second += 1;
        }
    }
    REQUIRE(d.size() == order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        const auto& [sum, n] = bins[order[i]];
        CHECK(d.points[i].x == doctest::Approx(sum.x / n).epsilon(1e-12));
        CHECK(d.points[i].y == doctest::Approx(sum.y / n).epsilon(1e-12));
        CHECK(d.points[i].z == doctest::Approx(sum.z / n).epsilon(1e-12));
    }
}

TEST_CASE("intersection mask equals brute-force pairwise thresholding") {
    Rng rng(99);
    PointCloud ref = random_cloud(200, rng, 0.0, 1.0);
    PointCloud query = random_cloud(300, rng, 0.0, 1.0);
    NNIndex index(ref);
    const double delta = 0.08;

    auto mask = intersection_mask(query, index, delta);
    auto mask_serial = intersection_mask_serial(query, index, delta);
    REQUIRE(mask.size() == query.size());
    CHECK(mask == mask_serial);

    for (std::size_t i = 0; i < query.size(); ++i) {
        bool within = false;
        for (const auto& r : ref.points)
            if (distance(query.points[i], r) <= delta) within = true;
        CHECK(static_cast<bool>(mask[i]) == within);
    }
}

TEST_CASE("threshold intersection and set difference partition the query") {
    Rng rng(5);
    PointCloud ref = random_cloud(100, rng);
    PointCloud query = random_cloud(150, rng);
    const double delta = 0.15;
    PointCloud inter = threshold_intersection(query, ref, delta);
    PointCloud diff = set_difference(query, ref, delta);
    CHECK(inter.size() + diff.size() == query.size());
    NNIndex refi(ref);
    for (const auto& p : inter.points) CHECK(refi.nearest_distance(p) <= delta);
    for (const auto& p : diff.points) CHECK(refi.nearest_distance(p) > delta);
}

TEST_CASE("threshold boundary is inclusive") {
    PointCloud ref{{{0, 0, 0}}};
    PointCloud query{{{0.1, 0, 0}, {0.1 + 1e-9, 0, 0}}};
    auto mask = intersection_mask(query, NNIndex(ref), 0.1);
    CHECK(mask[0] == 1);
    CHECK(mask[1] == 0);
}

TEST_CASE("ply round trip preserves points in both formats") {
    Rng rng(3);
    PointCloud c = random_cloud(37, rng);
    for (PlyFormat fmt : {PlyFormat::Ascii, PlyFormat::BinaryLittleEndian}) {
        const std::string path = "/tmp/sslnbv_test_cloud.ply";
        write_ply(c, path, fmt);
        PointCloud back = read_ply(path);
        REQUIRE(back.size() == c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            // written as float32: expect single-precision rounding only
            CHECK(back.points[i].x == doctest::Approx(c.points[i].x).epsilon(1e-6));
            CHECK(back.points[i].y == doctest::Approx(c.points[i].y).epsilon(1e-6));
            CHECK(back.points[i].z == doctest::Approx(c.points[i].z).epsilon(1e-6));
        }
        std::remove(path.c_str());
    }
}
