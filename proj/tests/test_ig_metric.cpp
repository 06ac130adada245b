#include <cmath>

#include "doctest.h"
#include "sslnbv/ig_metric.hpp"
#include "sslnbv/rng.hpp"

using namespace sslnbv;

namespace {

PointCloud random_cloud(std::size_t n, Rng& rng) {
    PointCloud c;
    for (std::size_t i = 0; i < n; ++i)
        c.points.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
    return c;
}

// O(n*m) oracle: fraction of captured points farther than delta from all
// accumulated points.
double brute_ig(const PointCloud& acc, const PointCloud& cap, double delta) {
    std::size_t novel = 0;
    for (const auto& q : cap.points) {
        bool close = false;
        for (const auto& r : acc.points)
            if (distance(q, r) <= delta) close = true;
        if (!close) ++novel;
    }
    return static_cast<double>(novel) / static_cast<double>(cap.size());
}

}  // namespace

TEST_CASE("ground truth ig matches the pairwise oracle") {
    Rng rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        PointCloud acc = random_cloud(120, rng);
        PointCloud cap = random_cloud(80, rng);
        for (double delta : {0.02, 0.1, 0.5}) {
            CHECK(ground_truth_ig(acc, cap, delta) ==
                  doctest::Approx(brute_ig(acc, cap, delta)).epsilon(1e-12));
        }
    }
}

TEST_CASE("ig edge cases") {
    Rng rng(4);
    PointCloud cap = random_cloud(10, rng);
    // nothing accumulated yet: everything is novel
    CHECK(ground_truth_ig(PointCloud{}, cap, 0.01) == 1.0);
    // capture identical to accumulated: nothing is novel
    CHECK(ground_truth_ig(cap, cap, 0.01) == 0.0);
    // empty captures are an error, not zero gain
    CHECK_THROWS(ground_truth_ig(cap, PointCloud{}, 0.01));
}

TEST_CASE("merge accumulates exactly the novel subset") {
    Rng rng(21);
    PointCloud acc = random_cloud(100, rng);
    PointCloud cap = random_cloud(60, rng);
    const double delta = 0.08;
    const double g = ground_truth_ig(acc, cap, delta);
    PointCloud merged = merge_accumulated(acc, cap, delta);
    CHECK(merged.size() ==
          acc.size() + static_cast<std::size_t>(std::lround(g * static_cast<double>(cap.size()))));
    // prefix is the untouched accumulated cloud
    for (std::size_t i = 0; i < acc.size(); ++i) CHECK(merged.points[i].x == acc.points[i].x);
    // appended points are all novel w.r.t. the old accumulated cloud
    NNIndex old_index(acc);
    for (std::size_t i = acc.size(); i < merged.size(); ++i)
        CHECK(old_index.nearest_distance(merged.points[i]) > delta);
    // merging a second time adds nothing
    CHECK(merge_accumulated(merged, cap, delta).size() == merged.size());
}

TEST_CASE("reconstruction ratio matches the pairwise oracle") {
    Rng rng(33);
    PointCloud gt = random_cloud(150, rng);
    PointCloud acc = random_cloud(90, rng);
    for (double delta : {0.03, 0.12}) {
        std::size_t hit = 0;
        for (const auto& q : gt.points) {
            bool close = false;
            for (const auto& r : acc.points)
                if (distance(q, r) <= delta) close = true;
            if (close) ++hit;
        }
        const double want = static_cast<double>(hit) / static_cast<double>(gt.size());
        CHECK(reconstruction_ratio(gt, acc, delta) == doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(reconstruction_ratio(gt, gt, 0.001) == 1.0);
    CHECK(reconstruction_ratio(gt, PointCloud{}, 0.1) == 0.0);
}

TEST_CASE("views to threshold is the first 1-based crossing") {
    CHECK(views_to_threshold({0.1, 0.5, 0.8, 0.9}, 0.8) == 3u);
    CHECK(views_to_threshold({0.9, 0.95}, 0.8) == 1u);
    CHECK(views_to_threshold({0.1, 0.2}, 0.8) == std::nullopt);
    CHECK(views_to_threshold({}, 0.8) == std::nullopt);
    // non-monotone input still reports the first crossing
    CHECK(views_to_threshold({0.85, 0.7, 0.95}, 0.8) == 1u);
}

TEST_CASE("weak target is a one-hot masked vector") {
    TargetVector t = weak_target(33, 7, 0.42);
    REQUIRE(t.size() == 33);
    REQUIRE(t.mask.size() == 33);
    CHECK(t.mask_count() == 1);
    CHECK(t.mask[7] == 1);
    CHECK(t.values[7] == 0.42);
    for (std::size_t i = 0; i < 33; ++i) {
        if (i != 7) {
            CHECK(t.mask[i] == 0);
            CHECK(t.values[i] == 0.0);
        }
    }
    CHECK_THROWS(weak_target(5, 9, 0.1));
}
