#include <cmath>
#include <set>

#include "doctest.h"
#include "sslnbv/views.hpp"

#include "json.hpp"

using namespace sslnbv;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("cylinder rig produces 33 candidates with the documented indexing") {
    RigParams rig;
    CandidateSet cs = sample_cylinder(rig);
    REQUIRE(cs.size() == 33);
    for (int a = 0; a < 11; ++a) {
        const double angle = a * (360.0 / 11.0) * kPi / 180.0;
        for (int h = 0; h < 3; ++h) {
            const Viewpoint& v = cs.views[static_cast<std::size_t>(a) * 3 + h];
            // index = angle_index * heights.size() + height_index
            CHECK(v.position.x == doctest::Approx(0.6 * std::cos(angle)).epsilon(1e-12));
            CHECK(v.position.y == doctest::Approx(0.6 * std::sin(angle)).epsilon(1e-12));
            CHECK(v.position.z == doctest::Approx(rig.heights[static_cast<std::size_t>(h)]));
            // optical axis points at the rig axis: camera +x in world frame is
            // the unit vector from the position toward (0, 0, z)
            double r[9];
            viewpoint_rotation(v, r);
            CHECK(r[0] == doctest::Approx(-std::cos(angle)).epsilon(1e-9));
            CHECK(r[3] == doctest::Approx(-std::sin(angle)).epsilon(1e-9));
            CHECK(r[6] == doctest::Approx(0.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("rig center offsets every candidate") {
    RigParams rig;
    rig.center = {0.3, -0.2, 0.0};
    CandidateSet cs = sample_cylinder(rig);
    const double angle0 = 0.0;
    CHECK(cs.views[0].position.x == doctest::Approx(0.3 + 0.6 * std::cos(angle0)));
    CHECK(cs.views[0].position.y == doctest::Approx(-0.2));
}

TEST_CASE("partial span centers the fan and keeps both endpoints") {
    RigParams rig;
    rig.angular_span = 180.0;
    rig.n_angles = 3;  // -90, 0, +90 degrees
    CandidateSet cs = sample_cylinder(rig);
    REQUIRE(cs.size() == 9);
    CHECK(cs.views[0].position.y == doctest::Approx(-0.6));
    CHECK(cs.views[3].position.x == doctest::Approx(0.6));
    CHECK(cs.views[6].position.y == doctest::Approx(0.6));
}

TEST_CASE("zigzag subset walks heights 1,2,3,2,... across the angles") {
    CandidateSet cs = sample_cylinder(RigParams{});
    std::vector<std::size_t> order = zigzag_subset(cs);
    REQUIRE(order.size() == 11);
    const int pattern[11] = {0, 1, 2, 1, 0, 1, 2, 1, 0, 1, 2};
    for (int a = 0; a < 11; ++a)
        CHECK(order[static_cast<std::size_t>(a)] ==
              static_cast<std::size_t>(a) * 3 + static_cast<std::size_t>(pattern[a]));
}

TEST_CASE("visited state is immutable and counted") {
    ViewSelectionState s(5);
    CHECK(s.visited_count() == 0);
    ViewSelectionState s2 = mark_visited(s, 3);
    CHECK(s.visited_count() == 0);
    CHECK(s2.visited(3));
    CHECK(!s2.visited(2));
    CHECK(s2.visited_count() == 1);
    ViewSelectionState s3 = mark_visited(s2, 0);
    CHECK(s3.visited_count() == 2);
    CHECK_THROWS(mark_visited(s3, 99));
}

TEST_CASE("candidate json lists every view with pose fields") {
    CandidateSet cs = sample_cylinder(RigParams{});
    auto j = nlohmann::json::parse(candidate_set_json(cs));
    REQUIRE(j.at("views").size() == 33);
    const auto& v0 = j.at("views").at(0);
    CHECK(v0.contains("position"));
    CHECK(v0.contains("orientation"));
    CHECK(j.at("rig").at("radius").get<double>() == doctest::Approx(0.6));
}
