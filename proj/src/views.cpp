#include "sslnbv/views.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace sslnbv {

CandidateSet sample_cylinder(const RigParams& rig) {
    if (!(rig.radius > 0.0)) throw std::invalid_argument("sample_cylinder: radius must be > 0");
    if (rig.n_angles < 1) throw std::invalid_argument("sample_cylinder: n_angles must be >= 1");
    if (rig.heights.empty()) throw std::invalid_argument("sample_cylinder: heights empty");
    if (!(rig.angular_span > 0.0) || rig.angular_span > 360.0) {
        throw std::invalid_argument("sample_cylinder: angular_span in (0, 360]");
    }
    CandidateSet out;
    out.rig = rig;
    out.views.reserve(static_cast<std::size_t>(rig.n_angles) * rig.heights.size());
    const bool full_circle = rig.angular_span == 360.0;
    for (int a = 0; a < rig.n_angles; ++a) {
        double angle_deg;
        if (full_circle) {
            angle_deg = rig.angular_span * a / rig.n_angles;  // duplicate endpoint excluded
        } else if (rig.n_angles == 1) {
            angle_deg = 0.0;
        } else {
            angle_deg = -0.5 * rig.angular_span + rig.angular_span * a / (rig.n_angles - 1);
        }
        const double rad = angle_deg * std::numbers::pi / 180.0;
        for (double h : rig.heights) {
            Viewpoint v;
            v.position = {rig.center.x + rig.radius * std::cos(rad),
                          rig.center.y + rig.radius * std::sin(rad), rig.center.z + h};
            // horizontal, optical axis pointing at the rig's central z-axis
            v.gamma = angle_deg + 180.0;
            out.views.push_back(v);
        }
    }
    return out;
}

std::vector<std::size_t> zigzag_subset(const CandidateSet& candidates) {
    const std::size_t n_heights = candidates.rig.heights.size();
    if (candidates.rig.n_angles != 11 || n_heights != 3) {
        throw std::invalid_argument("zigzag_subset: rig must be 11 angles x 3 heights");
    }
    // heights alternate 1,2,3,2,... (0-based: 0,1,2,1,...) across the 11 angles
    static constexpr std::size_t pattern[11] = {0, 1, 2, 1, 0, 1, 2, 1, 0, 1, 2};
    std::vector<std::size_t> subset(11);
    for (std::size_t a = 0; a < 11; ++a) {
        subset[a] = a * n_heights + pattern[a];
    }
    return subset;
}

std::size_t ViewSelectionState::visited_count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
}

ViewSelectionState mark_visited(const ViewSelectionState& state, std::size_t index) {
    if (index >= state.bits.size()) throw std::out_of_range("mark_visited: index out of range");
    ViewSelectionState next = state;
    next.bits[index] = 1;
    return next;
}

std::string candidate_set_json(const CandidateSet& candidates) {
    nlohmann::json j;
    j["rig"] = {{"radius", candidates.rig.radius},
                {"heights", candidates.rig.heights},
                {"n_angles", candidates.rig.n_angles},
                {"angular_span", candidates.rig.angular_span},
                {"center", {candidates.rig.center.x, candidates.rig.center.y,
                            candidates.rig.center.z}}};
    nlohmann::json views = nlohmann::json::array();
    for (const auto& v : candidates.views) {
        views.push_back({{"position", {v.position.x, v.position.y, v.position.z}},
                         {"orientation", {v.alpha, v.beta, v.gamma}}});
    }
    j["views"] = std::move(views);
    return j.dump(2);
}

}  // namespace sslnbv
