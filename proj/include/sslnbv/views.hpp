#ifndef SSLNBV_VIEWS_HPP
#define SSLNBV_VIEWS_HPP

#include <string>
#include <vector>

#include "sslnbv/sensor.hpp"

namespace sslnbv {

struct RigParams {
    double radius = 0.6;                          // meters
    std::vector<double> heights = {0.04, 0.25, 0.46};  // meters
    int n_angles = 11;
    double angular_span = 360.0;  // degrees; full circles exclude the duplicate endpoint
    Point3 center;                // rig axis passes through this point, parallel to z
};

// The M candidate camera poses. Index convention:
//   index = angle_index * heights.size() + height_index
// which fixes argmax tie-breaking downstream.
struct CandidateSet {
    std::vector<Viewpoint> views;
    RigParams rig;

    std::size_t size() const { return views.size(); }
};

CandidateSet sample_cylinder(const RigParams& rig);

// Pre-defined planner's 11-view zigzag over a rig with 11 angles x 3 heights:
// heights alternate 1,2,3,2,1,2,3,2,1,2,3 across the angles.
std::vector<std::size_t> zigzag_subset(const CandidateSet& candidates);

// Per-cycle visited bits V, s_i in {0,1}.
struct ViewSelectionState {
    std::vector<std::uint8_t> bits;

    explicit ViewSelectionState(std::size_t m = 0) : bits(m, 0) {}

    std::size_t size() const { return bits.size(); }
    bool visited(std::size_t i) const { return bits.at(i) != 0; }
    std::size_t visited_count() const;
};

ViewSelectionState mark_visited(const ViewSelectionState& state, std::size_t index);

std::string candidate_set_json(const CandidateSet& candidates);

}  // namespace sslnbv

#endif
