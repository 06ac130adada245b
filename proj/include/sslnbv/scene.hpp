#ifndef SSLNBV_SCENE_HPP
#define SSLNBV_SCENE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sslnbv/point_cloud.hpp"

namespace sslnbv {

struct TriangleMesh {
    std::vector<Point3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;

    std::size_t triangle_count() const { return faces.size(); }
    double surface_area() const;
};

double triangle_area(const Point3& a, const Point3& b, const Point3& c);

void write_obj(const TriangleMesh& mesh, const std::string& path);
TriangleMesh read_obj(const std::string& path);

struct PlantParams {
    int n_leaves = 8;
    double height = 0.5;    // stem height in meters
    double leaf_size = 0.12;  // major half-axis of a leaf blade in meters
};

// Procedural plant: tapered stem plus elliptical leaf blades at distinct
// heights/azimuths. Deterministic for a fixed seed.
struct PlantModel {
    TriangleMesh mesh;
    Point3 bbox_min;
    Point3 bbox_max;
    std::uint64_t seed = 0;
    PlantParams params;
};

struct ScenePose {
    double dx = 0.0;     // meters
    double dy = 0.0;     // meters
    double theta = 0.0;  // degrees, rotation about z, in [0, 360)
};

struct Scene {
    TriangleMesh mesh;  // plant mesh after the rigid placement transform
    ScenePose pose;
    std::uint64_t plant_seed = 0;
    PlantParams plant_params;
};

PlantModel generate_plant(std::uint64_t seed, const PlantParams& params);

// Rotation about z by pose.theta, then translation by (dx, dy, 0).
Scene place_plant(const PlantModel& plant, const ScenePose& pose);

// Area-weighted uniform surface sampling followed by voxel downsampling at
// `resolution`; the sampling seed defaults to the plant seed so a scene's
// ground truth is reproducible.
PointCloud sample_ground_truth(const Scene& scene, double resolution);
PointCloud sample_ground_truth(const Scene& scene, double resolution, std::uint64_t seed);

std::string scene_manifest_json(const Scene& scene);
Scene scene_from_manifest_json(const std::string& json_text);

// S1 placement lattice: dx, dy on a 0.02 m grid within [-range, range],
// theta on a 20 degree grid in [0, 360).
ScenePose random_pose(std::uint64_t seed, double range = 0.1, double xy_step = 0.02,
                      double theta_step = 20.0);

}  // namespace sslnbv

#endif
