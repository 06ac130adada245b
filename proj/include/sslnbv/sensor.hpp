#ifndef SSLNBV_SENSOR_HPP
#define SSLNBV_SENSOR_HPP

#include <cstdint>

#include "sslnbv/point_cloud.hpp"
#include "sslnbv/scene.hpp"

namespace sslnbv {

struct CameraIntrinsics {
    double h_fov = 60.0;  // degrees
    double v_fov = 45.0;  // degrees
    int width = 64;       // rays per row
    int height = 48;      // rays per column
    double max_range = 1.5;  // meters
    double min_range = 0.1;  // meters

    bool valid() const {
        return h_fov > 0.0 && h_fov < 180.0 && v_fov > 0.0 && v_fov < 180.0 && width >= 1 &&
               height >= 1 && min_range >= 0.0 && min_range < max_range;
    }
};

// Camera pose c_i in R^6. The optical axis is the +x axis of the camera frame;
// +z is up. Orientation is intrinsic z-y-x: yaw gamma about z, then pitch beta
// about y, then roll alpha about x.
struct Viewpoint {
    Point3 position;
    double alpha = 0.0;  // roll, degrees
    double beta = 0.0;   // pitch, degrees
    double gamma = 0.0;  // yaw, degrees
};

// Rotation matrix (row-major 3x3) taking camera-frame vectors to world frame.
void viewpoint_rotation(const Viewpoint& view, double r[9]);

// First-hit distance of a ray against a triangle; returns +inf on a miss.
// Barycentric (Moller-Trumbore) test with epsilon 1e-9 degenerate rejection.
double ray_triangle(const Point3& origin, const Point3& dir, const Point3& a, const Point3& b,
                    const Point3& c);

// Simulated depth capture: one ray per pixel, nearest mesh intersection within
// [min_range, max_range], misses dropped, then voxel downsampling at
// `resolution` (pass <= 0 to skip downsampling). Pure function of its inputs.
PointCloud capture(const Scene& scene, const Viewpoint& view, const CameraIntrinsics& intr,
                   double resolution = 0.003);
PointCloud capture_serial(const Scene& scene, const Viewpoint& view, const CameraIntrinsics& intr,
                          double resolution = 0.003);

// Retains points whose distance to `origin` lies in the closed interval [min_r, max_r].
PointCloud range_filter(const PointCloud& cloud, double min_r, double max_r,
                        const Point3& origin);

// Statistical outlier removal: drops points whose mean distance to their k
// nearest neighbors exceeds mean + std_mult * std of that statistic over the
// cloud. Clouds with size <= k are returned unchanged (warning flag set).
PointCloud sor_filter(const PointCloud& cloud, std::size_t k, double std_mult,
                      bool* too_small = nullptr);

// Isotropic Gaussian jitter plus independent Bernoulli dropout, seeded.
PointCloud add_noise(const PointCloud& cloud, double sigma, double dropout, std::uint64_t seed);

}  // namespace sslnbv

#endif
