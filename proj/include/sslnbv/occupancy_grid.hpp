#ifndef SSLNBV_OCCUPANCY_GRID_HPP
#define SSLNBV_OCCUPANCY_GRID_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sslnbv/point_cloud.hpp"
#include "sslnbv/views.hpp"

namespace sslnbv {

enum class VoxelState : std::uint8_t { Free, Occupied, Unknown };

// Log-odds occupancy grid. A voxel is unknown while its log-odds sits exactly
// at the prior (0); hit/miss updates move it and clamping bounds it.
class OccupancyGrid {
public:
    struct Params {
        double hit_update = 0.85;
        double miss_update = -0.4;
        double clamp = 3.5;
    };

    OccupancyGrid(const Point3& min_corner, const Point3& max_corner, double resolution,
                  Params params);
    OccupancyGrid(const Point3& min_corner, const Point3& max_corner, double resolution)
        : OccupancyGrid(min_corner, max_corner, resolution, Params()) {}

    // Grid sized to cover a candidate rig's bounding cylinder plus padding.
    static OccupancyGrid for_rig(const RigParams& rig, double resolution, double padding = 0.1);

    double resolution() const { return resolution_; }
    const Point3& origin() const { return origin_; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }
    int nz() const { return nz_; }
    std::size_t voxel_count() const { return logodds_.size(); }

    bool contains(const Point3& p) const;
    VoxelState state_at(const Point3& p) const;  // points outside the grid read Unknown
    VoxelState state(int ix, int iy, int iz) const;
    double logodds(int ix, int iy, int iz) const;

    // Per-point DDA ray update from sensor_origin: traversed voxels get the
    // miss (free) update, the endpoint voxel the hit update. Segments are
    // clipped to the grid bounds; an endpoint outside the grid gets no hit.
    void integrate(const PointCloud& cloud, const Point3& sensor_origin);

    struct Stats {
        std::size_t free = 0;
        std::size_t occupied = 0;
        std::size_t unknown = 0;
    };
    Stats stats() const;

    // Flat little-endian float32 log-odds payload with a JSON header.
    void dump(const std::string& path) const;

private:
    friend double raycast_ig(const OccupancyGrid&, const Viewpoint&, const CameraIntrinsics&);
    friend double raycast_ig_serial(const OccupancyGrid&, const Viewpoint&,
                                    const CameraIntrinsics&);

    std::size_t index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(ix) * ny_ + iy) * nz_ + iz;
    }

    Point3 origin_;
    double resolution_;
    int nx_, ny_, nz_;
    Params params_;
    std::vector<float> logodds_;
};

// Normalized IG estimate for a candidate view: one ray per pixel, each marched
// through the grid until an occupied voxel or max_range; the estimate is
// (unknown voxels traversed) / (all voxels traversed) in [0,1].
double raycast_ig(const OccupancyGrid& grid, const Viewpoint& view, const CameraIntrinsics& intr);
double raycast_ig_serial(const OccupancyGrid& grid, const Viewpoint& view,
                         const CameraIntrinsics& intr);

// Unvisited candidate with maximal raycast_ig; ties break to the lowest index.
std::size_t best_view_voxel(const OccupancyGrid& grid, const CandidateSet& candidates,
                            const ViewSelectionState& state, const CameraIntrinsics& intr);

}  // namespace sslnbv

#endif
