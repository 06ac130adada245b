#ifndef SSLNBV_POINT_CLOUD_HPP
#define SSLNBV_POINT_CLOUD_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sslnbv {

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline double squared_distance(const Point3& a, const Point3& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return dx * dx + dy * dy + dz * dz;
}

inline double distance(const Point3& a, const Point3& b) {
    return std::sqrt(squared_distance(a, b));
}

// Unordered bag of 3D points. Duplicates are allowed; downsampling removes them.
struct PointCloud {
    std::vector<Point3> points;

    PointCloud() = default;
    explicit PointCloud(std::vector<Point3> pts) : points(std::move(pts)) {}

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

// Exact nearest-neighbor index over an immutable snapshot of a cloud.
// Balanced kd-tree; queries prune with the current best squared radius,
// so results equal a linear scan exactly.
class NNIndex {
public:
    NNIndex() = default;
    explicit NNIndex(const PointCloud& cloud);

    // Exact min Euclidean distance from q to any indexed point; +inf when empty.
    double nearest_distance(const Point3& q) const;
    double nearest_squared_distance(const Point3& q) const;

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }

    // Mean distance from q to its k nearest indexed points (used by the SOR filter).
    // Requires k <= size(). A point of the indexed cloud queries itself too;
    // pass skip_self=true to exclude one zero-distance hit.
    double mean_knn_distance(const Point3& q, std::size_t k, bool skip_self) const;

private:
    struct Node {
        std::int32_t left = -1;
        std::int32_t right = -1;
        std::int32_t point = -1;
        std::int8_t axis = 0;
        double split = 0.0;
    };

    std::int32_t build(std::int32_t* first, std::int32_t* last, int depth);
    void search(std::int32_t node, const Point3& q, double& best) const;
    void knn_search(std::int32_t node, const Point3& q, std::size_t k, bool skip_self,
                    std::vector<double>& heap, bool& skipped) const;

    std::vector<Point3> points_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

// Centroid-per-voxel downsampling; bins anchored at the origin with
// index = floor(coord / voxel_size). Output order is first-seen voxel order.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size);

// Membership mask for the thresholded intersection (Eq. 2 semantics):
// mask[i] = 1 iff min distance from query[i] to the reference is <= delta.
// The parallel version and the serial reference return identical masks.
std::vector<std::uint8_t> intersection_mask(const PointCloud& query, const NNIndex& reference,
                                            double delta);
std::vector<std::uint8_t> intersection_mask_serial(const PointCloud& query,
                                                   const NNIndex& reference, double delta);

// Points of `query` within `delta` of some point of `reference`; preserves query order.
PointCloud threshold_intersection(const PointCloud& query, const PointCloud& reference,
                                  double delta);
PointCloud threshold_intersection(const PointCloud& query, const NNIndex& reference,
                                  double delta);

// Complement: query minus its thresholded intersection with reference.
PointCloud set_difference(const PointCloud& query, const PointCloud& reference, double delta);
PointCloud set_difference(const PointCloud& query, const NNIndex& reference, double delta);

enum class PlyFormat { Ascii, BinaryLittleEndian };

void write_ply(const PointCloud& cloud, const std::string& path,
               PlyFormat format = PlyFormat::BinaryLittleEndian);
PointCloud read_ply(const std::string& path);

}  // namespace sslnbv

#endif
