#include "sslnbv/sensor.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "sslnbv/rng.hpp"

namespace sslnbv {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

void viewpoint_rotation(const Viewpoint& view, double r[9]) {
    const double ca = std::cos(view.alpha * kDegToRad), sa = std::sin(view.alpha * kDegToRad);
    const double cb = std::cos(view.beta * kDegToRad), sb = std::sin(view.beta * kDegToRad);
    const double cg = std::cos(view.gamma * kDegToRad), sg = std::sin(view.gamma * kDegToRad);
    // R = Rz(gamma) * Ry(beta) * Rx(alpha)
    r[0] = cg * cb;
    r[1] = cg * sb * sa - sg * ca;
    r[2] = cg * sb * ca + sg * sa;
    r[3] = sg * cb;
    r[4] = sg * sb * sa + cg * ca;
    r[5] = sg * sb * ca - cg * sa;
    r[6] = -sb;
    r[7] = cb * sa;
    r[8] = cb * ca;
}

double ray_triangle(const Point3& origin, const Point3& dir, const Point3& a, const Point3& b,
                    const Point3& c) {
    constexpr double eps = 1e-9;
    const double e1x = b.x - a.x, e1y = b.y - a.y, e1z = b.z - a.z;
    const double e2x = c.x - a.x, e2y = c.y - a.y, e2z = c.z - a.z;
    const double px = dir.y * e2z - dir.z * e2y;
    const double py = dir.z * e2x - dir.x * e2z;
    const double pz = dir.x * e2y - dir.y * e2x;
    const double det = e1x * px + e1y * py + e1z * pz;
    if (std::fabs(det) < eps) return kInf;
    const double inv = 1.0 / det;
    const double tx = origin.x - a.x, ty = origin.y - a.y, tz = origin.z - a.z;
    const double u = (tx * px + ty * py + tz * pz) * inv;
    if (u < 0.0 || u > 1.0) return kInf;
    const double qx = ty * e1z - tz * e1y;
    const double qy = tz * e1x - tx * e1z;
    const double qz = tx * e1y - ty * e1x;
    const double v = (dir.x * qx + dir.y * qy + dir.z * qz) * inv;
    if (v < 0.0 || u + v > 1.0) return kInf;
    const double t = (e2x * qx + e2y * qy + e2z * qz) * inv;
    return t > eps ? t : kInf;
}

namespace {

struct RayGrid {
    Point3 origin;
    std::vector<Point3> dirs;  // unit directions, row-major height x width
};

RayGrid make_rays(const Viewpoint& view, const CameraIntrinsics& intr) {
    double r[9];
    viewpoint_rotation(view, r);
    RayGrid rays;
    rays.origin = view.position;
    rays.dirs.reserve(static_cast<std::size_t>(intr.width) * intr.height);
    const double half_h = std::tan(0.5 * intr.h_fov * kDegToRad);
    const double half_v = std::tan(0.5 * intr.v_fov * kDegToRad);
    for (int row = 0; row < intr.height; ++row) {
        // pixel centers spanning the fov symmetrically
        const double fv = intr.height == 1 ? 0.0 : (row + 0.5) / intr.height * 2.0 - 1.0;
        for (int col = 0; col < intr.width; ++col) {
            const double fh = intr.width == 1 ? 0.0 : (col + 0.5) / intr.width * 2.0 - 1.0;
            // camera frame: +x forward, +y left, +z up
            const double cx = 1.0, cy = -fh * half_h, cz = -fv * half_v;
            const double norm = std::sqrt(cx * cx + cy * cy + cz * cz);
            const double dx = cx / norm, dy = cy / norm, dz = cz / norm;
            rays.dirs.push_back({r[0] * dx + r[1] * dy + r[2] * dz,
                                 r[3] * dx + r[4] * dy + r[5] * dz,
                                 r[6] * dx + r[7] * dy + r[8] * dz});
        }
    }
    return rays;
}

double first_hit(const TriangleMesh& mesh, const Point3& origin, const Point3& dir) {
    double best = kInf;
    for (const auto& f : mesh.faces) {
        const double t = ray_triangle(origin, dir, mesh.vertices[f[0]], mesh.vertices[f[1]],
                                      mesh.vertices[f[2]]);
        if (t < best) best = t;
    }
    return best;
}

PointCloud capture_impl(const Scene& scene, const Viewpoint& view, const CameraIntrinsics& intr,
                        double resolution, bool parallel) {
    if (!intr.valid()) throw std::invalid_argument("capture: invalid intrinsics");
    const RayGrid rays = make_rays(view, intr);
    const std::int64_t n = static_cast<std::int64_t>(rays.dirs.size());
    std::vector<double> hits(rays.dirs.size());
    if (parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) {
            hits[i] = first_hit(scene.mesh, rays.origin, rays.dirs[i]);
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i) {
            hits[i] = first_hit(scene.mesh, rays.origin, rays.dirs[i]);
        }
    }
    PointCloud cloud;
    for (std::int64_t i = 0; i < n; ++i) {
        const double t = hits[i];
        if (t >= intr.min_range && t <= intr.max_range) {
            const Point3& d = rays.dirs[i];
            cloud.points.push_back({rays.origin.x + t * d.x, rays.origin.y + t * d.y,
                                    rays.origin.z + t * d.z});
        }
    }
    return resolution > 0.0 ? voxel_downsample(cloud, resolution) : cloud;
}

}  // namespace

PointCloud capture(const Scene& scene, const Viewpoint& view, const CameraIntrinsics& intr,
                   double resolution) {
    return capture_impl(scene, view, intr, resolution, true);
}

PointCloud capture_serial(const Scene& scene, const Viewpoint& view, const CameraIntrinsics& intr,
                          double resolution) {
    return capture_impl(scene, view, intr, resolution, false);
}

PointCloud range_filter(const PointCloud& cloud, double min_r, double max_r,
                        const Point3& origin) {
    if (!(min_r < max_r)) throw std::invalid_argument("range_filter: require min_r < max_r");
    PointCloud out;
    for (const auto& p : cloud.points) {
        const double d = distance(p, origin);
        if (d >= min_r && d <= max_r) out.points.push_back(p);
    }
    return out;
}

PointCloud sor_filter(const PointCloud& cloud, std::size_t k, double std_mult, bool* too_small) {
    if (k < 1) throw std::invalid_argument("sor_filter: k must be >= 1");
    if (!(std_mult > 0.0)) throw std::invalid_argument("sor_filter: std_mult must be > 0");
    if (too_small) *too_small = false;
    if (cloud.size() <= k) {
        if (too_small) *too_small = true;
        return cloud;
    }
    const NNIndex index(cloud);
    const std::int64_t n = static_cast<std::int64_t>(cloud.size());
    std::vector<double> mean_dist(cloud.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        mean_dist[i] = index.mean_knn_distance(cloud.points[i], k, /*skip_self=*/true);
    }
    double mean = 0.0;
    for (double d : mean_dist) mean += d;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double d : mean_dist) var += (d - mean) * (d - mean);
    var /= static_cast<double>(n);
    const double threshold = mean + std_mult * std::sqrt(var);
    PointCloud out;
    for (std::int64_t i = 0; i < n; ++i) {
        if (!(mean_dist[i] > threshold)) out.points.push_back(cloud.points[i]);
    }
    return out;
}

PointCloud add_noise(const PointCloud& cloud, double sigma, double dropout, std::uint64_t seed) {
    if (sigma < 0.0) throw std::invalid_argument("add_noise: sigma must be >= 0");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("add_noise: dropout in [0,1)");
    Rng rng(substream(seed, 0x5e15e));
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const auto& p : cloud.points) {
        if (dropout > 0.0 && rng.uniform01() < dropout) continue;
        if (sigma > 0.0) {
            out.points.push_back({p.x + rng.normal(0.0, sigma), p.y + rng.normal(0.0, sigma),
                                  p.z + rng.normal(0.0, sigma)});
        } else {
            out.points.push_back(p);
        }
    }
    return out;
}

}  // namespace sslnbv
