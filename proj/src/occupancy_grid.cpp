#include "sslnbv/occupancy_grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace sslnbv {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

OccupancyGrid::OccupancyGrid(const Point3& min_corner, const Point3& max_corner, double resolution,
                             Params params)
    : origin_(min_corner), resolution_(resolution), params_(params) {
    if (!(resolution > 0.0)) throw std::invalid_argument("OccupancyGrid: resolution must be > 0");
    if (!(max_corner.x > min_corner.x && max_corner.y > min_corner.y &&
          max_corner.z > min_corner.z)) {
        throw std::invalid_argument("OccupancyGrid: empty bounds");
    }
    nx_ = static_cast<int>(std::ceil((max_corner.x - min_corner.x) / resolution));
    ny_ = static_cast<int>(std::ceil((max_corner.y - min_corner.y) / resolution));
    nz_ = static_cast<int>(std::ceil((max_corner.z - min_corner.z) / resolution));
    logodds_.assign(static_cast<std::size_t>(nx_) * ny_ * nz_, 0.0f);
}

OccupancyGrid OccupancyGrid::for_rig(const RigParams& rig, double resolution, double padding) {
    double h_min = rig.heights.front(), h_max = rig.heights.front();
    for (double h : rig.heights) {
        h_min = std::min(h_min, h);
        h_max = std::max(h_max, h);
    }
    const double r = rig.radius + padding;
    const Point3 lo{rig.center.x - r, rig.center.y - r, rig.center.z + std::min(h_min, 0.0) - padding};
    const Point3 hi{rig.center.x + r, rig.center.y + r, rig.center.z + h_max + padding};
    return OccupancyGrid(lo, hi, resolution);
}

bool OccupancyGrid::contains(const Point3& p) const {
    const double fx = (p.x - origin_.x) / resolution_;
    const double fy = (p.y - origin_.y) / resolution_;
    const double fz = (p.z - origin_.z) / resolution_;
    return fx >= 0.0 && fy >= 0.0 && fz >= 0.0 && fx < nx_ && fy < ny_ && fz < nz_;
}

VoxelState OccupancyGrid::state(int ix, int iy, int iz) const {
    const float lo = logodds_[index(ix, iy, iz)];
    if (lo > 0.0f) return VoxelState::Occupied;
    if (lo < 0.0f) return VoxelState::Free;
    return VoxelState::Unknown;
}

double OccupancyGrid::logodds(int ix, int iy, int iz) const { return logodds_[index(ix, iy, iz)]; }

VoxelState OccupancyGrid::state_at(const Point3& p) const {
    if (!contains(p)) return VoxelState::Unknown;
    const int ix = static_cast<int>((p.x - origin_.x) / resolution_);
    const int iy = static_cast<int>((p.y - origin_.y) / resolution_);
    const int iz = static_cast<int>((p.z - origin_.z) / resolution_);
    return state(ix, iy, iz);
}

namespace {

// Clips parametric segment [t0, t1] of origin + t*dir to an AABB.
bool clip_segment(const Point3& o, const Point3& d, const Point3& lo, const Point3& hi,
                  double& t0, double& t1) {
    const double od[3] = {o.x, o.y, o.z};
    const double dd[3] = {d.x, d.y, d.z};
    const double lod[3] = {lo.x, lo.y, lo.z};
    const double hid[3] = {hi.x, hi.y, hi.z};
    for (int a = 0; a < 3; ++a) {
        if (dd[a] == 0.0) {
            if (od[a] < lod[a] || od[a] >= hid[a]) return false;
            continue;
        }
        double ta = (lod[a] - od[a]) / dd[a];
        double tb = (hid[a] - od[a]) / dd[a];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 > t1) return false;
    }
    return true;
}

struct Dda {
    int ix, iy, iz;
    int step[3];
    double tmax[3];
    double tdelta[3];
    double t_end;
};

// Amanatides-Woo traversal setup over [t0, t1] of origin + t*dir.
bool dda_init(const Point3& origin, const Point3& dir, const Point3& grid_origin, double res,
              int nx, int ny, int nz, double t0, double t1, Dda& dda) {
    const double eps = 1e-12;
    const Point3 lo = grid_origin;
    const Point3 hi{grid_origin.x + nx * res, grid_origin.y + ny * res, grid_origin.z + nz * res};
    if (!clip_segment(origin, dir, lo, hi, t0, t1)) return false;
    if (t0 > t1) return false;
    const double start = t0 + eps;
    const double px = origin.x + start * dir.x;
    const double py = origin.y + start * dir.y;
    const double pz = origin.z + start * dir.z;
    dda.ix = std::clamp(static_cast<int>((px - lo.x) / res), 0, nx - 1);
    dda.iy = std::clamp(static_cast<int>((py - lo.y) / res), 0, ny - 1);
    dda.iz = std::clamp(static_cast<int>((pz - lo.z) / res), 0, nz - 1);
    const double dcomp[3] = {dir.x, dir.y, dir.z};
    const double pcomp[3] = {px, py, pz};
    const double locomp[3] = {lo.x, lo.y, lo.z};
    int* cells[3] = {&dda.ix, &dda.iy, &dda.iz};
    for (int a = 0; a < 3; ++a) {
        if (dcomp[a] > 0.0) {
            dda.step[a] = 1;
            dda.tdelta[a] = res / dcomp[a];
            const double next = locomp[a] + (*cells[a] + 1) * res;
            dda.tmax[a] = start + (next - pcomp[a]) / dcomp[a];
        } else if (dcomp[a] < 0.0) {
            dda.step[a] = -1;
            dda.tdelta[a] = -res / dcomp[a];
            const double next = locomp[a] + *cells[a] * res;
            dda.tmax[a] = start + (next - pcomp[a]) / dcomp[a];
        } else {
            dda.step[a] = 0;
            dda.tdelta[a] = kInf;
            dda.tmax[a] = kInf;
        }
    }
    dda.t_end = t1;
    return true;
}

// Advances to the next voxel; false once the segment is exhausted.
bool dda_step(Dda& dda, int nx, int ny, int nz) {
    int a = 0;
    if (dda.tmax[1] < dda.tmax[a]) a = 1;
    if (dda.tmax[2] < dda.tmax[a]) a = 2;
    if (dda.tmax[a] > dda.t_end) return false;
    dda.tmax[a] += dda.tdelta[a];
    int* cells[3] = {&dda.ix, &dda.iy, &dda.iz};
    *cells[a] += dda.step[a];
    return dda.ix >= 0 && dda.iy >= 0 && dda.iz >= 0 && dda.ix < nx && dda.iy < ny && dda.iz < nz;
}

}  // namespace

void OccupancyGrid::integrate(const PointCloud& cloud, const Point3& sensor_origin) {
    const float hit = static_cast<float>(params_.hit_update);
    const float miss = static_cast<float>(params_.miss_update);
    const float clamp = static_cast<float>(params_.clamp);
    const bool origin_inside = contains(sensor_origin);
    int org_ix = -1, org_iy = -1, org_iz = -1;
    if (origin_inside) {
        org_ix = std::clamp(static_cast<int>((sensor_origin.x - origin_.x) / resolution_), 0,
                            nx_ - 1);
        org_iy = std::clamp(static_cast<int>((sensor_origin.y - origin_.y) / resolution_), 0,
                            ny_ - 1);
        org_iz = std::clamp(static_cast<int>((sensor_origin.z - origin_.z) / resolution_), 0,
                            nz_ - 1);
    }
    for (const auto& p : cloud.points) {
        const Point3 dir{p.x - sensor_origin.x, p.y - sensor_origin.y, p.z - sensor_origin.z};
        const double len = std::sqrt(dir.x * dir.x + dir.y * dir.y + dir.z * dir.z);
        if (len == 0.0) continue;
        const bool endpoint_inside = contains(p);
        int end_ix = -1, end_iy = -1, end_iz = -1;
        if (endpoint_inside) {
            end_ix = std::clamp(static_cast<int>((p.x - origin_.x) / resolution_), 0, nx_ - 1);
            end_iy = std::clamp(static_cast<int>((p.y - origin_.y) / resolution_), 0, ny_ - 1);
            end_iz = std::clamp(static_cast<int>((p.z - origin_.z) / resolution_), 0, nz_ - 1);
        }
        // Free-space pass over the open segment. The sensor-origin voxel is
        // the camera itself and the endpoint voxel is the measured surface,
        // so neither receives a miss update.
        Dda dda;
        if (dda_init(sensor_origin, dir, origin_, resolution_, nx_, ny_, nz_, 0.0, 1.0, dda)) {
            while (true) {
                const bool at_end = endpoint_inside && dda.ix == end_ix && dda.iy == end_iy &&
                                    dda.iz == end_iz;
                if (at_end) break;
                const bool at_origin = origin_inside && dda.ix == org_ix && dda.iy == org_iy &&
                                       dda.iz == org_iz;
                if (!at_origin) {
                    float& lo = logodds_[index(dda.ix, dda.iy, dda.iz)];
                    lo = std::max(-clamp, lo + miss);
                }
                if (!dda_step(dda, nx_, ny_, nz_)) break;
            }
        }
        if (endpoint_inside) {
            float& lo = logodds_[index(end_ix, end_iy, end_iz)];
            lo = std::min(clamp, lo + hit);
        }
    }
}

OccupancyGrid::Stats OccupancyGrid::stats() const {
    Stats s;
    for (float lo : logodds_) {
        if (lo > 0.0f) {
            ++s.occupied;
        } else if (lo < 0.0f) {
            ++s.free;
        } else {
            ++s.unknown;
        }
    }
    return s;
}

void OccupancyGrid::dump(const std::string& path) const {
    nlohmann::json header;
    header["origin"] = {origin_.x, origin_.y, origin_.z};
    header["resolution"] = resolution_;
    header["dims"] = {nx_, ny_, nz_};
    header["dtype"] = "float32_le";
    const std::string htext = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("OccupancyGrid::dump: cannot open " + path);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.write(reinterpret_cast<const char*>(logodds_.data()),
              static_cast<std::streamsize>(logodds_.size() * sizeof(float)));
    if (!out) throw std::runtime_error("OccupancyGrid::dump: write failed for " + path);
}

namespace {

// Shared by the parallel and serial ray-cast entry points.
void raycast_counts(const Point3& origin, const Point3& dir, double max_range,
                    const std::vector<float>& logodds, const Point3& grid_origin, double res,
                    int nx, int ny, int nz, std::size_t& traversed, std::size_t& unknown) {
    Dda dda;
    if (!dda_init(origin, dir, grid_origin, res, nx, ny, nz, 0.0, max_range, dda)) return;
    while (true) {
        const std::size_t idx = (static_cast<std::size_t>(dda.ix) * ny + dda.iy) * nz + dda.iz;
        const float lo = logodds[idx];
        ++traversed;
        if (lo == 0.0f) ++unknown;
        if (lo > 0.0f) break;  // ray terminates at the first occupied voxel
        if (!dda_step(dda, nx, ny, nz)) break;
    }
}

std::vector<Point3> pixel_dirs(const Viewpoint& view, const CameraIntrinsics& intr) {
    double r[9];
    viewpoint_rotation(view, r);
    std::vector<Point3> dirs;
    dirs.reserve(static_cast<std::size_t>(intr.width) * intr.height);
    const double half_h = std::tan(0.5 * intr.h_fov * std::numbers::pi / 180.0);
    const double half_v = std::tan(0.5 * intr.v_fov * std::numbers::pi / 180.0);
    for (int row = 0; row < intr.height; ++row) {
        const double fv = intr.height == 1 ? 0.0 : (row + 0.5) / intr.height * 2.0 - 1.0;
        for (int col = 0; col < intr.width; ++col) {
            const double fh = intr.width == 1 ? 0.0 : (col + 0.5) / intr.width * 2.0 - 1.0;
            const double cx = 1.0, cy = -fh * half_h, cz = -fv * half_v;
            const double norm = std::sqrt(cx * cx + cy * cy + cz * cz);
            const double dx = cx / norm, dy = cy / norm, dz = cz / norm;
            dirs.push_back({r[0] * dx + r[1] * dy + r[2] * dz, r[3] * dx + r[4] * dy + r[5] * dz,
                            r[6] * dx + r[7] * dy + r[8] * dz});
        }
    }
    return dirs;
}

double raycast_ig_impl(const Viewpoint& view, const CameraIntrinsics& intr, bool parallel,
                       const std::vector<float>& logodds, const Point3& grid_origin, double res,
                       int nx, int ny, int nz) {
    if (!intr.valid()) throw std::invalid_argument("raycast_ig: invalid intrinsics");
    const std::vector<Point3> dirs = pixel_dirs(view, intr);
    const std::int64_t n = static_cast<std::int64_t>(dirs.size());
    std::size_t traversed = 0, unknown = 0;
    if (parallel) {
#pragma omp parallel for schedule(static) reduction(+ : traversed, unknown)
        for (std::int64_t i = 0; i < n; ++i) {
            raycast_counts(view.position, dirs[i], intr.max_range, logodds, grid_origin, res, nx,
                           ny, nz, traversed, unknown);
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i) {
            raycast_counts(view.position, dirs[i], intr.max_range, logodds, grid_origin, res, nx,
                           ny, nz, traversed, unknown);
        }
    }
    return traversed == 0 ? 0.0 : static_cast<double>(unknown) / static_cast<double>(traversed);
}

}  // namespace

double raycast_ig(const OccupancyGrid& grid, const Viewpoint& view, const CameraIntrinsics& intr) {
    return raycast_ig_impl(view, intr, true, grid.logodds_, grid.origin_, grid.resolution_,
                           grid.nx_, grid.ny_, grid.nz_);
}

double raycast_ig_serial(const OccupancyGrid& grid, const Viewpoint& view,
                         const CameraIntrinsics& intr) {
    return raycast_ig_impl(view, intr, false, grid.logodds_, grid.origin_, grid.resolution_,
                           grid.nx_, grid.ny_, grid.nz_);
}

std::size_t best_view_voxel(const OccupancyGrid& grid, const CandidateSet& candidates,
                            const ViewSelectionState& state, const CameraIntrinsics& intr) {
    if (state.size() != candidates.size()) {
        throw std::invalid_argument("best_view_voxel: state/candidate size mismatch");
    }
    std::size_t best = candidates.size();
    double best_ig = -1.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (state.visited(i)) continue;
        const double ig = raycast_ig(grid, candidates.views[i], intr);
        if (ig > best_ig) {
            best_ig = ig;
            best = i;
        }
    }
    if (best == candidates.size()) throw std::runtime_error("best_view_voxel: all views visited");
    return best;
}

}  // namespace sslnbv
