// Compares the OpenMP kernels against their serial reference implementations:
// correctness agreement plus wall-clock speedup on representative workloads.
#include <chrono>
#include <cstdio>
#include <vector>

#include "sslnbv/ig_metric.hpp"
#include "sslnbv/occupancy_grid.hpp"
#include "sslnbv/rng.hpp"
#include "sslnbv/scene.hpp"
#include "sslnbv/sensor.hpp"
#include "sslnbv/views.hpp"

using namespace sslnbv;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds(clock_type::time_point a, clock_type::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

PointCloud random_cloud(std::size_t n, Rng& rng) {
    PointCloud cloud;
    cloud.points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        cloud.points.push_back(
            {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.0, 0.6)});
    }
    return cloud;
}

}  // namespace

int main() {
    Rng rng(42);
    int mismatches = 0;

    // intersection mask: parallel vs serial
    {
        const PointCloud query = random_cloud(40000, rng);
        const PointCloud reference = random_cloud(40000, rng);
        const NNIndex index(reference);
        const auto t0 = clock_type::now();
        const auto serial = intersection_mask_serial(query, index, 0.003);
        const auto t1 = clock_type::now();
        const auto parallel = intersection_mask(query, index, 0.003);
        const auto t2 = clock_type::now();
        if (serial != parallel) ++mismatches;
        std::printf("intersection_mask  serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
                    seconds(t0, t1), seconds(t1, t2), seconds(t0, t1) / seconds(t1, t2),
                    serial == parallel ? "match" : "MISMATCH");
    }

    const PlantModel plant = generate_plant(7, PlantParams{});
    const Scene scene = place_plant(plant, ScenePose{});
    const CandidateSet candidates = sample_cylinder(RigParams{});
    CameraIntrinsics intr;
    intr.width = 256;
    intr.height = 192;

    // depth capture: parallel vs serial
    {
        const auto t0 = clock_type::now();
        const PointCloud serial = capture_serial(scene, candidates.views[0], intr);
        const auto t1 = clock_type::now();
        const PointCloud parallel = capture(scene, candidates.views[0], intr);
        const auto t2 = clock_type::now();
        bool match = serial.size() == parallel.size();
        for (std::size_t i = 0; match && i < serial.size(); ++i) {
            match = serial.points[i].x == parallel.points[i].x &&
                    serial.points[i].y == parallel.points[i].y &&
                    serial.points[i].z == parallel.points[i].z;
        }
        if (!match) ++mismatches;
        std::printf("capture            serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
                    seconds(t0, t1), seconds(t1, t2), seconds(t0, t1) / seconds(t1, t2),
                    match ? "match" : "MISMATCH");
    }

    // occupancy raycast IG: parallel vs serial
    {
        OccupancyGrid grid = OccupancyGrid::for_rig(candidates.rig, 0.005);
        const PointCloud captured = capture(scene, candidates.views[0], intr);
        grid.integrate(captured, candidates.views[0].position);
        const auto t0 = clock_type::now();
        double total_serial = 0.0;
        for (const Viewpoint& v : candidates.views) {
            total_serial += raycast_ig_serial(grid, v, intr);
        }
        const auto t1 = clock_type::now();
        double total_parallel = 0.0;
        for (const Viewpoint& v : candidates.views) total_parallel += raycast_ig(grid, v, intr);
        const auto t2 = clock_type::now();
        const bool match = total_serial == total_parallel;
        if (!match) ++mismatches;
        std::printf("raycast_ig         serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
                    seconds(t0, t1), seconds(t1, t2), seconds(t0, t1) / seconds(t1, t2),
                    match ? "match" : "MISMATCH");
    }

    return mismatches == 0 ? 0 : 1;
}
