#include "sslnbv/scene.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "sslnbv/rng.hpp"

namespace sslnbv {

double triangle_area(const Point3& a, const Point3& b, const Point3& c) {
    const double ux = b.x - a.x, uy = b.y - a.y, uz = b.z - a.z;
    const double vx = c.x - a.x, vy = c.y - a.y, vz = c.z - a.z;
    const double cx = uy * vz - uz * vy;
    const double cy = uz * vx - ux * vz;
    const double cz = ux * vy - uy * vx;
    return 0.5 * std::sqrt(cx * cx + cy * cy + cz * cz);
}

double TriangleMesh::surface_area() const {
    double total = 0.0;
    for (const auto& f : faces) {
        total += triangle_area(vertices[f[0]], vertices[f[1]], vertices[f[2]]);
    }
    return total;
}

// ---------------------------------------------------------------------------
// OBJ I/O (v / f records only)

void write_obj(const TriangleMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_obj: cannot open " + path);
    char buf[128];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
        out << buf;
    }
    for (const auto& f : mesh.faces) {
        out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
    }
    if (!out) throw std::runtime_error("write_obj: write failed for " + path);
}

TriangleMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_obj: cannot open " + path);
    TriangleMesh mesh;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "v") {
            Point3 p;
            if (!(ls >> p.x >> p.y >> p.z)) throw std::runtime_error("read_obj: bad vertex line");
            mesh.vertices.push_back(p);
        } else if (tok == "f") {
            std::array<std::uint32_t, 3> f{};
            for (int i = 0; i < 3; ++i) {
                std::string idx;
                if (!(ls >> idx)) throw std::runtime_error("read_obj: bad face line");
                // tolerate v/vt/vn syntax; only the vertex index is used
                f[i] = static_cast<std::uint32_t>(std::stoul(idx.substr(0, idx.find('/')))) - 1;
            }
            mesh.faces.push_back(f);
        }
    }
    return mesh;
}

// ---------------------------------------------------------------------------
// Procedural plant generation

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void append_leaf(TriangleMesh& mesh, double attach_z, double azimuth_deg, double pitch_deg,
                 double stem_radius, double leaf_size) {
    const double az = azimuth_deg * kDegToRad;
    const double pitch = pitch_deg * kDegToRad;
    // Outward direction of the blade's major axis, tilted by pitch.
    const Point3 u{std::cos(az) * std::cos(pitch), std::sin(az) * std::cos(pitch),
                   std::sin(pitch)};
    // Horizontal minor axis.
    const Point3 v{-std::sin(az), std::cos(az), 0.0};
    const double a = leaf_size;        // major half-axis
    const double b = 0.5 * leaf_size;  // minor half-axis
    const Point3 center{u.x * (stem_radius + a), u.y * (stem_radius + a),
                        attach_z + u.z * (stem_radius + a)};
    const int rim = 10;
    const std::uint32_t c_idx = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(center);
    for (int i = 0; i < rim; ++i) {
        const double t = 2.0 * std::numbers::pi * i / rim;
        mesh.vertices.push_back({center.x + a * std::cos(t) * u.x + b * std::sin(t) * v.x,
                                 center.y + a * std::cos(t) * u.y + b * std::sin(t) * v.y,
                                 center.z + a * std::cos(t) * u.z + b * std::sin(t) * v.z});
    }
    for (int i = 0; i < rim; ++i) {
        mesh.faces.push_back({c_idx, c_idx + 1 + static_cast<std::uint32_t>(i),
                              c_idx + 1 + static_cast<std::uint32_t>((i + 1) % rim)});
    }
}

}  // namespace

PlantModel generate_plant(std::uint64_t seed, const PlantParams& params) {
    if (params.n_leaves < 1) throw std::invalid_argument("generate_plant: n_leaves must be >= 1");
    if (!(params.height > 0.0)) throw std::invalid_argument("generate_plant: height must be > 0");
    if (!(params.leaf_size > 0.0)) {
        throw std::invalid_argument("generate_plant: leaf_size must be > 0");
    }

    Rng rng(substream(seed, 0x91a47));
    PlantModel plant;
    plant.seed = seed;
    plant.params = params;
    TriangleMesh& mesh = plant.mesh;

    // Tapered stem.
    const double r_base = std::max(0.012, 0.035 * params.height);
    const double r_top = 0.35 * r_base;
    const int around = 8;
    const int rings = 5;
    for (int j = 0; j <= rings; ++j) {
        const double frac = static_cast<double>(j) / rings;
        const double z = frac * params.height;
        const double r = r_base + (r_top - r_base) * frac;
        for (int i = 0; i < around; ++i) {
            const double t = 2.0 * std::numbers::pi * i / around;
            mesh.vertices.push_back({r * std::cos(t), r * std::sin(t), z});
        }
    }
    for (int j = 0; j < rings; ++j) {
        for (int i = 0; i < around; ++i) {
            const std::uint32_t a = static_cast<std::uint32_t>(j * around + i);
            const std::uint32_t bb = static_cast<std::uint32_t>(j * around + (i + 1) % around);
            const std::uint32_t c = a + around;
            const std::uint32_t d = bb + around;
            mesh.faces.push_back({a, bb, c});
            mesh.faces.push_back({bb, d, c});
        }
    }

    // Leaf blades at distinct heights and azimuths; golden-angle spacing plus
    // jitter produces the self-occlusion that makes view planning non-trivial.
    const double leaf_cap = 0.55 * params.height;  // largest blade the plant can carry
    const double leaf = std::min(params.leaf_size, leaf_cap);
    for (int i = 0; i < params.n_leaves; ++i) {
        const double frac = params.n_leaves == 1
                                ? 0.6
                                : 0.25 + 0.65 * static_cast<double>(i) / (params.n_leaves - 1);
        const double attach_z = frac * params.height + rng.uniform(-0.01, 0.01) * params.height;
        const double azimuth = 137.507764 * i + rng.uniform(-12.0, 12.0);
        const double pitch = rng.uniform(-20.0, 15.0);
        const double r_at = r_base + (r_top - r_base) * frac;
        const double size = leaf * rng.uniform(0.75, 1.0);
        append_leaf(mesh, attach_z, azimuth, pitch, r_at, size);
    }

    plant.bbox_min = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
                      std::numeric_limits<double>::max()};
    plant.bbox_max = {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest(),
                      std::numeric_limits<double>::lowest()};
    for (const auto& v : mesh.vertices) {
        plant.bbox_min.x = std::min(plant.bbox_min.x, v.x);
        plant.bbox_min.y = std::min(plant.bbox_min.y, v.y);
        plant.bbox_min.z = std::min(plant.bbox_min.z, v.z);
        plant.bbox_max.x = std::max(plant.bbox_max.x, v.x);
        plant.bbox_max.y = std::max(plant.bbox_max.y, v.y);
        plant.bbox_max.z = std::max(plant.bbox_max.z, v.z);
    }
    return plant;
}

Scene place_plant(const PlantModel& plant, const ScenePose& pose) {
    Scene scene;
    scene.pose = pose;
    scene.plant_seed = plant.seed;
    scene.plant_params = plant.params;
    scene.mesh.faces = plant.mesh.faces;
    const double th = pose.theta * kDegToRad;
    const double c = std::cos(th), s = std::sin(th);
    scene.mesh.vertices.reserve(plant.mesh.vertices.size());
    for (const auto& v : plant.mesh.vertices) {
        scene.mesh.vertices.push_back({c * v.x - s * v.y + pose.dx, s * v.x + c * v.y + pose.dy,
                                       v.z});
    }
    return scene;
}

PointCloud sample_ground_truth(const Scene& scene, double resolution) {
    return sample_ground_truth(scene, resolution, substream(scene.plant_seed, 0x97));
}

PointCloud sample_ground_truth(const Scene& scene, double resolution, std::uint64_t seed) {
    if (!(resolution > 0.0)) {
        throw std::invalid_argument("sample_ground_truth: resolution must be > 0");
    }
    const TriangleMesh& mesh = scene.mesh;
    if (mesh.faces.empty()) throw std::invalid_argument("sample_ground_truth: empty mesh");

    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
        cumulative[i] = total;
    }
    if (!(total > 0.0)) throw std::invalid_argument("sample_ground_truth: degenerate mesh");

    // Oversample so that every voxel touched by the surface is virtually
    // certain to receive at least one sample before downsampling.
    const double target = total / (resolution * resolution) * 8.0;
    const std::size_t n_samples =
        static_cast<std::size_t>(std::min(target, 4.0e6)) + 16;

    Rng rng(seed);
    PointCloud raw;
    raw.points.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        const double pick = rng.uniform01() * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), pick);
        const std::size_t fi = static_cast<std::size_t>(it - cumulative.begin());
        const auto& f = mesh.faces[std::min(fi, mesh.faces.size() - 1)];
        const Point3& a = mesh.vertices[f[0]];
        const Point3& b = mesh.vertices[f[1]];
        const Point3& c = mesh.vertices[f[2]];
        const double r1 = std::sqrt(rng.uniform01());
        const double r2 = rng.uniform01();
        const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
        raw.points.push_back({wa * a.x + wb * b.x + wc * c.x, wa * a.y + wb * b.y + wc * c.y,
                              wa * a.z + wb * b.z + wc * c.z});
    }
    return voxel_downsample(raw, resolution);
}

std::string scene_manifest_json(const Scene& scene) {
    nlohmann::json j;
    j["seed"] = scene.plant_seed;
    j["params"] = {{"n_leaves", scene.plant_params.n_leaves},
                   {"height", scene.plant_params.height},
                   {"leaf_size", scene.plant_params.leaf_size}};
    j["pose"] = {{"dx", scene.pose.dx}, {"dy", scene.pose.dy}, {"theta", scene.pose.theta}};
    return j.dump(2);
}

Scene scene_from_manifest_json(const std::string& json_text) {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    PlantParams params;
    params.n_leaves = j.at("params").at("n_leaves").get<int>();
    params.height = j.at("params").at("height").get<double>();
    params.leaf_size = j.at("params").at("leaf_size").get<double>();
    ScenePose pose;
    pose.dx = j.at("pose").at("dx").get<double>();
    pose.dy = j.at("pose").at("dy").get<double>();
    pose.theta = j.at("pose").at("theta").get<double>();
    return place_plant(generate_plant(j.at("seed").get<std::uint64_t>(), params), pose);
}

ScenePose random_pose(std::uint64_t seed, double range, double xy_step, double theta_step) {
    Rng rng(substream(seed, 0x905e));
    const auto n_xy = static_cast<std::uint64_t>(std::llround(2.0 * range / xy_step)) + 1;
    const auto n_theta = static_cast<std::uint64_t>(std::llround(360.0 / theta_step));
    ScenePose pose;
    pose.dx = -range + xy_step * static_cast<double>(rng.uniform_index(n_xy));
    pose.dy = -range + xy_step * static_cast<double>(rng.uniform_index(n_xy));
    pose.theta = theta_step * static_cast<double>(rng.uniform_index(n_theta));
    return pose;
}

}  // namespace sslnbv
