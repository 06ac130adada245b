#include "sslnbv/point_cloud.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace sslnbv {

// ---------------------------------------------------------------------------
// NNIndex

NNIndex::NNIndex(const PointCloud& cloud) : points_(cloud.points) {
    for (const auto& p : points_) {
        if (!p.finite()) throw std::invalid_argument("NNIndex: non-finite point");
    }
    if (points_.empty()) return;
    std::vector<std::int32_t> order(points_.size());
    std::iota(order.begin(), order.end(), 0);
    nodes_.reserve(points_.size());
    root_ = build(order.data(), order.data() + order.size(), 0);
}

std::int32_t NNIndex::build(std::int32_t* first, std::int32_t* last, int depth) {
    if (first == last) return -1;
    const int axis = depth % 3;
    std::int32_t* mid = first + (last - first) / 2;
    std::nth_element(first, mid, last, [&](std::int32_t a, std::int32_t b) {
        const Point3& pa = points_[a];
        const Point3& pb = points_[b];
        const double ca = axis == 0 ? pa.x : (axis == 1 ? pa.y : pa.z);
        const double cb = axis == 0 ? pb.x : (axis == 1 ? pb.y : pb.z);
        return ca < cb;
    });
    Node node;
    node.point = *mid;
    node.axis = static_cast<std::int8_t>(axis);
    const Point3& p = points_[node.point];
    node.split = axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
    const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    const std::int32_t left = build(first, mid, depth + 1);
    const std::int32_t right = build(mid + 1, last, depth + 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
}

void NNIndex::search(std::int32_t node, const Point3& q, double& best) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    const double d2 = squared_distance(q, points_[n.point]);
    if (d2 < best) best = d2;
    const double qc = n.axis == 0 ? q.x : (n.axis == 1 ? q.y : q.z);
    const double diff = qc - n.split;
    const std::int32_t near = diff < 0.0 ? n.left : n.right;
    const std::int32_t far = diff < 0.0 ? n.right : n.left;
    search(near, q, best);
    if (diff * diff < best) search(far, q, best);
}

double NNIndex::nearest_squared_distance(const Point3& q) const {
    if (points_.empty()) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    search(root_, q, best);
    return best;
}

double NNIndex::nearest_distance(const Point3& q) const {
    return std::sqrt(nearest_squared_distance(q));
}

void NNIndex::knn_search(std::int32_t node, const Point3& q, std::size_t k, bool skip_self,
                         std::vector<double>& heap, bool& skipped) const {
    if (node < 0) return;
    const Node& n = nodes_[node];
    double d2 = squared_distance(q, points_[n.point]);
    if (skip_self && !skipped && d2 == 0.0) {
        skipped = true;
    } else if (heap.size() < k) {
        heap.push_back(d2);
        std::push_heap(heap.begin(), heap.end());
    } else if (d2 < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = d2;
        std::push_heap(heap.begin(), heap.end());
    }
    const double qc = n.axis == 0 ? q.x : (n.axis == 1 ? q.y : q.z);
    const double diff = qc - n.split;
    const std::int32_t near = diff < 0.0 ? n.left : n.right;
    const std::int32_t far = diff < 0.0 ? n.right : n.left;
    knn_search(near, q, k, skip_self, heap, skipped);
    if (heap.size() < k || diff * diff < heap.front()) {
        knn_search(far, q, k, skip_self, heap, skipped);
    }
}

double NNIndex::mean_knn_distance(const Point3& q, std::size_t k, bool skip_self) const {
    if (k == 0) throw std::invalid_argument("mean_knn_distance: k must be positive");
    if (k + (skip_self ? 1 : 0) > points_.size()) {
        throw std::invalid_argument("mean_knn_distance: k exceeds indexed cloud size");
    }
    std::vector<double> heap;
    heap.reserve(k);
    bool skipped = false;
    knn_search(root_, q, k, skip_self, heap, skipped);
    double sum = 0.0;
    for (double d2 : heap) sum += std::sqrt(d2);
    return sum / static_cast<double>(heap.size());
}

// ---------------------------------------------------------------------------
// Voxel downsampling

namespace {

struct VoxelKey {
    std::int64_t x, y, z;
    bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const {
        std::uint64_t h = 1469598103934665603ull;
        for (std::uint64_t v : {static_cast<std::uint64_t>(k.x), static_cast<std::uint64_t>(k.y),
                                static_cast<std::uint64_t>(k.z)}) {
            h ^= v;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }
};

std::int64_t voxel_index(double coord, double voxel_size) {
    return static_cast<std::int64_t>(std::floor(coord / voxel_size));
}

}  // namespace

PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel_downsample: voxel_size must be > 0");
    struct Accum {
        double sx = 0.0, sy = 0.0, sz = 0.0;
        std::size_t n = 0;
    };
    std::unordered_map<VoxelKey, std::size_t, VoxelKeyHash> slots;
    std::vector<Accum> accums;  // first-seen order keeps output deterministic
    slots.reserve(cloud.size());
    for (const auto& p : cloud.points) {
        if (!p.finite()) throw std::invalid_argument("voxel_downsample: non-finite point");
        const VoxelKey key{voxel_index(p.x, voxel_size), voxel_index(p.y, voxel_size),
                           voxel_index(p.z, voxel_size)};
        auto [it, inserted] = slots.try_emplace(key, accums.size());
        if (inserted) accums.push_back({});
        Accum& a = accums[it->second];
        a.sx += p.x;
        a.sy += p.y;
        a.sz += p.z;
        a.n += 1;
    }
    PointCloud out;
    out.points.reserve(accums.size());
    for (const Accum& a : accums) {
        const double inv = 1.0 / static_cast<double>(a.n);
        out.points.push_back({a.sx * inv, a.sy * inv, a.sz * inv});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Thresholded intersection / difference (Eq. 2 membership)

std::vector<std::uint8_t> intersection_mask_serial(const PointCloud& query,
                                                   const NNIndex& reference, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("intersection: delta must be > 0");
    std::vector<std::uint8_t> mask(query.size(), 0);
    if (reference.empty()) return mask;
    const double d2 = delta * delta;
    for (std::size_t i = 0; i < query.size(); ++i) {
        mask[i] = reference.nearest_squared_distance(query.points[i]) <= d2 ? 1 : 0;
    }
    return mask;
}

std::vector<std::uint8_t> intersection_mask(const PointCloud& query, const NNIndex& reference,
                                            double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("intersection: delta must be > 0");
    std::vector<std::uint8_t> mask(query.size(), 0);
    if (reference.empty()) return mask;
    const double d2 = delta * delta;
    const std::int64_t n = static_cast<std::int64_t>(query.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        mask[i] = reference.nearest_squared_distance(query.points[i]) <= d2 ? 1 : 0;
    }
    return mask;
}

namespace {

PointCloud select_by_mask(const PointCloud& query, const std::vector<std::uint8_t>& mask,
                          std::uint8_t keep) {
    PointCloud out;
    for (std::size_t i = 0; i < query.size(); ++i) {
        if (mask[i] == keep) out.points.push_back(query.points[i]);
    }
    return out;
}

}  // namespace

PointCloud threshold_intersection(const PointCloud& query, const NNIndex& reference,
                                  double delta) {
    return select_by_mask(query, intersection_mask(query, reference, delta), 1);
}

PointCloud threshold_intersection(const PointCloud& query, const PointCloud& reference,
                                  double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("intersection: delta must be > 0");
    return threshold_intersection(query, NNIndex(reference), delta);
}

PointCloud set_difference(const PointCloud& query, const NNIndex& reference, double delta) {
    return select_by_mask(query, intersection_mask(query, reference, delta), 0);
}

PointCloud set_difference(const PointCloud& query, const PointCloud& reference, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("set_difference: delta must be > 0");
    return set_difference(query, NNIndex(reference), delta);
}

// ---------------------------------------------------------------------------
// PLY I/O (vertex element with float x/y/z only)

void write_ply(const PointCloud& cloud, const std::string& path, PlyFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ply: cannot open " + path);
    out << "ply\n";
    out << (format == PlyFormat::Ascii ? "format ascii 1.0\n"
                                       : "format binary_little_endian 1.0\n");
    out << "element vertex " << cloud.size() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    out << "end_header\n";
    if (format == PlyFormat::Ascii) {
        char buf[96];
        for (const auto& p : cloud.points) {
            std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
            out << buf;
        }
    } else {
        for (const auto& p : cloud.points) {
            const float v[3] = {static_cast<float>(p.x), static_cast<float>(p.y),
                                static_cast<float>(p.z)};
            out.write(reinterpret_cast<const char*>(v), sizeof(v));
        }
    }
    if (!out) throw std::runtime_error("write_ply: write failed for " + path);
}

PointCloud read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ply: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply") {
        throw std::runtime_error("read_ply: missing ply magic in " + path);
    }
    bool binary = false;
    std::size_t count = 0;
    std::vector<std::string> props;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "binary_little_endian") {
                binary = true;
            } else if (fmt != "ascii") {
                throw std::runtime_error("read_ply: unsupported format " + fmt);
            }
        } else if (tok == "element") {
            std::string name;
            ls >> name >> count;
            if (name != "vertex") throw std::runtime_error("read_ply: unsupported element " + name);
        } else if (tok == "property") {
            std::string type, name;
            ls >> type >> name;
            props.push_back(name);
        } else if (tok == "end_header") {
            break;
        }
    }
    if (props.size() != 3 || props[0] != "x" || props[1] != "y" || props[2] != "z") {
        throw std::runtime_error("read_ply: expected exactly float x y z properties");
    }
    PointCloud cloud;
    cloud.points.reserve(count);
    if (binary) {
        for (std::size_t i = 0; i < count; ++i) {
            float v[3];
            in.read(reinterpret_cast<char*>(v), sizeof(v));
            if (!in) throw std::runtime_error("read_ply: truncated binary payload");
            cloud.points.push_back({v[0], v[1], v[2]});
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            double x, y, z;
            if (!(in >> x >> y >> z)) throw std::runtime_error("read_ply: truncated ascii payload");
            cloud.points.push_back({x, y, z});
        }
    }
    return cloud;
}

}  // namespace sslnbv
