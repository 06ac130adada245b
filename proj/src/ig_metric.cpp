#include "sslnbv/ig_metric.hpp"

#include <stdexcept>

namespace sslnbv {

double ground_truth_ig(const NNIndex& accumulated, const PointCloud& captured, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("ground_truth_ig: delta must be > 0");
    if (captured.empty()) throw std::invalid_argument("ground_truth_ig: empty capture");
    const auto mask = intersection_mask(captured, accumulated, delta);
    std::size_t novel = 0;
    for (auto m : mask) novel += (m == 0);
    return static_cast<double>(novel) / static_cast<double>(captured.size());
}

double ground_truth_ig(const PointCloud& accumulated, const PointCloud& captured, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("ground_truth_ig: delta must be > 0");
    return ground_truth_ig(NNIndex(accumulated), captured, delta);
}

PointCloud merge_accumulated(const PointCloud& accumulated, const PointCloud& captured,
                             double delta) {
    PointCloud merged = accumulated;
    const PointCloud novel = set_difference(captured, accumulated, delta);
    merged.points.insert(merged.points.end(), novel.points.begin(), novel.points.end());
    return merged;
}

double reconstruction_ratio(const PointCloud& ground_truth, const NNIndex& accumulated_index,
                            double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("reconstruction_ratio: delta must be > 0");
    if (ground_truth.empty()) {
        throw std::invalid_argument("reconstruction_ratio: empty ground truth");
    }
    const auto mask = intersection_mask(ground_truth, accumulated_index, delta);
    std::size_t covered = 0;
    for (auto m : mask) covered += m;
    return static_cast<double>(covered) / static_cast<double>(ground_truth.size());
}

double reconstruction_ratio(const PointCloud& ground_truth, const PointCloud& accumulated,
                            double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("reconstruction_ratio: delta must be > 0");
    if (ground_truth.empty()) {
        throw std::invalid_argument("reconstruction_ratio: empty ground truth");
    }
    return reconstruction_ratio(ground_truth, NNIndex(accumulated), delta);
}

std::optional<std::size_t> views_to_threshold(const std::vector<double>& ratios, double tau) {
    if (!(tau > 0.0) || tau > 1.0) throw std::invalid_argument("views_to_threshold: tau in (0,1]");
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (ratios[i] >= tau) return i + 1;
    }
    return std::nullopt;
}

std::size_t TargetVector::mask_count() const {
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return n;
}

TargetVector weak_target(std::size_t m, std::size_t view_index, double gain) {
    if (view_index >= m) throw std::out_of_range("weak_target: view index out of range");
    TargetVector t;
    t.values.assign(m, 0.0);
    t.mask.assign(m, 0);
    t.values[view_index] = gain;
    t.mask[view_index] = 1;
    return t;
}

}  // namespace sslnbv
