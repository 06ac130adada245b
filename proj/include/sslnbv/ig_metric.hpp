#ifndef SSLNBV_IG_METRIC_HPP
#define SSLNBV_IG_METRIC_HPP

#include <optional>
#include <vector>

#include "sslnbv/point_cloud.hpp"

namespace sslnbv {

// Ground-truth information gain of a capture: the fraction of its points that
// are farther than delta from everything in the accumulated cloud,
// g = |P^n| / |P^c|. Empty captures are an error, not gain 0 — a failed
// capture carries no label and the caller decides policy.
double ground_truth_ig(const PointCloud& accumulated, const PointCloud& captured, double delta);
double ground_truth_ig(const NNIndex& accumulated, const PointCloud& captured, double delta);

// Accumulated union: accumulated plus the novel subset of captured.
PointCloud merge_accumulated(const PointCloud& accumulated, const PointCloud& captured,
                             double delta);

// Fraction of ground-truth points within delta of the accumulated cloud.
double reconstruction_ratio(const PointCloud& ground_truth, const PointCloud& accumulated,
                            double delta);
double reconstruction_ratio(const PointCloud& ground_truth, const NNIndex& accumulated_index,
                            double delta);

// 1-based count of views until the ratio first reaches tau; nullopt if never.
std::optional<std::size_t> views_to_threshold(const std::vector<double>& ratios, double tau);

// Sparse (weak) or dense (strong) training target G_t.
struct TargetVector {
    std::vector<double> values;
    std::vector<std::uint8_t> mask;

    std::size_t size() const { return values.size(); }
    std::size_t mask_count() const;
};

TargetVector weak_target(std::size_t m, std::size_t view_index, double gain);

}  // namespace sslnbv

#endif
