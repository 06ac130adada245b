#ifndef SSLNBV_NETWORK_HPP
#define SSLNBV_NETWORK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sslnbv/ig_metric.hpp"
#include "sslnbv/point_cloud.hpp"
#include "sslnbv/tensor.hpp"

namespace sslnbv {

// IG-prediction network: shared per-point MLP -> max-pool global feature ->
// concat with tiled global feature and view state -> single-head
// self-attention with residual scalar gate -> shared MLP1 -> max-pool ->
// MLP2 head emitting one IG estimate per candidate view.
struct NetworkConfig {
    int n_points = 512;
    int m_views = 33;
    std::vector<int> point_mlp = {3, 64, 128, 264};
    int attn_dim = 64;
    std::vector<int> mlp1 = {1024, 1024};
    std::vector<int> head_hidden = {1024, 512, 256};

    int point_feat() const { return point_mlp.back(); }
    int f1_width() const { return 2 * point_feat() + m_views; }

    // Small configuration for gradient checking and fast unit tests.
    static NetworkConfig toy(int n_points = 16, int m_views = 5);
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Intermediate activations retained for the backward pass.
struct ForwardCache {
    std::vector<double> points;  // P x 3
    std::vector<double> state;   // M
    std::vector<std::vector<double>> point_acts;  // post-ReLU per point-MLP layer
    std::vector<int> pool0_argmax;                // per channel of F0
    std::vector<double> f1;                       // P x F1
    std::vector<double> q, k, v;                  // P x d
    std::vector<double> attn;                     // P x P, softmax rows
    std::vector<double> attn_v;                   // P x d
    std::vector<double> attn_out;                 // P x F1 (pre-gamma)
    std::vector<double> f2;                       // P x F1
    std::vector<std::vector<double>> mlp1_acts;   // post-ReLU per MLP1 layer
    std::vector<int> pool1_argmax;                // per channel of G1
    std::vector<std::vector<double>> head_acts;   // post-activation per head layer
};

class IGNetwork {
public:
    IGNetwork(const NetworkConfig& config, std::uint64_t seed);

    const NetworkConfig& config() const { return config_; }
    std::size_t parameter_count() const { return theta_.size(); }
    std::vector<double>& parameters() { return theta_; }
    const std::vector<double>& parameters() const { return theta_; }
    std::int64_t step() const { return step_; }

    // Prediction for one sample; points is P x 3 row-major, state length M.
    // Pass a cache to retain activations for backward().
    std::vector<double> forward(const std::vector<double>& points,
                                const std::vector<double>& state,
                                ForwardCache* cache = nullptr) const;

    // Accumulates d(loss)/d(theta) into grad (size parameter_count()) given
    // d(loss)/d(prediction) for the sample cached in `cache`.
    void backward(const ForwardCache& cache, const std::vector<double>& d_pred,
                  std::vector<double>& grad) const;

    void adam_step(const std::vector<double>& grad, const AdamConfig& adam);

    void save_checkpoint(const std::string& path) const;
    static IGNetwork load_checkpoint(const std::string& path);

    double gamma() const;

private:
    explicit IGNetwork(const NetworkConfig& config);
    void build_layout();
    // Single-head self-attention over the F1 features; fills cc.q..cc.f2.
    void self_attention(const std::vector<double>& f1, int n_points, ForwardCache& cc) const;
    const double* tensor_ptr(std::size_t slot) const { return theta_.data() + offsets_[slot]; }

    NetworkConfig config_;
    std::vector<double> theta_;
    std::vector<double> adam_m_, adam_v_;
    std::int64_t step_ = 0;
    std::vector<std::size_t> offsets_;  // one slot per named tensor, fixed order
    std::vector<std::pair<int, int>> dims_;
    mutable ForwardCache scratch_;  // reused when the caller passes no cache
};

// Eq. 3: summed squared error over all components.
double loss_strong(const std::vector<double>& pred, const std::vector<double>& target);
// Eqs. 4-5: squared error restricted to masked components.
double loss_weak(const std::vector<double>& pred, const TargetVector& target);

// d(loss)/d(pred) for the two losses, scaled by `scale` (batch averaging).
std::vector<double> loss_strong_grad(const std::vector<double>& pred,
                                     const std::vector<double>& target, double scale = 1.0);
std::vector<double> loss_weak_grad(const std::vector<double>& pred, const TargetVector& target,
                                   double scale = 1.0);

// Network input preparation: sample/pad the cloud to exactly n points
// (without replacement when the cloud is larger, with replacement padding when
// smaller), then normalize by the rig frame: (p - center) / radius.
Tensor resize_cloud(const PointCloud& cloud, int n, std::uint64_t seed, const Point3& rig_center,
                    double rig_radius);

}  // namespace sslnbv

#endif
