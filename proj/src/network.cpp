#include "sslnbv/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "sslnbv/rng.hpp"

namespace sslnbv {

NetworkConfig NetworkConfig::toy(int n_points, int m_views) {
    NetworkConfig cfg;
    cfg.n_points = n_points;
    cfg.m_views = m_views;
    cfg.point_mlp = {3, 8, 8, 12};
    cfg.attn_dim = 4;
    cfg.mlp1 = {16, 16};
    cfg.head_hidden = {16, 8};
    return cfg;
}

// Tensor slot order (fixed; checkpoints and gradients share it):
//   point-MLP W/b pairs, Wq, Wk, Wv, Wo, gamma, MLP1 W/b pairs, head W/b pairs.
void IGNetwork::build_layout() {
    offsets_.clear();
    dims_.clear();
    std::size_t off = 0;
    auto add = [&](int r, int c) {
        offsets_.push_back(off);
        dims_.emplace_back(r, c);
        off += static_cast<std::size_t>(r) * c;
    };
    for (std::size_t l = 0; l + 1 < config_.point_mlp.size(); ++l) {
        add(config_.point_mlp[l], config_.point_mlp[l + 1]);
        add(1, config_.point_mlp[l + 1]);
    }
    const int f1 = config_.f1_width();
    const int d = config_.attn_dim;
    add(f1, d);  // Wq
    add(f1, d);  // Wk
    add(f1, d);  // Wv
    add(d, f1);  // Wo
    add(1, 1);   // gamma
    int in = f1;
    for (int w : config_.mlp1) {
        add(in, w);
        add(1, w);
        in = w;
    }
    std::vector<int> head = config_.head_hidden;
    head.push_back(config_.m_views);
    for (int w : head) {
        add(in, w);
        add(1, w);
        in = w;
    }
    theta_.assign(off, 0.0);
    adam_m_.assign(off, 0.0);
    adam_v_.assign(off, 0.0);
}

IGNetwork::IGNetwork(const NetworkConfig& config) : config_(config) { build_layout(); }

IGNetwork::IGNetwork(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
    if (config.n_points < 1 || config.m_views < 1 || config.point_mlp.size() < 2 ||
        config.point_mlp.front() != 3 || config.attn_dim < 1 || config.mlp1.empty()) {
        throw std::invalid_argument("IGNetwork: invalid configuration");
    }
    build_layout();
    Rng rng(substream(seed, 0x4e70));
    // He init for ReLU layers, Xavier for attention projections, gamma = 0.
    std::size_t slot = 0;
    auto fill = [&](double stddev) {
        const auto [r, c] = dims_[slot];
        double* w = theta_.data() + offsets_[slot];
        for (std::size_t i = 0; i < static_cast<std::size_t>(r) * c; ++i) {
            w[i] = rng.normal(0.0, stddev);
        }
        ++slot;
    };
    auto zero_bias = [&] { ++slot; };  // theta_ starts zeroed
    for (std::size_t l = 0; l + 1 < config_.point_mlp.size(); ++l) {
        fill(std::sqrt(2.0 / config_.point_mlp[l]));
        zero_bias();
    }
    const int f1 = config_.f1_width();
    fill(std::sqrt(1.0 / f1));  // Wq
    fill(std::sqrt(1.0 / f1));  // Wk
    fill(std::sqrt(1.0 / f1));  // Wv
    fill(std::sqrt(1.0 / config_.attn_dim));  // Wo
    ++slot;                                   // gamma stays 0: attention starts as identity
    int in = f1;
    for (int w : config_.mlp1) {
        fill(std::sqrt(2.0 / in));
        zero_bias();
        in = w;
    }
    std::vector<int> head = config_.head_hidden;
    head.push_back(config_.m_views);
    for (int w : head) {
        fill(std::sqrt(2.0 / in));
        zero_bias();
        in = w;
    }
}

namespace {

void add_bias_relu(std::vector<double>& y, const double* bias, int rows, int cols, bool relu) {
    for (int i = 0; i < rows; ++i) {
        double* row = y.data() + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) {
            row[j] += bias[j];
            if (relu && row[j] < 0.0) row[j] = 0.0;
        }
    }
}

}  // namespace

void IGNetwork::self_attention(const std::vector<double>& f1, int n_points,
                               ForwardCache& cc) const {
    const int f1w = config_.f1_width();
    const int d = config_.attn_dim;
    const int p = n_points;
    if (f1.size() != static_cast<std::size_t>(p) * f1w) {
        throw std::invalid_argument("self_attention: bad F1 shape");
    }
    // slots after the point MLP: Wq, Wk, Wv, Wo, gamma
    const std::size_t base = 2 * (config_.point_mlp.size() - 1);
    const double* wq = tensor_ptr(base);
    const double* wk = tensor_ptr(base + 1);
    const double* wv = tensor_ptr(base + 2);
    const double* wo = tensor_ptr(base + 3);
    const double g = theta_[offsets_[base + 4]];

    std::vector<double>& q = cc.q;
    std::vector<double>& k = cc.k;
    std::vector<double>& v = cc.v;
    q.resize(static_cast<std::size_t>(p) * d);
    k.resize(q.size());
    v.resize(q.size());
    blas::gemm(false, false, p, d, f1w, 1.0, f1.data(), wq, 0.0, q.data());
    blas::gemm(false, false, p, d, f1w, 1.0, f1.data(), wk, 0.0, k.data());
    blas::gemm(false, false, p, d, f1w, 1.0, f1.data(), wv, 0.0, v.data());

    std::vector<double>& attn = cc.attn;
    attn.resize(static_cast<std::size_t>(p) * p);
    blas::gemm(false, true, p, p, d, 1.0 / std::sqrt(static_cast<double>(d)), q.data(), k.data(),
               0.0, attn.data());
    for (int i = 0; i < p; ++i) {
        double* row = attn.data() + static_cast<std::size_t>(i) * p;
        const double mx = *std::max_element(row, row + p);
        double sum = 0.0;
        for (int j = 0; j < p; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < p; ++j) row[j] *= inv;
    }

    std::vector<double>& attn_v = cc.attn_v;
    attn_v.resize(static_cast<std::size_t>(p) * d);
    blas::gemm(false, false, p, d, p, 1.0, attn.data(), v.data(), 0.0, attn_v.data());
    std::vector<double>& attn_out = cc.attn_out;
    attn_out.resize(static_cast<std::size_t>(p) * f1w);
    blas::gemm(false, false, p, f1w, d, 1.0, attn_v.data(), wo, 0.0, attn_out.data());

    cc.f2.resize(f1.size());
    for (std::size_t i = 0; i < f1.size(); ++i) cc.f2[i] = f1[i] + g * attn_out[i];
}

double IGNetwork::gamma() const {
    return theta_[offsets_[2 * (config_.point_mlp.size() - 1) + 4]];
}

std::vector<double> IGNetwork::forward(const std::vector<double>& points,
                                       const std::vector<double>& state,
                                       ForwardCache* cache) const {
    const int p = config_.n_points;
    const int m = config_.m_views;
    const int c = config_.point_feat();
    const int f1w = config_.f1_width();
    if (points.size() != static_cast<std::size_t>(p) * 3) {
        throw std::invalid_argument("forward: points must be n_points x 3");
    }
    if (state.size() != static_cast<std::size_t>(m)) {
        throw std::invalid_argument("forward: state must have length m_views");
    }
    for (double x : points) {
        if (!std::isfinite(x)) throw std::invalid_argument("forward: non-finite input");
    }

    // Activations land in the caller's cache or in a reused scratch, so the
    // steady state allocates nothing.
    ForwardCache& cc = cache ? *cache : scratch_;
    cc.points = points;
    cc.state = state;

    // Shared point MLP.
    cc.point_acts.resize(config_.point_mlp.size() - 1);
    const std::vector<double>* x = &points;
    std::size_t slot = 0;
    for (std::size_t l = 0; l + 1 < config_.point_mlp.size(); ++l) {
        const int in = config_.point_mlp[l];
        const int out = config_.point_mlp[l + 1];
        std::vector<double>& y = cc.point_acts[l];
        y.resize(static_cast<std::size_t>(p) * out);
        blas::gemm(false, false, p, out, in, 1.0, x->data(), tensor_ptr(slot), 0.0, y.data());
        add_bias_relu(y, tensor_ptr(slot + 1), p, out, true);
        x = &y;
        slot += 2;
    }
    const std::vector<double>& f0 = cc.point_acts.back();

    // Global feature via channel-wise max pool.
    std::vector<double> g0(c);
    cc.pool0_argmax.assign(c, 0);
    for (int j = 0; j < c; ++j) {
        double best = f0[j];
        int arg = 0;
        for (int i = 1; i < p; ++i) {
            const double val = f0[static_cast<std::size_t>(i) * c + j];
            if (val > best) {
                best = val;
                arg = i;
            }
        }
        g0[j] = best;
        cc.pool0_argmax[j] = arg;
    }

    // F1: per-point local feature, tiled global feature, tiled view state.
    cc.f1.resize(static_cast<std::size_t>(p) * f1w);
    for (int i = 0; i < p; ++i) {
        double* row = cc.f1.data() + static_cast<std::size_t>(i) * f1w;
        std::memcpy(row, f0.data() + static_cast<std::size_t>(i) * c, c * sizeof(double));
        std::memcpy(row + c, g0.data(), c * sizeof(double));
        std::memcpy(row + 2 * c, state.data(), m * sizeof(double));
    }

    self_attention(cc.f1, p, cc);

    // Shared MLP1 on attention features.
    slot = 2 * (config_.point_mlp.size() - 1) + 5;
    cc.mlp1_acts.resize(config_.mlp1.size());
    x = &cc.f2;
    int in = f1w;
    for (std::size_t l = 0; l < config_.mlp1.size(); ++l) {
        const int out = config_.mlp1[l];
        std::vector<double>& y = cc.mlp1_acts[l];
        y.resize(static_cast<std::size_t>(p) * out);
        blas::gemm(false, false, p, out, in, 1.0, x->data(), tensor_ptr(slot), 0.0, y.data());
        add_bias_relu(y, tensor_ptr(slot + 1), p, out, true);
        x = &y;
        in = out;
        slot += 2;
    }
    const std::vector<double>& m1 = cc.mlp1_acts.back();
    const int g1w = config_.mlp1.back();
    std::vector<double> g1(g1w);
    cc.pool1_argmax.assign(g1w, 0);
    for (int j = 0; j < g1w; ++j) {
        double best = m1[j];
        int arg = 0;
        for (int i = 1; i < p; ++i) {
            const double val = m1[static_cast<std::size_t>(i) * g1w + j];
            if (val > best) {
                best = val;
                arg = i;
            }
        }
        g1[j] = best;
        cc.pool1_argmax[j] = arg;
    }

    // MLP2 head; hidden ReLU, linear output.
    cc.head_acts.clear();
    std::vector<int> head = config_.head_hidden;
    head.push_back(m);
    std::vector<double> h = std::move(g1);
    in = g1w;
    for (std::size_t l = 0; l < head.size(); ++l) {
        const int out = head[l];
        std::vector<double> y(out);
        blas::gemm(false, false, 1, out, in, 1.0, h.data(), tensor_ptr(slot), 0.0, y.data());
        const bool relu = l + 1 < head.size();
        add_bias_relu(y, tensor_ptr(slot + 1), 1, out, relu);
        cc.head_acts.push_back(y);
        h = std::move(y);
        in = out;
        slot += 2;
    }
    for (double val : h) {
        if (!std::isfinite(val)) throw std::runtime_error("forward: non-finite activation");
    }
    return h;
}

void IGNetwork::backward(const ForwardCache& cache, const std::vector<double>& d_pred,
                         std::vector<double>& grad) const {
    const int p = config_.n_points;
    const int m = config_.m_views;
    const int c = config_.point_feat();
    const int f1w = config_.f1_width();
    const int d = config_.attn_dim;
    if (grad.size() != theta_.size()) throw std::invalid_argument("backward: bad grad size");
    if (d_pred.size() != static_cast<std::size_t>(m)) {
        throw std::invalid_argument("backward: bad d_pred size");
    }

    const std::size_t attn_base = 2 * (config_.point_mlp.size() - 1);
    const std::size_t mlp1_base = attn_base + 5;
    const std::size_t head_base = mlp1_base + 2 * config_.mlp1.size();

    // ---- head (reverse) ----
    std::vector<int> head = config_.head_hidden;
    head.push_back(m);
    const int g1w = config_.mlp1.back();

    // reconstruct G1 from the pooling cache
    const std::vector<double>& m1 = cache.mlp1_acts.back();
    std::vector<double> g1(g1w);
    for (int j = 0; j < g1w; ++j) {
        g1[j] = m1[static_cast<std::size_t>(cache.pool1_argmax[j]) * g1w + j];
    }

    std::vector<double> delta = d_pred;
    for (int l = static_cast<int>(head.size()) - 1; l >= 0; --l) {
        const int out = head[l];
        const int in = l == 0 ? g1w : head[l - 1];
        const double* input = l == 0 ? g1.data() : cache.head_acts[l - 1].data();
        const std::size_t w_slot = head_base + 2 * l;
        double* dw = grad.data() + offsets_[w_slot];
        double* db = grad.data() + offsets_[w_slot + 1];
        blas::gemm(true, false, in, out, 1, 1.0, input, delta.data(), 1.0, dw);
        for (int j = 0; j < out; ++j) db[j] += delta[j];
        std::vector<double> dx(in);
        blas::gemm(false, true, 1, in, out, 1.0, delta.data(), tensor_ptr(w_slot), 0.0, dx.data());
        if (l > 0) {
            const double* act = cache.head_acts[l - 1].data();
            for (int j = 0; j < in; ++j) {
                if (act[j] <= 0.0) dx[j] = 0.0;
            }
        }
        delta = std::move(dx);
    }

    // ---- max-pool over MLP1 output ----
    std::vector<double> d_m1(static_cast<std::size_t>(p) * g1w, 0.0);
    for (int j = 0; j < g1w; ++j) {
        d_m1[static_cast<std::size_t>(cache.pool1_argmax[j]) * g1w + j] = delta[j];
    }

    // ---- shared MLP1 (reverse) ----
    std::vector<double> dmat = std::move(d_m1);
    for (int l = static_cast<int>(config_.mlp1.size()) - 1; l >= 0; --l) {
        const int out = config_.mlp1[l];
        const int in = l == 0 ? f1w : config_.mlp1[l - 1];
        const double* input = l == 0 ? cache.f2.data() : cache.mlp1_acts[l - 1].data();
        // dmat currently holds d(post-ReLU); gate it by the activation
        const double* act = cache.mlp1_acts[l].data();
        for (std::size_t i = 0; i < dmat.size(); ++i) {
            if (act[i] <= 0.0) dmat[i] = 0.0;
        }
        const std::size_t w_slot = mlp1_base + 2 * l;
        double* dw = grad.data() + offsets_[w_slot];
        double* db = grad.data() + offsets_[w_slot + 1];
        blas::gemm(true, false, in, out, p, 1.0, input, dmat.data(), 1.0, dw);
        for (int i = 0; i < p; ++i) {
            const double* row = dmat.data() + static_cast<std::size_t>(i) * out;
            for (int j = 0; j < out; ++j) db[j] += row[j];
        }
        std::vector<double> dx(static_cast<std::size_t>(p) * in);
        blas::gemm(false, true, p, in, out, 1.0, dmat.data(), tensor_ptr(w_slot), 0.0, dx.data());
        dmat = std::move(dx);
    }
    std::vector<double> d_f2 = std::move(dmat);  // P x F1

    // ---- self-attention (reverse) ----
    const double* wq = tensor_ptr(attn_base);
    const double* wk = tensor_ptr(attn_base + 1);
    const double* wv = tensor_ptr(attn_base + 2);
    const double* wo = tensor_ptr(attn_base + 3);
    const double g = theta_[offsets_[attn_base + 4]];

    std::vector<double> d_f1 = d_f2;  // residual path
    double& d_gamma = grad[offsets_[attn_base + 4]];
    for (std::size_t i = 0; i < d_f2.size(); ++i) d_gamma += d_f2[i] * cache.attn_out[i];

    std::vector<double> d_out(d_f2.size());
    for (std::size_t i = 0; i < d_f2.size(); ++i) d_out[i] = g * d_f2[i];

    double* dwo = grad.data() + offsets_[attn_base + 3];
    blas::gemm(true, false, d, f1w, p, 1.0, cache.attn_v.data(), d_out.data(), 1.0, dwo);
    std::vector<double> d_attn_v(static_cast<std::size_t>(p) * d);
    blas::gemm(false, true, p, d, f1w, 1.0, d_out.data(), wo, 0.0, d_attn_v.data());

    std::vector<double> d_attn(static_cast<std::size_t>(p) * p);
    blas::gemm(false, true, p, p, d, 1.0, d_attn_v.data(), cache.v.data(), 0.0, d_attn.data());
    std::vector<double> d_v(static_cast<std::size_t>(p) * d);
    blas::gemm(true, false, p, d, p, 1.0, cache.attn.data(), d_attn_v.data(), 0.0, d_v.data());

    // softmax Jacobian per row
    std::vector<double> d_scores(static_cast<std::size_t>(p) * p);
    for (int i = 0; i < p; ++i) {
        const double* a = cache.attn.data() + static_cast<std::size_t>(i) * p;
        const double* da = d_attn.data() + static_cast<std::size_t>(i) * p;
        double dot = 0.0;
        for (int j = 0; j < p; ++j) dot += a[j] * da[j];
        double* ds = d_scores.data() + static_cast<std::size_t>(i) * p;
        for (int j = 0; j < p; ++j) ds[j] = a[j] * (da[j] - dot);
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> d_q(static_cast<std::size_t>(p) * d), d_k(d_q.size());
    blas::gemm(false, false, p, d, p, inv_sqrt_d, d_scores.data(), cache.k.data(), 0.0, d_q.data());
    blas::gemm(true, false, p, d, p, inv_sqrt_d, d_scores.data(), cache.q.data(), 0.0, d_k.data());

    double* dwq = grad.data() + offsets_[attn_base];
    double* dwk = grad.data() + offsets_[attn_base + 1];
    double* dwv = grad.data() + offsets_[attn_base + 2];
    blas::gemm(true, false, f1w, d, p, 1.0, cache.f1.data(), d_q.data(), 1.0, dwq);
    blas::gemm(true, false, f1w, d, p, 1.0, cache.f1.data(), d_k.data(), 1.0, dwk);
    blas::gemm(true, false, f1w, d, p, 1.0, cache.f1.data(), d_v.data(), 1.0, dwv);
    blas::gemm(false, true, p, f1w, d, 1.0, d_q.data(), wq, 1.0, d_f1.data());
    blas::gemm(false, true, p, f1w, d, 1.0, d_k.data(), wk, 1.0, d_f1.data());
    blas::gemm(false, true, p, f1w, d, 1.0, d_v.data(), wv, 1.0, d_f1.data());

    // ---- split F1 into local, tiled-global, tiled-state parts ----
    const std::vector<double>& f0 = cache.point_acts.back();
    std::vector<double> d_f0(static_cast<std::size_t>(p) * c, 0.0);
    std::vector<double> d_g0(c, 0.0);
    for (int i = 0; i < p; ++i) {
        const double* row = d_f1.data() + static_cast<std::size_t>(i) * f1w;
        double* drow = d_f0.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j) drow[j] += row[j];
        for (int j = 0; j < c; ++j) d_g0[j] += row[c + j];
        // gradient w.r.t. the view state is not used
    }
    for (int j = 0; j < c; ++j) {
        d_f0[static_cast<std::size_t>(cache.pool0_argmax[j]) * c + j] += d_g0[j];
    }
    (void)f0;

    // ---- shared point MLP (reverse) ----
    dmat = std::move(d_f0);
    for (int l = static_cast<int>(config_.point_mlp.size()) - 2; l >= 0; --l) {
        const int out = config_.point_mlp[l + 1];
        const int in = config_.point_mlp[l];
        const double* input = l == 0 ? cache.points.data() : cache.point_acts[l - 1].data();
        const double* act = cache.point_acts[l].data();
        for (std::size_t i = 0; i < dmat.size(); ++i) {
            if (act[i] <= 0.0) dmat[i] = 0.0;
        }
        const std::size_t w_slot = 2 * l;
        double* dw = grad.data() + offsets_[w_slot];
        double* db = grad.data() + offsets_[w_slot + 1];
        blas::gemm(true, false, in, out, p, 1.0, input, dmat.data(), 1.0, dw);
        for (int i = 0; i < p; ++i) {
            const double* row = dmat.data() + static_cast<std::size_t>(i) * out;
            for (int j = 0; j < out; ++j) db[j] += row[j];
        }
        if (l > 0) {
            std::vector<double> dx(static_cast<std::size_t>(p) * in);
            blas::gemm(false, true, p, in, out, 1.0, dmat.data(), tensor_ptr(w_slot), 0.0,
                       dx.data());
            dmat = std::move(dx);
        }
    }
}

void IGNetwork::adam_step(const std::vector<double>& grad, const AdamConfig& adam) {
    if (grad.size() != theta_.size()) throw std::invalid_argument("adam_step: bad grad size");
    ++step_;
    const double b1t = 1.0 - std::pow(adam.beta1, static_cast<double>(step_));
    const double b2t = 1.0 - std::pow(adam.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < theta_.size(); ++i) {
        adam_m_[i] = adam.beta1 * adam_m_[i] + (1.0 - adam.beta1) * grad[i];
        adam_v_[i] = adam.beta2 * adam_v_[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
        const double mhat = adam_m_[i] / b1t;
        const double vhat = adam_v_[i] / b2t;
        theta_[i] -= adam.lr * mhat / (std::sqrt(vhat) + adam.eps);
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON header, then theta / adam_m / adam_v as raw f64 LE.

namespace {
constexpr char kCheckpointMagic[] = "SSLNBV-CKPT-1\n";
}

void IGNetwork::save_checkpoint(const std::string& path) const {
    nlohmann::json header;
    header["n_points"] = config_.n_points;
    header["m_views"] = config_.m_views;
    header["point_mlp"] = config_.point_mlp;
    header["attn_dim"] = config_.attn_dim;
    header["mlp1"] = config_.mlp1;
    header["head_hidden"] = config_.head_hidden;
    header["step"] = step_;
    header["param_count"] = theta_.size();
    const std::string htext = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
    const std::uint64_t hlen = htext.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto* vec : {&theta_, &adam_m_, &adam_v_}) {
        out.write(reinterpret_cast<const char*>(vec->data()),
                  static_cast<std::streamsize>(vec->size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

IGNetwork IGNetwork::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[sizeof(kCheckpointMagic) - 1];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    }
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string htext(hlen, '\0');
    in.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("load_checkpoint: truncated header");
    const nlohmann::json header = nlohmann::json::parse(htext);
    NetworkConfig cfg;
    cfg.n_points = header.at("n_points").get<int>();
    cfg.m_views = header.at("m_views").get<int>();
    cfg.point_mlp = header.at("point_mlp").get<std::vector<int>>();
    cfg.attn_dim = header.at("attn_dim").get<int>();
    cfg.mlp1 = header.at("mlp1").get<std::vector<int>>();
    cfg.head_hidden = header.at("head_hidden").get<std::vector<int>>();
    IGNetwork net(cfg);
    net.step_ = header.at("step").get<std::int64_t>();
    if (net.theta_.size() != header.at("param_count").get<std::size_t>()) {
        throw std::runtime_error("load_checkpoint: parameter count mismatch");
    }
    for (auto* vec : {&net.theta_, &net.adam_m_, &net.adam_v_}) {
        in.read(reinterpret_cast<char*>(vec->data()),
                static_cast<std::streamsize>(vec->size() * sizeof(double)));
    }
    if (!in) throw std::runtime_error("load_checkpoint: truncated payload");
    return net;
}

// ---------------------------------------------------------------------------
// Losses

double loss_strong(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::invalid_argument("loss_strong: length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = target[i] - pred[i];
        loss += e * e;
    }
    return loss;
}

double loss_weak(const std::vector<double>& pred, const TargetVector& target) {
    if (pred.size() != target.values.size() || pred.size() != target.mask.size()) {
        throw std::invalid_argument("loss_weak: length mismatch");
    }
    if (target.mask_count() == 0) throw std::invalid_argument("loss_weak: empty mask");
    double loss = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!target.mask[i]) continue;
        const double e = target.values[i] - pred[i];
        loss += e * e;
    }
    return loss;
}

std::vector<double> loss_strong_grad(const std::vector<double>& pred,
                                     const std::vector<double>& target, double scale) {
    if (pred.size() != target.size()) throw std::invalid_argument("loss_strong: length mismatch");
    std::vector<double> grad(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        grad[i] = 2.0 * (pred[i] - target[i]) * scale;
    }
    return grad;
}

std::vector<double> loss_weak_grad(const std::vector<double>& pred, const TargetVector& target,
                                   double scale) {
    if (pred.size() != target.values.size() || pred.size() != target.mask.size()) {
        throw std::invalid_argument("loss_weak: length mismatch");
    }
    if (target.mask_count() == 0) throw std::invalid_argument("loss_weak: empty mask");
    std::vector<double> grad(pred.size(), 0.0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (target.mask[i]) grad[i] = 2.0 * (pred[i] - target.values[i]) * scale;
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Input preparation

Tensor resize_cloud(const PointCloud& cloud, int n, std::uint64_t seed, const Point3& rig_center,
                    double rig_radius) {
    if (cloud.empty()) throw std::invalid_argument("resize_cloud: empty cloud");
    if (n < 1) throw std::invalid_argument("resize_cloud: n must be >= 1");
    if (!(rig_radius > 0.0)) throw std::invalid_argument("resize_cloud: rig_radius must be > 0");
    Rng rng(substream(seed, 0x4e51));
    const std::size_t k = cloud.size();
    std::vector<std::size_t> picks;
    picks.reserve(static_cast<std::size_t>(n));
    if (k >= static_cast<std::size_t>(n)) {
        // partial Fisher-Yates: n distinct indices, uniform without replacement
        std::vector<std::size_t> idx(k);
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < n; ++i) {
            const std::size_t j = i + rng.uniform_index(k - i);
            std::swap(idx[i], idx[j]);
            picks.push_back(idx[i]);
        }
    } else {
        for (std::size_t i = 0; i < k; ++i) picks.push_back(i);
        while (picks.size() < static_cast<std::size_t>(n)) {
            picks.push_back(rng.uniform_index(k));
        }
    }
    Tensor out(n, 3);
    const double inv_r = 1.0 / rig_radius;
    for (int i = 0; i < n; ++i) {
        const Point3& p = cloud.points[picks[i]];
        out.at(i, 0) = (p.x - rig_center.x) * inv_r;
        out.at(i, 1) = (p.y - rig_center.y) * inv_r;
        out.at(i, 2) = (p.z - rig_center.z) * inv_r;
    }
    return out;
}

}  // namespace sslnbv
