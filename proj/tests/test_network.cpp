#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "doctest.h"
#include "sslnbv/network.hpp"
#include "sslnbv/rng.hpp"

using namespace sslnbv;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

std::vector<double> random_state(std::size_t m, Rng& rng) {
    std::vector<double> s(m, 0.0);
    for (auto& x : s) x = rng.uniform01() < 0.4 ? 1.0 : 0.0;
    return s;
}

// architecture parameter count derived layer by layer
std::size_t expected_params(const NetworkConfig& c) {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < c.point_mlp.size(); ++i)
        n += static_cast<std::size_t>(c.point_mlp[i]) * c.point_mlp[i + 1] + c.point_mlp[i + 1];
    const std::size_t f1 = static_cast<std::size_t>(c.f1_width());
    n += 3 * (f1 * c.attn_dim);           // Wq, Wk, Wv
    n += static_cast<std::size_t>(c.attn_dim) * f1;  // output projection
    n += 1;                               // residual gate gamma
    std::size_t in = f1;
    for (int w : c.mlp1) {
        n += in * w + w;
        in = static_cast<std::size_t>(w);
    }
    for (int w : c.head_hidden) {
        n += in * w + w;
        in = static_cast<std::size_t>(w);
    }
    n += in * c.m_views + c.m_views;
    return n;
}

}  // namespace

TEST_CASE("parameter count matches the architecture") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork net(toy, 1);
    CHECK(net.parameter_count() == expected_params(toy));

    NetworkConfig full;  // production sizes
    IGNetwork big(full, 1);
    CHECK(big.parameter_count() == expected_params(full));
}

TEST_CASE("initialization is seeded and the residual gate starts closed") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork a(toy, 7), b(toy, 7), c(toy, 8);
    CHECK(a.parameters() == b.parameters());
    CHECK(a.parameters() != c.parameters());
    CHECK(a.gamma() == 0.0);
    CHECK(a.step() == 0);
}

TEST_CASE("forward output has one finite prediction per candidate") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork net(toy, 3);
    Rng rng(10);
    auto pts = random_vec(static_cast<std::size_t>(toy.n_points) * 3, rng);
    auto state = random_state(static_cast<std::size_t>(toy.m_views), rng);
    auto pred = net.forward(pts, state);
    REQUIRE(pred.size() == static_cast<std::size_t>(toy.m_views));
    for (double p : pred) CHECK(std::isfinite(p));
    // deterministic
    CHECK(net.forward(pts, state) == pred);
}

TEST_CASE("prediction is invariant to point order") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork net(toy, 5);
    // open the residual gate so the attention path participates
    Rng prng(77);
    for (auto& p : net.parameters()) p += prng.uniform(-0.01, 0.01);

    Rng rng(11);
    auto pts = random_vec(static_cast<std::size_t>(toy.n_points) * 3, rng);
    auto state = random_state(static_cast<std::size_t>(toy.m_views), rng);
    auto base = net.forward(pts, state);

    std::vector<int> perm(static_cast<std::size_t>(toy.n_points));
    for (int i = 0; i < toy.n_points; ++i) perm[static_cast<std::size_t>(i)] = i;
    std::reverse(perm.begin(), perm.end());
    std::swap(perm[2], perm[9]);
    std::vector<double> shuffled(pts.size());
    for (int i = 0; i < toy.n_points; ++i)
        for (int d = 0; d < 3; ++d)
            shuffled[static_cast<std::size_t>(i) * 3 + d] =
                pts[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]) * 3 + d];
    auto permuted = net.forward(shuffled, state);
    for (std::size_t m = 0; m < base.size(); ++m)
        CHECK(permuted[m] == doctest::Approx(base[m]).epsilon(1e-9));
}

TEST_CASE("attention rows are a softmax") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork net(toy, 9);
    Rng rng(12);
    auto pts = random_vec(static_cast<std::size_t>(toy.n_points) * 3, rng);
    auto state = random_state(static_cast<std::size_t>(toy.m_views), rng);
    ForwardCache cache;
    net.forward(pts, state, &cache);
    const int n = toy.n_points;
    REQUIRE(cache.attn.size() == static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) {
            const double a = cache.attn[static_cast<std::size_t>(i) * n + j];
            CHECK(a >= 0.0);
            row += a;
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork net(toy, 21);
    Rng prng(5);
    for (auto& p : net.parameters()) p += prng.uniform(-0.05, 0.05);  // open every path

    Rng rng(6);
    auto pts = random_vec(static_cast<std::size_t>(toy.n_points) * 3, rng);
    auto state = random_state(static_cast<std::size_t>(toy.m_views), rng);
    auto target_dense = random_vec(static_cast<std::size_t>(toy.m_views), rng, 0.0, 1.0);
    TargetVector weak = weak_target(static_cast<std::size_t>(toy.m_views), 2, 0.37);

    for (int mode = 0; mode < 2; ++mode) {
        ForwardCache cache;
        auto pred = net.forward(pts, state, &cache);
        std::vector<double> grad(net.parameter_count(), 0.0);
        auto d_pred = mode == 0 ? loss_strong_grad(pred, target_dense)
                                : loss_weak_grad(pred, weak);
        net.backward(cache, d_pred, grad);

        auto loss_at = [&]() {
            auto p = net.forward(pts, state);
            return mode == 0 ? loss_strong(p, target_dense) : loss_weak(p, weak);
        };

        // probe a deterministic spread of parameters plus the scalar gate
        Rng pick(mode + 100);
        std::set<std::size_t> probes;
        while (probes.size() < 80) probes.insert(pick.uniform_index(net.parameter_count()));
        const double h = 1e-6;
        for (std::size_t idx : probes) {
            const double saved = net.parameters()[idx];
            net.parameters()[idx] = saved + h;
            const double up = loss_at();
            net.parameters()[idx] = saved - h;
            const double down = loss_at();
            net.parameters()[idx] = saved;
            const double fd = (up - down) / (2.0 * h);
            CHECK(grad[idx] == doctest::Approx(fd).epsilon(1e-4).scale(1e-5));
        }
    }
}

TEST_CASE("backward accumulates into the gradient buffer") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork net(toy, 30);
    Rng rng(31);
    auto pts = random_vec(static_cast<std::size_t>(toy.n_points) * 3, rng);
    auto state = random_state(static_cast<std::size_t>(toy.m_views), rng);
    TargetVector weak = weak_target(static_cast<std::size_t>(toy.m_views), 1, 0.5);

    ForwardCache cache;
    auto pred = net.forward(pts, state, &cache);
    auto d_pred = loss_weak_grad(pred, weak);
    std::vector<double> once(net.parameter_count(), 0.0);
    net.backward(cache, d_pred, once);
    std::vector<double> twice(net.parameter_count(), 0.0);
    net.backward(cache, d_pred, twice);
    net.backward(cache, d_pred, twice);
    for (std::size_t i = 0; i < once.size(); i += 53)
        CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
}

TEST_CASE("loss values and gradients") {
    std::vector<double> pred{0.5, 0.2, 0.9};
    std::vector<double> target{0.0, 0.2, 1.0};
    CHECK(loss_strong(pred, target) == doctest::Approx(0.25 + 0.0 + 0.01));
    auto g = loss_strong_grad(pred, target);
    CHECK(g[0] == doctest::Approx(1.0));   // 2 * (0.5 - 0.0)
    CHECK(g[1] == doctest::Approx(0.0));
    CHECK(g[2] == doctest::Approx(-0.2));

    TargetVector weak;
    weak.values = {0.0, 0.7, 0.0};
    weak.mask = {0, 1, 0};
    CHECK(loss_weak(pred, weak) == doctest::Approx(0.25));  // only component 1 counts
    auto gw = loss_weak_grad(pred, weak, 0.5);
    CHECK(gw[0] == 0.0);
    CHECK(gw[1] == doctest::Approx(0.5 * 2.0 * (0.2 - 0.7)));
    CHECK(gw[2] == 0.0);

    TargetVector empty;
    empty.values = {0.0, 0.0, 0.0};
    empty.mask = {0, 0, 0};
    CHECK_THROWS(loss_weak(pred, empty));
}

TEST_CASE("adam first step follows the bias-corrected formula") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork net(toy, 44);
    AdamConfig adam;  // lr 1e-4
    std::vector<double> grad(net.parameter_count(), 0.0);
    grad[3] = 0.8;
    grad[100] = -2.5;
    const double p3 = net.parameters()[3];
    const double p100 = net.parameters()[100];
    const double p7 = net.parameters()[7];
    net.adam_step(grad, adam);
    CHECK(net.step() == 1);
    // with a single step m-hat = g and v-hat = g^2, so the update is
    // lr * g / (|g| + eps) = lr * sign(g) up to eps
    CHECK(net.parameters()[3] ==
          doctest::Approx(p3 - 1e-4 * 0.8 / (0.8 + 1e-8)).epsilon(1e-12));
    CHECK(net.parameters()[100] ==
          doctest::Approx(p100 + 1e-4 * 2.5 / (2.5 + 1e-8)).epsilon(1e-12));
    CHECK(net.parameters()[7] == p7);  // zero gradient, zero move
}

TEST_CASE("checkpoint round trip preserves weights, step and adam state") {
    NetworkConfig toy = NetworkConfig::toy();
    IGNetwork net(toy, 55);
    Rng rng(56);
    auto pts = random_vec(static_cast<std::size_t>(toy.n_points) * 3, rng);
    auto state = random_state(static_cast<std::size_t>(toy.m_views), rng);
    TargetVector weak = weak_target(static_cast<std::size_t>(toy.m_views), 0, 0.4);
    AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};

    // a few steps so the optimizer moments are non-trivial
    for (int i = 0; i < 3; ++i) {
        ForwardCache cache;
        auto pred = net.forward(pts, state, &cache);
        std::vector<double> grad(net.parameter_count(), 0.0);
        net.backward(cache, loss_weak_grad(pred, weak), grad);
        net.adam_step(grad, adam);
    }

    const std::string path = "/tmp/sslnbv_test_ckpt.bin";
    net.save_checkpoint(path);
    IGNetwork back = IGNetwork::load_checkpoint(path);
    CHECK(back.parameters() == net.parameters());
    CHECK(back.step() == net.step());
    CHECK(back.forward(pts, state) == net.forward(pts, state));

    // identical next step proves the moment vectors survived
    ForwardCache c1, c2;
    auto p1 = net.forward(pts, state, &c1);
    auto p2 = back.forward(pts, state, &c2);
    std::vector<double> g1(net.parameter_count(), 0.0), g2(back.parameter_count(), 0.0);
    net.backward(c1, loss_weak_grad(p1, weak), g1);
    back.backward(c2, loss_weak_grad(p2, weak), g2);
    net.adam_step(g1, adam);
    back.adam_step(g2, adam);
    CHECK(back.parameters() == net.parameters());
    std::remove(path.c_str());

    CHECK_THROWS(IGNetwork::load_checkpoint("/tmp/does_not_exist.bin"));
}

TEST_CASE("resize cloud samples without replacement and normalizes") {
    PointCloud cloud;
    Rng rng(70);
    for (int i = 0; i < 40; ++i)
        cloud.points.push_back({rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6),
                                rng.uniform(0.0, 0.5)});
    const Point3 center{0.1, -0.1, 0.0};
    const double radius = 0.6;

    Tensor t = resize_cloud(cloud, 16, 9, center, radius);
    REQUIRE(t.rows() == 16);
    REQUIRE(t.cols() == 3);
    // each row is a distinct normalized input point
    std::set<std::pair<double, double>> seen;
    for (int i = 0; i < 16; ++i) {
        const Point3 denorm{t.at(i, 0) * radius + center.x, t.at(i, 1) * radius + center.y,
                            t.at(i, 2) * radius + center.z};
        double best = 1e30;
        for (const auto& p : cloud.points) best = std::min(best, distance(denorm, p));
        CHECK(best < 1e-12);
        seen.insert({t.at(i, 0), t.at(i, 1)});
    }
    CHECK(seen.size() == 16);  // without replacement

    // deterministic under the seed
    Tensor u = resize_cloud(cloud, 16, 9, center, radius);
    CHECK(u.data == t.data);
    Tensor w = resize_cloud(cloud, 16, 10, center, radius);
    CHECK(w.data != t.data);

    // padding with replacement when the cloud is small
    PointCloud tiny;
    tiny.points = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
    Tensor padded = resize_cloud(tiny, 7, 1, {0, 0, 0}, 1.0);
    REQUIRE(padded.rows() == 7);
    CHECK(padded.at(0, 0) == doctest::Approx(0.1));
    CHECK(padded.at(1, 0) == doctest::Approx(0.4));
    for (int i = 2; i < 7; ++i)
        CHECK((padded.at(i, 0) == doctest::Approx(0.1) || padded.at(i, 0) == doctest::Approx(0.4)));

    CHECK_THROWS(resize_cloud(PointCloud{}, 4, 1, {0, 0, 0}, 1.0));
}
