#include "sslnbv/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sslnbv {

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
    if (!sensor.valid()) throw std::invalid_argument("config: invalid sensor intrinsics");
    if (!planning_sensor.valid()) throw std::invalid_argument("config: invalid planning sensor");
    if (rig.radius <= 0.0 || rig.heights.empty() || rig.n_angles < 1) {
        throw std::invalid_argument("config: invalid rig");
    }
    if (plant_count < 1) throw std::invalid_argument("config: plant_count < 1");
    if (n_leaves_min < 1 || n_leaves_max < n_leaves_min) {
        throw std::invalid_argument("config: bad n_leaves range");
    }
    if (!(height_min > 0.0) || height_max < height_min) {
        throw std::invalid_argument("config: bad height range");
    }
    if (!(leaf_size_min > 0.0) || leaf_size_max < leaf_size_min) {
        throw std::invalid_argument("config: bad leaf_size range");
    }
    if (!(delta > 0.0)) throw std::invalid_argument("config: delta must be > 0");
    if (!(ground_truth_resolution > 0.0)) throw std::invalid_argument("config: bad gt resolution");
    if (n_points < 1) throw std::invalid_argument("config: n_points < 1");
    if (buffer_capacity < 1 || batch_size < 1) throw std::invalid_argument("config: bad buffer");
    if (train_iterations < 0) throw std::invalid_argument("config: T < 0");
    const std::size_t m = static_cast<std::size_t>(rig.n_angles) * rig.heights.size();
    if (n_views < 1 || static_cast<std::size_t>(n_views) > m) {
        throw std::invalid_argument("config: n_views out of range");
    }
    if (k_folds < 2 || k_folds > plant_count) throw std::invalid_argument("config: bad k_folds");
    if (eval_cycles < 1) throw std::invalid_argument("config: eval_cycles < 1");
    if (taus.empty()) throw std::invalid_argument("config: taus empty");
    for (double tau : taus) {
        if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("config: tau out of (0,1]");
    }
    if (planners.empty()) throw std::invalid_argument("config: empty planner roster");
    for (const std::string& p : planners) {
        if (p != "ssl" && p != "random" && p != "predefined" && p != "voxel" && p != "strong") {
            throw std::invalid_argument("config: unknown planner " + p);
        }
    }
    if (!(voxel_resolution > 0.0)) throw std::invalid_argument("config: bad voxel_resolution");
    if (strong_samples < 1 || strong_epochs < 1) throw std::invalid_argument("config: bad strong");
}

namespace {

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    nlohmann::json j;
    in >> j;
    static const std::set<std::string> known{
        "seed",          "rig",          "sensor",        "planning_sensor",
        "plants",        "capture_resolution", "delta",   "ground_truth_resolution",
        "n_points",      "network",      "adam",          "schedule",
        "buffer_capacity", "batch_size", "train_iterations", "n_views",
        "k_folds",       "eval_cycles",  "taus",          "planners",
        "voxel_resolution", "checkpoint_interval", "strong_samples", "strong_epochs",
        "output_dir",    "dump_ply"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw std::invalid_argument("config: unknown key " + key);
    }
    ExperimentConfig c;
    read_if(j, "seed", c.seed);
    if (j.contains("rig")) {
        const auto& r = j.at("rig");
        read_if(r, "radius", c.rig.radius);
        read_if(r, "heights", c.rig.heights);
        read_if(r, "n_angles", c.rig.n_angles);
        read_if(r, "angular_span", c.rig.angular_span);
        if (r.contains("center")) {
            const auto v = r.at("center").get<std::vector<double>>();
            if (v.size() != 3) throw std::invalid_argument("config: rig.center needs 3 values");
            c.rig.center = {v[0], v[1], v[2]};
        }
    }
    if (j.contains("sensor")) {
        const auto& s = j.at("sensor");
        read_if(s, "h_fov", c.sensor.h_fov);
        read_if(s, "v_fov", c.sensor.v_fov);
        read_if(s, "width", c.sensor.width);
        read_if(s, "height", c.sensor.height);
        read_if(s, "max_range", c.sensor.max_range);
        read_if(s, "min_range", c.sensor.min_range);
        c.planning_sensor = c.sensor;
        c.planning_sensor.width = 64;
        c.planning_sensor.height = 48;
    }
    if (j.contains("planning_sensor")) {
        const auto& s = j.at("planning_sensor");
        read_if(s, "h_fov", c.planning_sensor.h_fov);
        read_if(s, "v_fov", c.planning_sensor.v_fov);
        read_if(s, "width", c.planning_sensor.width);
        read_if(s, "height", c.planning_sensor.height);
        read_if(s, "max_range", c.planning_sensor.max_range);
        read_if(s, "min_range", c.planning_sensor.min_range);
    }
    if (j.contains("plants")) {
        const auto& p = j.at("plants");
        read_if(p, "count", c.plant_count);
        read_if(p, "n_leaves_min", c.n_leaves_min);
        read_if(p, "n_leaves_max", c.n_leaves_max);
        read_if(p, "height_min", c.height_min);
        read_if(p, "height_max", c.height_max);
        read_if(p, "leaf_size_min", c.leaf_size_min);
        read_if(p, "leaf_size_max", c.leaf_size_max);
        read_if(p, "pose_range", c.pose_range);
    }
    read_if(j, "capture_resolution", c.capture_resolution);
    read_if(j, "delta", c.delta);
    read_if(j, "ground_truth_resolution", c.ground_truth_resolution);
    read_if(j, "n_points", c.n_points);
    if (j.contains("network")) {
        const auto& n = j.at("network");
        read_if(n, "point_mlp", c.network.point_mlp);
        read_if(n, "attn_dim", c.network.attn_dim);
        read_if(n, "mlp1", c.network.mlp1);
        read_if(n, "head_hidden", c.network.head_hidden);
    }
    if (j.contains("adam")) {
        const auto& a = j.at("adam");
        read_if(a, "lr", c.adam.lr);
        read_if(a, "beta1", c.adam.beta1);
        read_if(a, "beta2", c.adam.beta2);
        read_if(a, "eps", c.adam.eps);
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        read_if(s, "eps_ini", c.schedule.eps_ini);
        read_if(s, "eps_min", c.schedule.eps_min);
        read_if(s, "rho", c.schedule.rho);
    }
    read_if(j, "buffer_capacity", c.buffer_capacity);
    read_if(j, "batch_size", c.batch_size);
    read_if(j, "train_iterations", c.train_iterations);
    read_if(j, "n_views", c.n_views);
    read_if(j, "k_folds", c.k_folds);
    read_if(j, "eval_cycles", c.eval_cycles);
    read_if(j, "taus", c.taus);
    read_if(j, "planners", c.planners);
    read_if(j, "voxel_resolution", c.voxel_resolution);
    read_if(j, "checkpoint_interval", c.checkpoint_interval);
    read_if(j, "strong_samples", c.strong_samples);
    read_if(j, "strong_epochs", c.strong_epochs);
    read_if(j, "output_dir", c.output_dir);
    read_if(j, "dump_ply", c.dump_ply);
    c.validate();
    return c;
}

std::string config_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["rig"] = {{"radius", c.rig.radius},
                {"heights", c.rig.heights},
                {"n_angles", c.rig.n_angles},
                {"angular_span", c.rig.angular_span},
                {"center", {c.rig.center.x, c.rig.center.y, c.rig.center.z}}};
    j["sensor"] = {{"h_fov", c.sensor.h_fov},   {"v_fov", c.sensor.v_fov},
                   {"width", c.sensor.width},   {"height", c.sensor.height},
                   {"max_range", c.sensor.max_range}, {"min_range", c.sensor.min_range}};
    j["planning_sensor"] = {{"h_fov", c.planning_sensor.h_fov},
                            {"v_fov", c.planning_sensor.v_fov},
                            {"width", c.planning_sensor.width},
                            {"height", c.planning_sensor.height},
                            {"max_range", c.planning_sensor.max_range},
                            {"min_range", c.planning_sensor.min_range}};
    j["plants"] = {{"count", c.plant_count},
                   {"n_leaves_min", c.n_leaves_min},
                   {"n_leaves_max", c.n_leaves_max},
                   {"height_min", c.height_min},
                   {"height_max", c.height_max},
                   {"leaf_size_min", c.leaf_size_min},
                   {"leaf_size_max", c.leaf_size_max},
                   {"pose_range", c.pose_range}};
    j["capture_resolution"] = c.capture_resolution;
    j["delta"] = c.delta;
    j["ground_truth_resolution"] = c.ground_truth_resolution;
    j["n_points"] = c.n_points;
    j["network"] = {{"point_mlp", c.network.point_mlp},
                    {"attn_dim", c.network.attn_dim},
                    {"mlp1", c.network.mlp1},
                    {"head_hidden", c.network.head_hidden}};
    j["adam"] = {{"lr", c.adam.lr}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2},
                 {"eps", c.adam.eps}};
    j["schedule"] = {{"eps_ini", c.schedule.eps_ini}, {"eps_min", c.schedule.eps_min},
                     {"rho", c.schedule.rho}};
    j["buffer_capacity"] = c.buffer_capacity;
    j["batch_size"] = c.batch_size;
    j["train_iterations"] = c.train_iterations;
    j["n_views"] = c.n_views;
    j["k_folds"] = c.k_folds;
    j["eval_cycles"] = c.eval_cycles;
    j["taus"] = c.taus;
    j["planners"] = c.planners;
    j["voxel_resolution"] = c.voxel_resolution;
    j["checkpoint_interval"] = c.checkpoint_interval;
    j["strong_samples"] = c.strong_samples;
    j["strong_epochs"] = c.strong_epochs;
    j["output_dir"] = c.output_dir;
    j["dump_ply"] = c.dump_ply;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Folds

std::vector<FoldSplit> kfold_split(std::size_t n_items, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
    if (n_items < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("kfold_split: fewer items than folds");
    }
    std::vector<std::size_t> idx(n_items);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(substream(seed, 0xf01d));
    for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
        const std::size_t j = i + rng.uniform_index(idx.size() - i);
        std::swap(idx[i], idx[j]);
    }
    std::vector<FoldSplit> folds(k);
    for (std::size_t i = 0; i < n_items; ++i) {
        folds[i % k].test.push_back(idx[i]);
    }
    for (int f = 0; f < k; ++f) {
        std::sort(folds[f].test.begin(), folds[f].test.end());
        for (std::size_t i = 0; i < n_items; ++i) {
            if (!std::binary_search(folds[f].test.begin(), folds[f].test.end(), i)) {
                folds[f].train.push_back(i);
            }
        }
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Statistics

namespace {

double gammaln(double x) { return std::lgamma(x); }

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
double betacf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-12) break;
    }
    return h;
}

double incbeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front =
        gammaln(a + b) - gammaln(a) - gammaln(b) + a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double significance_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) {
        throw std::invalid_argument("significance_test: need at least 2 samples per group");
    }
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double ma = mean_of(a), mb = mean_of(b);
    const double va = var_of(a, ma), vb = var_of(b, mb);
    const double se2 = va / na + vb / nb;
    if (se2 <= 0.0) {
        // degenerate variance: exact-equality fallback
        return ma == mb ? 1.0 : 0.0;
    }
    const double t = (ma - mb) / std::sqrt(se2);
    const double df = se2 * se2 /
                      ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    // two-sided p-value from the t CDF
    return incbeta(df / 2.0, 0.5, df / (df + t * t));
}

// ---------------------------------------------------------------------------
// CSV / manifest helpers

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    out << "fold,cycle,planner,view_step,view_id,ratio\n";
    for (const EvalRow& r : rows) {
        out << r.fold << ',' << r.cycle << ',' << r.planner << ',' << r.view_step << ','
            << r.view_id << ',' << format_double(r.ratio) << '\n';
    }
}

void write_summary_csv(const std::string& path, const std::vector<PlannerSummary>& summaries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_summary_csv: cannot open " + path);
    out << "planner,tau,mean_views,stddev,cycles,p_vs_random\n";
    for (const PlannerSummary& s : summaries) {
        out << s.planner << ',' << format_double(s.tau) << ',' << format_double(s.mean_views)
            << ',' << format_double(s.stddev) << ',' << s.cycles << ','
            << format_double(s.p_vs_random) << '\n';
    }
}

void write_manifest(const std::string& path, const ExperimentConfig& config,
                    const std::string& command) {
    nlohmann::json j;
    j["command"] = command;
    j["schema_version"] = 1;
    j["config"] = nlohmann::json::parse(config_json(config));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Experiment orchestration

namespace {

PlannerKind planner_kind(const std::string& name) {
    if (name == "ssl") return PlannerKind::SSL;
    if (name == "random") return PlannerKind::Random;
    if (name == "predefined") return PlannerKind::Predefined;
    if (name == "voxel") return PlannerKind::Voxel;
    if (name == "strong") return PlannerKind::NetworkStrong;
    throw std::invalid_argument("unknown planner: " + name);
}

std::vector<PlantModel> generate_plants(const ExperimentConfig& cfg) {
    std::vector<PlantModel> plants;
    plants.reserve(static_cast<std::size_t>(cfg.plant_count));
    Rng rng(substream(cfg.seed, 0x51a7));
    for (int i = 0; i < cfg.plant_count; ++i) {
        PlantParams p;
        p.n_leaves = cfg.n_leaves_min +
                     static_cast<int>(rng.uniform_index(
                         static_cast<std::uint64_t>(cfg.n_leaves_max - cfg.n_leaves_min + 1)));
        p.height = rng.uniform(cfg.height_min, cfg.height_max);
        p.leaf_size = rng.uniform(cfg.leaf_size_min, cfg.leaf_size_max);
        plants.push_back(generate_plant(substream(cfg.seed, 0x100 + i), p));
    }
    return plants;
}

struct SceneBundle {
    Scene scene;
    PointCloud ground_truth;
};

SceneBundle make_scene(const ExperimentConfig& cfg, const PlantModel& plant, std::uint64_t seed) {
    SceneBundle b;
    b.scene = place_plant(plant, random_pose(seed, cfg.pose_range));
    b.ground_truth = sample_ground_truth(b.scene, cfg.ground_truth_resolution);
    return b;
}

LearnContext make_context(const ExperimentConfig& cfg, const Scene& scene,
                          const CandidateSet& candidates) {
    LearnContext ctx;
    ctx.scene = &scene;
    ctx.candidates = &candidates;
    ctx.intrinsics = cfg.sensor;
    ctx.capture_resolution = cfg.capture_resolution;
    ctx.delta = cfg.delta;
    ctx.n_points = cfg.n_points;
    ctx.batch_size = cfg.batch_size;
    ctx.schedule = cfg.schedule;
    ctx.adam = cfg.adam;
    return ctx;
}

NetworkConfig network_config(const ExperimentConfig& cfg, const CandidateSet& candidates) {
    NetworkConfig net = cfg.network;
    net.n_points = cfg.n_points;
    net.m_views = static_cast<int>(candidates.size());
    return net;
}

struct TrainOutput {
    IGNetwork net;
    AnnotationLedger ledger;
    // (A_ssl, checkpoint path) saved every checkpoint_interval iterations
    std::vector<std::pair<std::int64_t, std::string>> checkpoints;
};

// SSL online training over the fold's training plants: one scene per cycle,
// a new random pose each time, n_views iterations per cycle, until T global
// iterations have run.
TrainOutput train_ssl_fold(const ExperimentConfig& cfg, const std::vector<PlantModel>& plants,
                           const std::vector<std::size_t>& train_idx,
                           const CandidateSet& candidates, int fold, bool save_checkpoints,
                           const std::string& log_path) {
    if (train_idx.empty()) throw std::invalid_argument("train_ssl_fold: empty training set");
    TrainOutput out{IGNetwork(network_config(cfg, candidates),
                              substream(cfg.seed, 0x2000 + static_cast<std::uint64_t>(fold))),
                    AnnotationLedger{}, {}};
    out.ledger.m_views = static_cast<int>(candidates.size());
    ReplayBuffer buffer(cfg.buffer_capacity);
    Rng rng(substream(cfg.seed, 0x3000 + static_cast<std::uint64_t>(fold)));

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::binary);
        if (!log) throw std::runtime_error("train_ssl_fold: cannot open " + log_path);
        log << "t,eps,chosen_view,gain,labeled,loss,buffer_size,a_ssl\n";
    }
    auto maybe_checkpoint = [&](std::int64_t t_done) {
        if (!save_checkpoints || cfg.checkpoint_interval < 1) return;
        if (t_done % cfg.checkpoint_interval != 0 && t_done != cfg.train_iterations) return;
        const std::string path = cfg.output_dir + "/ckpt_fold" + std::to_string(fold) + "_t" +
                                 std::to_string(t_done) + ".bin";
        out.net.save_checkpoint(path);
        if (out.checkpoints.empty() || out.checkpoints.back().second != path) {
            out.checkpoints.emplace_back(out.ledger.ssl_count, path);
        }
    };

    std::int64_t t = 1;
    std::size_t cycle_idx = 0;
    while (t <= cfg.train_iterations) {
        const PlantModel& plant = plants[train_idx[cycle_idx % train_idx.size()]];
        const SceneBundle bundle = make_scene(cfg, plant, rng.next());
        LearnContext ctx = make_context(cfg, bundle.scene, candidates);
        CycleState cycle;
        cycle.visited = ViewSelectionState(candidates.size());
        for (int v = 0; v < cfg.n_views && t <= cfg.train_iterations; ++v) {
            const IterationLog il = ssl_iteration(ctx, cycle, out.net, buffer, out.ledger, t, rng,
                                                  /*force_random=*/v == 0);
            if (log.is_open()) {
                log << il.t << ',' << format_double(il.eps) << ',' << il.chosen_view << ','
                    << format_double(il.gain) << ',' << (il.labeled ? 1 : 0) << ','
                    << format_double(il.loss) << ',' << il.buffer_size << ',' << il.a_ssl << '\n';
            }
            maybe_checkpoint(t);
            ++t;
        }
        ++cycle_idx;
    }
    return out;
}

// Offline strong-supervised reference: F dense samples from random partial
// reconstructions of the training plants, then epochs of batched Adam on the
// strong loss.
IGNetwork train_strong_reference(const ExperimentConfig& cfg,
                                 const std::vector<PlantModel>& plants,
                                 const std::vector<std::size_t>& train_idx,
                                 const CandidateSet& candidates, int fold,
                                 AnnotationLedger* ledger) {
    Rng rng(substream(cfg.seed, 0x6000 + static_cast<std::uint64_t>(fold)));
    std::vector<TrainingSample> dataset;
    dataset.reserve(static_cast<std::size_t>(cfg.strong_samples));
    const std::size_t m = candidates.size();
    for (int s = 0; s < cfg.strong_samples; ++s) {
        const PlantModel& plant = plants[train_idx[s % train_idx.size()]];
        const SceneBundle bundle = make_scene(cfg, plant, rng.next());
        LearnContext ctx = make_context(cfg, bundle.scene, candidates);
        // random partial reconstruction state: 0..n_views-1 already-visited views
        const std::size_t k = rng.uniform_index(static_cast<std::uint64_t>(cfg.n_views));
        PointCloud accumulated;
        ViewSelectionState state(m);
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t view =
                select_next_view(std::vector<double>(m, 0.0), state, 1.0, rng);
            const PointCloud captured =
                capture(bundle.scene, candidates.views[view], cfg.sensor, cfg.capture_resolution);
            if (!captured.empty()) {
                accumulated = merge_accumulated(accumulated, captured, cfg.delta);
            }
            state = mark_visited(state, view);
        }
        dataset.push_back(collect_strong_sample(ctx, accumulated, state, rng.next(), ledger));
    }

    IGNetwork net(network_config(cfg, candidates),
                  substream(cfg.seed, 0x7000 + static_cast<std::uint64_t>(fold)));
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, dataset.size());
    const std::size_t steps_per_epoch = (dataset.size() + batch - 1) / batch;
    for (int epoch = 0; epoch < cfg.strong_epochs; ++epoch) {
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            std::vector<double> grad(net.parameter_count(), 0.0);
            const double scale = 1.0 / static_cast<double>(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                const TrainingSample& sample = dataset[rng.uniform_index(dataset.size())];
                std::vector<double> state_vec(m);
                for (std::size_t i = 0; i < m; ++i) {
                    state_vec[i] = sample.state.visited(i) ? 1.0 : 0.0;
                }
                ForwardCache cache;
                const std::vector<double> pred =
                    net.forward(sample.cloud_snapshot.data, state_vec, &cache);
                net.backward(cache, loss_strong_grad(pred, sample.target.values, scale), grad);
            }
            net.adam_step(grad, cfg.adam);
        }
    }
    return net;
}

struct EvalOutput {
    std::vector<EvalRow> rows;
    std::map<std::string, std::map<double, std::vector<double>>> views_to_tau;
    std::map<std::string, std::vector<double>> final_ratio;  // per planner, per cycle
};

// Paired evaluation: every planner sees the same scene, pose, and initial
// view in each cycle; planner-internal randomness uses separate streams.
EvalOutput evaluate_planners(const ExperimentConfig& cfg, const std::vector<PlantModel>& plants,
                             const std::vector<std::size_t>& test_idx,
                             const CandidateSet& candidates, int fold,
                             const std::map<std::string, IGNetwork*>& nets) {
    if (test_idx.empty()) throw std::invalid_argument("evaluate_planners: empty test set");
    EvalOutput out;
    Rng scene_rng(substream(cfg.seed, 0x4000 + static_cast<std::uint64_t>(fold)));
    const std::size_t m = candidates.size();
    for (int cycle = 0; cycle < cfg.eval_cycles; ++cycle) {
        const PlantModel& plant = plants[test_idx[static_cast<std::size_t>(cycle) %
                                                  test_idx.size()]];
        const SceneBundle bundle = make_scene(cfg, plant, scene_rng.next());
        LearnContext ctx = make_context(cfg, bundle.scene, candidates);
        const std::size_t initial = scene_rng.uniform_index(m);
        for (std::size_t p = 0; p < cfg.planners.size(); ++p) {
            const std::string& name = cfg.planners[p];
            RunCycleArgs args;
            args.planner = planner_kind(name);
            args.ground_truth = &bundle.ground_truth;
            args.n_views = cfg.n_views;
            args.voxel_resolution = cfg.voxel_resolution;
            args.planning_sensor = cfg.planning_sensor;
            args.initial_view = initial;
            if (args.planner == PlannerKind::SSL || args.planner == PlannerKind::NetworkStrong) {
                const auto it = nets.find(name);
                if (it == nets.end() || !it->second) {
                    throw std::runtime_error("evaluate_planners: no network for " + name);
                }
                args.net = it->second;
            }
            Rng rng(substream(cfg.seed, 0x5000 + static_cast<std::uint64_t>(fold) * 1009 +
                                            static_cast<std::uint64_t>(cycle) * 131 + p));
            const CycleResult res = run_cycle(ctx, args, rng);
            for (std::size_t v = 0; v < res.ratios.size(); ++v) {
                out.rows.push_back(EvalRow{fold, cycle, name, static_cast<int>(v + 1),
                                           res.views[v], res.ratios[v]});
            }
            for (double tau : cfg.taus) {
                const auto vt = views_to_threshold(res.ratios, tau);
                // censor unreached thresholds at n_views + 1
                out.views_to_tau[name][tau].push_back(
                    vt ? static_cast<double>(*vt) : static_cast<double>(cfg.n_views + 1));
            }
            out.final_ratio[name].push_back(res.ratios.back());
        }
    }
    return out;
}

std::vector<PlannerSummary> summarize(const ExperimentConfig& cfg, const EvalOutput& eval) {
    std::vector<PlannerSummary> summaries;
    for (const std::string& name : cfg.planners) {
        for (double tau : cfg.taus) {
            const std::vector<double>& samples = eval.views_to_tau.at(name).at(tau);
            PlannerSummary s;
            s.planner = name;
            s.tau = tau;
            s.cycles = samples.size();
            s.mean_views = mean_of(samples);
            s.stddev = samples.size() > 1 ? std::sqrt(var_of(samples, s.mean_views)) : 0.0;
            if (name != "random" && eval.views_to_tau.count("random")) {
                s.p_vs_random = significance_test(samples, eval.views_to_tau.at("random").at(tau));
            }
            summaries.push_back(s);
        }
    }
    return summaries;
}

void merge_eval(const ExperimentConfig& cfg, RunRecord& record, const EvalOutput& eval) {
    record.rows.insert(record.rows.end(), eval.rows.begin(), eval.rows.end());
    for (const std::string& name : cfg.planners) {
        for (double tau : cfg.taus) {
            auto& dst = record.views_to_tau[name][tau];
            const auto& src = eval.views_to_tau.at(name).at(tau);
            dst.insert(dst.end(), src.begin(), src.end());
        }
    }
}

void write_outputs(const ExperimentConfig& cfg, const RunRecord& record,
                   const std::string& command) {
    if (cfg.output_dir.empty()) return;
    std::filesystem::create_directories(cfg.output_dir);
    write_metrics_csv(cfg.output_dir + "/metrics.csv", record.rows);
    write_summary_csv(cfg.output_dir + "/summary.csv", record.summaries);
    write_manifest(cfg.output_dir + "/run_manifest.json", cfg, command);
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& config) {
    config.validate();
    if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);
    const std::vector<PlantModel> plants = generate_plants(config);
    const CandidateSet candidates = sample_cylinder(config.rig);
    const auto folds = kfold_split(plants.size(), config.k_folds, config.seed);

    RunRecord record;
    record.ledger.m_views = static_cast<int>(candidates.size());
    const bool needs_ssl = std::count(config.planners.begin(), config.planners.end(), "ssl") > 0;
    const bool needs_strong =
        std::count(config.planners.begin(), config.planners.end(), "strong") > 0;

    for (int f = 0; f < static_cast<int>(folds.size()); ++f) {
        std::map<std::string, IGNetwork*> nets;
        std::vector<IGNetwork> owned;
        owned.reserve(2);
        if (needs_ssl) {
            const std::string log_path = config.output_dir.empty()
                                             ? std::string()
                                             : config.output_dir + "/train_fold" +
                                                   std::to_string(f) + ".csv";
            TrainOutput trained =
                train_ssl_fold(config, plants, folds[f].train, candidates, f,
                               /*save_checkpoints=*/!config.output_dir.empty(), log_path);
            record.ledger.ssl_count += trained.ledger.ssl_count;
            owned.push_back(std::move(trained.net));
            nets["ssl"] = &owned.back();
        }
        if (needs_strong) {
            owned.push_back(train_strong_reference(config, plants, folds[f].train, candidates, f,
                                                   &record.ledger));
            nets["strong"] = &owned.back();
        }
        const EvalOutput eval =
            evaluate_planners(config, plants, folds[f].test, candidates, f, nets);
        merge_eval(config, record, eval);
    }

    // summaries over the pooled per-cycle samples of all folds
    EvalOutput pooled;
    pooled.views_to_tau = record.views_to_tau;
    record.summaries = summarize(config, pooled);
    write_outputs(config, record, "train");
    return record;
}

RunRecord run_eval(const ExperimentConfig& config, const std::string& checkpoint_path) {
    config.validate();
    const std::vector<PlantModel> plants = generate_plants(config);
    const CandidateSet candidates = sample_cylinder(config.rig);

    std::map<std::string, IGNetwork*> nets;
    std::vector<IGNetwork> owned;
    owned.reserve(2);
    const bool needs_net =
        std::count(config.planners.begin(), config.planners.end(), "ssl") > 0 ||
        std::count(config.planners.begin(), config.planners.end(), "strong") > 0;
    if (needs_net) {
        if (checkpoint_path.empty()) {
            owned.emplace_back(network_config(config, candidates), substream(config.seed, 0xeef));
        } else {
            owned.push_back(IGNetwork::load_checkpoint(checkpoint_path));
        }
        for (const std::string& name : {std::string("ssl"), std::string("strong")}) {
            if (std::count(config.planners.begin(), config.planners.end(), name) > 0) {
                nets[name] = &owned.back();
            }
        }
    }

    std::vector<std::size_t> all(plants.size());
    std::iota(all.begin(), all.end(), 0);
    RunRecord record;
    record.ledger.m_views = static_cast<int>(candidates.size());
    const EvalOutput eval = evaluate_planners(config, plants, all, candidates, 0, nets);
    merge_eval(config, record, eval);
    EvalOutput pooled;
    pooled.views_to_tau = record.views_to_tau;
    record.summaries = summarize(config, pooled);
    write_outputs(config, record, "eval");
    return record;
}

// ---------------------------------------------------------------------------
// IG speed benchmark

BenchResult bench_ig_speed(const LearnContext& ctx, const PointCloud& accumulated,
                           const ViewSelectionState& state, IGNetwork& net,
                           double grid_resolution, int reps) {
    if (reps < 1) throw std::invalid_argument("bench_ig_speed: reps must be >= 1");
    blas::set_threads(1);  // the comparison is single-threaded on both sides
    const std::size_t m = ctx.candidates->size();
    if (state.size() != m) throw std::invalid_argument("bench_ig_speed: state size");
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };

    // network side: input prep outside the timed region mirrors the voxel
    // side's prebuilt grid (exclusive timing)
    const RigParams& rig = ctx.candidates->rig;
    std::vector<double> points(static_cast<std::size_t>(ctx.n_points) * 3, 0.0);
    if (!accumulated.empty()) {
        points = resize_cloud(accumulated, ctx.n_points, 0x9e3c, rig.center, rig.radius).data;
    }
    std::vector<double> state_vec(m);
    for (std::size_t i = 0; i < m; ++i) state_vec[i] = state.visited(i) ? 1.0 : 0.0;

    std::vector<double> learned_times;
    volatile double sink = 0.0;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock::now();
        const std::vector<double> pred = net.forward(points, state_vec);
        const auto t1 = clock::now();
        sink = sink + pred[0];
        learned_times.push_back(seconds(t0, t1));
    }

    // voxel side: grid built and populated once, raycasts timed per rep
    OccupancyGrid grid = OccupancyGrid::for_rig(rig, grid_resolution);
    if (!accumulated.empty()) {
        grid.integrate(accumulated, Point3{rig.center.x + rig.radius, rig.center.y,
                                           rig.center.z + rig.heights.front()});
    }
    std::vector<double> voxel_times;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock::now();
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            total += raycast_ig_serial(grid, ctx.candidates->views[i], ctx.intrinsics);
        }
        const auto t1 = clock::now();
        sink = sink + total;
        voxel_times.push_back(seconds(t0, t1));
    }

    // inclusive variant: cloud -> grid conversion inside the timed region
    std::vector<double> inclusive_times;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock::now();
        OccupancyGrid g = OccupancyGrid::for_rig(rig, grid_resolution);
        if (!accumulated.empty()) {
            g.integrate(accumulated, Point3{rig.center.x + rig.radius, rig.center.y,
                                            rig.center.z + rig.heights.front()});
        }
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            total += raycast_ig_serial(g, ctx.candidates->views[i], ctx.intrinsics);
        }
        const auto t1 = clock::now();
        sink = sink + total;
        inclusive_times.push_back(seconds(t0, t1));
    }
    (void)sink;

    BenchResult result;
    result.learned_seconds = median(learned_times);
    result.voxel_seconds = median(voxel_times);
    result.voxel_inclusive_seconds = median(inclusive_times);
    result.ratio = result.voxel_seconds / result.learned_seconds;
    result.ratio_inclusive = result.voxel_inclusive_seconds / result.learned_seconds;
    result.repetitions = reps;
    return result;
}

// ---------------------------------------------------------------------------
// Annotation-efficiency curve

CurveResult annotation_efficiency_curve(const ExperimentConfig& config, int fold) {
    config.validate();
    if (config.output_dir.empty()) {
        throw std::invalid_argument("annotation_efficiency_curve: output_dir required");
    }
    std::filesystem::create_directories(config.output_dir);
    const std::vector<PlantModel> plants = generate_plants(config);
    const CandidateSet candidates = sample_cylinder(config.rig);
    const auto folds = kfold_split(plants.size(), config.k_folds, config.seed);
    if (fold < 0 || fold >= static_cast<int>(folds.size())) {
        throw std::invalid_argument("annotation_efficiency_curve: fold out of range");
    }
    const FoldSplit& split = folds[fold];

    AnnotationLedger ledger;
    ledger.m_views = static_cast<int>(candidates.size());
    IGNetwork reference =
        train_strong_reference(config, plants, split.train, candidates, fold, &ledger);

    TrainOutput trained = train_ssl_fold(config, plants, split.train, candidates, fold,
                                         /*save_checkpoints=*/true, std::string());
    if (trained.checkpoints.empty()) {
        throw std::runtime_error("annotation_efficiency_curve: no checkpoints saved");
    }

    // untrained baseline first, then each saved checkpoint
    ExperimentConfig eval_cfg = config;
    eval_cfg.planners = {"strong"};
    std::map<std::string, IGNetwork*> ref_net{{"strong", &reference}};
    const EvalOutput ref_eval =
        evaluate_planners(eval_cfg, plants, split.test, candidates, fold, ref_net);
    const std::vector<double>& ref_r = ref_eval.final_ratio.at("strong");

    CurveResult result;
    result.reference_mean_r = mean_of(ref_r);
    result.a_off = ledger.offline_count();

    ExperimentConfig ssl_cfg = config;
    ssl_cfg.planners = {"ssl"};
    std::vector<std::pair<std::int64_t, std::string>> stages;
    stages.emplace_back(0, std::string());  // untrained network
    stages.insert(stages.end(), trained.checkpoints.begin(), trained.checkpoints.end());
    for (const auto& [a_ssl, path] : stages) {
        IGNetwork net = path.empty()
                            ? IGNetwork(network_config(config, candidates),
                                        substream(config.seed,
                                                  0x2000 + static_cast<std::uint64_t>(fold)))
                            : IGNetwork::load_checkpoint(path);
        std::map<std::string, IGNetwork*> nets{{"ssl", &net}};
        const EvalOutput eval =
            evaluate_planners(ssl_cfg, plants, split.test, candidates, fold, nets);
        const std::vector<double>& r = eval.final_ratio.at("ssl");
        CurvePoint point;
        point.a_ssl = a_ssl;
        point.a_ratio = static_cast<double>(a_ssl) / static_cast<double>(result.a_off);
        point.mean_r = mean_of(r);
        point.p_vs_reference = significance_test(r, ref_r);
        result.points.push_back(point);
        if (result.crossing_ratio < 0.0 && a_ssl > 0 && point.p_vs_reference > 0.05) {
            result.crossing_ratio = point.a_ratio;
        }
    }

    std::ofstream out(config.output_dir + "/annotation_curve_fold" + std::to_string(fold) +
                      ".csv");
    out << "a_ssl,a_ratio,mean_r,p_vs_reference\n";
    for (const CurvePoint& p : result.points) {
        out << p.a_ssl << ',' << format_double(p.a_ratio) << ',' << format_double(p.mean_r) << ','
            << format_double(p.p_vs_reference) << '\n';
    }
    return result;
}

}  // namespace sslnbv
