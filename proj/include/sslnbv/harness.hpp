#ifndef SSLNBV_HARNESS_HPP
#define SSLNBV_HARNESS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sslnbv/learner.hpp"

namespace sslnbv {

// Fully-validated experiment description; every field has a default and can
// be overridden from a single JSON config file.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    RigParams rig;
    // Desk-scale sensor: dense enough that a single capture saturates the
    // visible surface at the ground-truth sampling density.
    CameraIntrinsics sensor{60.0, 45.0, 320, 240, 1.5, 0.1};
    CameraIntrinsics planning_sensor{60.0, 45.0, 64, 48, 1.5, 0.1};

    int plant_count = 6;
    int n_leaves_min = 6, n_leaves_max = 10;
    double height_min = 0.40, height_max = 0.60;
    double leaf_size_min = 0.09, leaf_size_max = 0.15;
    double pose_range = 0.1;

    double capture_resolution = 0.003;
    double delta = 0.003;          // Eq. 2 / reconstruction threshold
    double ground_truth_resolution = 0.003;
    int n_points = 512;

    NetworkConfig network;         // m_views is set from the rig
    AdamConfig adam;
    ExplorationSchedule schedule;
    std::size_t buffer_capacity = 1000;
    std::size_t batch_size = 32;

    std::int64_t train_iterations = 2000;  // T
    int n_views = 10;                      // n
    int k_folds = 3;                       // K
    int eval_cycles = 50;
    std::vector<double> taus = {0.8, 0.9};
    std::vector<std::string> planners = {"ssl", "random", "predefined", "voxel"};
    double voxel_resolution = 0.01;  // planning grid for the voxel baseline

    // annotation-efficiency study
    std::int64_t checkpoint_interval = 250;
    int strong_samples = 60;        // F, strong reference dataset size
    int strong_epochs = 40;

    std::string output_dir = "out";
    bool dump_ply = false;

    void validate() const;
};

ExperimentConfig load_config(const std::string& path);
std::string config_json(const ExperimentConfig& config);

// K disjoint test sets covering all items, deterministic under seed.
struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
std::vector<FoldSplit> kfold_split(std::size_t n_items, int k, std::uint64_t seed);

struct EvalRow {
    int fold = 0;
    int cycle = 0;
    std::string planner;
    int view_step = 0;        // 1-based position within the cycle
    std::size_t view_id = 0;  // candidate index chosen
    double ratio = 0.0;       // R after this view
};

struct PlannerSummary {
    std::string planner;
    double tau = 0.0;
    double mean_views = 0.0;  // censored at n_views + 1 when tau is unreached
    double stddev = 0.0;
    std::size_t cycles = 0;
    double p_vs_random = 1.0;
};

struct RunRecord {
    std::vector<EvalRow> rows;
    std::vector<PlannerSummary> summaries;
    // per planner, per tau: views-to-tau sample per evaluation cycle
    std::map<std::string, std::map<double, std::vector<double>>> views_to_tau;
    AnnotationLedger ledger;
};

// Generates the plant set, then per fold trains SSL-NBV on the training
// plants and evaluates every rostered planner on the test plants with paired
// scenes and initial views. Writes metrics CSV, summary CSV, a run manifest,
// and checkpoints under config.output_dir.
RunRecord run_experiment(const ExperimentConfig& config);

// Evaluation only: loads a checkpoint for network planners (may be empty when
// the roster needs none) and runs paired evaluation cycles on freshly
// generated scenes. Used by the `eval` subcommand and the reproducibility
// acceptance check.
RunRecord run_eval(const ExperimentConfig& config, const std::string& checkpoint_path);

struct BenchResult {
    double learned_seconds = 0.0;        // one forward pass, all M candidates
    double voxel_seconds = 0.0;          // M raycasts, grid prebuilt
    double voxel_inclusive_seconds = 0.0;  // M raycasts plus cloud->grid conversion
    double ratio = 0.0;                  // voxel_seconds / learned_seconds
    double ratio_inclusive = 0.0;
    int repetitions = 0;
};

// Median wall-clock over `reps` repetitions of predicting IG for all M
// candidates with (a) the network and (b) per-candidate voxel ray casting.
// Both estimators see the same observed state; single-threaded.
BenchResult bench_ig_speed(const LearnContext& ctx, const PointCloud& accumulated,
                           const ViewSelectionState& state, IGNetwork& net,
                           double grid_resolution, int reps = 20);

// Two-sided Welch t-test. Degenerate variances fall back to exact equality
// (p = 1 when the samples are identical constants, p = 0 otherwise).
double significance_test(const std::vector<double>& a, const std::vector<double>& b);

struct CurvePoint {
    std::int64_t a_ssl = 0;
    double a_ratio = 0.0;  // A_ssl / A_off
    double mean_r = 0.0;   // final-view R over the evaluation cycles
    double p_vs_reference = 0.0;
};

struct CurveResult {
    std::vector<CurvePoint> points;
    double reference_mean_r = 0.0;
    std::int64_t a_off = 0;
    double crossing_ratio = -1.0;  // first a_ratio with p > 0.05; -1 if never
};

// Annotation-efficiency study on one fold: trains a strong-supervised
// reference, then evaluates SSL checkpoints saved at increasing A_ssl.
CurveResult annotation_efficiency_curve(const ExperimentConfig& config, int fold);

// Deterministic CSV helpers: doubles print as shortest round-trip decimal.
std::string format_double(double v);
void write_metrics_csv(const std::string& path, const std::vector<EvalRow>& rows);
void write_summary_csv(const std::string& path, const std::vector<PlannerSummary>& summaries);
void write_manifest(const std::string& path, const ExperimentConfig& config,
                    const std::string& command);

}  // namespace sslnbv

#endif
