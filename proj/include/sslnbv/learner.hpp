#ifndef SSLNBV_LEARNER_HPP
#define SSLNBV_LEARNER_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "sslnbv/ig_metric.hpp"
#include "sslnbv/network.hpp"
#include "sslnbv/occupancy_grid.hpp"
#include "sslnbv/rng.hpp"
#include "sslnbv/scene.hpp"
#include "sslnbv/sensor.hpp"
#include "sslnbv/views.hpp"

namespace sslnbv {

// b_t = {P_t^a, V_t, G_t}: the pre-capture accumulated cloud (resized to the
// network's input shape), the visited-view state at selection time, and the
// (weak or dense) gain target.
struct TrainingSample {
    Tensor cloud_snapshot;      // n_points x 3, rig-normalized
    ViewSelectionState state;
    TargetVector target;
};

// Fixed-capacity circular buffer: insertion l+k evicts the k-th oldest.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return samples_.size(); }
    std::int64_t total_pushed() const { return total_; }

    void push(TrainingSample sample);

    // i-th oldest surviving sample, i in [0, size).
    const TrainingSample& oldest(std::size_t i) const;

    // Uniform draw with replacement.
    const TrainingSample& sample(Rng& rng) const;

private:
    std::size_t capacity_;
    std::vector<TrainingSample> samples_;
    std::size_t cursor_ = 0;
    std::int64_t total_ = 0;
};

struct ExplorationSchedule {
    double eps_ini = 1.0;
    double eps_min = 0.2;
    double rho = 0.95;
};

// eps_t = max(eps_min, rho^(t-1) * eps_ini); t is the global 1-based
// iteration count across cycles.
double epsilon(std::int64_t t, const ExplorationSchedule& sched);

// Label-cost bookkeeping: one weak label per executed-and-labeled motion,
// M labels per strong sample.
struct AnnotationLedger {
    std::int64_t ssl_count = 0;       // A_ssl
    std::int64_t strong_samples = 0;  // F
    int m_views = 33;

    std::int64_t offline_count() const { return strong_samples * m_views; }  // A_off
};

// Eq. 1: draw x ~ U(0,1); exploit (argmax of pred over unvisited views,
// ties to the lowest index) when eps < x, otherwise explore uniformly over
// unvisited views. Throws when every view is visited.
std::size_t select_next_view(const std::vector<double>& pred, const ViewSelectionState& state,
                             double eps, Rng& rng);

enum class PlannerKind { SSL, Random, Predefined, Voxel, NetworkStrong };

// Static per-run context for the online loop.
struct LearnContext {
    const Scene* scene = nullptr;
    const CandidateSet* candidates = nullptr;
    CameraIntrinsics intrinsics;
    double capture_resolution = 0.003;
    double delta = 0.003;  // Eq. 2 intersection threshold
    int n_points = 512;    // network input size
    std::size_t batch_size = 32;
    ExplorationSchedule schedule;
    AdamConfig adam;
};

// Mutable within-cycle reconstruction state.
struct CycleState {
    PointCloud accumulated;
    ViewSelectionState visited;
};

struct IterationLog {
    std::int64_t t = 0;
    double eps = 0.0;
    std::size_t chosen_view = 0;
    double gain = 0.0;
    bool labeled = true;  // false when the capture was empty (anomaly)
    bool stepped = false;
    double loss = 0.0;  // batch loss when stepped
    std::size_t buffer_size = 0;
    std::int64_t a_ssl = 0;
};

// One pass of the seven-step online loop: predict, select, capture, label,
// store b_t (with the PRE-capture cloud), merge/mark, and take one Adam step
// on the weak loss once the buffer holds at least batch_size samples.
// Errors propagate with no partial state mutation. force_random makes the
// selection uniform regardless of eps (the first view of every cycle).
IterationLog ssl_iteration(const LearnContext& ctx, CycleState& cycle, IGNetwork& net,
                           ReplayBuffer& buffer, AnnotationLedger& ledger, std::int64_t t,
                           Rng& rng, bool force_random = false);

// Dense supervision: capture from every candidate, one gain per candidate
// against the same accumulated cloud. Any empty capture discards the sample
// (throws). Ledger accounting adds M offline labels.
TrainingSample collect_strong_sample(const LearnContext& ctx, const PointCloud& accumulated,
                                     const ViewSelectionState& state, std::uint64_t resize_seed,
                                     AnnotationLedger* ledger);

struct RunCycleArgs {
    PlannerKind planner = PlannerKind::Random;
    const PointCloud* ground_truth = nullptr;
    int n_views = 10;
    double voxel_resolution = 0.01;     // planning-grid resolution (Voxel-NBV)
    // IG-estimation rays for the voxel planner; coarser than the capture
    // sensor since the ratio estimate converges with few rays.
    CameraIntrinsics planning_sensor{60.0, 45.0, 64, 48, 1.5, 0.1};
    double eval_epsilon = 0.0;          // frozen-policy exploration rate
    std::optional<std::size_t> initial_view;  // shared first view for paired runs
    bool learn = false;                 // SSL side effects on
    IGNetwork* net = nullptr;           // SSL / NetworkStrong
    ReplayBuffer* buffer = nullptr;     // learn mode
    AnnotationLedger* ledger = nullptr;
    std::int64_t* global_t = nullptr;   // learn mode: global iteration counter
};

struct CycleResult {
    std::vector<std::size_t> views;  // selection order
    std::vector<double> ratios;      // R after each view
    std::vector<IterationLog> logs;  // learn mode only
};

// One reconstruction cycle: fresh P^a and V, n view selections under the
// given planner, R recorded after every view.
CycleResult run_cycle(const LearnContext& ctx, const RunCycleArgs& args, Rng& rng);

}  // namespace sslnbv

#endif
