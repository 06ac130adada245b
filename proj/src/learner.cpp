#include "sslnbv/learner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace sslnbv {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::push(TrainingSample sample) {
    if (samples_.size() < capacity_) {
        samples_.push_back(std::move(sample));
    } else {
        samples_[cursor_] = std::move(sample);
        cursor_ = (cursor_ + 1) % capacity_;
    }
    ++total_;
}

const TrainingSample& ReplayBuffer::oldest(std::size_t i) const {
    if (i >= samples_.size()) throw std::out_of_range("ReplayBuffer::oldest: index out of range");
    if (samples_.size() < capacity_) return samples_[i];
    return samples_[(cursor_ + i) % capacity_];
}

const TrainingSample& ReplayBuffer::sample(Rng& rng) const {
    if (samples_.empty()) throw std::runtime_error("ReplayBuffer::sample: buffer empty");
    return samples_[rng.uniform_index(samples_.size())];
}

double epsilon(std::int64_t t, const ExplorationSchedule& sched) {
    if (t < 1) throw std::invalid_argument("epsilon: t must be >= 1");
    if (!(sched.eps_min >= 0.0 && sched.eps_min <= sched.eps_ini && sched.eps_ini <= 1.0 &&
          sched.rho > 0.0 && sched.rho <= 1.0)) {
        throw std::invalid_argument("epsilon: invalid schedule");
    }
    return std::max(sched.eps_min, std::pow(sched.rho, static_cast<double>(t - 1)) * sched.eps_ini);
}

std::size_t select_next_view(const std::vector<double>& pred, const ViewSelectionState& state,
                             double eps, Rng& rng) {
    if (pred.size() != state.size()) {
        throw std::invalid_argument("select_next_view: pred/state length mismatch");
    }
    std::vector<std::size_t> open;
    open.reserve(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!state.visited(i)) open.push_back(i);
    }
    if (open.empty()) throw std::runtime_error("select_next_view: all views visited");
    const double x = rng.uniform01();
    if (eps < x) {
        std::size_t best = open[0];
        for (std::size_t i : open) {
            if (pred[i] > pred[best]) best = i;  // strict > keeps the lowest-index tie winner
        }
        return best;
    }
    return open[rng.uniform_index(open.size())];
}

namespace {

std::vector<double> state_vector(const ViewSelectionState& state) {
    std::vector<double> v(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) v[i] = state.visited(i) ? 1.0 : 0.0;
    return v;
}

// Network input for the current accumulated cloud; an empty cloud maps to the
// all-zeros tensor (rig center).
std::vector<double> network_points(const LearnContext& ctx, const PointCloud& accumulated,
                                   Rng& rng) {
    if (accumulated.empty()) {
        return std::vector<double>(static_cast<std::size_t>(ctx.n_points) * 3, 0.0);
    }
    const RigParams& rig = ctx.candidates->rig;
    Tensor t = resize_cloud(accumulated, ctx.n_points, rng.next(), rig.center, rig.radius);
    return std::move(t.data);
}

// One Adam step on a uniformly drawn batch; returns the mean weak loss.
double train_step(const LearnContext& ctx, IGNetwork& net, ReplayBuffer& buffer, Rng& rng) {
    std::vector<double> grad(net.parameter_count(), 0.0);
    const double scale = 1.0 / static_cast<double>(ctx.batch_size);
    double loss = 0.0;
    for (std::size_t b = 0; b < ctx.batch_size; ++b) {
        const TrainingSample& s = buffer.sample(rng);
        ForwardCache cache;
        const std::vector<double> pred =
            net.forward(s.cloud_snapshot.data, state_vector(s.state), &cache);
        loss += loss_weak(pred, s.target) * scale;
        net.backward(cache, loss_weak_grad(pred, s.target, scale), grad);
    }
    net.adam_step(grad, ctx.adam);
    return loss;
}

}  // namespace

IterationLog ssl_iteration(const LearnContext& ctx, CycleState& cycle, IGNetwork& net,
                           ReplayBuffer& buffer, AnnotationLedger& ledger, std::int64_t t,
                           Rng& rng, bool force_random) {
    if (!ctx.scene || !ctx.candidates) throw std::invalid_argument("ssl_iteration: null context");
    const std::size_t m = ctx.candidates->size();
    if (cycle.visited.size() != m) throw std::invalid_argument("ssl_iteration: state size");
    if (cycle.visited.visited_count() >= m) {
        throw std::runtime_error("ssl_iteration: cycle finished");
    }

    IterationLog log;
    log.t = t;
    log.eps = epsilon(t, ctx.schedule);

    // Step 1: predict from the pre-capture cloud; step 2: Eq. 1 selection.
    const std::vector<double> points = network_points(ctx, cycle.accumulated, rng);
    const std::vector<double> pred = net.forward(points, state_vector(cycle.visited));
    const double eps = force_random ? 1.0 : log.eps;
    const std::size_t chosen = select_next_view(pred, cycle.visited, eps, rng);
    log.chosen_view = chosen;

    // Step 3: capture.
    const PointCloud captured =
        capture(*ctx.scene, ctx.candidates->views[chosen], ctx.intrinsics, ctx.capture_resolution);
    if (captured.empty()) {
        // Anomaly: the motion happened but yields no label; mark and move on.
        cycle.visited = mark_visited(cycle.visited, chosen);
        log.labeled = false;
        log.buffer_size = buffer.size();
        log.a_ssl = ledger.ssl_count;
        return log;
    }

    // Step 4: weak label; step 5: stage b_t with the PRE-capture cloud.
    const double gain = ground_truth_ig(cycle.accumulated, captured, ctx.delta);
    log.gain = gain;
    TrainingSample sample;
    sample.cloud_snapshot = Tensor(ctx.n_points, 3);
    sample.cloud_snapshot.data = points;
    sample.state = cycle.visited;
    sample.target = weak_target(m, chosen, gain);

    // All fallible work is done; commit steps 5-6 atomically.
    buffer.push(std::move(sample));
    cycle.accumulated = merge_accumulated(cycle.accumulated, captured, ctx.delta);
    cycle.visited = mark_visited(cycle.visited, chosen);
    ledger.ssl_count += 1;

    // Step 7: one optimizer step once the buffer covers a batch.
    if (buffer.size() >= ctx.batch_size) {
        log.loss = train_step(ctx, net, buffer, rng);
        log.stepped = true;
    }
    log.buffer_size = buffer.size();
    log.a_ssl = ledger.ssl_count;
    return log;
}

TrainingSample collect_strong_sample(const LearnContext& ctx, const PointCloud& accumulated,
                                     const ViewSelectionState& state, std::uint64_t resize_seed,
                                     AnnotationLedger* ledger) {
    if (!ctx.scene || !ctx.candidates) {
        throw std::invalid_argument("collect_strong_sample: null context");
    }
    const std::size_t m = ctx.candidates->size();
    TrainingSample sample;
    sample.cloud_snapshot = Tensor(ctx.n_points, 3);
    if (!accumulated.empty()) {
        const RigParams& rig = ctx.candidates->rig;
        sample.cloud_snapshot =
            resize_cloud(accumulated, ctx.n_points, resize_seed, rig.center, rig.radius);
    }
    sample.state = state;
    sample.target.values.assign(m, 0.0);
    sample.target.mask.assign(m, 1);

    const NNIndex index(accumulated);
    for (std::size_t i = 0; i < m; ++i) {
        const PointCloud captured =
            capture(*ctx.scene, ctx.candidates->views[i], ctx.intrinsics, ctx.capture_resolution);
        if (captured.empty()) {
            throw std::runtime_error("collect_strong_sample: empty capture, sample discarded");
        }
        sample.target.values[i] = ground_truth_ig(index, captured, ctx.delta);
    }
    if (ledger) {
        ledger->m_views = static_cast<int>(m);
        ledger->strong_samples += 1;
    }
    return sample;
}

CycleResult run_cycle(const LearnContext& ctx, const RunCycleArgs& args, Rng& rng) {
    if (!ctx.scene || !ctx.candidates) throw std::invalid_argument("run_cycle: null context");
    if (!args.ground_truth) throw std::invalid_argument("run_cycle: null ground truth");
    const std::size_t m = ctx.candidates->size();
    if (args.n_views < 1 || static_cast<std::size_t>(args.n_views) > m) {
        throw std::invalid_argument("run_cycle: n_views out of range");
    }
    const bool uses_net = args.planner == PlannerKind::SSL ||
                          args.planner == PlannerKind::NetworkStrong;
    if (uses_net && !args.net) throw std::invalid_argument("run_cycle: planner needs a network");
    if (args.learn && (args.planner != PlannerKind::SSL || !args.buffer || !args.ledger ||
                       !args.global_t)) {
        throw std::invalid_argument("run_cycle: learn mode needs SSL planner and its state");
    }

    CycleState cycle;
    cycle.visited = ViewSelectionState(m);

    // Pre-defined planner: the zigzag subset in random order; it ignores any
    // shared initial view since that view may fall outside its subset.
    std::vector<std::size_t> predefined_order;
    if (args.planner == PlannerKind::Predefined) {
        predefined_order = zigzag_subset(*ctx.candidates);
        if (static_cast<std::size_t>(args.n_views) > predefined_order.size()) {
            throw std::invalid_argument("run_cycle: n_views exceeds the pre-defined subset");
        }
        for (std::size_t i = 0; i + 1 < predefined_order.size(); ++i) {
            const std::size_t j = i + rng.uniform_index(predefined_order.size() - i);
            std::swap(predefined_order[i], predefined_order[j]);
        }
    }

    std::optional<OccupancyGrid> grid;
    if (args.planner == PlannerKind::Voxel) {
        grid.emplace(OccupancyGrid::for_rig(ctx.candidates->rig, args.voxel_resolution));
    }

    CycleResult result;
    for (int v = 0; v < args.n_views; ++v) {
        std::size_t chosen = 0;
        if (args.learn) {
            IterationLog log = ssl_iteration(ctx, cycle, *args.net, *args.buffer, *args.ledger,
                                             *args.global_t, rng, /*force_random=*/v == 0);
            *args.global_t += 1;
            chosen = log.chosen_view;
            result.logs.push_back(log);
        } else {
            if (args.planner == PlannerKind::Predefined) {
                chosen = predefined_order[static_cast<std::size_t>(v)];
            } else if (v == 0) {
                chosen = args.initial_view ? *args.initial_view : rng.uniform_index(m);
                if (chosen >= m) throw std::invalid_argument("run_cycle: bad initial view");
            } else if (args.planner == PlannerKind::Random) {
                chosen = select_next_view(std::vector<double>(m, 0.0), cycle.visited, 1.0, rng);
            } else if (args.planner == PlannerKind::Voxel) {
                chosen = best_view_voxel(*grid, *ctx.candidates, cycle.visited, args.planning_sensor);
            } else {  // SSL eval / NetworkStrong: frozen network policy
                const std::vector<double> points = network_points(ctx, cycle.accumulated, rng);
                const std::vector<double> pred =
                    args.net->forward(points, state_vector(cycle.visited));
                chosen = select_next_view(pred, cycle.visited, args.eval_epsilon, rng);
            }
            if (cycle.visited.visited(chosen)) {
                throw std::runtime_error("run_cycle: planner revisited a view");
            }
            const PointCloud captured = capture(*ctx.scene, ctx.candidates->views[chosen],
                                                ctx.intrinsics, ctx.capture_resolution);
            if (!captured.empty()) {
                cycle.accumulated = merge_accumulated(cycle.accumulated, captured, ctx.delta);
                if (grid) grid->integrate(captured, ctx.candidates->views[chosen].position);
            }
            cycle.visited = mark_visited(cycle.visited, chosen);
        }
        result.views.push_back(chosen);
        result.ratios.push_back(cycle.accumulated.empty()
                                    ? 0.0
                                    : reconstruction_ratio(*args.ground_truth, cycle.accumulated,
                                                           ctx.delta));
    }
    return result;
}

}  // namespace sslnbv
