#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "imdpbound/errors.hpp"
#include "imdpbound/geometry.hpp"
#include "imdpbound/numeric.hpp"
#include "imdpbound/parallel.hpp"
#include "imdpbound/rng.hpp"

namespace imdpbound {

struct ActionSpec {
    std::string name;
    Point drift;              // mean displacement per step
    double noise_half_width;  // successor is uniform on the box of this half-width around s + drift
    double cost;
};

enum class StateKind { regular, goal, failure };

inline std::string_view to_string(StateKind k) {
    switch (k) {
    case StateKind::goal: return "goal";
    case StateKind::failure: return "failure";
    default: return "regular";
    }
}

/// Box-kernel EMDP: a compact box domain, absorbing goal and failure boxes, and a
/// finite action set with truncated-uniform successor boxes. Entering the failure
/// box costs `failure_penalty` once, on top of the action cost.
struct WalkerModel {
    std::string name = "semi-random-walk";
    Box domain;
    Box goal;
    Box failure;
    std::vector<ActionSpec> actions;
    double failure_penalty = 0.0;

    /// The semi-random walk on [0,1.2]^2 over (x, t): finish x >= 1 before t = 1.
    static WalkerModel defaults() {
        WalkerModel m;
        m.domain = Box({0.0, 0.0}, {1.2, 1.2});
        m.goal = Box({1.0, 0.0}, {1.2, 1.0});
        m.failure = Box({0.0, 1.0}, {1.2, 1.2});
        m.actions = {
            {"fast", {0.25, 0.05}, 0.1, 3.0},
            {"slow", {0.10, 0.10}, 0.1, 1.0},
        };
        m.failure_penalty = 10.0;
        return m;
    }

    std::size_t dim() const noexcept { return domain.dim(); }
    std::size_t num_actions() const noexcept { return actions.size(); }

    void validate() const {
        if (domain.dim() == 0) throw InvalidArgument("model domain is empty");
        if (goal.dim() != dim() || failure.dim() != dim()) throw InvalidArgument("terminal boxes differ in dimension");
        if (!domain.contains(goal)) throw ConsistencyError("goal box " + goal.to_string() + " is not inside the domain");
        if (!domain.contains(failure))
            throw ConsistencyError("failure box " + failure.to_string() + " is not inside the domain");
        if (intersection_volume(goal, failure) > kGeomTol)
            throw ConsistencyError("goal and failure boxes overlap with positive volume");
        if (actions.empty()) throw InvalidArgument("model has no actions");
        if (!(failure_penalty >= 0.0) || !std::isfinite(failure_penalty))
            throw InvalidArgument("failure penalty must be a nonnegative finite number");
        for (std::size_t i = 0; i < actions.size(); ++i) {
            const auto& a = actions[i];
            if (a.name.empty()) throw InvalidArgument("action " + std::to_string(i) + " has no name");
            for (std::size_t j = 0; j < i; ++j)
                if (actions[j].name == a.name) throw InvalidArgument("duplicate action name '" + a.name + "'");
            if (a.drift.dim() != dim()) throw InvalidArgument("action '" + a.name + "' drift has wrong dimension");
            if (!(a.noise_half_width > 0.0)) throw InvalidArgument("action '" + a.name + "' needs positive noise");
            if (!(a.cost >= 0.0) || !std::isfinite(a.cost))
                throw InvalidArgument("action '" + a.name + "' needs a nonnegative finite cost");
        }
    }

    std::size_t action_index(std::string_view name) const {
        for (std::size_t i = 0; i < actions.size(); ++i)
            if (actions[i].name == name) return i;
        throw InvalidArgument("unknown action '" + std::string(name) + "'");
    }

    StateKind classify(const Point& s) const noexcept {
        if (in_half_open(goal, s, domain)) return StateKind::goal;
        if (in_half_open(failure, s, domain)) return StateKind::failure;
        return StateKind::regular;
    }

    bool is_terminal(const Point& s) const noexcept { return classify(s) != StateKind::regular; }

    Box kernel_box(const Point& s, std::size_t a) const {
        const auto& act = actions.at(a);
        return Box::centered(s + act.drift, act.noise_half_width);
    }
};

/// Draws a successor uniformly from the successor box clipped to the domain.
inline Point kernel_sample(const WalkerModel& model, const Point& s, std::size_t a, Rng& rng) {
    if (a >= model.num_actions()) throw InvalidArgument("unknown action index " + std::to_string(a));
    if (!model.domain.contains(s)) throw DomainViolation("state " + s.to_string() + " outside domain");
    if (model.is_terminal(s)) throw InvalidArgument("state " + s.to_string() + " is terminal");
    const auto& act = model.actions[a];
    Point next = s;
    for (std::size_t d = 0; d < s.dim(); ++d) {
        const double c = s[d] + act.drift[d];
        const double lo = std::max(c - act.noise_half_width, model.domain.lo()[d]);
        const double hi = std::min(c + act.noise_half_width, model.domain.hi()[d]);
        if (!(hi > lo)) throw DegenerateKernel("successor box of " + s.to_string() + " misses the domain");
        next[d] = rng.uniform(lo, hi);
    }
    return next;
}

inline Point kernel_sample(const WalkerModel& model, const Point& s, std::string_view action, Rng& rng) {
    return kernel_sample(model, s, model.action_index(action), rng);
}

/// Immediate cost of choosing `a` in `s`, excluding the failure penalty (which
/// depends on the successor; see transition_cost).
inline double step_cost(const WalkerModel& model, const Point& s, std::size_t a) {
    if (model.is_terminal(s)) return 0.0;
    return model.actions.at(a).cost;
}

inline double step_cost(const WalkerModel& model, const Point& s, std::string_view action) {
    return step_cost(model, s, model.action_index(action));
}

/// Cost realized on the transition s --a--> next.
inline double transition_cost(const WalkerModel& model, const Point& s, std::size_t a, const Point& next) {
    if (model.is_terminal(s)) return 0.0;
    double c = model.actions.at(a).cost;
    if (model.classify(next) == StateKind::failure) c += model.failure_penalty;
    return c;
}

/// Expected one-step cost with the failure penalty averaged over the kernel.
inline double expected_step_cost(const WalkerModel& model, const Point& s, std::size_t a) {
    if (model.is_terminal(s)) return 0.0;
    const double p_fail = overlap_fraction(model.kernel_box(s, a), model.failure, model.domain);
    return model.actions.at(a).cost + model.failure_penalty * p_fail;
}

/// Maps a continuous state to an action index; throws UndefinedStrategy when it has none.
using PointPolicy = std::function<std::size_t(const Point&)>;

inline PointPolicy constant_policy(std::size_t a) {
    return [a](const Point&) { return a; };
}

enum class RunEnd { goal, failure, horizon_capped };

struct RunStep {
    Point state;
    std::size_t action;
    double incurred_cost;
};

struct Run {
    std::vector<RunStep> steps;
    RunEnd terminal = RunEnd::horizon_capped;
    Point final_state;

    double total_cost() const {
        double c = 0.0;
        for (const auto& s : steps) c += s.incurred_cost;
        return c;
    }
};

namespace detail {

template <bool Record>
double rollout(const WalkerModel& model, const PointPolicy& policy, Point s, std::size_t horizon, Rng& rng,
               Run* record) {
    double total = 0.0;
    for (std::size_t step = 0; step < horizon; ++step) {
        const StateKind kind = model.classify(s);
        if (kind != StateKind::regular) {
            if constexpr (Record) {
                record->terminal = kind == StateKind::goal ? RunEnd::goal : RunEnd::failure;
                record->final_state = s;
            }
            return total;
        }
        const std::size_t a = policy(s);
        const Point next = kernel_sample(model, s, a, rng);
        const double c = transition_cost(model, s, a, next);
        total += c;
        if constexpr (Record) record->steps.push_back({s, a, c});
        s = next;
    }
    if constexpr (Record) {
        const StateKind kind = model.classify(s);
        record->terminal = kind == StateKind::goal      ? RunEnd::goal
                           : kind == StateKind::failure ? RunEnd::failure
                                                        : RunEnd::horizon_capped;
        record->final_state = s;
    }
    return total;
}

} // namespace detail

/// One recorded rollout of at most `horizon` steps.
inline Run simulate_run(const WalkerModel& model, const PointPolicy& policy, const Point& s0, std::size_t horizon,
                        Rng& rng) {
    Run run;
    detail::rollout<true>(model, policy, s0, horizon, rng, &run);
    return run;
}

struct McEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t n_runs = 0;
    std::uint64_t seed = 0;
};

/// Monte-Carlo estimate of the expected run cost from s0 under `policy`, each run
/// truncated after `horizon` steps. Run r draws from Rng::for_run(seed, r) and the
/// per-run costs are combined by pairwise summation in run order, so the result
/// is bit-identical for any thread count.
inline McEstimate mc_expected_cost(const WalkerModel& model, const PointPolicy& policy, const Point& s0,
                                   std::size_t horizon, std::uint64_t n_runs, std::uint64_t seed,
                                   std::size_t threads = 1) {
    if (horizon == 0) throw InvalidArgument("horizon must be at least 1");
    if (n_runs == 0) throw InvalidArgument("n_runs must be at least 1");
    if (!model.domain.contains(s0)) throw DomainViolation("start state " + s0.to_string() + " outside domain");
    std::vector<double> costs(n_runs);
    parallel_for(n_runs, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            Rng rng = Rng::for_run(seed, r);
            costs[r] = detail::rollout<false>(model, policy, s0, horizon, rng, nullptr);
        }
    });
    McEstimate est;
    est.n_runs = n_runs;
    est.seed = seed;
    const double n = static_cast<double>(n_runs);
    est.mean = pairwise_sum(costs) / n;
    if (n_runs > 1) {
        std::vector<double> sq(n_runs);
        for (std::size_t r = 0; r < n_runs; ++r) sq[r] = (costs[r] - est.mean) * (costs[r] - est.mean);
        const double var = pairwise_sum(sq) / (n - 1.0);
        est.std_error = std::sqrt(var / n);
    }
    return est;
}

struct FineGridResult {
    GridPartition partition;
    std::vector<StateKind> kinds;
    std::vector<double> values;
    std::size_t iterations = 0;
    double residual = 0.0;
    bool converged = false;
    /// Most negative per-state change seen between consecutive sweeps (>= 0 for a monotone chain).
    double min_increment = 0.0;
};

/// Point-valued discretization of the EMDP: one precise state per fine cell, located
/// at the cell midpoint, with transition probabilities given by the exact kernel
/// mass of each cell. Value iteration from the zero table. Non-convergence is
/// reported through `converged` and `residual`, not thrown.
inline FineGridResult fine_grid_oracle(const WalkerModel& model, double fine_width, double tol,
                                       std::size_t max_iter, std::size_t threads = 1) {
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    model.validate();
    FineGridResult out{GridPartition::uniform(model.domain, fine_width), {}, {}, 0, 0.0, false, 0.0};
    const GridPartition& grid = out.partition;
    const std::size_t n = grid.size();
    const std::size_t n_act = model.num_actions();
    const std::size_t K = grid.dim();

    out.kinds.resize(n);
    std::vector<Point> mids(n);
    for (std::size_t k = 0; k < n; ++k) {
        mids[k] = grid.region_box(k).center();
        out.kinds[k] = model.classify(mids[k]);
    }

    struct Row {
        double cost = 0.0;
        std::vector<std::uint32_t> targets;
        std::vector<double> probs;
    };
    std::vector<Row> rows(n * n_act);
    parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            if (out.kinds[k] != StateKind::regular) continue;
            for (std::size_t a = 0; a < n_act; ++a) {
                const Box kern = model.kernel_box(mids[k], a);
                Row& row = rows[k * n_act + a];
                row.cost = expected_step_cost(model, mids[k], a);
                std::array<IndexRange, kMaxDim> ranges{};
                std::array<std::vector<double>, kMaxDim> factors{};
                for (std::size_t d = 0; d < K; ++d) {
                    ranges[d] = grid.cells_overlapping(d, kern.lo()[d], kern.hi()[d]);
                    for (std::size_t i = ranges[d].begin; i < ranges[d].end; ++i)
                        factors[d].push_back(overlap_ratio_1d(kern.center()[d], kern.width(d) / 2, grid.cell_lo(d, i),
                                                              grid.cell_hi(d, i), model.domain.lo()[d],
                                                              model.domain.hi()[d]));
                }
                RegionId id;
                id.dim = K;
                for (std::size_t d = 0; d < K; ++d) id[d] = ranges[d].begin;
                while (true) {
                    double p = 1.0;
                    for (std::size_t d = 0; d < K; ++d) p *= factors[d][id[d] - ranges[d].begin];
                    if (p > 0.0) {
                        row.targets.push_back(static_cast<std::uint32_t>(grid.linear_index(id)));
                        row.probs.push_back(p);
                    }
                    std::size_t d = 0;
                    for (; d < K; ++d) {
                        if (++id[d] < ranges[d].end) break;
                        id[d] = ranges[d].begin;
                    }
                    if (d == K) break;
                }
            }
        }
    });

    std::vector<double> cur(n, 0.0), next(n, 0.0);
    for (std::size_t it = 1; it <= max_iter; ++it) {
        parallel_for(n, threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                if (out.kinds[k] != StateKind::regular) {
                    next[k] = 0.0;
                    continue;
                }
                double best = kInfinity;
                for (std::size_t a = 0; a < n_act; ++a) {
                    const Row& row = rows[k * n_act + a];
                    double v = row.cost;
                    for (std::size_t j = 0; j < row.targets.size(); ++j) v += row.probs[j] * cur[row.targets[j]];
                    best = std::min(best, v);
                }
                next[k] = best;
            }
        });
        double residual = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double diff = next[k] - cur[k];
            residual = std::max(residual, std::abs(diff));
            out.min_increment = std::min(out.min_increment, diff);
        }
        cur.swap(next);
        out.iterations = it;
        out.residual = residual;
        if (residual < tol) {
            out.converged = true;
            break;
        }
    }
    out.values = std::move(cur);
    return out;
}

} // namespace imdpbound
