#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "imdpbound/emdp.hpp"
#include "imdpbound/errors.hpp"
#include "imdpbound/numeric.hpp"
#include "imdpbound/parallel.hpp"

// Checks that only run when assertions are enabled (debug builds).
#ifndef IMDPBOUND_ASSERT
#define IMDPBOUND_ASSERT(cond) assert(cond)
#endif

namespace imdpbound {

/// Which side of the imprecision the adversary resolves: `min` cooperates with
/// the controller (lower expected cost), `max` opposes it (upper expected cost).
enum class Opt { min, max };

inline std::string_view to_string(Opt m) { return m == Opt::min ? "min" : "max"; }

inline Opt parse_opt(std::string_view s) {
    if (s == "min") return Opt::min;
    if (s == "max") return Opt::max;
    throw InvalidArgument("mode must be 'min' or 'max', got '" + std::string(s) + "'");
}

/// Tolerance on probability sums in credal set feasibility checks.
inline constexpr double kMassTol = 1e-9;

struct CostInterval {
    double c_min = 0.0;
    double c_max = 0.0;

    double endpoint(Opt m) const noexcept { return m == Opt::min ? c_min : c_max; }
    friend bool operator==(const CostInterval&, const CostInterval&) = default;
};

/// A closed set of successor distributions over a sparse support. Two shapes:
/// per-successor probability intervals, or a finite list of candidate distributions.
/// All states outside `targets()` receive probability zero.
class CredalSet {
public:
    enum class Kind { interval, candidates };

    CredalSet() = default;

    static CredalSet interval(std::vector<std::uint32_t> targets, std::vector<double> p_low,
                              std::vector<double> p_high) {
        if (targets.size() != p_low.size() || targets.size() != p_high.size())
            throw InvalidArgument("interval credal set: support and bound vectors differ in length");
        if (targets.empty()) throw InfeasibleCredal("interval credal set has empty support");
        CredalSet cs;
        cs.kind_ = Kind::interval;
        auto order = sorted_order(targets);
        for (std::size_t i : order) {
            const double lo = p_low[i], hi = p_high[i];
            if (!(lo >= 0.0) || !(lo <= hi) || !(hi <= 1.0))
                throw InfeasibleCredal("interval credal set: need 0 <= p_low <= p_high <= 1 for target " +
                                       std::to_string(targets[i]) + ", got [" + format_double(lo) + ", " +
                                       format_double(hi) + "]");
            cs.targets_.push_back(targets[i]);
            cs.low_.push_back(lo);
            cs.high_.push_back(hi);
        }
        double sum_lo = 0.0, sum_hi = 0.0;
        for (std::size_t i = 0; i < cs.targets_.size(); ++i) {
            sum_lo += cs.low_[i];
            sum_hi += cs.high_[i];
            if (cs.high_[i] > cs.low_[i]) cs.slack_.push_back(static_cast<std::uint32_t>(i));
        }
        if (sum_lo > 1.0 + kMassTol || sum_hi < 1.0 - kMassTol)
            throw InfeasibleCredal("interval credal set is infeasible: sum p_low = " + format_double(sum_lo) +
                                   ", sum p_high = " + format_double(sum_hi));
        cs.sum_low_ = sum_lo;
        return cs;
    }

    /// Degenerate interval set holding a single distribution.
    static CredalSet point(std::vector<std::uint32_t> targets, std::vector<double> p) {
        auto q = p;
        return interval(std::move(targets), std::move(p), std::move(q));
    }

    static CredalSet candidates(std::vector<std::uint32_t> targets, std::vector<std::vector<double>> dists) {
        if (dists.empty()) throw InfeasibleCredal("candidate credal set has no distributions");
        if (targets.empty()) throw InfeasibleCredal("candidate credal set has empty support");
        CredalSet cs;
        cs.kind_ = Kind::candidates;
        auto order = sorted_order(targets);
        for (std::size_t i : order) cs.targets_.push_back(targets[i]);
        for (const auto& d : dists) {
            if (d.size() != targets.size())
                throw InvalidArgument("candidate distribution length differs from its support");
            std::vector<double> sorted(d.size());
            double sum = 0.0;
            for (std::size_t j = 0; j < order.size(); ++j) {
                sorted[j] = d[order[j]];
                if (!(sorted[j] >= 0.0)) throw InfeasibleCredal("candidate distribution has a negative entry");
                sum += sorted[j];
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw InfeasibleCredal("candidate distribution sums to " + format_double(sum) + ", not 1");
            cs.dists_.push_back(std::move(sorted));
        }
        return cs;
    }

    Kind kind() const noexcept { return kind_; }
    std::size_t support_size() const noexcept { return targets_.size(); }
    std::span<const std::uint32_t> targets() const noexcept { return targets_; }
    std::span<const double> p_low() const noexcept { return low_; }
    std::span<const double> p_high() const noexcept { return high_; }
    const std::vector<std::vector<double>>& distributions() const noexcept { return dists_; }
    /// Positions (into targets()) whose interval has positive width.
    std::span<const std::uint32_t> slack() const noexcept { return slack_; }
    double sum_low() const noexcept { return sum_low_; }

    /// Membership of a distribution given over targets() order.
    bool contains(std::span<const double> p, double tol = kMassTol) const {
        if (p.size() != targets_.size()) return false;
        double sum = 0.0;
        for (double x : p) {
            if (x < -tol) return false;
            sum += x;
        }
        if (std::abs(sum - 1.0) > tol) return false;
        if (kind_ == Kind::interval) {
            for (std::size_t i = 0; i < p.size(); ++i)
                if (p[i] < low_[i] - tol || p[i] > high_[i] + tol) return false;
            return true;
        }
        for (const auto& d : dists_) {
            bool same = true;
            for (std::size_t i = 0; i < p.size() && same; ++i) same = std::abs(d[i] - p[i]) <= tol;
            if (same) return true;
        }
        return false;
    }

    friend bool operator==(const CredalSet&, const CredalSet&) = default;

private:
    static std::vector<std::size_t> sorted_order(const std::vector<std::uint32_t>& targets) {
        std::vector<std::size_t> order(targets.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return targets[a] < targets[b]; });
        for (std::size_t i = 1; i < order.size(); ++i)
            if (targets[order[i]] == targets[order[i - 1]])
                throw InvalidArgument("credal set lists target " + std::to_string(targets[order[i]]) + " twice");
        return order;
    }

    Kind kind_ = Kind::interval;
    std::vector<std::uint32_t> targets_;
    std::vector<double> low_, high_;
    std::vector<std::vector<double>> dists_;
    std::vector<std::uint32_t> slack_;
    double sum_low_ = 0.0;
};

/// Finite-state imprecise MDP. States flagged goal or failure are terminal:
/// absorbing with cost {0}. Terminal states need no table entries; the solver
/// pins their value to zero.
class Imdp {
public:
    struct Entry {
        CredalSet credal;
        CostInterval cost;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    Imdp() = default;

    Imdp(std::vector<std::string> state_names, std::vector<StateKind> kinds, std::vector<std::string> actions)
        : names_(std::move(state_names)), kinds_(std::move(kinds)), actions_(std::move(actions)) {
        if (names_.size() != kinds_.size()) throw InvalidArgument("state names and kinds differ in length");
        if (names_.empty()) throw InvalidArgument("an IMDP needs at least one state");
        if (actions_.empty()) throw InvalidArgument("an IMDP needs at least one action");
        if (names_.size() > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("too many states");
        table_.resize(names_.size() * actions_.size());
    }

    std::size_t num_states() const noexcept { return names_.size(); }
    std::size_t num_actions() const noexcept { return actions_.size(); }
    const std::vector<std::string>& state_names() const noexcept { return names_; }
    const std::vector<StateKind>& kinds() const noexcept { return kinds_; }
    const std::vector<std::string>& actions() const noexcept { return actions_; }
    StateKind kind(std::size_t s) const noexcept { return kinds_[s]; }
    bool is_terminal(std::size_t s) const noexcept { return kinds_[s] != StateKind::regular; }

    std::size_t action_index(std::string_view name) const {
        for (std::size_t a = 0; a < actions_.size(); ++a)
            if (actions_[a] == name) return a;
        throw InvalidArgument("unknown action '" + std::string(name) + "'");
    }

    void set(std::size_t s, std::size_t a, CredalSet credal, CostInterval cost) {
        if (s >= num_states() || a >= num_actions()) throw InvalidArgument("state or action index out of range");
        if (!(cost.c_min >= 0.0) || !(cost.c_min <= cost.c_max))
            throw InvalidArgument("cost interval of state " + std::to_string(s) + " needs 0 <= c_min <= c_max");
        for (auto t : credal.targets())
            if (t >= num_states())
                throw InvalidArgument("credal set of state " + std::to_string(s) + " targets unknown state " +
                                      std::to_string(t));
        if (is_terminal(s)) {
            if (cost.c_min != 0.0 || cost.c_max != 0.0)
                throw ConsistencyError("terminal state " + names_[s] + " must have cost {0}");
            if (!all_mass_terminal(credal))
                throw ConsistencyError("terminal state " + names_[s] + " must be absorbing");
        }
        table_[s * num_actions() + a] = Entry{std::move(credal), cost};
    }

    bool has_entry(std::size_t s, std::size_t a) const noexcept {
        return table_[s * num_actions() + a].has_value();
    }

    const Entry& entry(std::size_t s, std::size_t a) const {
        const auto& e = table_[s * num_actions() + a];
        if (!e) throw InvalidArgument("no entry for state " + names_[s] + ", action " + actions_[a]);
        return *e;
    }

    /// Throws ConsistencyError when a non-terminal (state, action) pair lacks an entry.
    void validate() const {
        for (std::size_t s = 0; s < num_states(); ++s) {
            if (is_terminal(s)) continue;
            for (std::size_t a = 0; a < num_actions(); ++a)
                if (!has_entry(s, a))
                    throw ConsistencyError("state " + names_[s] + " has no entry for action " + actions_[a]);
        }
    }

    friend bool operator==(const Imdp&, const Imdp&) = default;

private:
    bool all_mass_terminal(const CredalSet& c) const {
        for (auto t : c.targets())
            if (!is_terminal(t)) return false;
        return true;
    }

    std::vector<std::string> names_;
    std::vector<StateKind> kinds_;
    std::vector<std::string> actions_;
    std::vector<std::optional<Entry>> table_;
};

/// Extended nonnegative value per state (+infinity allowed).
struct ValueTable {
    std::vector<double> values;

    ValueTable() = default;
    explicit ValueTable(std::size_t n, double fill = 0.0) : values(n, fill) {}
    explicit ValueTable(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t s) const noexcept { return values[s]; }
    double& operator[](std::size_t s) noexcept { return values[s]; }
    std::span<const double> view() const noexcept { return values; }

    friend bool operator==(const ValueTable&, const ValueTable&) = default;
};

/// Action index per state; nullopt on terminal states.
struct Strategy {
    std::vector<std::optional<std::size_t>> choice;

    std::size_t size() const noexcept { return choice.size(); }
    friend bool operator==(const Strategy&, const Strategy&) = default;
};

/// Chosen distribution per (state, action), aligned with the credal set's targets();
/// empty for terminal states.
struct Adversary {
    std::size_t num_actions = 0;
    std::vector<std::vector<double>> choice;

    const std::vector<double>& at(std::size_t s, std::size_t a) const { return choice[s * num_actions + a]; }
};

struct InnerResult {
    double value = 0.0;
    std::vector<double> witness;
};

namespace detail {

/// Reusable buffer for the ordering step of the interval greedy.
struct InnerScratch {
    std::vector<std::uint32_t> order;
};

inline double weighted(double p, double v) noexcept { return p > 0.0 ? p * v : 0.0; }

/// Ordered greedy for interval sets: start from p_low, then hand the remaining mass
/// to slack successors in order of value (ascending for min, descending for max),
/// each up to its p_high. Infinite values need no special case: zero-mass entries
/// are skipped, and the ordering puts infinite successors last for min.
template <bool Witness>
double interval_opt(const CredalSet& cs, std::span<const double> v, Opt mode, InnerScratch& scratch,
                    std::vector<double>* witness) {
    const auto targets = cs.targets();
    const auto lo = cs.p_low();
    const auto hi = cs.p_high();
    double value = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) value += weighted(lo[i], v[targets[i]]);
    if constexpr (Witness) witness->assign(lo.begin(), lo.end());

    const auto slack = cs.slack();
    auto& order = scratch.order;
    order.assign(slack.begin(), slack.end());
    if (mode == Opt::min) {
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = v[targets[a]], vb = v[targets[b]];
            return va < vb || (va == vb && a < b);
        });
    } else {
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = v[targets[a]], vb = v[targets[b]];
            return va > vb || (va == vb && a < b);
        });
    }
    double budget = 1.0 - cs.sum_low();
    for (std::uint32_t i : order) {
        if (budget <= 0.0) break;
        const double add = std::min(hi[i] - lo[i], budget);
        budget -= add;
        value += weighted(add, v[targets[i]]);
        if constexpr (Witness) (*witness)[i] += add;
    }
    return value;
}

template <bool Witness>
double candidates_opt(const CredalSet& cs, std::span<const double> v, Opt mode, std::vector<double>* witness) {
    const auto targets = cs.targets();
    const auto& dists = cs.distributions();
    double best = 0.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < dists.size(); ++k) {
        double e = 0.0;
        for (std::size_t i = 0; i < targets.size(); ++i) e += weighted(dists[k][i], v[targets[i]]);
        if (k == 0 || (mode == Opt::min ? e < best : e > best)) {
            best = e;
            best_k = k;
        }
    }
    if constexpr (Witness) *witness = dists[best_k];
    return best;
}

inline double inner_value(const CredalSet& cs, std::span<const double> v, Opt mode, InnerScratch& scratch) {
    return cs.kind() == CredalSet::Kind::interval ? interval_opt<false>(cs, v, mode, scratch, nullptr)
                                                  : candidates_opt<false>(cs, v, mode, nullptr);
}

} // namespace detail

/// Optimal expectation of `v` over the credal set, with an achieving distribution
/// (aligned with credal.targets()).
inline InnerResult inner_opt(const CredalSet& credal, std::span<const double> v, Opt mode) {
    for (auto t : credal.targets())
        if (t >= v.size()) throw InvalidArgument("value table has no entry for state " + std::to_string(t));
    InnerResult r;
    detail::InnerScratch scratch;
    r.value = credal.kind() == CredalSet::Kind::interval
                  ? detail::interval_opt<true>(credal, v, mode, scratch, &r.witness)
                  : detail::candidates_opt<true>(credal, v, mode, &r.witness);
    return r;
}

inline InnerResult inner_opt(const CredalSet& credal, const ValueTable& v, Opt mode) {
    return inner_opt(credal, v.view(), mode);
}

namespace detail {

/// One robust Bellman backup for a state; returns (value, argmin action).
/// `fixed` restricts the minimum to a single action.
inline std::pair<double, std::size_t> backup(const Imdp& m, std::size_t s, std::span<const double> v, Opt mode,
                                             InnerScratch& scratch, std::optional<std::size_t> fixed = {}) {
    double best = kInfinity;
    std::size_t best_a = fixed.value_or(0);
    const std::size_t a_begin = fixed ? *fixed : 0;
    const std::size_t a_end = fixed ? *fixed + 1 : m.num_actions();
    for (std::size_t a = a_begin; a < a_end; ++a) {
        const auto& e = m.entry(s, a);
        const double q = e.cost.endpoint(mode) + inner_value(e.credal, v, mode, scratch);
        if (q < best) {
            best = q;
            best_a = a;
        }
    }
    return {best, best_a};
}

inline void check_table(const Imdp& m, const ValueTable& v) {
    if (v.size() != m.num_states())
        throw InvalidArgument("value table has " + std::to_string(v.size()) + " entries, IMDP has " +
                              std::to_string(m.num_states()) + " states");
}

} // namespace detail

/// One application of the robust Bellman operator: terminal states map to 0, every
/// other state to min over actions of (cost endpoint + optimal expectation).
/// Reads `v` and writes a fresh table, so the result does not depend on `threads`.
inline ValueTable vi_sweep(const Imdp& m, const ValueTable& v, Opt mode, std::size_t threads = 1) {
    detail::check_table(m, v);
    ValueTable out(m.num_states(), 0.0);
    parallel_for(m.num_states(), threads, [&](std::size_t b, std::size_t e) {
        detail::InnerScratch scratch;
        for (std::size_t s = b; s < e; ++s)
            if (!m.is_terminal(s)) out[s] = detail::backup(m, s, v.view(), mode, scratch).first;
    });
    return out;
}

struct ViOptions {
    double tol = 1e-9;
    std::size_t max_iter = 100000;
    double divergence_cap = 1e9;
    std::size_t threads = 1;
};

struct ViReport {
    Opt mode = Opt::min;
    std::size_t iterations = 0;
    /// Sup-norm change of the last sweep over states that stayed finite.
    double residual = 0.0;
    bool converged = false;
    std::size_t infinite_states = 0;
    /// Most negative per-state change between consecutive sweeps; >= 0 for a monotone chain.
    double min_increment = 0.0;
};

struct ViResult {
    ValueTable values;
    Strategy strategy;
    Adversary adversary;
    ViReport report;
};

namespace detail {

/// Iterates `step` from the zero table with divergence promotion and residual
/// tracking shared by value_iteration and evaluate_strategy.
template <typename Step>
ValueTable iterate_from_bottom(const Imdp& m, const ViOptions& opt, Opt mode, ViReport& report, Step&& step) {
    if (!(opt.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (!(opt.divergence_cap > 0.0)) throw InvalidArgument("divergence cap must be positive");
    const std::size_t n = m.num_states();
    ValueTable cur(n, 0.0), next(n, 0.0);
    report = ViReport{};
    report.mode = mode;
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        parallel_for(n, opt.threads, [&](std::size_t b, std::size_t e) {
            InnerScratch scratch;
            for (std::size_t s = b; s < e; ++s) {
                if (m.is_terminal(s)) {
                    next[s] = 0.0;
                } else if (std::isinf(cur[s])) {
                    next[s] = kInfinity;
                } else {
                    const double x = step(s, cur.view(), scratch);
                    next[s] = x > opt.divergence_cap ? kInfinity : x;
                }
            }
        });
        double residual = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            if (std::isinf(next[s])) continue;
            const double diff = next[s] - cur[s];
            // Monotone chain: the zero table is below every iterate and the operator is monotone.
            IMDPBOUND_ASSERT(diff >= -1e-9 * std::max(1.0, std::abs(cur[s])));
            residual = std::max(residual, std::abs(diff));
            report.min_increment = std::min(report.min_increment, diff);
        }
        std::swap(cur, next);
        report.iterations = it;
        report.residual = residual;
        if (residual < opt.tol) {
            report.converged = true;
            break;
        }
    }
    report.infinite_states = static_cast<std::size_t>(
        std::count_if(cur.values.begin(), cur.values.end(), [](double x) { return std::isinf(x); }));
    return cur;
}

inline Adversary extract_adversary(const Imdp& m, const ValueTable& v, Opt mode) {
    Adversary adv;
    adv.num_actions = m.num_actions();
    adv.choice.resize(m.num_states() * m.num_actions());
    for (std::size_t s = 0; s < m.num_states(); ++s) {
        if (m.is_terminal(s)) continue;
        for (std::size_t a = 0; a < m.num_actions(); ++a)
            adv.choice[s * m.num_actions() + a] = inner_opt(m.entry(s, a).credal, v, mode).witness;
    }
    return adv;
}

} // namespace detail

/// Robust value iteration from the zero table. Sweeps stop once the sup-norm
/// change over finite states drops below `tol`; states whose value exceeds the
/// divergence cap are fixed at +infinity. The iterates increase monotonically, so
/// the returned values are lower bounds on the fixpoint in both modes. Hitting
/// `max_iter` is reported (converged = false), not thrown.
inline ViResult value_iteration(const Imdp& m, Opt mode, const ViOptions& opt = {}) {
    m.validate();
    ViResult r;
    r.values = detail::iterate_from_bottom(m, opt, mode, r.report,
                                           [&](std::size_t s, std::span<const double> v, detail::InnerScratch& sc) {
                                               return detail::backup(m, s, v, mode, sc).first;
                                           });
    r.strategy.choice.assign(m.num_states(), std::nullopt);
    detail::InnerScratch scratch;
    for (std::size_t s = 0; s < m.num_states(); ++s)
        if (!m.is_terminal(s)) r.strategy.choice[s] = detail::backup(m, s, r.values.view(), mode, scratch).second;
    r.adversary = detail::extract_adversary(m, r.values, mode);
    return r;
}

namespace detail {

inline void check_strategy(const Imdp& m, const Strategy& strategy) {
    if (strategy.size() != m.num_states()) throw InvalidArgument("strategy does not match the IMDP's state count");
    for (std::size_t s = 0; s < m.num_states(); ++s) {
        if (m.is_terminal(s)) continue;
        if (!strategy.choice[s]) throw UndefinedStrategy("strategy undefined at state " + m.state_names()[s]);
        if (*strategy.choice[s] >= m.num_actions())
            throw InvalidArgument("strategy picks unknown action at state " + m.state_names()[s]);
    }
}

} // namespace detail

/// Exactly n_steps strategy-restricted robust sweeps from the zero table: the
/// expected cost of the first n_steps steps under `strategy` with the stepwise
/// optimal adversary for `mode`.
inline ValueTable bounded_horizon_values(const Imdp& m, const Strategy& strategy, std::size_t n_steps, Opt mode,
                                         std::size_t threads = 1) {
    m.validate();
    detail::check_strategy(m, strategy);
    ValueTable cur(m.num_states(), 0.0), next(m.num_states(), 0.0);
    for (std::size_t it = 0; it < n_steps; ++it) {
        parallel_for(m.num_states(), threads, [&](std::size_t b, std::size_t e) {
            detail::InnerScratch scratch;
            for (std::size_t s = b; s < e; ++s)
                next[s] = m.is_terminal(s) ? 0.0
                                           : detail::backup(m, s, cur.view(), mode, scratch, strategy.choice[s]).first;
        });
        std::swap(cur, next);
    }
    return cur;
}

/// Unbounded-horizon counterpart of bounded_horizon_values: iterates the
/// strategy-restricted operator to convergence.
inline std::pair<ValueTable, ViReport> evaluate_strategy(const Imdp& m, const Strategy& strategy, Opt mode,
                                                         const ViOptions& opt = {}) {
    m.validate();
    detail::check_strategy(m, strategy);
    ViReport report;
    auto v = detail::iterate_from_bottom(m, opt, mode, report,
                                         [&](std::size_t s, std::span<const double> cur, detail::InnerScratch& sc) {
                                             return detail::backup(m, s, cur, mode, sc, strategy.choice[s]).first;
                                         });
    return {std::move(v), report};
}

} // namespace imdpbound
