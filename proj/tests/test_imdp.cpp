#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "imdpbound/brute_force.hpp"
#include "imdpbound/imdp.hpp"
#include "oracles.hpp"

using namespace imdpbound;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

/// s --(cost 1, mass to goal in [0.5, 1], rest stays)--> goal.
Imdp geometric_imdp() {
    Imdp m({"s", "goal"}, {StateKind::regular, StateKind::goal}, {"go"});
    m.set(0, 0, CredalSet::interval({0, 1}, {0.0, 0.5}, {0.5, 1.0}), {1.0, 1.0});
    return m;
}

/// The same instance with the two extreme points of the interval set as candidates.
Imdp geometric_candidates() {
    Imdp m({"s", "goal"}, {StateKind::regular, StateKind::goal}, {"go"});
    m.set(0, 0, CredalSet::candidates({0, 1}, {{0.0, 1.0}, {0.5, 0.5}}), {1.0, 1.0});
    return m;
}

/// s -> m -> g with unit costs and point transitions.
Imdp chain_imdp() {
    Imdp m({"s", "m", "g"}, {StateKind::regular, StateKind::regular, StateKind::goal}, {"step"});
    m.set(0, 0, CredalSet::point({1}, {1.0}), {1.0, 1.0});
    m.set(1, 0, CredalSet::point({2}, {1.0}), {1.0, 1.0});
    return m;
}

CredalSet random_interval_set(Rng& rng, std::size_t n_states) {
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(n_states, 8));
    std::vector<std::uint32_t> targets(n_states);
    std::iota(targets.begin(), targets.end(), 0u);
    for (std::size_t i = 0; i < k; ++i) std::swap(targets[i], targets[i + rng.below(n_states - i)]);
    targets.resize(k);
    // Interval around a random distribution, so the set is feasible.
    const auto p = oracle::random_simplex(k, rng);
    std::vector<double> lo(k), hi(k);
    for (std::size_t i = 0; i < k; ++i) {
        lo[i] = std::max(0.0, p[i] - rng.uniform(0.0, 0.3));
        hi[i] = std::min(1.0, p[i] + rng.uniform(0.0, 0.3));
        if (rng.below(5) == 0) lo[i] = hi[i] = p[i];
    }
    return CredalSet::interval(targets, lo, hi);
}

/// A random member of an interval credal set.
std::vector<double> random_member(const CredalSet& cs, Rng& rng) {
    const auto lo = cs.p_low(), hi = cs.p_high();
    const std::size_t k = lo.size();
    std::vector<double> p(lo.begin(), lo.end());
    double rem = 1.0 - cs.sum_low();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) std::swap(order[i], order[i + rng.below(k - i)]);
    double caps_after = 0.0;
    for (std::size_t i = 0; i < k; ++i) caps_after += hi[i] - lo[i];
    for (std::size_t j : order) {
        const double cap = hi[j] - lo[j];
        caps_after -= cap;
        const double need = std::max(0.0, rem - caps_after);
        const double add = need + rng.uniform01() * (std::min(cap, rem) - need);
        p[j] += add;
        rem -= add;
    }
    return p;
}

} // namespace

TEST(CredalSet, IntervalInvariants) {
    EXPECT_THROW(CredalSet::interval({0, 1}, {0.6, 0.6}, {0.7, 0.7}), InfeasibleCredal);
    EXPECT_THROW(CredalSet::interval({0, 1}, {0.1, 0.1}, {0.2, 0.2}), InfeasibleCredal);
    EXPECT_THROW(CredalSet::interval({0, 1}, {0.5, -0.1}, {0.7, 0.7}), InfeasibleCredal);
    EXPECT_THROW(CredalSet::interval({0, 1}, {0.5, 0.6}, {0.4, 0.7}), InfeasibleCredal);
    EXPECT_THROW(CredalSet::interval({0, 0}, {0.5, 0.5}, {0.5, 0.5}), InvalidArgument);
    EXPECT_NO_THROW(CredalSet::interval({0, 1}, {0.5, 0.0}, {1.0, 0.5}));
}

TEST(CredalSet, CandidateInvariants) {
    EXPECT_THROW(CredalSet::candidates({0, 1}, {}), InfeasibleCredal);
    EXPECT_THROW(CredalSet::candidates({0, 1}, {{0.5, 0.6}}), InfeasibleCredal);
    EXPECT_THROW(CredalSet::candidates({0, 1}, {{1.1, -0.1}}), InfeasibleCredal);
    EXPECT_THROW(CredalSet::candidates({0, 1}, {{1.0}}), InvalidArgument);
}

TEST(CredalSet, TargetsAreSorted) {
    const auto cs = CredalSet::interval({3, 1}, {0.2, 0.3}, {0.7, 0.8});
    EXPECT_EQ(cs.targets()[0], 1u);
    EXPECT_EQ(cs.p_low()[0], 0.3);
    EXPECT_EQ(cs.p_high()[1], 0.7);
}

TEST(InnerOpt, TwoSuccessorInterval) {
    const auto cs = CredalSet::interval({0, 1}, {0.5, 0.0}, {1.0, 0.5});
    const std::vector<double> v{0.0, 10.0};
    const auto lo = inner_opt(cs, v, Opt::min);
    EXPECT_DOUBLE_EQ(lo.value, 0.0);
    EXPECT_EQ(lo.witness, (std::vector<double>{1.0, 0.0}));
    const auto hi = inner_opt(cs, v, Opt::max);
    EXPECT_DOUBLE_EQ(hi.value, 5.0);
    EXPECT_EQ(hi.witness, (std::vector<double>{0.5, 0.5}));
}

TEST(InnerOpt, ConstantValues) {
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
        const auto cs = random_interval_set(rng, 10);
        const std::vector<double> v(10, 4.25);
        EXPECT_NEAR(inner_opt(cs, v, Opt::min).value, 4.25, 1e-12);
        EXPECT_NEAR(inner_opt(cs, v, Opt::max).value, 4.25, 1e-12);
    }
}

TEST(InnerOpt, CandidatesPickExtreme) {
    const auto cs = CredalSet::candidates({0, 1}, {{1.0, 0.0}, {0.0, 1.0}});
    const std::vector<double> v{2.0, 7.0};
    EXPECT_EQ(inner_opt(cs, v, Opt::min).value, 2.0);
    EXPECT_EQ(inner_opt(cs, v, Opt::max).value, 7.0);
    EXPECT_EQ(inner_opt(cs, v, Opt::max).witness, (std::vector<double>{0.0, 1.0}));
}

TEST(InnerOpt, InfiniteValues) {
    const std::vector<double> v{0.0, kInf};
    const auto avoidable = CredalSet::interval({0, 1}, {0.5, 0.0}, {1.0, 0.5});
    EXPECT_EQ(inner_opt(avoidable, v, Opt::min).value, 0.0);
    EXPECT_EQ(inner_opt(avoidable, v, Opt::max).value, kInf);
    const auto forced = CredalSet::interval({0, 1}, {0.5, 0.1}, {0.9, 0.5});
    EXPECT_EQ(inner_opt(forced, v, Opt::min).value, kInf);
}

TEST(InnerOpt, WrongTableSize) {
    const auto cs = CredalSet::interval({0, 5}, {0.5, 0.0}, {1.0, 0.5});
    const std::vector<double> v{0.0, 1.0};
    EXPECT_THROW(inner_opt(cs, v, Opt::min), InvalidArgument);
}

TEST(InnerOpt, BoundsEveryMemberProperty) {
    Rng rng(1234);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + rng.below(12);
        const auto cs = random_interval_set(rng, n);
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(0.0, 20.0);
        const auto lo = inner_opt(cs, v, Opt::min);
        const auto hi = inner_opt(cs, v, Opt::max);
        ASSERT_TRUE(cs.contains(lo.witness, 1e-12));
        ASSERT_TRUE(cs.contains(hi.witness, 1e-12));
        for (int j = 0; j < 100; ++j) {
            const auto p = random_member(cs, rng);
            ASSERT_TRUE(cs.contains(p, 1e-9));
            double e = 0.0;
            for (std::size_t t = 0; t < p.size(); ++t) e += p[t] * v[cs.targets()[t]];
            ASSERT_LE(lo.value, e + 1e-9);
            ASSERT_GE(hi.value, e - 1e-9);
        }
    }
}

TEST(InnerOpt, GreedyMatchesVertexEnumeration) {
    // Optimal values of small interval sets agree with brute force over the
    // vertices of the set (every free coordinate at a bound except one).
    Rng rng(77);
    for (int i = 0; i < 300; ++i) {
        const std::size_t n = 2 + rng.below(4);
        const auto cs = random_interval_set(rng, n);
        std::vector<double> v(n);
        for (auto& x : v) x = std::round(rng.uniform(0.0, 10.0));
        const std::size_t k = cs.targets().size();
        double best_lo = kInf, best_hi = -kInf;
        for (std::size_t free = 0; free < k; ++free) {
            for (std::size_t mask = 0; mask < (std::size_t{1} << k); ++mask) {
                std::vector<double> p(k);
                double s = 0.0;
                for (std::size_t j = 0; j < k; ++j) {
                    if (j == free) continue;
                    p[j] = (mask >> j) & 1 ? cs.p_high()[j] : cs.p_low()[j];
                    s += p[j];
                }
                p[free] = 1.0 - s;
                if (p[free] < cs.p_low()[free] - 1e-12 || p[free] > cs.p_high()[free] + 1e-12) continue;
                double e = 0.0;
                for (std::size_t j = 0; j < k; ++j) e += p[j] * v[cs.targets()[j]];
                best_lo = std::min(best_lo, e);
                best_hi = std::max(best_hi, e);
            }
        }
        EXPECT_NEAR(inner_opt(cs, v, Opt::min).value, best_lo, 1e-9);
        EXPECT_NEAR(inner_opt(cs, v, Opt::max).value, best_hi, 1e-9);
    }
}

TEST(Imdp, TerminalStatesMustBeAbsorbingAndFree) {
    Imdp m({"s", "g"}, {StateKind::regular, StateKind::goal}, {"a"});
    EXPECT_THROW(m.set(1, 0, CredalSet::point({0}, {1.0}), {0.0, 0.0}), ConsistencyError);
    EXPECT_THROW(m.set(1, 0, CredalSet::point({1}, {1.0}), {1.0, 1.0}), ConsistencyError);
    EXPECT_NO_THROW(m.set(1, 0, CredalSet::point({1}, {1.0}), {0.0, 0.0}));
    EXPECT_THROW(m.set(0, 0, CredalSet::point({2}, {1.0}), {1.0, 1.0}), InvalidArgument);
    EXPECT_THROW(m.set(0, 0, CredalSet::point({1}, {1.0}), {2.0, 1.0}), InvalidArgument);
}

TEST(Imdp, MissingEntryFailsValidation) {
    Imdp m({"s", "g"}, {StateKind::regular, StateKind::goal}, {"a", "b"});
    m.set(0, 0, CredalSet::point({1}, {1.0}), {1.0, 1.0});
    EXPECT_THROW(m.validate(), ConsistencyError);
    EXPECT_THROW(value_iteration(m, Opt::min), ConsistencyError);
}

TEST(ViSweep, FirstSweepGivesCheapestCostEndpoint) {
    Imdp m({"s", "g"}, {StateKind::regular, StateKind::goal}, {"a", "b"});
    m.set(0, 0, CredalSet::point({1}, {1.0}), {2.0, 5.0});
    m.set(0, 1, CredalSet::point({1}, {1.0}), {3.0, 4.0});
    const ValueTable bottom(2, 0.0);
    EXPECT_EQ(vi_sweep(m, bottom, Opt::min)[0], 2.0);
    EXPECT_EQ(vi_sweep(m, bottom, Opt::max)[0], 4.0);
    EXPECT_EQ(vi_sweep(m, bottom, Opt::max)[1], 0.0);
}

TEST(ViSweep, GoalStaysZero) {
    const auto m = chain_imdp();
    const ValueTable v({5.0, 5.0, 5.0});
    EXPECT_EQ(vi_sweep(m, v, Opt::min)[2], 0.0);
}

TEST(ViSweep, ChainTwoSweeps) {
    const auto m = chain_imdp();
    ValueTable v(3, 0.0);
    v = vi_sweep(m, v, Opt::min);
    v = vi_sweep(m, v, Opt::min);
    EXPECT_EQ(v[0], 2.0);
    EXPECT_EQ(v[1], 1.0);
}

TEST(ViSweep, ThreadCountDoesNotChangeResult) {
    Rng rng(31);
    const auto m = oracle::random_candidate_imdp(rng, 6, 3, 4, false);
    ValueTable v(6, 0.0);
    for (int i = 0; i < 5; ++i) {
        const auto a = vi_sweep(m, v, Opt::max, 1);
        const auto b = vi_sweep(m, v, Opt::max, 3);
        ASSERT_EQ(a, b);
        v = a;
    }
}

TEST(ValueIteration, GeometricClosedForm) {
    const auto m = geometric_imdp();
    const auto lo = value_iteration(m, Opt::min);
    const auto hi = value_iteration(m, Opt::max);
    EXPECT_NEAR(lo.values[0], 1.0, 1e-8);
    EXPECT_NEAR(hi.values[0], 2.0, 1e-8);
    EXPECT_TRUE(lo.report.converged);
    EXPECT_TRUE(hi.report.converged);
    EXPECT_EQ(lo.adversary.at(0, 0), (std::vector<double>{0.0, 1.0}));
    EXPECT_EQ(hi.adversary.at(0, 0), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(hi.strategy.choice[0], std::optional<std::size_t>(0));
    EXPECT_FALSE(hi.strategy.choice[1].has_value());
}

TEST(ValueIteration, AllGoal) {
    Imdp m({"g1", "g2"}, {StateKind::goal, StateKind::goal}, {"a"});
    const auto r = value_iteration(m, Opt::max);
    EXPECT_EQ(r.values, ValueTable(2, 0.0));
    EXPECT_EQ(r.report.iterations, 1u);
    EXPECT_TRUE(r.report.converged);
}

TEST(ValueIteration, NonConvergenceIsReported) {
    ViOptions opt;
    opt.max_iter = 3;
    const auto r = value_iteration(geometric_imdp(), Opt::max, opt);
    EXPECT_FALSE(r.report.converged);
    EXPECT_EQ(r.report.iterations, 3u);
    EXPECT_GT(r.report.residual, opt.tol);
    EXPECT_NEAR(r.values[0], 1.75, 1e-15);
}

TEST(ValueIteration, DivergentStateBecomesInfinite) {
    Imdp m({"trap", "s", "g"}, {StateKind::regular, StateKind::regular, StateKind::goal}, {"a", "b"});
    m.set(0, 0, CredalSet::point({0}, {1.0}), {1.0, 1.0});
    m.set(0, 1, CredalSet::point({0}, {1.0}), {2.0, 2.0});
    m.set(1, 0, CredalSet::interval({0, 2}, {0.0, 0.5}, {0.5, 1.0}), {1.0, 1.0});
    m.set(1, 1, CredalSet::point({2}, {1.0}), {5.0, 5.0});
    ViOptions opt;
    opt.divergence_cap = 50.0;
    const auto lo = value_iteration(m, Opt::min, opt);
    const auto hi = value_iteration(m, Opt::max, opt);
    EXPECT_EQ(lo.values[0], kInf);
    EXPECT_EQ(hi.values[0], kInf);
    EXPECT_TRUE(lo.report.converged);
    EXPECT_EQ(lo.report.infinite_states, 1u);
    EXPECT_NEAR(lo.values[1], 1.0, 1e-9); // the optimistic adversary never enters the trap
    EXPECT_NEAR(hi.values[1], 5.0, 1e-9); // the pessimistic one would, so b is taken
    EXPECT_EQ(lo.strategy.choice[1], std::optional<std::size_t>(0));
    EXPECT_EQ(hi.strategy.choice[1], std::optional<std::size_t>(1));
}

TEST(ValueIteration, BadOptions) {
    ViOptions opt;
    opt.tol = 0.0;
    EXPECT_THROW(value_iteration(geometric_imdp(), Opt::min, opt), InvalidArgument);
    opt = {};
    opt.divergence_cap = -1.0;
    EXPECT_THROW(value_iteration(geometric_imdp(), Opt::min, opt), InvalidArgument);
}

TEST(ValueIteration, MatchesStationaryEnumerationOnCyclicInstances) {
    Rng rng(2718);
    for (int i = 0; i < 40; ++i) {
        const auto m = oracle::random_candidate_imdp(rng, 4, 2, 2, false);
        ViOptions opt;
        opt.tol = 1e-13;
        const auto lo = value_iteration(m, Opt::min, opt);
        const auto hi = value_iteration(m, Opt::max, opt);
        const auto [olo, ohi] = oracle::stationary_enumeration(m);
        for (std::size_t s = 0; s < m.num_states(); ++s) {
            EXPECT_NEAR(lo.values[s], olo[s], 1e-9) << "instance " << i << " state " << s;
            EXPECT_NEAR(hi.values[s], ohi[s], 1e-9) << "instance " << i << " state " << s;
        }
    }
}

TEST(ValueIteration, MinBelowMaxAndMonotoneChain) {
    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
        const auto m = oracle::random_candidate_imdp(rng, 2 + rng.below(5), 1 + rng.below(3), 4, rng.below(2) == 0);
        const auto lo = value_iteration(m, Opt::min);
        const auto hi = value_iteration(m, Opt::max);
        EXPECT_GE(lo.report.min_increment, 0.0);
        EXPECT_GE(hi.report.min_increment, 0.0);
        for (std::size_t s = 0; s < m.num_states(); ++s) EXPECT_LE(lo.values[s], hi.values[s] + 1e-9);
    }
}

TEST(ValueIteration, AdversaryWitnessesAreMembers) {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const std::size_t n = 3 + rng.below(6);
        std::vector<std::string> names;
        std::vector<StateKind> kinds;
        for (std::size_t s = 0; s < n; ++s) {
            names.push_back("s" + std::to_string(s));
            kinds.push_back(s == 0 ? StateKind::goal : StateKind::regular);
        }
        Imdp m(names, kinds, {"a", "b"});
        for (std::size_t s = 1; s < n; ++s)
            for (std::size_t a = 0; a < 2; ++a) m.set(s, a, random_interval_set(rng, n), {1.0, 1.5});
        ViOptions opt;
        opt.max_iter = 2000;
        opt.divergence_cap = 1e6;
        for (Opt mode : {Opt::min, Opt::max}) {
            const auto r = value_iteration(m, mode, opt);
            for (std::size_t s = 1; s < n; ++s)
                for (std::size_t a = 0; a < 2; ++a) EXPECT_TRUE(m.entry(s, a).credal.contains(r.adversary.at(s, a), 1e-12));
        }
    }
}

TEST(ValueIteration, FixpointIsStable) {
    Rng rng(6);
    for (int i = 0; i < 30; ++i) {
        const auto m = oracle::random_candidate_imdp(rng, 5, 3, 3, false);
        for (Opt mode : {Opt::min, Opt::max}) {
            const auto r = value_iteration(m, mode);
            const auto again = value_iteration(m, mode);
            EXPECT_EQ(r.values, again.values);
            const auto next = vi_sweep(m, r.values, mode);
            for (std::size_t s = 0; s < m.num_states(); ++s) {
                EXPECT_NEAR(next[s], r.values[s], 1e-8);
                if (m.is_terminal(s)) continue;
                // The extracted action is still optimal after one more sweep.
                const auto& e = m.entry(s, *r.strategy.choice[s]);
                const double q = e.cost.endpoint(mode) + inner_opt(e.credal, r.values, mode).value;
                EXPECT_NEAR(q, next[s], 1e-12);
            }
        }
    }
}

TEST(ValueIteration, PointSetsGiveEqualBounds) {
    Rng rng(12);
    for (int i = 0; i < 30; ++i) {
        const std::size_t n = 5;
        Imdp m({"g", "a", "b", "c", "d"},
               {StateKind::goal, StateKind::regular, StateKind::regular, StateKind::regular, StateKind::regular},
               {"x", "y"});
        for (std::size_t s = 1; s < n; ++s) {
            for (std::size_t a = 0; a < 2; ++a) {
                auto p = oracle::random_simplex(n, rng);
                for (auto& x : p) x *= 0.9;
                p[0] += 0.1;
                m.set(s, a, CredalSet::point({0, 1, 2, 3, 4}, p), {1.0, 1.0});
            }
        }
        ViOptions opt;
        opt.tol = 1e-14;
        const auto lo = value_iteration(m, Opt::min, opt);
        const auto hi = value_iteration(m, Opt::max, opt);
        for (std::size_t s = 0; s < n; ++s) EXPECT_NEAR(lo.values[s], hi.values[s], 1e-12);
        EXPECT_EQ(lo.strategy, hi.strategy);
    }
}

TEST(BoundedHorizon, OneStepIsCostEndpoint) {
    Imdp m({"s", "g"}, {StateKind::regular, StateKind::goal}, {"a", "b"});
    m.set(0, 0, CredalSet::interval({0, 1}, {0.0, 0.5}, {0.5, 1.0}), {2.0, 5.0});
    m.set(0, 1, CredalSet::point({1}, {1.0}), {3.0, 4.0});
    Strategy st{{0, std::nullopt}};
    EXPECT_EQ(bounded_horizon_values(m, st, 1, Opt::min)[0], 2.0);
    EXPECT_EQ(bounded_horizon_values(m, st, 1, Opt::max)[0], 5.0);
}

TEST(BoundedHorizon, LongHorizonEqualsUnboundedOnAcyclicInstances) {
    Rng rng(44);
    for (int i = 0; i < 30; ++i) {
        const auto m = oracle::random_candidate_imdp(rng, 5, 2, 3, true);
        Strategy st;
        for (std::size_t s = 0; s < m.num_states(); ++s)
            st.choice.push_back(m.is_terminal(s) ? std::nullopt : std::optional<std::size_t>(rng.below(2)));
        for (Opt mode : {Opt::min, Opt::max}) {
            const auto bh = bounded_horizon_values(m, st, 20, mode);
            const auto [ev, rep] = evaluate_strategy(m, st, mode);
            EXPECT_TRUE(rep.converged);
            for (std::size_t s = 0; s < m.num_states(); ++s) EXPECT_NEAR(bh[s], ev[s], 1e-12);
        }
    }
}

TEST(BoundedHorizon, GapVanishesForPointSets) {
    Imdp m({"s", "t", "g"}, {StateKind::regular, StateKind::regular, StateKind::goal}, {"a"});
    m.set(0, 0, CredalSet::point({0, 1, 2}, {0.2, 0.3, 0.5}), {1.0, 1.0});
    m.set(1, 0, CredalSet::point({0, 2}, {0.6, 0.4}), {2.0, 2.0});
    Strategy st{{0, 0, std::nullopt}};
    const auto hi = bounded_horizon_values(m, st, 5, Opt::max);
    const auto lo = bounded_horizon_values(m, st, 5, Opt::min);
    for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(hi[s], lo[s]);
}

TEST(BoundedHorizon, GapShrinksWithIntervalWidth) {
    double prev = kInf;
    for (double w : {0.4, 0.2, 0.1, 0.05, 0.0}) {
        Imdp m({"s", "g"}, {StateKind::regular, StateKind::goal}, {"a"});
        m.set(0, 0, CredalSet::interval({0, 1}, {0.5 - w, 0.5 - w}, {0.5 + w, 0.5 + w}), {1.0, 1.0});
        Strategy st{{0, std::nullopt}};
        const double gap = bounded_horizon_values(m, st, 5, Opt::max)[0] - bounded_horizon_values(m, st, 5, Opt::min)[0];
        EXPECT_LT(gap, prev);
        prev = gap;
    }
    EXPECT_EQ(prev, 0.0);
}

TEST(BoundedHorizon, UndefinedStrategyThrows) {
    Strategy st{{std::nullopt, std::nullopt}};
    EXPECT_THROW(bounded_horizon_values(geometric_imdp(), st, 3, Opt::min), UndefinedStrategy);
    Strategy wrong{{0}};
    EXPECT_THROW(bounded_horizon_values(geometric_imdp(), wrong, 3, Opt::min), InvalidArgument);
}

TEST(BruteForce, SingleGoalState) {
    Imdp m({"g"}, {StateKind::goal}, {"a"});
    const auto [lo, hi] = brute_force_values(m, 5);
    EXPECT_EQ(lo[0], 0.0);
    EXPECT_EQ(hi[0], 0.0);
}

TEST(BruteForce, GeometricPartialSum) {
    const auto [lo, hi] = brute_force_values(geometric_candidates(), 12);
    EXPECT_DOUBLE_EQ(lo[0], 1.0);
    double partial = 0.0;
    for (int k = 0; k < 12; ++k) partial += std::pow(0.5, k);
    EXPECT_DOUBLE_EQ(hi[0], partial);
    EXPECT_NEAR(hi[0], 1.999512, 1e-6);
    EXPECT_LE(2.0 - hi[0], std::pow(2.0, -11));
}

TEST(BruteForce, Limits) {
    Rng rng(1);
    EXPECT_THROW(brute_force_values(oracle::random_candidate_imdp(rng, 7, 2, 2, true), 5), OversizeError);
    EXPECT_THROW(brute_force_values(oracle::random_candidate_imdp(rng, 3, 4, 2, true), 5), OversizeError);
    EXPECT_THROW(brute_force_values(oracle::random_candidate_imdp(rng, 3, 2, 2, true), 13), OversizeError);
    EXPECT_THROW(brute_force_values(geometric_imdp(), 5), InvalidArgument);
    Imdp big({"s", "g"}, {StateKind::regular, StateKind::goal}, {"a"});
    big.set(0, 0, CredalSet::candidates({1}, {{1.0}, {1.0}, {1.0}, {1.0}, {1.0}}), {1.0, 1.0});
    EXPECT_THROW(brute_force_values(big, 5), OversizeError);
}

TEST(BruteForce, MatchesTruncatedValueIteration) {
    Rng rng(4242);
    for (int i = 0; i < 30; ++i) {
        const auto m = oracle::random_candidate_imdp(rng, 2 + rng.below(3), 1 + rng.below(2), 3, true);
        const auto [blo, bhi] = brute_force_values(m, 12);
        ValueTable lo(m.num_states(), 0.0), hi(m.num_states(), 0.0);
        for (int k = 0; k < 12; ++k) {
            lo = vi_sweep(m, lo, Opt::min);
            hi = vi_sweep(m, hi, Opt::max);
        }
        for (std::size_t s = 0; s < m.num_states(); ++s) {
            EXPECT_NEAR(lo[s], blo[s], 1e-9);
            EXPECT_NEAR(hi[s], bhi[s], 1e-9);
        }
    }
}
