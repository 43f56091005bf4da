#include <map>

#include <gtest/gtest.h>

#include "imdpbound/abstraction.hpp"
#include "oracles.hpp"

using namespace imdpbound;

namespace {

oracle::Rect rect_of(const Box& b) { return {b.lo()[0], b.lo()[1], b.hi()[0], b.hi()[1]}; }

const InducedImdp& coarse_interval() {
    static const InducedImdp ind = induce(WalkerModel::defaults(), GridPartition::uniform(WalkerModel::defaults().domain, 0.1));
    return ind;
}

} // namespace

TEST(Induce, StateCountAndKinds) {
    const auto& ind = coarse_interval();
    EXPECT_EQ(ind.imdp.num_states(), 144u);
    EXPECT_EQ(ind.imdp.num_actions(), 2u);
    std::map<StateKind, int> counts;
    for (std::size_t s = 0; s < 144; ++s) ++counts[ind.imdp.kind(s)];
    EXPECT_EQ(counts[StateKind::goal], 2 * 10);
    EXPECT_EQ(counts[StateKind::failure], 12 * 2);
    EXPECT_EQ(counts[StateKind::regular], 144 - 20 - 24);
    EXPECT_EQ(provenance_value(ind.provenance, "sound"), "true");
    EXPECT_EQ(provenance_value(ind.provenance, "width"), "0.1,0.1");
}

TEST(Induce, TerminalCellsHaveZeroValue) {
    const auto& ind = coarse_interval();
    const auto lo = value_iteration(ind.imdp, Opt::min);
    const auto hi = value_iteration(ind.imdp, Opt::max);
    for (std::size_t s = 0; s < ind.imdp.num_states(); ++s) {
        if (!ind.imdp.is_terminal(s)) continue;
        EXPECT_EQ(lo.values[s], 0.0);
        EXPECT_EQ(hi.values[s], 0.0);
        EXPECT_FALSE(lo.strategy.choice[s].has_value());
    }
}

TEST(Induce, CostIntervalIncludesFailurePenalty) {
    const auto& ind = coarse_interval();
    const auto model = WalkerModel::defaults();
    // Two cells below the failure box: the fast action enters it from the top of the cell only.
    const std::size_t s = ind.partition.index_of({0.55, 0.85});
    const auto& e = ind.imdp.entry(s, 0);
    EXPECT_EQ(e.cost.c_min, model.actions[0].cost);
    EXPECT_GT(e.cost.c_max, model.actions[0].cost);
    EXPECT_LE(e.cost.c_max, model.actions[0].cost + model.failure_penalty);
    // Far from the failure box the cost is exact.
    const auto& far = ind.imdp.entry(ind.partition.index_of({0.05, 0.05}), 1);
    EXPECT_EQ(far.cost.c_min, model.actions[1].cost);
    EXPECT_EQ(far.cost.c_max, model.actions[1].cost);
}

TEST(Induce, IntervalBoundsContainSampledMarginals) {
    const auto model = WalkerModel::defaults();
    const auto& ind = coarse_interval();
    const auto dom = rect_of(model.domain);
    Rng rng(17);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t s = rng.below(ind.imdp.num_states());
        if (ind.imdp.is_terminal(s)) continue;
        const std::size_t a = rng.below(2);
        const auto& act = model.actions[a];
        const auto& cs = ind.imdp.entry(s, a).credal;
        const Box cell = ind.partition.region_box(s);
        for (int j = 0; j < 30; ++j) {
            const double x = rng.uniform(cell.lo()[0], cell.hi()[0]);
            const double y = rng.uniform(cell.lo()[1], cell.hi()[1]);
            double total = 0.0;
            for (std::size_t t = 0; t < cs.targets().size(); ++t) {
                const auto tgt = rect_of(ind.partition.region_box(cs.targets()[t]));
                const double p = oracle::truncated_square_mass(x + act.drift[0], y + act.drift[1],
                                                               act.noise_half_width, tgt, dom);
                total += p;
                ASSERT_GE(p, cs.p_low()[t] - 1e-12);
                ASSERT_LE(p, cs.p_high()[t] + 1e-12);
            }
            // Every reachable cell is listed as a target.
            ASSERT_NEAR(total, 1.0, 1e-9);
        }
    }
}

TEST(Induce, IntervalSetContainsCandidates) {
    const auto model = WalkerModel::defaults();
    const auto grid = GridPartition::uniform(model.domain, 0.1);
    InduceOptions opt;
    opt.mode = CredalMode::candidates;
    opt.samples = 5;
    const auto cand = induce(model, grid, opt);
    const auto& itv = coarse_interval();
    EXPECT_EQ(provenance_value(cand.provenance, "sound"), "false");
    Rng rng(3);
    int checked = 0;
    while (checked < 50) {
        const std::size_t s = rng.below(grid.size());
        if (itv.imdp.is_terminal(s)) continue;
        ++checked;
        const std::size_t a = rng.below(2);
        const auto& ci = itv.imdp.entry(s, a);
        const auto& cc = cand.imdp.entry(s, a);
        EXPECT_LE(ci.cost.c_min, cc.cost.c_min + 1e-12);
        EXPECT_GE(ci.cost.c_max, cc.cost.c_max - 1e-12);
        const auto targets = ci.credal.targets();
        for (const auto& d : cc.credal.distributions()) {
            std::vector<double> embedded(targets.size(), 0.0);
            for (std::size_t j = 0; j < cc.credal.targets().size(); ++j) {
                const auto it = std::find(targets.begin(), targets.end(), cc.credal.targets()[j]);
                ASSERT_NE(it, targets.end());
                embedded[static_cast<std::size_t>(it - targets.begin())] = d[j];
            }
            EXPECT_TRUE(ci.credal.contains(embedded, 1e-9));
        }
    }
}

TEST(Induce, RejectsStraddlingPartition) {
    const auto model = WalkerModel::defaults();
    EXPECT_THROW(induce(model, GridPartition::uniform(model.domain, 0.07)), ConsistencyError);
    EXPECT_THROW(induce(model, GridPartition::uniform(Box({0, 0}, {1, 1}), 0.1)), ConsistencyError);
}

TEST(Induce, ThreadCountDoesNotChangeResult) {
    const auto model = WalkerModel::defaults();
    const auto grid = GridPartition::uniform(model.domain, 0.05);
    InduceOptions one, three;
    three.threads = 3;
    const auto a = induce(model, grid, one);
    const auto b = induce(model, grid, three);
    for (std::size_t s = 0; s < grid.size(); ++s) {
        if (a.imdp.is_terminal(s)) continue;
        for (std::size_t k = 0; k < 2; ++k) {
            const auto& ea = a.imdp.entry(s, k);
            const auto& eb = b.imdp.entry(s, k);
            ASSERT_TRUE(std::equal(ea.credal.p_low().begin(), ea.credal.p_low().end(), eb.credal.p_low().begin()));
            ASSERT_TRUE(std::equal(ea.credal.p_high().begin(), ea.credal.p_high().end(), eb.credal.p_high().begin()));
            ASSERT_EQ(ea.cost.c_max, eb.cost.c_max);
        }
    }
}

TEST(RefinementSequence, SizesAndProvenance) {
    const auto seq = refinement_sequence(WalkerModel::defaults(), {0.1, 0.05, 0.025});
    ASSERT_EQ(seq.size(), 3u);
    EXPECT_EQ(seq[0].imdp.num_states(), 144u);
    EXPECT_EQ(seq[1].imdp.num_states(), 576u);
    EXPECT_EQ(seq[2].imdp.num_states(), 2304u);
    EXPECT_EQ(provenance_value(seq[2].provenance, "refines"), "0.05");
    EXPECT_EQ(provenance_value(seq[0].provenance, "sequence"), "0.1>0.05>0.025");
}

TEST(RefinementSequence, SingleWidth) {
    const auto seq = refinement_sequence(WalkerModel::defaults(), {0.1});
    ASSERT_EQ(seq.size(), 1u);
    EXPECT_EQ(seq[0].imdp.num_states(), 144u);
}

TEST(RefinementSequence, Errors) {
    const auto model = WalkerModel::defaults();
    EXPECT_THROW(refinement_sequence(model, {0.1, 0.04}), InvalidSequence);
    EXPECT_THROW(refinement_sequence(model, {}), InvalidSequence);
    EXPECT_THROW(refinement_sequence(model, {0.1, -0.05}), InvalidSequence);
    EXPECT_THROW(refinement_sequence(model, {0.05, 0.1}), InvalidSequence);
}

TEST(RefinementMonotonicity, IdenticalPartitionsAgree) {
    const auto& ind = coarse_interval();
    const auto lo = value_iteration(ind.imdp, Opt::min);
    const auto hi = value_iteration(ind.imdp, Opt::max);
    const auto rep = check_refinement_monotonicity(ind.partition, lo.values, hi.values, ind.partition, lo.values,
                                                   hi.values, 0.0);
    EXPECT_EQ(rep.checked, 144u);
    EXPECT_TRUE(rep.ok());
}

TEST(RefinementMonotonicity, HalvedGridTightensBothBounds) {
    const auto seq = refinement_sequence(WalkerModel::defaults(), {0.1, 0.05});
    const auto clo = value_iteration(seq[0].imdp, Opt::min), chi = value_iteration(seq[0].imdp, Opt::max);
    const auto flo = value_iteration(seq[1].imdp, Opt::min), fhi = value_iteration(seq[1].imdp, Opt::max);
    const auto rep = check_refinement_monotonicity(seq[0].partition, clo.values, chi.values, seq[1].partition,
                                                   flo.values, fhi.values, 1e-6);
    EXPECT_EQ(rep.checked, 576u);
    EXPECT_TRUE(rep.ok()) << rep.violations.size() << " violations";
}

TEST(RefinementMonotonicity, DetectsInjectedViolation) {
    const auto& ind = coarse_interval();
    const auto fine = ind.partition.refine(2);
    ValueTable cmin(144, 1.0), cmax(144, 2.0), fmin(576, 1.0), fmax(576, 2.0);
    fmax[5] = 3.0;
    fmin[7] = 0.5;
    const auto rep = check_refinement_monotonicity(ind.partition, cmin, cmax, fine, fmin, fmax, 1e-6);
    ASSERT_EQ(rep.violations.size(), 2u);
    EXPECT_EQ(rep.violations[0].fine_region, 5u);
    EXPECT_EQ(rep.violations[0].bound, Opt::max);
    EXPECT_EQ(rep.violations[1].bound, Opt::min);
    EXPECT_THROW(check_refinement_monotonicity(ind.partition, cmin, cmax, fine, fmin, ValueTable(3), 0.0),
                 InvalidArgument);
}
