#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "imdpbound/emdp.hpp"
#include "imdpbound/errors.hpp"
#include "imdpbound/geometry.hpp"
#include "imdpbound/imdp.hpp"
#include "imdpbound/model_io.hpp"
#include "imdpbound/parallel.hpp"
#include "imdpbound/version.hpp"

namespace imdpbound {

/// How transition imprecision over a region is represented.
///  - interval:   per-successor [min, max] of the kernel mass over the whole region
///                (outer approximation; the only mode whose bounds are sound).
///  - candidates: the exact successor distributions of a k^K lattice of points in
///                the region (inner approximation; for comparison only).
enum class CredalMode { interval, candidates };

inline std::string_view to_string(CredalMode m) { return m == CredalMode::interval ? "interval" : "candidates"; }

inline CredalMode parse_credal_mode(std::string_view s) {
    if (s == "interval") return CredalMode::interval;
    if (s == "candidates") return CredalMode::candidates;
    throw InvalidArgument("credal mode must be 'interval' or 'candidates', got '" + std::string(s) + "'");
}

using Provenance = std::vector<std::pair<std::string, std::string>>;

inline std::string provenance_value(const Provenance& p, const std::string& key) {
    for (const auto& [k, v] : p)
        if (k == key) return v;
    return {};
}

struct InducedImdp {
    Imdp imdp;
    GridPartition partition;
    CredalMode mode = CredalMode::interval;
    std::size_t samples = 0;
    Provenance provenance;

    bool sound() const noexcept { return mode == CredalMode::interval; }
};

struct InduceOptions {
    CredalMode mode = CredalMode::interval;
    /// Lattice points per axis per region in candidates mode.
    std::size_t samples = 5;
    std::size_t threads = 1;
};

inline std::string region_name(const RegionId& r) {
    std::string s = "c";
    for (std::size_t d = 0; d < r.dim; ++d) {
        if (d) s += "_";
        s += std::to_string(r[d]);
    }
    return s;
}

/// Terminal kind of every cell; throws ConsistencyError when a cell straddles the
/// boundary of the goal or failure box.
inline std::vector<StateKind> classify_cells(const WalkerModel& model, const GridPartition& partition) {
    std::vector<StateKind> kinds(partition.size(), StateKind::regular);
    for (std::size_t k = 0; k < partition.size(); ++k) {
        const Box cell = partition.region_box(k);
        const double vol = cell.volume();
        for (auto [box, kind] : {std::pair{&model.goal, StateKind::goal}, std::pair{&model.failure, StateKind::failure}}) {
            const double frac = intersection_volume(cell, *box) / vol;
            if (frac > 1e-9 && frac < 1.0 - 1e-9)
                throw ConsistencyError("cell " + partition.region_at(k).to_string() + " " + cell.to_string() +
                                       " straddles the " + std::string(to_string(kind)) + " box " + box->to_string());
            if (frac >= 1.0 - 1e-9) kinds[k] = kind;
        }
    }
    return kinds;
}

namespace detail {

/// Iterates over the cartesian product of per-dimension index ranges, dimension 0 fastest.
template <typename F>
void for_each_in_ranges(const std::array<IndexRange, kMaxDim>& ranges, std::size_t K, F&& f) {
    for (std::size_t d = 0; d < K; ++d)
        if (ranges[d].size() == 0) return;
    RegionId id;
    id.dim = K;
    for (std::size_t d = 0; d < K; ++d) id[d] = ranges[d].begin;
    while (true) {
        f(id);
        std::size_t d = 0;
        for (; d < K; ++d) {
            if (++id[d] < ranges[d].end) break;
            id[d] = ranges[d].begin;
        }
        if (d == K) return;
    }
}

inline Imdp::Entry interval_entry(const WalkerModel& model, const GridPartition& grid, const Box& cell,
                                  const ActionSpec& act) {
    const std::size_t K = grid.dim();
    const double r = act.noise_half_width;
    const Box& dom = model.domain;
    std::array<IndexRange, kMaxDim> ranges{};
    std::array<std::vector<ProbabilityBounds>, kMaxDim> factors{};
    for (std::size_t d = 0; d < K; ++d) {
        const double c_lo = cell.lo()[d] + act.drift[d];
        const double c_hi = cell.hi()[d] + act.drift[d];
        ranges[d] = grid.cells_overlapping(d, c_lo - r, c_hi + r);
        for (std::size_t i = ranges[d].begin; i < ranges[d].end; ++i)
            factors[d].push_back(
                overlap_bounds_1d(c_lo, c_hi, r, grid.cell_lo(d, i), grid.cell_hi(d, i), dom.lo()[d], dom.hi()[d]));
    }
    std::vector<std::uint32_t> targets;
    std::vector<double> lo, hi;
    for_each_in_ranges(ranges, K, [&](const RegionId& id) {
        double l = 1.0, h = 1.0;
        for (std::size_t d = 0; d < K; ++d) {
            const auto& f = factors[d][id[d] - ranges[d].begin];
            l *= f.low;
            h *= f.high;
        }
        if (h > 0.0) {
            targets.push_back(static_cast<std::uint32_t>(grid.linear_index(id)));
            lo.push_back(l);
            hi.push_back(h);
        }
    });
    const auto fail = overlap_bounds(cell, act.drift, r, model.failure, dom);
    CostInterval cost{act.cost + model.failure_penalty * fail.low, act.cost + model.failure_penalty * fail.high};
    return {CredalSet::interval(std::move(targets), std::move(lo), std::move(hi)), cost};
}

inline Imdp::Entry candidates_entry(const WalkerModel& model, const GridPartition& grid, const Box& cell,
                                    const ActionSpec& act, std::size_t k) {
    const std::size_t K = grid.dim();
    const double r = act.noise_half_width;
    const Box& dom = model.domain;
    std::array<IndexRange, kMaxDim> ranges{};
    for (std::size_t d = 0; d < K; ++d)
        ranges[d] = grid.cells_overlapping(d, cell.lo()[d] + act.drift[d] - r, cell.hi()[d] + act.drift[d] + r);
    std::vector<std::size_t> all_targets;
    for_each_in_ranges(ranges, K, [&](const RegionId& id) { all_targets.push_back(grid.linear_index(id)); });

    std::vector<std::vector<double>> dists;
    double fail_lo = 1.0, fail_hi = 0.0;
    std::array<IndexRange, kMaxDim> lattice{};
    for (std::size_t d = 0; d < K; ++d) lattice[d] = {0, k};
    for_each_in_ranges(lattice, K, [&](const RegionId& j) {
        Point s = cell.lo();
        for (std::size_t d = 0; d < K; ++d)
            s[d] = cell.lo()[d] + (static_cast<double>(j[d]) + 0.5) / static_cast<double>(k) * cell.width(d);
        const Box kern = Box::centered(s + act.drift, r);
        std::array<std::vector<double>, kMaxDim> f{};
        for (std::size_t d = 0; d < K; ++d)
            for (std::size_t i = ranges[d].begin; i < ranges[d].end; ++i)
                f[d].push_back(overlap_ratio_1d(s[d] + act.drift[d], r, grid.cell_lo(d, i), grid.cell_hi(d, i),
                                                dom.lo()[d], dom.hi()[d]));
        std::vector<double> p;
        p.reserve(all_targets.size());
        double sum = 0.0;
        for_each_in_ranges(ranges, K, [&](const RegionId& id) {
            double x = 1.0;
            for (std::size_t d = 0; d < K; ++d) x *= f[d][id[d] - ranges[d].begin];
            p.push_back(x);
            sum += x;
        });
        for (double& x : p) x /= sum;
        dists.push_back(std::move(p));
        const double pf = overlap_fraction(kern, model.failure, dom);
        fail_lo = std::min(fail_lo, pf);
        fail_hi = std::max(fail_hi, pf);
    });
    // Drop successors that no lattice point reaches.
    std::vector<std::uint32_t> targets;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < all_targets.size(); ++i) {
        bool used = false;
        for (const auto& p : dists) used = used || p[i] > 0.0;
        if (used) {
            keep.push_back(i);
            targets.push_back(static_cast<std::uint32_t>(all_targets[i]));
        }
    }
    for (auto& p : dists) {
        std::vector<double> q;
        q.reserve(keep.size());
        for (std::size_t i : keep) q.push_back(p[i]);
        p = std::move(q);
    }
    CostInterval cost{act.cost + model.failure_penalty * fail_lo, act.cost + model.failure_penalty * fail_hi};
    return {CredalSet::candidates(std::move(targets), std::move(dists)), cost};
}

} // namespace detail

/// Builds the IMDP induced by a model and a grid partition: one state per cell,
/// cells inside the goal or failure box terminal, and per (cell, action) a credal
/// set bounding the kernel's cell marginals over all states of the cell. The
/// failure penalty becomes part of the cost interval: action cost plus penalty
/// times the [min, max] probability of entering the failure box.
inline InducedImdp induce(const WalkerModel& model, const GridPartition& partition, const InduceOptions& opt = {}) {
    model.validate();
    if (partition.dim() != model.dim() || !partition.domain().approx_equal(model.domain))
        throw ConsistencyError("partition domain " + partition.domain().to_string() + " differs from model domain " +
                               model.domain.to_string());
    if (opt.mode == CredalMode::candidates && opt.samples == 0)
        throw InvalidArgument("candidates mode needs at least one sample per axis");
    const auto kinds = classify_cells(model, partition);
    std::vector<std::string> names(partition.size());
    for (std::size_t k = 0; k < partition.size(); ++k) names[k] = region_name(partition.region_at(k));
    std::vector<std::string> actions;
    for (const auto& a : model.actions) actions.push_back(a.name);

    const std::size_t n_act = model.num_actions();
    std::vector<Imdp::Entry> entries(partition.size() * n_act);
    parallel_for(partition.size(), opt.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            if (kinds[k] != StateKind::regular) continue;
            const Box cell = partition.region_box(k);
            for (std::size_t a = 0; a < n_act; ++a)
                entries[k * n_act + a] =
                    opt.mode == CredalMode::interval
                        ? detail::interval_entry(model, partition, cell, model.actions[a])
                        : detail::candidates_entry(model, partition, cell, model.actions[a], opt.samples);
        }
    });

    InducedImdp out{Imdp(std::move(names), kinds, std::move(actions)), partition, opt.mode,
                    opt.mode == CredalMode::candidates ? opt.samples : 0, {}};
    for (std::size_t k = 0; k < partition.size(); ++k) {
        if (kinds[k] != StateKind::regular) continue;
        for (std::size_t a = 0; a < n_act; ++a)
            out.imdp.set(k, a, std::move(entries[k * n_act + a].credal), entries[k * n_act + a].cost);
    }
    std::string widths;
    for (std::size_t d = 0; d < partition.dim(); ++d) {
        if (d) widths += ",";
        widths += format_double(partition.widths()[d]);
    }
    out.provenance = {{"model", model.name},
                      {"model_hash", model_hash(model)},
                      {"width", widths},
                      {"mode", std::string(to_string(opt.mode))},
                      {"sound", opt.mode == CredalMode::interval ? "true" : "false"},
                      {"tool_version", kToolVersion}};
    if (opt.mode == CredalMode::candidates) out.provenance.emplace_back("samples", std::to_string(opt.samples));
    return out;
}

/// Induced IMDPs for a nested sequence of uniform grids, coarsest first. Each width
/// must divide the previous one.
inline std::vector<InducedImdp> refinement_sequence(const WalkerModel& model, const std::vector<double>& widths,
                                                    const InduceOptions& opt = {}) {
    if (widths.empty()) throw InvalidSequence("width sequence is empty");
    for (double w : widths)
        if (!(w > 0.0)) throw InvalidSequence("widths must be positive");
    std::vector<GridPartition> partitions{GridPartition::uniform(model.domain, widths[0])};
    for (std::size_t i = 1; i < widths.size(); ++i) {
        const double ratio = widths[i - 1] / widths[i];
        const double factor = std::round(ratio);
        if (factor < 1.0 || std::abs(ratio - factor) > 1e-9 * ratio)
            throw InvalidSequence("width " + format_double(widths[i]) + " does not divide " +
                                  format_double(widths[i - 1]));
        partitions.push_back(partitions.back().refine(static_cast<std::size_t>(factor)));
    }
    std::vector<InducedImdp> out;
    std::string chain;
    for (std::size_t i = 0; i < partitions.size(); ++i) {
        out.push_back(induce(model, partitions[i], opt));
        chain += (i ? ">" : "") + format_double(widths[i]);
        if (i > 0) out.back().provenance.emplace_back("refines", format_double(widths[i - 1]));
    }
    for (auto& m : out) m.provenance.emplace_back("sequence", chain);
    return out;
}

struct MonotonicityViolation {
    std::size_t fine_region = 0;
    std::size_t coarse_region = 0;
    Opt bound = Opt::min;
    double coarse_value = 0.0;
    double fine_value = 0.0;
};

struct MonotonicityReport {
    std::size_t checked = 0;
    double slack = 0.0;
    std::vector<MonotonicityViolation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

/// Checks that refining the partition tightens both bounds: for every fine cell
/// inside coarse cell c, lower(c) <= lower(fine) + slack and upper(c) >= upper(fine) - slack.
inline MonotonicityReport check_refinement_monotonicity(const GridPartition& coarse, const ValueTable& coarse_min,
                                                        const ValueTable& coarse_max, const GridPartition& fine,
                                                        const ValueTable& fine_min, const ValueTable& fine_max,
                                                        double slack) {
    if (coarse_min.size() != coarse.size() || coarse_max.size() != coarse.size())
        throw InvalidArgument("coarse value tables do not match the coarse partition");
    if (fine_min.size() != fine.size() || fine_max.size() != fine.size())
        throw InvalidArgument("fine value tables do not match the fine partition");
    if (fine.dim() != coarse.dim() || !fine.domain().approx_equal(coarse.domain()))
        throw InvalidArgument("partitions cover different domains");
    MonotonicityReport rep;
    rep.slack = slack;
    for (std::size_t k = 0; k < fine.size(); ++k) {
        const auto parent = fine.parent_in(coarse, k);
        if (!parent)
            throw InvalidArgument("fine cell " + fine.region_at(k).to_string() + " is not inside a single coarse cell");
        ++rep.checked;
        if (coarse_min[*parent] > fine_min[k] + slack)
            rep.violations.push_back({k, *parent, Opt::min, coarse_min[*parent], fine_min[k]});
        if (coarse_max[*parent] < fine_max[k] - slack)
            rep.violations.push_back({k, *parent, Opt::max, coarse_max[*parent], fine_max[k]});
    }
    return rep;
}

} // namespace imdpbound
