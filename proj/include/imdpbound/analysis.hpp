#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "imdpbound/errors.hpp"
#include "imdpbound/geometry.hpp"
#include "imdpbound/imdp.hpp"
#include "imdpbound/numeric.hpp"
#include "imdpbound/rng.hpp"

namespace imdpbound {

// ---------------------------------------------------------------------------
// Total variation

/// Total variation distance (half the L1 distance) between probability vectors.
inline double dtv(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw InvalidArgument("dtv: vectors have lengths " + std::to_string(p.size()) + " and " +
                              std::to_string(q.size()));
    auto check = [](std::span<const double> v, const char* which) {
        double s = 0.0;
        for (double x : v) {
            if (!(x >= 0.0)) throw InvalidArgument(std::string("dtv: ") + which + " has a negative entry");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument(std::string("dtv: ") + which + " does not sum to 1");
    };
    check(p, "p");
    check(q, "q");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
    return std::min(1.0, 0.5 * s);
}

struct DtvLemmaReport {
    std::size_t trials = 0;
    std::size_t violations_a = 0;
    std::size_t violations_b = 0;
    /// Largest observed lhs / rhs for each inequality (0 when every rhs was 0).
    double max_ratio_a = 0.0;
    double max_ratio_b = 0.0;

    bool ok() const noexcept { return violations_a == 0 && violations_b == 0; }
};

namespace detail {

inline std::vector<double> random_distribution(std::size_t n, Rng& rng) {
    std::vector<double> p(n);
    // A third of the draws are sparse so that boundary cases of the simplex show up.
    const bool sparse = rng.below(3) == 0;
    for (auto& x : p) x = sparse && rng.below(2) == 0 ? 0.0 : -std::log(1.0 - rng.uniform01());
    if (std::all_of(p.begin(), p.end(), [](double x) { return x == 0.0; })) p[rng.below(n)] = 1.0;
    double s = 0.0;
    for (double x : p) s += x;
    for (auto& x : p) x /= s;
    // Renormalize once more so the sum is 1 to the last few ulps.
    s = 0.0;
    for (double x : p) s += x;
    for (auto& x : p) x /= s;
    return p;
}

/// A distribution within total variation `eps` of p: a mixture (1-l) p + l q, l <= eps.
inline std::vector<double> perturb_within(const std::vector<double>& p, double eps, Rng& rng) {
    const double l = rng.below(4) == 0 ? eps : eps * rng.uniform01();
    std::vector<double> q(p.size(), 0.0);
    if (rng.below(2) == 0) {
        q[rng.below(p.size())] = 1.0;
    } else {
        q = random_distribution(p.size(), rng);
    }
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = (1.0 - l) * p[i] + l * q[i];
    return out;
}

inline double expectation(const std::vector<double>& p, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * f[i];
    return s;
}

} // namespace detail

/// Randomized check of the two total-variation inequalities:
///  A: d(P,P') <= e and |f - f'| <= e pointwise, f, f' >= 0
///     ==> |E_P f - E_P' f'| <= e (1 + 2 max f)
///  B: d(P,P') <= e and d(Q_v, Q'_v) <= e for all v
///     ==> d(sum_v P(v) Q_v, sum_v P'(v) Q'_v) <= 3 e
/// Each trial draws one instance of each. Dimensions are at most 8.
inline DtvLemmaReport check_dtv_lemma(std::size_t trials, Rng& rng) {
    if (trials == 0) throw InvalidArgument("trials must be at least 1");
    constexpr double kTol = 1e-12;
    DtvLemmaReport rep;
    rep.trials = trials;
    for (std::size_t t = 0; t < trials; ++t) {
        const double eps = rng.below(20) == 0 ? 0.0 : 0.5 * rng.uniform01();

        // Inequality A.
        {
            const std::size_t n = 1 + rng.below(8);
            const auto p = detail::random_distribution(n, rng);
            const auto p2 = detail::perturb_within(p, eps, rng);
            const double scale = std::pow(10.0, rng.uniform(-2.0, 2.0));
            std::vector<double> f(n), f2(n);
            for (std::size_t i = 0; i < n; ++i) {
                f[i] = scale * rng.uniform01();
                f2[i] = std::max(0.0, f[i] + eps * rng.uniform(-1.0, 1.0));
            }
            const double lhs = std::abs(detail::expectation(p, f) - detail::expectation(p2, f2));
            const double rhs = eps * (1.0 + 2.0 * *std::max_element(f.begin(), f.end()));
            if (lhs > rhs + kTol * (1.0 + rhs)) ++rep.violations_a;
            if (rhs > 0.0) rep.max_ratio_a = std::max(rep.max_ratio_a, lhs / rhs);
        }

        // Inequality B.
        {
            const std::size_t m = 1 + rng.below(8);
            const std::size_t n = 1 + rng.below(8);
            const auto p = detail::random_distribution(m, rng);
            const auto p2 = detail::perturb_within(p, eps, rng);
            std::vector<double> mix(n, 0.0), mix2(n, 0.0);
            for (std::size_t v = 0; v < m; ++v) {
                const auto q = detail::random_distribution(n, rng);
                const auto q2 = detail::perturb_within(q, eps, rng);
                for (std::size_t i = 0; i < n; ++i) {
                    mix[i] += p[v] * q[i];
                    mix2[i] += p2[v] * q2[i];
                }
            }
            double l1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) l1 += std::abs(mix[i] - mix2[i]);
            const double lhs = 0.5 * l1;
            const double rhs = 3.0 * eps;
            if (lhs > rhs + kTol) ++rep.violations_b;
            if (rhs > 0.0) rep.max_ratio_b = std::max(rep.max_ratio_b, lhs / rhs);
        }
    }
    return rep;
}

/// lhs / rhs of inequality A on the two-point instance P = (1, 0), P' = (1 - e, e),
/// f = 0, f' = e. Both sides equal e, so the ratio is 1 up to rounding.
inline double dtv_lemma_tight_ratio(double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw InvalidArgument("eps must lie in (0, 1]");
    const std::vector<double> p{1.0, 0.0}, p2{1.0 - eps, eps};
    const std::vector<double> f{0.0, 0.0}, f2{eps, eps};
    const double d = dtv(p, p2);
    const double lhs = std::abs(detail::expectation(p, f) - detail::expectation(p2, f2));
    const double rhs = d * (1.0 + 2.0 * 0.0);
    return lhs / rhs;
}

// ---------------------------------------------------------------------------
// Bound widths

struct WidthStats {
    double mean = 0.0;
    double max = 0.0;
    std::size_t cells = 0;
};

/// Mean and max of upper - lower over all states (terminal states contribute 0).
inline WidthStats bound_widths(const ValueTable& lower, const ValueTable& upper) {
    if (lower.size() != upper.size()) throw InvalidArgument("value tables differ in size");
    WidthStats w;
    w.cells = lower.size();
    std::vector<double> diffs(lower.size());
    for (std::size_t s = 0; s < lower.size(); ++s) {
        diffs[s] = std::isinf(upper[s]) ? kInfinity : upper[s] - lower[s];
        w.max = std::max(w.max, diffs[s]);
    }
    w.mean = w.cells ? pairwise_sum(diffs) / static_cast<double>(w.cells) : 0.0;
    return w;
}

// ---------------------------------------------------------------------------
// Sections

struct SectionSample {
    std::size_t region = 0;
    double x_lo = 0.0, x_hi = 0.0;
    double e_min = 0.0, e_max = 0.0;
    std::optional<double> external;

    double x() const noexcept { return 0.5 * (x_lo + x_hi); }
};

struct SectionData {
    std::size_t fixed_dim = 0;
    double fixed_value = 0.0;
    std::size_t free_dim = 0;
    std::vector<SectionSample> samples;
};

/// The cells of a 2-D partition crossed by the line {coordinate fixed_dim = value},
/// ordered by the other coordinate.
inline SectionData extract_section(const GridPartition& partition, const ValueTable& lower, const ValueTable& upper,
                                   std::size_t fixed_dim, double value,
                                   const std::vector<std::optional<double>>* external = nullptr) {
    if (partition.dim() != 2) throw InvalidArgument("sections need a two-dimensional partition");
    if (fixed_dim >= 2) throw InvalidArgument("fixed dimension must be 0 or 1");
    if (lower.size() != partition.size() || upper.size() != partition.size())
        throw InvalidArgument("value tables do not match the partition");
    if (external && external->size() != partition.size())
        throw InvalidArgument("external values do not match the partition");
    SectionData out;
    out.fixed_dim = fixed_dim;
    out.fixed_value = value;
    out.free_dim = 1 - fixed_dim;
    const std::size_t row = partition.index_of_coord(fixed_dim, value);
    for (std::size_t i = 0; i < partition.count(out.free_dim); ++i) {
        RegionId r;
        r.dim = 2;
        r[fixed_dim] = row;
        r[out.free_dim] = i;
        const std::size_t k = partition.linear_index(r);
        SectionSample smp;
        smp.region = k;
        smp.x_lo = partition.cell_lo(out.free_dim, i);
        smp.x_hi = partition.cell_hi(out.free_dim, i);
        smp.e_min = lower[k];
        smp.e_max = upper[k];
        if (external) smp.external = (*external)[k];
        out.samples.push_back(smp);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Strategy agreement

/// Per-region classification of (lower-bound strategy, upper-bound strategy,
/// optional external strategy). Terminal regions carry no class.
///  - both-<a>:               lower and upper pick a (and the external strategy, if any, agrees)
///  - low-<a>-high-<b>:       lower picks a, upper picks b
///  - external-disagrees-<b>: lower and upper agree, the external strategy picks b instead
struct AgreementMap {
    std::vector<std::optional<std::string>> classes;
    std::map<std::string, std::size_t> counts;

    std::size_t classified() const {
        std::size_t n = 0;
        for (const auto& [k, c] : counts) n += c;
        return n;
    }
    /// Fraction of classified regions in a both-* class.
    double agreement_fraction() const {
        std::size_t agree = 0;
        for (const auto& [k, c] : counts)
            if (k.rfind("both-", 0) == 0) agree += c;
        const auto n = classified();
        return n ? static_cast<double>(agree) / static_cast<double>(n) : 1.0;
    }
};

inline AgreementMap agreement_map(const Strategy& low, const Strategy& high, const std::vector<std::string>& actions,
                                  const Strategy* external = nullptr) {
    if (low.size() != high.size() || (external && external->size() != low.size()))
        throw InvalidArgument("strategies cover different partitions");
    AgreementMap out;
    out.classes.resize(low.size());
    auto name = [&](std::size_t a) -> const std::string& {
        if (a >= actions.size()) throw InvalidArgument("strategy refers to unknown action " + std::to_string(a));
        return actions[a];
    };
    for (std::size_t s = 0; s < low.size(); ++s) {
        if (!low.choice[s] && !high.choice[s]) continue;
        if (!low.choice[s] || !high.choice[s])
            throw InvalidArgument("lower and upper strategies disagree on which regions are terminal");
        const std::size_t a = *low.choice[s], b = *high.choice[s];
        std::string cls;
        if (a != b)
            cls = "low-" + name(a) + "-high-" + name(b);
        else if (external && external->choice[s] && *external->choice[s] != a)
            cls = "external-disagrees-" + name(*external->choice[s]);
        else
            cls = "both-" + name(a);
        ++out.counts[cls];
        out.classes[s] = std::move(cls);
    }
    return out;
}

// ---------------------------------------------------------------------------
// External strategies

struct ExternalStrategy {
    Strategy strategy;
    /// Learned cost per cell; empty when the file has no value column.
    std::vector<std::optional<double>> values;
    std::vector<std::size_t> uncovered;

    bool has_values() const noexcept { return !values.empty(); }
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != ' ' && c != '\t') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

/// Grid-line index of coordinate x in dimension d, or nullopt when x is not on a grid line.
inline std::optional<std::size_t> grid_line(const GridPartition& p, std::size_t d, double x) {
    constexpr double kTol = 1e-9;
    for (std::size_t i = 0; i <= p.count(d); ++i) {
        const double g = i == p.count(d) ? p.domain().hi()[d] : p.cell_lo(d, i);
        if (std::abs(g - x) <= kTol) return i;
    }
    return std::nullopt;
}

} // namespace detail

/// Reads an external strategy as CSV with header `lo0,...,loK-1,hi0,...,hiK-1,action[,value]`.
/// Every row names a box whose faces lie on grid lines of `partition`; all cells inside
/// the box receive the row's action (and value). Cells not covered by any row are listed
/// in `uncovered`. Rows that overlap, miss the grid lines or name unknown actions are
/// rejected with the offending line number.
inline ExternalStrategy read_external_strategy(std::istream& in, const GridPartition& partition,
                                               const std::vector<std::string>& actions) {
    const std::size_t k = partition.dim();
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            return true;
        }
        return false;
    };
    if (!next_line()) throw ParseError(1, "empty strategy file");
    const auto header = detail::split_csv(line);
    std::vector<std::string> expected;
    for (std::size_t d = 0; d < k; ++d) expected.push_back("lo" + std::to_string(d));
    for (std::size_t d = 0; d < k; ++d) expected.push_back("hi" + std::to_string(d));
    expected.push_back("action");
    const bool with_value = header.size() == expected.size() + 1 && header.back() == "value";
    if (!std::equal(expected.begin(), expected.end(), header.begin(),
                    header.begin() + std::min(header.size(), expected.size())) ||
        (header.size() != expected.size() && !with_value)) {
        std::string want;
        for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
        throw ParseError(lineno, "header must be '" + want + "' optionally followed by ',value'");
    }

    ExternalStrategy out;
    out.strategy.choice.assign(partition.size(), std::nullopt);
    if (with_value) out.values.assign(partition.size(), std::nullopt);
    std::vector<bool> covered(partition.size(), false);
    while (next_line()) {
        const auto f = detail::split_csv(line);
        if (f.size() != header.size())
            throw ParseError(lineno, "expected " + std::to_string(header.size()) + " fields, got " +
                                         std::to_string(f.size()));
        std::array<std::size_t, kMaxDim> first{}, last{};
        for (std::size_t d = 0; d < k; ++d) {
            const auto lo = parse_double(f[d]);
            const auto hi = parse_double(f[k + d]);
            if (!lo || !hi) throw ParseError(lineno, "non-numeric box coordinate in dimension " + std::to_string(d));
            if (!(*lo < *hi)) throw ParseError(lineno, "box is empty in dimension " + std::to_string(d));
            const auto a = detail::grid_line(partition, d, *lo);
            const auto b = detail::grid_line(partition, d, *hi);
            if (!a || !b)
                throw ParseError(lineno, "box [" + f[d] + ", " + f[k + d] + "] in dimension " + std::to_string(d) +
                                             " does not align with the partition's cell boundaries");
            first[d] = *a;
            last[d] = *b;
        }
        const std::string& act = f[2 * k];
        const auto it = std::find(actions.begin(), actions.end(), act);
        if (it == actions.end()) throw ParseError(lineno, "unknown action '" + act + "'");
        const auto a = static_cast<std::size_t>(it - actions.begin());
        std::optional<double> value;
        if (with_value) {
            value = parse_double(f.back());
            if (!value || std::isnan(*value)) throw ParseError(lineno, "value '" + f.back() + "' is not a number");
        }
        // Visit every cell of the box.
        RegionId r;
        r.dim = k;
        for (std::size_t d = 0; d < k; ++d) r[d] = first[d];
        while (true) {
            const std::size_t cell = partition.linear_index(r);
            if (covered[cell])
                throw ParseError(lineno, "box overlaps an earlier row at cell " + r.to_string());
            covered[cell] = true;
            out.strategy.choice[cell] = a;
            if (with_value) out.values[cell] = value;
            std::size_t d = 0;
            for (; d < k; ++d) {
                if (++r[d] < last[d]) break;
                r[d] = first[d];
            }
            if (d == k) break;
        }
    }
    for (std::size_t c = 0; c < partition.size(); ++c)
        if (!covered[c]) out.uncovered.push_back(c);
    return out;
}

inline ExternalStrategy import_external_strategy(const std::string& path, const GridPartition& partition,
                                                 const std::vector<std::string>& actions) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open strategy file '" + path + "'");
    return read_external_strategy(in, partition, actions);
}

struct ContainmentReport {
    std::size_t compared = 0;
    std::size_t below = 0;
    std::size_t above = 0;
    std::vector<std::size_t> outside;

    std::size_t out_of_bounds() const noexcept { return below + above; }
};

/// Counts cells whose external value lies outside [lower - tol, upper + tol].
/// Cells without an external value are skipped.
inline ContainmentReport count_out_of_bounds(const std::vector<std::optional<double>>& external,
                                             const ValueTable& lower, const ValueTable& upper, double tol = 0.0) {
    if (external.size() != lower.size() || lower.size() != upper.size())
        throw InvalidArgument("external values and bounds differ in size");
    ContainmentReport r;
    for (std::size_t s = 0; s < external.size(); ++s) {
        if (!external[s]) continue;
        ++r.compared;
        const double v = *external[s];
        if (v < lower[s] - tol) {
            ++r.below;
            r.outside.push_back(s);
        } else if (v > upper[s] + tol) {
            ++r.above;
            r.outside.push_back(s);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// CSV output. Rows follow the linear region order (dimension 0 fastest).

namespace detail {
inline std::string opt_cell(const std::optional<double>& x) { return x ? format_double(*x) : std::string(); }
} // namespace detail

inline void write_section_csv(std::ostream& os, const SectionData& sec, const GridPartition& partition) {
    os << "region,i0,i1,x_lo,x_hi,x,e_min,e_max,external\n";
    for (const auto& s : sec.samples) {
        const auto r = partition.region_at(s.region);
        os << s.region << ',' << r[0] << ',' << r[1] << ',' << format_double(s.x_lo) << ',' << format_double(s.x_hi)
           << ',' << format_double(s.x()) << ',' << format_double(s.e_min) << ',' << format_double(s.e_max) << ','
           << detail::opt_cell(s.external) << '\n';
    }
}

/// gnuplot script drawing the lower/upper (and external, when present) step curves of a section CSV.
inline void write_section_plot(std::ostream& os, const std::string& csv_name, const SectionData& sec,
                               const std::string& title) {
    const bool ext = std::any_of(sec.samples.begin(), sec.samples.end(), [](const auto& s) { return bool(s.external); });
    os << "# gnuplot script; run: gnuplot " << csv_name.substr(0, csv_name.rfind('.')) << ".gp\n"
       << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << "set title '" << title << "'\n"
       << "set xlabel 'coordinate " << sec.free_dim << "'\n"
       << "set ylabel 'expected cost'\n"
       << "set terminal pngcairo size 800,500\n"
       << "set output '" << csv_name.substr(0, csv_name.rfind('.')) << ".png'\n"
       << "plot '" << csv_name << "' using 6:8 with steps lw 2 title 'upper', \\\n"
       << "     '" << csv_name << "' using 6:7 with steps lw 2 title 'lower'";
    if (ext) os << ", \\\n     '" << csv_name << "' using 6:9 with points pt 7 title 'external'";
    os << '\n';
}

inline void write_agreement_csv(std::ostream& os, const AgreementMap& map, const GridPartition& partition,
                                const Strategy& low, const Strategy& high, const std::vector<std::string>& actions,
                                const Strategy* external = nullptr) {
    os << "region";
    for (std::size_t d = 0; d < partition.dim(); ++d) os << ",i" << d;
    for (std::size_t d = 0; d < partition.dim(); ++d) os << ",lo" << d;
    for (std::size_t d = 0; d < partition.dim(); ++d) os << ",hi" << d;
    os << ",low,high,external,class\n";
    auto act = [&](const Strategy* s, std::size_t k) -> std::string {
        return s && s->choice[k] ? actions.at(*s->choice[k]) : std::string();
    };
    for (std::size_t k = 0; k < partition.size(); ++k) {
        const auto r = partition.region_at(k);
        const Box b = partition.region_box(k);
        os << k;
        for (std::size_t d = 0; d < partition.dim(); ++d) os << ',' << r[d];
        for (std::size_t d = 0; d < partition.dim(); ++d) os << ',' << format_double(b.lo()[d]);
        for (std::size_t d = 0; d < partition.dim(); ++d) os << ',' << format_double(b.hi()[d]);
        os << ',' << act(&low, k) << ',' << act(&high, k) << ',' << act(external, k) << ','
           << map.classes[k].value_or("terminal") << '\n';
    }
}

inline void write_values_csv(std::ostream& os, const Imdp& m, const ValueTable& v) {
    os << "state,name,kind,value\n";
    for (std::size_t s = 0; s < m.num_states(); ++s)
        os << s << ',' << m.state_names()[s] << ',' << to_string(m.kinds()[s]) << ',' << format_double(v[s]) << '\n';
}

inline void write_strategy_csv(std::ostream& os, const Imdp& m, const Strategy& st) {
    os << "state,name,action\n";
    for (std::size_t s = 0; s < m.num_states(); ++s)
        os << s << ',' << m.state_names()[s] << ',' << (st.choice[s] ? m.actions()[*st.choice[s]] : std::string())
           << '\n';
}

/// Strategy of an induced IMDP in the external-strategy CSV format (one row per non-terminal cell).
inline void write_strategy_boxes_csv(std::ostream& os, const GridPartition& partition, const Strategy& st,
                                     const std::vector<std::string>& actions, const ValueTable* values = nullptr) {
    for (std::size_t d = 0; d < partition.dim(); ++d) os << "lo" << d << ',';
    for (std::size_t d = 0; d < partition.dim(); ++d) os << "hi" << d << ',';
    os << "action" << (values ? ",value" : "") << '\n';
    for (std::size_t k = 0; k < partition.size(); ++k) {
        if (!st.choice[k]) continue;
        const Box b = partition.region_box(k);
        for (std::size_t d = 0; d < partition.dim(); ++d) os << format_double(b.lo()[d]) << ',';
        for (std::size_t d = 0; d < partition.dim(); ++d) os << format_double(b.hi()[d]) << ',';
        os << actions.at(*st.choice[k]);
        if (values) os << ',' << format_double((*values)[k]);
        os << '\n';
    }
}

/// Adversary witnesses: one line per (state, action) with the chosen distribution.
inline void write_adversary(std::ostream& os, const Imdp& m, const Adversary& adv) {
    os << "# state action support... | probabilities...\n";
    for (std::size_t s = 0; s < m.num_states(); ++s) {
        if (m.is_terminal(s)) continue;
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            const auto targets = m.entry(s, a).credal.targets();
            const auto& p = adv.at(s, a);
            os << s << ' ' << m.actions()[a];
            for (auto t : targets) os << ' ' << t;
            os << " |";
            for (double x : p) os << ' ' << format_double(x);
            os << '\n';
        }
    }
}

} // namespace imdpbound
