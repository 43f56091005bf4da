#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "imdpbound/abstraction.hpp"
#include "imdpbound/errors.hpp"
#include "imdpbound/geometry.hpp"
#include "imdpbound/imdp.hpp"
#include "imdpbound/numeric.hpp"

namespace imdpbound {

/// Contents of an IMDP text file. The partition is present when the IMDP was
/// induced from a grid; `meta` holds the provenance header in file order.
struct ImdpDocument {
    Imdp imdp;
    std::optional<GridPartition> partition;
    Provenance meta;
};

inline constexpr std::string_view kImdpMagic = "imdpbound-imdp";
inline constexpr int kImdpFormatVersion = 1;

namespace detail {

inline void check_token(const std::string& s, const char* what) {
    if (s.empty()) throw InvalidArgument(std::string(what) + " must not be empty");
    for (char c : s)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
            throw InvalidArgument(std::string(what) + " '" + s + "' contains whitespace");
}

inline StateKind parse_state_kind(std::string_view s) {
    if (s == "regular") return StateKind::regular;
    if (s == "goal") return StateKind::goal;
    if (s == "failure") return StateKind::failure;
    throw InvalidArgument("unknown state kind '" + std::string(s) + "'");
}

} // namespace detail

/// Writes the text format described in docs/formats.md. Doubles use the shortest
/// decimal that reads back to the same binary64 value.
inline void write_imdp(std::ostream& os, const ImdpDocument& doc) {
    const Imdp& m = doc.imdp;
    os << kImdpMagic << ' ' << kImdpFormatVersion << '\n';
    for (const auto& [k, v] : doc.meta) {
        detail::check_token(k, "meta key");
        if (v.find('\n') != std::string::npos) throw InvalidArgument("meta value for '" + k + "' spans lines");
        os << "meta " << k << ' ' << v << '\n';
    }
    if (doc.partition) {
        const auto& p = *doc.partition;
        os << "partition " << p.dim();
        for (std::size_t d = 0; d < p.dim(); ++d) os << ' ' << format_double(p.domain().lo()[d]);
        for (std::size_t d = 0; d < p.dim(); ++d) os << ' ' << format_double(p.domain().hi()[d]);
        for (std::size_t d = 0; d < p.dim(); ++d) os << ' ' << format_double(p.widths()[d]);
        os << '\n';
    }
    os << "actions " << m.num_actions();
    for (const auto& a : m.actions()) {
        detail::check_token(a, "action name");
        os << ' ' << a;
    }
    os << "\nstates " << m.num_states() << '\n';
    for (std::size_t s = 0; s < m.num_states(); ++s) {
        detail::check_token(m.state_names()[s], "state name");
        os << "s " << s << ' ' << m.state_names()[s] << ' ' << to_string(m.kinds()[s]) << '\n';
    }
    for (std::size_t s = 0; s < m.num_states(); ++s) {
        for (std::size_t a = 0; a < m.num_actions(); ++a) {
            if (!m.has_entry(s, a)) continue;
            const auto& e = m.entry(s, a);
            os << "pair " << s << ' ' << a << " cost " << format_double(e.cost.c_min) << ' '
               << format_double(e.cost.c_max);
            const auto& cs = e.credal;
            const auto targets = cs.targets();
            if (cs.kind() == CredalSet::Kind::interval) {
                os << " interval " << targets.size();
                for (std::size_t j = 0; j < targets.size(); ++j)
                    os << ' ' << targets[j] << ' ' << format_double(cs.p_low()[j]) << ' '
                       << format_double(cs.p_high()[j]);
            } else {
                os << " candidates " << targets.size() << ' ' << cs.distributions().size();
                for (auto t : targets) os << ' ' << t;
                for (const auto& d : cs.distributions())
                    for (double x : d) os << ' ' << format_double(x);
            }
            os << '\n';
        }
    }
    os << "end\n";
}

inline std::string imdp_to_string(const ImdpDocument& doc) {
    std::ostringstream os;
    write_imdp(os, doc);
    return os.str();
}

inline ImdpDocument document_of(const InducedImdp& ind) { return {ind.imdp, ind.partition, ind.provenance}; }

/// Parses the text format. Every problem is reported as ParseError with the
/// 1-based line number; the result is validated (every regular state has an entry
/// for every action).
inline ImdpDocument read_imdp(std::istream& is) {
    std::string line;
    std::size_t lineno = 0;
    auto fail = [&](const std::string& what) -> ParseError { return ParseError(lineno, what); };

    struct Tokens {
        std::istringstream in;
        std::string next() {
            std::string t;
            in >> t;
            return t;
        }
    };
    auto next_line = [&]() -> bool {
        while (std::getline(is, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            return true;
        }
        return false;
    };
    auto need_line = [&](const char* what) {
        if (!next_line()) throw ParseError(lineno + 1, std::string("unexpected end of file, expected ") + what);
    };

    auto num = [&](Tokens& t, const char* what) {
        const std::string tok = t.next();
        auto v = parse_double(tok);
        if (!v) throw fail(std::string("expected a number for ") + what + ", got '" + tok + "'");
        return *v;
    };
    auto count = [&](Tokens& t, const char* what) {
        const std::string tok = t.next();
        auto v = parse_uint(tok);
        if (!v) throw fail(std::string("expected a non-negative integer for ") + what + ", got '" + tok + "'");
        return static_cast<std::size_t>(*v);
    };
    auto expect_end = [&](Tokens& t) {
        const std::string extra = t.next();
        if (!extra.empty()) throw fail("unexpected trailing token '" + extra + "'");
    };

    need_line("header");
    {
        Tokens t{std::istringstream(line)};
        if (t.next() != kImdpMagic) throw fail("not an IMDP file (missing '" + std::string(kImdpMagic) + "' header)");
        const std::size_t version = count(t, "format version");
        if (version != static_cast<std::size_t>(kImdpFormatVersion))
            throw fail("unsupported format version " + std::to_string(version));
        expect_end(t);
    }

    ImdpDocument doc;
    need_line("'actions'");
    while (line.rfind("meta ", 0) == 0) {
        const std::string rest = line.substr(5);
        const auto sp = rest.find(' ');
        if (sp == std::string::npos || sp == 0) throw fail("meta line needs a key and a value");
        doc.meta.emplace_back(rest.substr(0, sp), rest.substr(sp + 1));
        need_line("'actions'");
    }

    if (line.rfind("partition ", 0) == 0) {
        Tokens t{std::istringstream(line)};
        t.next();
        const std::size_t k = count(t, "dimension");
        if (k == 0 || k > kMaxDim) throw fail("partition dimension must be between 1 and " + std::to_string(kMaxDim));
        Point lo = Point::filled(k, 0.0), hi = lo, w = lo;
        for (std::size_t d = 0; d < k; ++d) lo[d] = num(t, "domain lower corner");
        for (std::size_t d = 0; d < k; ++d) hi[d] = num(t, "domain upper corner");
        for (std::size_t d = 0; d < k; ++d) w[d] = num(t, "cell width");
        expect_end(t);
        try {
            doc.partition.emplace(Box(lo, hi), w);
        } catch (const Error& e) {
            throw fail(std::string("invalid partition: ") + e.what());
        }
        need_line("'actions'");
    }

    std::vector<std::string> actions;
    {
        Tokens t{std::istringstream(line)};
        if (t.next() != "actions") throw fail("expected 'actions'");
        const std::size_t n = count(t, "action count");
        for (std::size_t i = 0; i < n; ++i) {
            std::string a = t.next();
            if (a.empty()) throw fail("fewer action names than declared");
            actions.push_back(std::move(a));
        }
        expect_end(t);
    }

    need_line("'states'");
    std::size_t n_states = 0;
    {
        Tokens t{std::istringstream(line)};
        if (t.next() != "states") throw fail("expected 'states'");
        n_states = count(t, "state count");
        expect_end(t);
        if (doc.partition && doc.partition->size() != n_states)
            throw fail("partition has " + std::to_string(doc.partition->size()) + " cells but the file declares " +
                       std::to_string(n_states) + " states");
    }
    std::vector<std::string> names(n_states);
    std::vector<StateKind> kinds(n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
        need_line("a state line");
        Tokens t{std::istringstream(line)};
        if (t.next() != "s") throw fail("expected state line 's <index> <name> <kind>'");
        if (count(t, "state index") != s) throw fail("state lines must be numbered consecutively from 0");
        names[s] = t.next();
        const std::string kind = t.next();
        if (names[s].empty() || kind.empty()) throw fail("state line needs a name and a kind");
        try {
            kinds[s] = detail::parse_state_kind(kind);
        } catch (const Error& e) {
            throw fail(e.what());
        }
        expect_end(t);
    }
    try {
        doc.imdp = Imdp(std::move(names), std::move(kinds), actions);
    } catch (const Error& e) {
        throw fail(e.what());
    }

    const std::size_t n_act = actions.size();
    std::vector<bool> seen(n_states * n_act, false);
    while (true) {
        need_line("'pair' or 'end'");
        if (line == "end") break;
        Tokens t{std::istringstream(line)};
        if (t.next() != "pair") throw fail("expected 'pair' or 'end'");
        const std::size_t s = count(t, "state index");
        const std::size_t a = count(t, "action index");
        if (s >= n_states) throw fail("state index " + std::to_string(s) + " out of range");
        if (a >= n_act) throw fail("action index " + std::to_string(a) + " out of range");
        if (seen[s * n_act + a]) throw fail("duplicate pair for state " + std::to_string(s));
        seen[s * n_act + a] = true;
        if (t.next() != "cost") throw fail("expected 'cost'");
        CostInterval cost;
        cost.c_min = num(t, "c_min");
        cost.c_max = num(t, "c_max");
        const std::string kind = t.next();
        auto target = [&]() {
            const std::size_t x = count(t, "target index");
            if (x >= n_states) throw fail("target index " + std::to_string(x) + " out of range");
            return static_cast<std::uint32_t>(x);
        };
        try {
            if (kind == "interval") {
                const std::size_t n = count(t, "support size");
                std::vector<std::uint32_t> targets(n);
                std::vector<double> lo(n), hi(n);
                for (std::size_t j = 0; j < n; ++j) {
                    targets[j] = target();
                    lo[j] = num(t, "p_low");
                    hi[j] = num(t, "p_high");
                }
                expect_end(t);
                doc.imdp.set(s, a, CredalSet::interval(std::move(targets), std::move(lo), std::move(hi)), cost);
            } else if (kind == "candidates") {
                const std::size_t n = count(t, "support size");
                const std::size_t k = count(t, "candidate count");
                std::vector<std::uint32_t> targets(n);
                for (auto& x : targets) x = target();
                std::vector<std::vector<double>> dists(k, std::vector<double>(n));
                for (auto& d : dists)
                    for (auto& x : d) x = num(t, "probability");
                expect_end(t);
                doc.imdp.set(s, a, CredalSet::candidates(std::move(targets), std::move(dists)), cost);
            } else {
                throw fail("credal kind must be 'interval' or 'candidates', got '" + kind + "'");
            }
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw fail(e.what());
        }
    }
    if (next_line()) throw fail("content after 'end'");
    try {
        doc.imdp.validate();
    } catch (const Error& e) {
        throw ParseError(lineno, e.what());
    }
    return doc;
}

inline ImdpDocument imdp_from_string(const std::string& text) {
    std::istringstream is(text);
    return read_imdp(is);
}

inline ImdpDocument load_imdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open IMDP file '" + path + "'");
    return read_imdp(in);
}

inline void save_imdp(const std::string& path, const ImdpDocument& doc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write IMDP file '" + path + "'");
    write_imdp(out, doc);
    if (!out) throw IoError("error while writing '" + path + "'");
}

} // namespace imdpbound
