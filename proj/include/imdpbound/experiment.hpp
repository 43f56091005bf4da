#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "imdpbound/abstraction.hpp"
#include "imdpbound/analysis.hpp"
#include "imdpbound/emdp.hpp"
#include "imdpbound/errors.hpp"
#include "imdpbound/imdp.hpp"
#include "imdpbound/imdp_io.hpp"
#include "imdpbound/model_io.hpp"
#include "imdpbound/version.hpp"

namespace imdpbound {

inline constexpr const char* kOutputEnvVar = "IMDPBOUND_OUT";
inline constexpr const char* kDefaultOutputDir = "imdpbound-out";

/// Output directory used when none is given: $IMDPBOUND_OUT, else ./imdpbound-out.
inline std::string default_output_dir() {
    const char* env = std::getenv(kOutputEnvVar);
    return env && *env ? std::string(env) : std::string(kDefaultOutputDir);
}

struct RunConfig {
    /// Empty means the built-in walker defaults.
    std::string model_path;
    std::vector<double> widths{0.1, 0.05, 0.025};
    CredalMode mode = CredalMode::interval;
    std::size_t samples = 5;
    ViOptions vi{};
    std::uint64_t mc_runs = 10000;
    std::size_t mc_horizon = 200;
    std::uint64_t mc_seed = 20190617;
    std::size_t mc_probes = 20;
    std::size_t gap_steps = 5;
    std::vector<double> sections{0.0, 0.7};
    /// Dimension held fixed by the sections (1 = time for the walker).
    std::size_t section_dim = 1;
    std::string output_dir;

    void validate() const {
        if (widths.empty()) throw InvalidArgument("config: widths must not be empty");
        for (double w : widths)
            if (!(w > 0.0)) throw InvalidArgument("config: widths must be positive");
        if (mode == CredalMode::candidates && samples == 0) throw InvalidArgument("config: samples must be positive");
        if (!(vi.tol > 0.0)) throw InvalidArgument("config: vi.tol must be positive");
        if (vi.max_iter == 0) throw InvalidArgument("config: vi.max_iter must be positive");
        if (!(vi.divergence_cap > 0.0)) throw InvalidArgument("config: vi.divergence_cap must be positive");
        if (mc_runs == 0 || mc_horizon == 0) throw InvalidArgument("config: mc.runs and mc.horizon must be positive");
        if (gap_steps == 0) throw InvalidArgument("config: gap_steps must be positive");
        if (section_dim > 1) throw InvalidArgument("config: section_dim must be 0 or 1");
    }
};

namespace detail {

template <typename T>
T config_field(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw InvalidArgument("config: unknown key '" + it.key() + "' in " + where);
    }
}

} // namespace detail

/// Reads a run config. Relative model paths are resolved against the config file's directory.
inline RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
    if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
    detail::reject_unknown(j,
                           {"model", "widths", "mode", "samples", "vi", "mc", "gap_steps", "sections", "section_dim",
                            "output"},
                           "config");
    RunConfig c;
    c.model_path = detail::config_field<std::string>(j, "model", "");
    if (!c.model_path.empty() && std::filesystem::path(c.model_path).is_relative() && !base_dir.empty())
        c.model_path = (base_dir / c.model_path).lexically_normal().string();
    c.widths = detail::config_field(j, "widths", c.widths);
    c.mode = parse_credal_mode(detail::config_field<std::string>(j, "mode", "interval"));
    c.samples = detail::config_field(j, "samples", c.samples);
    if (j.contains("vi")) {
        const auto& v = j.at("vi");
        detail::reject_unknown(v, {"tol", "max_iter", "divergence_cap"}, "vi");
        c.vi.tol = detail::config_field(v, "tol", c.vi.tol);
        c.vi.max_iter = detail::config_field(v, "max_iter", c.vi.max_iter);
        c.vi.divergence_cap = detail::config_field(v, "divergence_cap", c.vi.divergence_cap);
    }
    if (j.contains("mc")) {
        const auto& m = j.at("mc");
        detail::reject_unknown(m, {"runs", "horizon", "seed", "probes"}, "mc");
        c.mc_runs = detail::config_field(m, "runs", c.mc_runs);
        c.mc_horizon = detail::config_field(m, "horizon", c.mc_horizon);
        c.mc_seed = detail::config_field(m, "seed", c.mc_seed);
        c.mc_probes = detail::config_field(m, "probes", c.mc_probes);
    }
    c.gap_steps = detail::config_field(j, "gap_steps", c.gap_steps);
    c.sections = detail::config_field(j, "sections", c.sections);
    c.section_dim = detail::config_field(j, "section_dim", c.section_dim);
    c.output_dir = detail::config_field<std::string>(j, "output", "");
    c.validate();
    return c;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j, std::filesystem::path(path).parent_path());
}

inline WalkerModel model_of(const RunConfig& c) {
    return c.model_path.empty() ? WalkerModel::defaults() : load_model(c.model_path);
}

/// Point policy following a region strategy of `partition`.
inline PointPolicy region_policy(const GridPartition& partition, const Strategy& strategy,
                                 std::vector<std::string> region_names = {}) {
    if (strategy.size() != partition.size()) throw InvalidArgument("strategy does not match the partition");
    return [&partition, &strategy, names = std::move(region_names)](const Point& s) -> std::size_t {
        const std::size_t k = partition.index_of(s);
        if (!strategy.choice[k])
            throw UndefinedStrategy("strategy undefined at region " +
                                    (k < names.size() ? names[k] : partition.region_at(k).to_string()));
        return *strategy.choice[k];
    };
}

/// Deterministic probe points: (domain lower corner) first, then uniform non-terminal points.
inline std::vector<Point> probe_points(const WalkerModel& model, std::size_t n, std::uint64_t seed) {
    std::vector<Point> out;
    if (n == 0) return out;
    if (!model.is_terminal(model.domain.lo())) out.push_back(model.domain.lo());
    Rng rng(splitmix64(seed ^ 0x70726f6265ULL));
    std::size_t guard = 0;
    while (out.size() < n) {
        if (++guard > 1000000) throw InvalidArgument("could not place probe points outside the terminal boxes");
        Point p = model.domain.lo();
        for (std::size_t d = 0; d < model.dim(); ++d) p[d] = rng.uniform(model.domain.lo()[d], model.domain.hi()[d]);
        if (!model.is_terminal(p)) out.push_back(p);
    }
    return out;
}

namespace detail {

inline nlohmann::ordered_json json_number(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    return x;
}

inline nlohmann::ordered_json report_json(const ViReport& r) {
    return {{"iterations", r.iterations},
            {"residual", json_number(r.residual)},
            {"converged", r.converged},
            {"infinite_states", r.infinite_states}};
}

inline std::string width_tag(double w) { return "d" + format_double(w); }

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("error while writing '" + path.string() + "'");
}

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
    }
}

} // namespace detail

struct LevelResult {
    InducedImdp induced;
    ViResult lower;
    ViResult upper;
    WidthStats widths;
    double horizon_gap = 0.0;
    AgreementMap agreement;
};

struct ExperimentResult {
    std::vector<LevelResult> levels;
    std::vector<MonotonicityReport> monotonicity;
    std::size_t mc_contained = 0;
    std::size_t mc_probes = 0;
    bool narrowing_strict = false;
    bool gap_non_increasing = false;
    bool goal_zero = false;
    nlohmann::ordered_json summary;
};

/// The full pipeline: induce each width, solve both bounds, check refinement
/// monotonicity, bounded-horizon gaps, sections, agreement maps and Monte-Carlo
/// probes against the finest level. Writes all artifacts plus summary.json to
/// `out_dir` when it is non-empty. Solver non-convergence raises NonConvergence
/// after the artifacts are written.
inline ExperimentResult run_experiment(const RunConfig& cfg, const std::string& out_dir, std::size_t threads = 1) {
    cfg.validate();
    namespace fs = std::filesystem;
    const WalkerModel model = detail::stage("model", [&] { return model_of(cfg); });
    const bool write = !out_dir.empty();
    if (write) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());
    }
    const fs::path out(out_dir);
    auto emit = [&](const std::string& name, const std::string& content) {
        if (write) detail::write_file(out / name, content);
    };

    ExperimentResult res;
    auto& summary = res.summary;
    summary["tool_version"] = kToolVersion;
    summary["model"] = model.name;
    summary["model_hash"] = model_hash(model);
    summary["mode"] = std::string(to_string(cfg.mode));
    summary["sound"] = cfg.mode == CredalMode::interval;
    if (cfg.mode == CredalMode::candidates) {
        summary["samples"] = cfg.samples;
        summary["note"] = "candidates mode is an inner approximation; its bounds are not guaranteed";
    }
    summary["vi"] = {{"tol", cfg.vi.tol}, {"max_iter", cfg.vi.max_iter}, {"divergence_cap", cfg.vi.divergence_cap}};

    InduceOptions iopt{cfg.mode, cfg.samples, threads};
    auto induced = detail::stage("induce", [&] { return refinement_sequence(model, cfg.widths, iopt); });

    ViOptions vopt = cfg.vi;
    vopt.threads = threads;
    bool all_converged = true;
    res.goal_zero = true;
    for (auto& ind : induced) {
        LevelResult lvl{std::move(ind), {}, {}, {}, 0.0, {}};
        detail::stage("vi", [&] {
            lvl.lower = value_iteration(lvl.induced.imdp, Opt::min, vopt);
            lvl.upper = value_iteration(lvl.induced.imdp, Opt::max, vopt);
            return 0;
        });
        all_converged = all_converged && lvl.lower.report.converged && lvl.upper.report.converged;
        const auto& m = lvl.induced.imdp;
        for (std::size_t s = 0; s < m.num_states(); ++s)
            if (m.is_terminal(s) && (lvl.lower.values[s] != 0.0 || lvl.upper.values[s] != 0.0)) res.goal_zero = false;
        lvl.widths = bound_widths(lvl.lower.values, lvl.upper.values);
        detail::stage("horizon-gap", [&] {
            const auto hi = bounded_horizon_values(m, lvl.upper.strategy, cfg.gap_steps, Opt::max, threads);
            const auto lo = bounded_horizon_values(m, lvl.upper.strategy, cfg.gap_steps, Opt::min, threads);
            for (std::size_t s = 0; s < m.num_states(); ++s)
                lvl.horizon_gap = std::max(lvl.horizon_gap, std::abs(hi[s] - lo[s]));
            return 0;
        });
        lvl.agreement = detail::stage(
            "agreement", [&] { return agreement_map(lvl.lower.strategy, lvl.upper.strategy, m.actions()); });
        res.levels.push_back(std::move(lvl));
    }

    // Artifacts per level.
    detail::stage("write", [&] {
        for (const auto& lvl : res.levels) {
            const auto tag = detail::width_tag(lvl.induced.partition.widths()[0]);
            const auto& m = lvl.induced.imdp;
            if (!write) break;
            emit("imdp_" + tag + ".txt", imdp_to_string(document_of(lvl.induced)));
            for (const auto* r : {&lvl.lower, &lvl.upper}) {
                const std::string which = r == &lvl.lower ? "min" : "max";
                std::ostringstream v, st;
                write_values_csv(v, m, r->values);
                write_strategy_csv(st, m, r->strategy);
                emit("values_" + which + "_" + tag + ".csv", v.str());
                emit("strategy_" + which + "_" + tag + ".csv", st.str());
            }
            std::ostringstream ag;
            write_agreement_csv(ag, lvl.agreement, lvl.induced.partition, lvl.lower.strategy, lvl.upper.strategy,
                                m.actions());
            emit("agreement_" + tag + ".csv", ag.str());
        }
        return 0;
    });

    // Refinement monotonicity between consecutive levels.
    nlohmann::ordered_json mono = nlohmann::ordered_json::array();
    detail::stage("refine-check", [&] {
        for (std::size_t i = 1; i < res.levels.size(); ++i) {
            const auto& c = res.levels[i - 1];
            const auto& f = res.levels[i];
            auto rep = check_refinement_monotonicity(c.induced.partition, c.lower.values, c.upper.values,
                                                     f.induced.partition, f.lower.values, f.upper.values,
                                                     2.0 * cfg.vi.tol);
            mono.push_back({{"coarse", cfg.widths[i - 1]},
                            {"fine", cfg.widths[i]},
                            {"checked", rep.checked},
                            {"violations", rep.violations.size()}});
            res.monotonicity.push_back(std::move(rep));
        }
        return 0;
    });

    // Sections.
    nlohmann::ordered_json sections = nlohmann::ordered_json::array();
    detail::stage("section", [&] {
        for (double t : cfg.sections) {
            for (const auto& lvl : res.levels) {
                const auto sec = extract_section(lvl.induced.partition, lvl.lower.values, lvl.upper.values,
                                                 cfg.section_dim, t);
                const std::string name =
                    "section_x" + std::to_string(cfg.section_dim) + "_" + format_double(t) + "_" +
                    detail::width_tag(lvl.induced.partition.widths()[0]);
                std::ostringstream csv, gp;
                write_section_csv(csv, sec, lvl.induced.partition);
                write_section_plot(gp, name + ".csv", sec,
                                   "section at coordinate " + std::to_string(cfg.section_dim) + " = " +
                                       format_double(t) + ", width " + format_double(lvl.induced.partition.widths()[0]));
                emit(name + ".csv", csv.str());
                emit(name + ".gp", gp.str());
                double mean = 0.0;
                for (const auto& s : sec.samples) mean += s.e_max - s.e_min;
                mean /= static_cast<double>(sec.samples.size());
                sections.push_back({{"value", t},
                                    {"width", lvl.induced.partition.widths()[0]},
                                    {"samples", sec.samples.size()},
                                    {"mean_width", detail::json_number(mean)}});
            }
        }
        return 0;
    });

    // Monte-Carlo probes of the finest level's upper-bound strategy.
    nlohmann::ordered_json probes = nlohmann::ordered_json::array();
    detail::stage("mc", [&] {
        const auto& fin = res.levels.back();
        const auto policy = region_policy(fin.induced.partition, fin.upper.strategy, fin.induced.imdp.state_names());
        const auto points = probe_points(model, cfg.mc_probes, cfg.mc_seed);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto& p = points[i];
            const std::size_t cell = fin.induced.partition.index_of(p);
            const auto est = mc_expected_cost(model, policy, p, cfg.mc_horizon, cfg.mc_runs,
                                              splitmix64(cfg.mc_seed + i), threads);
            const double lo = fin.lower.values[cell], hi = fin.upper.values[cell];
            const bool inside = est.mean >= lo - cfg.vi.tol - 3.0 * est.std_error && est.mean <= hi + 3.0 * est.std_error;
            res.mc_contained += inside;
            probes.push_back({{"point", {p[0], p[1]}},
                              {"cell", fin.induced.imdp.state_names()[cell]},
                              {"e_min", detail::json_number(lo)},
                              {"e_max", detail::json_number(hi)},
                              {"mean", est.mean},
                              {"std_error", est.std_error},
                              {"inside", inside}});
        }
        res.mc_probes = points.size();
        return 0;
    });

    // Trends.
    res.narrowing_strict = true;
    res.gap_non_increasing = true;
    for (std::size_t i = 1; i < res.levels.size(); ++i) {
        res.narrowing_strict = res.narrowing_strict && res.levels[i].widths.mean < res.levels[i - 1].widths.mean;
        res.gap_non_increasing =
            res.gap_non_increasing && res.levels[i].horizon_gap <= res.levels[i - 1].horizon_gap + 2.0 * cfg.vi.tol;
    }

    nlohmann::ordered_json levels = nlohmann::ordered_json::array();
    for (const auto& lvl : res.levels) {
        nlohmann::ordered_json counts = nlohmann::ordered_json::object();
        for (const auto& [k, c] : lvl.agreement.counts) counts[k] = c;
        levels.push_back({{"width", lvl.induced.partition.widths()[0]},
                          {"states", lvl.induced.imdp.num_states()},
                          {"granularity", lvl.induced.partition.granularity()},
                          {"min", detail::report_json(lvl.lower.report)},
                          {"max", detail::report_json(lvl.upper.report)},
                          {"mean_width", detail::json_number(lvl.widths.mean)},
                          {"max_width", detail::json_number(lvl.widths.max)},
                          {"horizon_gap", detail::json_number(lvl.horizon_gap)},
                          {"agreement", counts},
                          {"agreement_fraction", lvl.agreement.agreement_fraction()}});
    }
    std::size_t total_violations = 0;
    for (const auto& r : res.monotonicity) total_violations += r.violations.size();
    summary["widths"] = cfg.widths;
    summary["levels"] = levels;
    summary["narrowing"] = {{"mean_width_strictly_decreasing", res.narrowing_strict}};
    summary["monotonicity"] = {{"slack", 2.0 * cfg.vi.tol}, {"pairs", mono}, {"violations", total_violations}};
    summary["horizon_gap"] = {{"steps", cfg.gap_steps},
                              {"strategy", "upper-bound"},
                              {"non_increasing", res.gap_non_increasing}};
    summary["goal_cells_zero"] = res.goal_zero;
    summary["sections"] = sections;
    summary["mc"] = {{"runs", cfg.mc_runs},
                     {"horizon", cfg.mc_horizon},
                     {"seed", cfg.mc_seed},
                     {"probes", res.mc_probes},
                     {"contained", res.mc_contained},
                     {"containment_rate",
                      res.mc_probes ? static_cast<double>(res.mc_contained) / static_cast<double>(res.mc_probes) : 1.0},
                     {"results", probes}};
    summary["converged"] = all_converged;
    emit("summary.json", summary.dump(2) + "\n");
    if (!all_converged) throw NonConvergence("stage vi: value iteration did not converge within max_iter");
    return res;
}

} // namespace imdpbound
