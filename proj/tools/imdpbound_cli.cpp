// imdpbound command-line front end.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "imdpbound/abstraction.hpp"
#include "imdpbound/analysis.hpp"
#include "imdpbound/emdp.hpp"
#include "imdpbound/experiment.hpp"
#include "imdpbound/imdp.hpp"
#include "imdpbound/imdp_io.hpp"
#include "imdpbound/model_io.hpp"
#include "imdpbound/version.hpp"

namespace fs = std::filesystem;
using namespace imdpbound;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kModel = 2, kNonConvergence = 3, kIo = 4 };

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::io: return kIo;
    case ErrorKind::non_convergence: return kNonConvergence;
    default: return kModel;
    }
}

fs::path ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    return fs::path(dir);
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw IoError("error while writing '" + path.string() + "'");
}

Point parse_point(const std::string& text) {
    std::vector<double> xs;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        auto v = parse_double(tok);
        if (!v) throw InvalidArgument("bad coordinate '" + tok + "' in point '" + text + "'");
        xs.push_back(*v);
    }
    if (xs.empty() || xs.size() > kMaxDim) throw InvalidArgument("point '" + text + "' has a bad dimension");
    return Point::from(xs);
}

struct Common {
    std::string out;
    std::size_t threads = 1;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-o,--out", c.out, "Output directory (default: $" + std::string(kOutputEnvVar) + " or " +
                                           kDefaultOutputDir + ")");
    sub->add_option("--threads", c.threads, "Worker threads; results do not depend on it")->check(CLI::PositiveNumber);
}

std::string out_dir(const Common& c) { return c.out.empty() ? default_output_dir() : c.out; }

ImdpDocument load_doc(const std::string& path) {
    try {
        return load_imdp(path);
    } catch (const ParseError& e) {
        throw Error(ErrorKind::parse, path + ": " + e.what());
    }
}

const GridPartition& need_partition(const ImdpDocument& doc, const std::string& path) {
    if (!doc.partition) throw InvalidArgument("'" + path + "' carries no partition; it was not induced from a grid");
    return *doc.partition;
}

ViOptions vi_options(double tol, std::size_t max_iter, double cap, std::size_t threads) {
    ViOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    o.divergence_cap = cap;
    o.threads = threads;
    return o;
}

std::vector<Opt> modes_of(const std::string& m) {
    if (m == "both") return {Opt::min, Opt::max};
    return {parse_opt(m)};
}

nlohmann::ordered_json report_json(const ViReport& r) {
    return {{"mode", std::string(to_string(r.mode))},
            {"iterations", r.iterations},
            {"residual", format_double(r.residual)},
            {"converged", r.converged},
            {"infinite_states", r.infinite_states},
            {"min_increment", format_double(r.min_increment)}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lower and upper expected-cost bounds for continuous-state MDPs via induced interval MDPs"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    // induce
    Common induce_c;
    std::string induce_model, induce_mode = "interval";
    std::vector<double> induce_widths;
    std::size_t induce_samples = 5;
    auto* induce = app.add_subcommand("induce", "Build induced IMDP files for one or more nested grid widths");
    induce->add_option("-m,--model", induce_model, "Model file (JSON); built-in walker when omitted");
    induce->add_option("-w,--width", induce_widths, "Grid width(s), coarsest first")->required()->delimiter(',');
    induce->add_option("--mode", induce_mode, "Credal representation")->check(CLI::IsMember({"interval", "candidates"}));
    induce->add_option("--samples", induce_samples, "Lattice points per axis in candidates mode")
        ->check(CLI::PositiveNumber);
    add_common(induce, induce_c);

    // vi
    Common vi_c;
    std::string vi_file, vi_mode = "both";
    double vi_tol = 1e-9, vi_cap = 1e9;
    std::size_t vi_max_iter = 100000;
    auto* vi = app.add_subcommand("vi", "Robust value iteration on an IMDP file");
    vi->add_option("imdp", vi_file, "IMDP file")->required();
    vi->add_option("--mode", vi_mode, "min, max or both")->check(CLI::IsMember({"min", "max", "both"}));
    vi->add_option("--tol", vi_tol, "Stopping tolerance (sup norm)")->check(CLI::PositiveNumber);
    vi->add_option("--max-iter", vi_max_iter, "Sweep limit")->check(CLI::PositiveNumber);
    vi->add_option("--divergence-cap", vi_cap, "Values above this become +inf")->check(CLI::PositiveNumber);
    add_common(vi, vi_c);

    // strategy
    Common st_c;
    std::string st_file, st_mode = "max";
    auto* strategy = app.add_subcommand("strategy", "Extract a bound strategy as a box CSV (external-strategy format)");
    strategy->add_option("imdp", st_file, "Induced IMDP file")->required();
    strategy->add_option("--mode", st_mode, "Bound whose strategy is extracted")->check(CLI::IsMember({"min", "max"}));
    add_common(strategy, st_c);

    // section
    Common sec_c;
    std::string sec_file, sec_external;
    std::size_t sec_dim = 1;
    double sec_value = 0.0;
    auto* section = app.add_subcommand("section", "Lower/upper bounds along a line through the state space");
    section->add_option("imdp", sec_file, "Induced IMDP file")->required();
    section->add_option("--dim", sec_dim, "Fixed coordinate (0 or 1)")->check(CLI::Range(0, 1));
    section->add_option("--value", sec_value, "Value of the fixed coordinate")->required();
    section->add_option("--external", sec_external, "External strategy CSV with a value column");
    add_common(section, sec_c);

    // refine-check
    std::string rc_coarse, rc_fine;
    double rc_tol = 1e-9;
    std::size_t rc_threads = 1;
    auto* refine = app.add_subcommand("refine-check", "Check that a finer partition tightens both bounds");
    refine->add_option("coarse", rc_coarse, "Coarse induced IMDP file")->required();
    refine->add_option("fine", rc_fine, "Fine induced IMDP file")->required();
    refine->add_option("--tol", rc_tol, "Value-iteration tolerance; slack is twice this")->check(CLI::PositiveNumber);
    refine->add_option("--threads", rc_threads, "Worker threads")->check(CLI::PositiveNumber);

    // mc
    std::string mc_model, mc_file, mc_start, mc_action, mc_mode = "max";
    std::uint64_t mc_runs = 10000, mc_seed = 1;
    std::size_t mc_horizon = 200, mc_threads = 1;
    auto* mc = app.add_subcommand("mc", "Monte-Carlo expected cost of a strategy on the continuous model");
    mc->add_option("-m,--model", mc_model, "Model file (JSON); built-in walker when omitted");
    mc->add_option("--start", mc_start, "Start point, comma separated")->required();
    auto* mc_imdp_opt = mc->add_option("--imdp", mc_file, "Follow the bound strategy of this induced IMDP");
    auto* mc_act_opt = mc->add_option("--action", mc_action, "Always take this action");
    mc_imdp_opt->excludes(mc_act_opt);
    mc->add_option("--mode", mc_mode, "Bound whose strategy is followed")->check(CLI::IsMember({"min", "max"}));
    mc->add_option("--runs", mc_runs, "Number of runs")->check(CLI::PositiveNumber);
    mc->add_option("--horizon", mc_horizon, "Steps per run")->check(CLI::PositiveNumber);
    mc->add_option("--seed", mc_seed, "Master seed");
    mc->add_option("--threads", mc_threads, "Worker threads")->check(CLI::PositiveNumber);

    // compare
    Common cmp_c;
    std::string cmp_file, cmp_external;
    double cmp_tol = 0.0;
    auto* compare = app.add_subcommand("compare", "Compare an external strategy against the IMDP bound strategies");
    compare->add_option("imdp", cmp_file, "Induced IMDP file")->required();
    compare->add_option("--external", cmp_external, "External strategy CSV")->required();
    compare->add_option("--tol", cmp_tol, "Tolerance for the value containment count")->check(CLI::NonNegativeNumber);
    add_common(compare, cmp_c);

    // experiment
    Common ex_c;
    std::string ex_config, ex_model, ex_mode;
    std::vector<double> ex_widths;
    std::optional<std::uint64_t> ex_seed, ex_runs;
    auto* experiment = app.add_subcommand("experiment", "Run the full pipeline from a config file");
    experiment->add_option("-c,--config", ex_config, "Run config (JSON); built-in defaults when omitted");
    experiment->add_option("-m,--model", ex_model, "Override the model file");
    experiment->add_option("-w,--width", ex_widths, "Override the width sequence")->delimiter(',');
    experiment->add_option("--mode", ex_mode, "Override the credal mode")
        ->check(CLI::IsMember({"interval", "candidates"}));
    experiment->add_option("--seed", ex_seed, "Override the Monte-Carlo seed");
    experiment->add_option("--runs", ex_runs, "Override the Monte-Carlo run count")->check(CLI::PositiveNumber);
    add_common(experiment, ex_c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*induce) {
            const WalkerModel model = induce_model.empty() ? WalkerModel::defaults() : load_model(induce_model);
            InduceOptions opt{parse_credal_mode(induce_mode), induce_samples, induce_c.threads};
            const auto seq = refinement_sequence(model, induce_widths, opt);
            const auto dir = ensure_dir(out_dir(induce_c));
            for (const auto& ind : seq) {
                const auto path = dir / ("imdp_d" + format_double(ind.partition.widths()[0]) + ".txt");
                save_imdp(path.string(), document_of(ind));
                std::cout << path.string() << ": " << ind.imdp.num_states() << " states, "
                          << ind.imdp.num_actions() << " actions, mode " << to_string(ind.mode) << "\n";
            }
            return kOk;
        }

        if (*vi) {
            const auto doc = load_doc(vi_file);
            const auto dir = ensure_dir(out_dir(vi_c));
            bool converged = true;
            nlohmann::ordered_json reports = nlohmann::ordered_json::array();
            for (Opt mode : modes_of(vi_mode)) {
                const auto r = value_iteration(doc.imdp, mode, vi_options(vi_tol, vi_max_iter, vi_cap, vi_c.threads));
                const std::string tag(to_string(mode));
                std::ostringstream v, s, a;
                write_values_csv(v, doc.imdp, r.values);
                write_strategy_csv(s, doc.imdp, r.strategy);
                write_adversary(a, doc.imdp, r.adversary);
                write_text(dir / ("values_" + tag + ".csv"), v.str());
                write_text(dir / ("strategy_" + tag + ".csv"), s.str());
                write_text(dir / ("adversary_" + tag + ".txt"), a.str());
                const auto rep = report_json(r.report);
                write_text(dir / ("report_" + tag + ".json"), rep.dump(2) + "\n");
                reports.push_back(rep);
                converged = converged && r.report.converged;
            }
            std::cout << reports.dump(2) << "\n";
            if (!converged) {
                std::cerr << "error: value iteration did not converge within " << vi_max_iter << " sweeps\n";
                return kNonConvergence;
            }
            return kOk;
        }

        if (*strategy) {
            const auto doc = load_doc(st_file);
            const auto& part = need_partition(doc, st_file);
            const Opt mode = parse_opt(st_mode);
            const auto r = value_iteration(doc.imdp, mode, vi_options(1e-9, 100000, 1e9, st_c.threads));
            std::ostringstream os;
            write_strategy_boxes_csv(os, part, r.strategy, doc.imdp.actions(), &r.values);
            const auto path = ensure_dir(out_dir(st_c)) / ("strategy_boxes_" + st_mode + ".csv");
            write_text(path, os.str());
            std::cout << path.string() << "\n";
            return r.report.converged ? kOk : kNonConvergence;
        }

        if (*section) {
            const auto doc = load_doc(sec_file);
            const auto& part = need_partition(doc, sec_file);
            const auto opt = vi_options(1e-9, 100000, 1e9, sec_c.threads);
            const auto lo = value_iteration(doc.imdp, Opt::min, opt);
            const auto hi = value_iteration(doc.imdp, Opt::max, opt);
            std::optional<ExternalStrategy> ext;
            if (!sec_external.empty()) {
                ext = import_external_strategy(sec_external, part, doc.imdp.actions());
                if (!ext->has_values()) throw InvalidArgument("external strategy has no value column");
            }
            const auto sec =
                extract_section(part, lo.values, hi.values, sec_dim, sec_value, ext ? &ext->values : nullptr);
            const auto dir = ensure_dir(out_dir(sec_c));
            const std::string name = "section_x" + std::to_string(sec_dim) + "_" + format_double(sec_value);
            std::ostringstream csv, gp;
            write_section_csv(csv, sec, part);
            write_section_plot(gp, name + ".csv", sec, "section at coordinate " + std::to_string(sec_dim) + " = " +
                                                           format_double(sec_value));
            write_text(dir / (name + ".csv"), csv.str());
            write_text(dir / (name + ".gp"), gp.str());
            std::cout << (dir / (name + ".csv")).string() << ": " << sec.samples.size() << " samples\n";
            return lo.report.converged && hi.report.converged ? kOk : kNonConvergence;
        }

        if (*refine) {
            const auto coarse = load_doc(rc_coarse);
            const auto fine = load_doc(rc_fine);
            const auto& cp = need_partition(coarse, rc_coarse);
            const auto& fp = need_partition(fine, rc_fine);
            const auto opt = vi_options(rc_tol, 100000, 1e9, rc_threads);
            const auto cl = value_iteration(coarse.imdp, Opt::min, opt), ch = value_iteration(coarse.imdp, Opt::max, opt);
            const auto fl = value_iteration(fine.imdp, Opt::min, opt), fh = value_iteration(fine.imdp, Opt::max, opt);
            const auto rep =
                check_refinement_monotonicity(cp, cl.values, ch.values, fp, fl.values, fh.values, 2.0 * rc_tol);
            const bool sound = provenance_value(coarse.meta, "sound") != "false" &&
                               provenance_value(fine.meta, "sound") != "false";
            std::cout << "checked " << rep.checked << " fine cells, slack " << format_double(rep.slack) << ", "
                      << rep.violations.size() << " violations" << (sound ? "" : " (non-sound credal mode)") << "\n";
            for (const auto& v : rep.violations)
                std::cout << "  " << fine.imdp.state_names()[v.fine_region] << " in "
                          << coarse.imdp.state_names()[v.coarse_region] << ": " << to_string(v.bound)
                          << " coarse " << format_double(v.coarse_value) << " fine " << format_double(v.fine_value)
                          << "\n";
            return rep.ok() || !sound ? kOk : kModel;
        }

        if (*mc) {
            const WalkerModel model = mc_model.empty() ? WalkerModel::defaults() : load_model(mc_model);
            const Point start = parse_point(mc_start);
            McEstimate est;
            if (!mc_file.empty()) {
                const auto doc = load_doc(mc_file);
                const auto& part = need_partition(doc, mc_file);
                const auto r = value_iteration(doc.imdp, parse_opt(mc_mode), vi_options(1e-9, 100000, 1e9, mc_threads));
                const auto policy = region_policy(part, r.strategy, doc.imdp.state_names());
                est = mc_expected_cost(model, policy, start, mc_horizon, mc_runs, mc_seed, mc_threads);
            } else {
                if (mc_action.empty()) throw InvalidArgument("mc needs --imdp or --action");
                est = mc_expected_cost(model, constant_policy(model.action_index(mc_action)), start, mc_horizon,
                                       mc_runs, mc_seed, mc_threads);
            }
            nlohmann::ordered_json j{{"start", mc_start},
                                     {"mean", est.mean},
                                     {"std_error", est.std_error},
                                     {"runs", est.n_runs},
                                     {"horizon", mc_horizon},
                                     {"seed", est.seed}};
            std::cout << j.dump(2) << "\n";
            return kOk;
        }

        if (*compare) {
            const auto doc = load_doc(cmp_file);
            const auto& part = need_partition(doc, cmp_file);
            const auto opt = vi_options(1e-9, 100000, 1e9, cmp_c.threads);
            const auto lo = value_iteration(doc.imdp, Opt::min, opt);
            const auto hi = value_iteration(doc.imdp, Opt::max, opt);
            const auto ext = import_external_strategy(cmp_external, part, doc.imdp.actions());
            const auto map = agreement_map(lo.strategy, hi.strategy, doc.imdp.actions(), &ext.strategy);
            std::ostringstream csv;
            write_agreement_csv(csv, map, part, lo.strategy, hi.strategy, doc.imdp.actions(), &ext.strategy);
            const auto dir = ensure_dir(out_dir(cmp_c));
            write_text(dir / "agreement_external.csv", csv.str());
            nlohmann::ordered_json j;
            nlohmann::ordered_json counts = nlohmann::ordered_json::object();
            for (const auto& [k, c] : map.counts) counts[k] = c;
            j["classes"] = counts;
            nlohmann::ordered_json unc = nlohmann::ordered_json::array();
            for (auto k : ext.uncovered) unc.push_back(doc.imdp.state_names()[k]);
            j["uncovered"] = unc;
            if (ext.has_values()) {
                const auto c = count_out_of_bounds(ext.values, lo.values, hi.values, cmp_tol);
                j["values"] = {{"compared", c.compared}, {"below_lower", c.below}, {"above_upper", c.above}};
            }
            std::cout << j.dump(2) << "\n";
            return kOk;
        }

        if (*experiment) {
            RunConfig cfg = ex_config.empty() ? RunConfig{} : load_config(ex_config);
            if (!ex_model.empty()) cfg.model_path = ex_model;
            if (!ex_widths.empty()) cfg.widths = ex_widths;
            if (!ex_mode.empty()) cfg.mode = parse_credal_mode(ex_mode);
            if (ex_seed) cfg.mc_seed = *ex_seed;
            if (ex_runs) cfg.mc_runs = *ex_runs;
            std::string dir = ex_c.out;
            if (dir.empty()) dir = cfg.output_dir.empty() ? default_output_dir() : cfg.output_dir;
            const auto res = run_experiment(cfg, dir, ex_c.threads);
            std::cout << "wrote " << (fs::path(dir) / "summary.json").string() << "\n";
            for (const auto& lvl : res.levels)
                std::cout << "  width " << format_double(lvl.induced.partition.widths()[0]) << ": "
                          << lvl.induced.imdp.num_states() << " states, mean bound width "
                          << format_double(lvl.widths.mean) << "\n";
            return kOk;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
    return kUsage;
}
