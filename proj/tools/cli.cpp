#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcstop/config.hpp"
#include "lcstop/discretize.hpp"
#include "lcstop/error.hpp"
#include "lcstop/ladder.hpp"
#include "lcstop/oracle.hpp"
#include "lcstop/parallel.hpp"
#include "lcstop/report.hpp"
#include "lcstop/threshold.hpp"

namespace lcstop::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kFlagged = 2;
constexpr int kError = 1;

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string grid;
    std::string levels;
};

struct Run {
    std::string command;
    Options opts;
    RunConfig cfg;
    Manifest manifest;
    std::ostream* out = nullptr;

    std::string path(const std::string& name) const { return (fs::path(opts.out) / name).string(); }
    void json_file(const std::string& name, json payload) const {
        write_json(path(name), std::move(payload), manifest);
        *out << "wrote " << path(name) << "\n";
    }
    void csv_file(const std::string& name, const CsvTable& t) const {
        write_text(path(name), t.str(manifest));
        *out << "wrote " << path(name) << "\n";
    }
};

// Threshold of a finite chain: the first state where f <= 0.
Threshold chain_threshold(const FiniteChainSpec& chain, const ProblemSpec& p, const RunConfig& c, FCurve& curve) {
    EvalOptions eo;
    eo.variant = c.variant;
    curve.variant = c.variant;
    for (const double s : chain.states) {
        try {
            const FValue v = evaluate_f(p, s, c.mc, eo);
            curve.grid.push_back(s);
            curve.f_values.push_back(v.f);
            curve.ci_halfwidths.push_back(v.ci_halfwidth);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ladder_epoch_not_integrable) throw;
        }
    }
    Threshold t;
    t.method = "finite-chain/scan";
    for (std::size_t i = 0; i < curve.grid.size(); ++i) {
        if (curve.f_values[i] > 0.0) continue;
        t.x_bar = curve.grid[i];
        t.f_at_root = curve.f_values[i];
        t.boundary = Boundary::nonstrict;
        t.immediate_stop = i == 0;
        t.bracket_lo = i == 0 ? curve.grid[0] : curve.grid[i - 1];
        t.bracket_hi = curve.grid[i];
        t.evaluations = curve.grid.size();
        return t;
    }
    throw Error(ErrorCode::bracket_not_found, "f stays positive on every chain state with a ladder epoch");
}

std::pair<double, double> levy_bracket(const LevySpec& levy, const ProblemSpec& p, const RunConfig& c) {
    if (c.bracket) return *c.bracket;
    auto f = [&](double y) { return evaluate_f_levy(levy, p, y, c.mc, c.levy).f; };
    double lo = -1.0;
    double hi = 1.0;
    double width = 1.0;
    for (int i = 0; f(hi) > 0.0; ++i, width *= 2.0) {
        if (i == 40) throw Error(ErrorCode::bracket_not_found, "f stays positive while expanding upward");
        hi += width;
    }
    width = 1.0;
    for (int i = 0; f(lo) <= 0.0; ++i, width *= 2.0) {
        if (i == 40) throw Error(ErrorCode::bracket_not_found, "f stays non-positive while expanding downward");
        lo -= width;
    }
    return {lo, hi};
}

struct Solved {
    Threshold threshold;
    FCurve curve;
};

bool mc_levy(const RunConfig& c) {
    const auto* levy = c.problem.levy();
    if (!levy) return false;
    return c.levy.backend == LevyFOptions::Backend::difference_quotient ||
           (c.levy.backend == LevyFOptions::Backend::automatic && levy->kind != LevyKind::bm_drift);
}

std::vector<double> curve_grid(const Run& r, double center, double halfwidth) {
    if (!r.opts.grid.empty()) return parse_grid(r.opts.grid).points();
    if (r.cfg.grid) return r.cfg.grid->points();
    const auto* walk = r.cfg.problem.walk();
    const bool mc = mc_levy(r.cfg) || (walk && !walk->upward_skip_free());
    GridSpec g{center - halfwidth, center + halfwidth, mc ? std::size_t{17} : std::size_t{65}};
    return g.points();
}

Solved solve(const Run& r) {
    const RunConfig& c = r.cfg;
    const ProblemSpec& p = c.problem;
    Solved s;
    if (const auto* chain = p.chain()) {
        s.threshold = chain_threshold(*chain, p, c, s.curve);
        try {
            s.threshold.assumption2 = validate_assumption2(s.curve);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::bracket_not_found) throw;
        }
        return s;
    }
    double half = 2.0;
    if (const auto* walk = p.walk()) {
        RandomWalkOptions o;
        o.bracket = c.bracket;
        o.tol = c.tol;
        o.variant = c.variant;
        s.threshold = random_walk_threshold(*walk, p, c.mc, o);
        half = std::max(2.0, 4.0 * std::max(std::abs(walk->mean()), 0.5));
    } else {
        const LevySpec& levy = *p.levy();
        const auto [lo, hi] = levy_bracket(levy, p, c);
        s.threshold = find_root(p, lo, hi, c.mc, c.tol, {}, c.levy);
    }
    EvalOptions eo;
    eo.variant = c.variant;
    s.curve = f_curve(p, curve_grid(r, s.threshold.x_bar, half), c.mc, eo, c.levy);
    if (p.levy()) {
        try {
            s.threshold.assumption2 = validate_assumption2(s.curve);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::bracket_not_found) throw;
            Assumption2Report a;
            a.detail = e.what();
            s.threshold.assumption2 = a;
        }
    }
    return s;
}

bool flagged(const Threshold& t) {
    return t.boundary_inconclusive || (t.assumption2 && t.assumption2->status != Assumption2Status::certified);
}

int cmd_solve(const Run& r) {
    const Solved s = solve(r);
    json j = to_json(s.threshold);
    if (!r.cfg.value_starts.empty()) {
        const double x_stop = s.threshold.immediate_stop ? -std::numeric_limits<double>::infinity() : s.threshold.x_bar;
        json values = json::array();
        for (const double y : r.cfg.value_starts) {
            json v = to_json(value_of_threshold(r.cfg.problem, x_stop, s.threshold.boundary, y, r.cfg.mc));
            v["start"] = y;
            values.push_back(v);
        }
        j["values"] = values;
    }
    r.json_file("threshold.json", j);
    r.csv_file("fcurve.csv", fcurve_table(s.curve));
    if (const auto* levy = r.cfg.problem.levy(); levy && levy->kind == LevyKind::bm_drift) {
        HatOptions ho;
        ho.method = HatOptions::Method::analytic_bm;
        r.csv_file("hat.csv", hat_table(hat_transform(*levy, r.cfg.problem.cost, s.curve.grid, r.cfg.mc, ho)));
    }
    *r.out << "x_bar=" << format_double(s.threshold.x_bar) << " boundary=" << to_string(s.threshold.boundary) << "\n";
    return flagged(s.threshold) ? kFlagged : kOk;
}

int cmd_fcurve(const Run& r) {
    std::vector<double> grid;
    if (!r.opts.grid.empty()) {
        grid = parse_grid(r.opts.grid).points();
    } else if (r.cfg.grid) {
        grid = r.cfg.grid->points();
    } else {
        throw Error(ErrorCode::invalid_argument, "f-curve needs --grid lo:hi:count or solver.grid in the config");
    }
    EvalOptions eo;
    eo.variant = r.cfg.variant;
    const FCurve c = f_curve(r.cfg.problem, grid, r.cfg.mc, eo, r.cfg.levy);
    r.csv_file("fcurve.csv", fcurve_table(c));
    json a;
    int code = kOk;
    try {
        const Assumption2Report rep = validate_assumption2(c);
        a = to_json(rep);
        if (rep.status != Assumption2Status::certified) code = kFlagged;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::bracket_not_found) throw;
        a = {{"status", "inconclusive"}, {"detail", e.what()}};
        code = kFlagged;
    }
    r.json_file("fcurve.json", {{"assumption2", a}, {"points", grid.size()}});
    if (const auto* levy = r.cfg.problem.levy())
        r.csv_file("hat.csv", hat_table(hat_transform(*levy, r.cfg.problem.cost, grid, r.cfg.mc)));
    return code;
}

int cmd_oracle_dp(const Run& r) {
    const ProblemSpec& p = r.cfg.problem;
    if (p.levy()) throw Error(ErrorCode::method_inapplicable, "the DP oracle needs a lattice walk or a finite chain");
    const Solved s = solve(r);
    const Threshold& t = s.threshold;
    DPSolution dp = r.cfg.dp_domain ? dp_value_iteration(p, r.cfg.dp_domain->first, r.cfg.dp_domain->second, r.cfg.dp_tol)
                                    : dp_value_iteration_auto(p, t.x_bar, r.cfg.dp_tol);
    const double x_stop = t.immediate_stop ? -std::numeric_limits<double>::infinity() : t.x_bar;
    const std::vector<double> bad = dp_threshold_mismatches(dp, x_stop, t.boundary == Boundary::strict);
    const std::string verdict = bad.empty() ? "stopping_set matches threshold rule"
                                            : "stopping_set differs from threshold rule at " +
                                                  std::to_string(bad.size()) + " states";
    std::size_t trusted = 0;
    for (const bool b : dp.trusted) trusted += b ? 1 : 0;
    json values = json::array();
    for (const double y : r.cfg.value_starts) {
        const auto v = dp.value_at(y);
        values.push_back({{"start", y}, {"V", v ? json(*v) : json(nullptr)}});
    }
    r.json_file("dp.json", {{"verdict", verdict},
                            {"mismatches", bad},
                            {"threshold", to_json(t)},
                            {"iterations", dp.iterations},
                            {"residual", dp.residual},
                            {"domain", {dp.lo, dp.hi}},
                            {"trusted_states", trusted},
                            {"values", values}});
    r.csv_file("dp.csv", dp_table(dp));
    *r.out << verdict << "\n";
    return bad.empty() ? kOk : kFlagged;
}

int cmd_check_identity(const Run& r) {
    const RunConfig& c = r.cfg;
    const ProblemSpec& p = c.problem;
    const double x = c.identity_x.value_or(-1.0);
    const double y = c.identity_y.value_or(x + 3.0);
    json j;
    bool ok = true;
    if (const auto* levy = p.levy()) {
        MaxRepOptions mo;
        mo.dt = c.levy.dt;
        const IdentityReport m = check_max_representation(*levy, p, x, y, c.mc, mo);
        j["max_representation"] = to_json(m);
        ok = ok && m.passed();
        const EmbeddedWalk w = build_spatial_discretization(*levy, p, c.levels.front(), c.mc);
        const double xs = std::floor(x / w.delta) * w.delta;
        const IdentityReport l = check_ladder_sum_identity(w.problem(p), xs, y, c.mc, c.convention);
        json lj = to_json(l);
        lj["embedded_level"] = c.levels.front();
        j["ladder_sum"] = lj;
        ok = ok && l.passed();
    } else {
        const IdentityReport l = check_ladder_sum_identity(p, x, y, c.mc, c.convention);
        j["ladder_sum"] = to_json(l);
        j["max_representation"] = nullptr;
        j["max_representation_note"] = "applies to Levy processes only";
        ok = l.passed();
    }
    j["x"] = x;
    j["y"] = y;
    r.json_file("identity.json", j);
    return ok ? kOk : kFlagged;
}

int cmd_discretize(const Run& r) {
    const auto* levy = r.cfg.problem.levy();
    if (!levy) throw Error(ErrorCode::method_inapplicable, "discretize needs a Levy process");
    const std::vector<int> levels = r.opts.levels.empty() ? r.cfg.levels : parse_levels(r.opts.levels);
    const DiscretizationReport rep = solve_sequence(*levy, r.cfg.problem, r.cfg.scheme, levels, r.cfg.probes, r.cfg.mc);
    r.json_file("discretization.json", to_json(rep));
    r.csv_file("discretization.csv", discretization_table(rep));
    if (rep.fn) r.csv_file("fn_convergence.csv", fn_convergence_table(*rep.fn));
    const bool ok = rep.monotone_values_ok && rep.monotone_thresholds_ok && (!rep.fn || rep.fn->halving_ok);
    return ok ? kOk : kFlagged;
}

int cmd_validate(const Run& r) {
    const Diagnostics d = validate_problem(r.cfg.problem, r.cfg.mc);
    r.json_file("diagnostics.json", to_json(d));
    if (!d.payoff_monotone.ok) {
        const auto& v = d.payoff_monotone.violations;
        *r.out << "monotonicity violation: payoff decreases on " << v.size() << " probe intervals, first ("
               << format_double(v.front().first) << ", " << format_double(v.front().second) << ")\n";
    }
    for (const auto& w : d.warnings) *r.out << "warning: " << w << "\n";
    return d.ok() ? kOk : kFlagged;
}

int dispatch(const Run& r) {
    if (r.command == "solve") return cmd_solve(r);
    if (r.command == "f-curve") return cmd_fcurve(r);
    if (r.command == "oracle-dp") return cmd_oracle_dp(r);
    if (r.command == "check-identity") return cmd_check_identity(r);
    if (r.command == "discretize") return cmd_discretize(r);
    return cmd_validate(r);
}

// Records a failure that still leaves a report behind.
int flagged_failure(const Run& r, const Error& e) {
    json j{{"status", "inconclusive"}, {"error", std::string(to_string(e.code()))}, {"detail", e.what()}};
    if (const auto* ri = dynamic_cast<const RootInconclusive*>(&e)) j["bracket"] = {ri->lo(), ri->hi()};
    if (e.code() == ErrorCode::assumption_violated) j["status"] = "assumption_violated";
    const std::string name = r.command == "solve" ? "threshold.json" : "failure.json";
    r.json_file(name, j);
    return kFlagged;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Threshold rules for optimal stopping with running costs"};
    app.require_subcommand(1, 1);
    Options opts;
    const std::vector<std::string> names{"solve", "f-curve", "oracle-dp", "check-identity", "discretize", "validate"};
    for (const auto& name : names) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", opts.config, "problem config (JSON)")->required();
        sub->add_option("--out", opts.out, "output directory");
        sub->add_option("--seed", opts.seed, "override mc.seed");
        sub->add_option("--threads", opts.threads, "worker threads (0 = hardware concurrency)");
        sub->add_option("--grid", opts.grid, "grid lo:hi:count");
        sub->add_option("--levels", opts.levels, "discretization levels n1,n2,...");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }

    Run r;
    r.command = app.get_subcommands().front()->get_name();
    r.opts = opts;
    r.out = &out;
    try {
        set_thread_count(opts.threads);
        r.cfg = load_config(opts.config);
        if (opts.seed) r.cfg.mc.seed = *opts.seed;
        if (!opts.grid.empty()) parse_grid(opts.grid);
        r.manifest.command = r.command;
        r.manifest.config_path = opts.config;
        r.manifest.out_dir = opts.out;
        r.manifest.seed = r.cfg.mc.seed;
        r.manifest.seed_overridden = opts.seed.has_value();
        r.manifest.config_hash = r.cfg.hash;
        fs::create_directories(opts.out);
        write_json(r.path("manifest.json"), json::object(), r.manifest);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }
    try {
        return dispatch(r);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        const ErrorCode c = e.code();
        if (c == ErrorCode::assumption_violated || c == ErrorCode::root_inconclusive) {
            try {
                return flagged_failure(r, e);
            } catch (const std::exception& w) {
                err << "error: " << w.what() << "\n";
            }
        }
        return kError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }
}

}  // namespace lcstop::cli
