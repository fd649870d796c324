#include "lcstop/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "lcstop/error.hpp"

namespace lcstop {

using nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json pair_json(double a, double b) { return json::array({number(a), number(b)}); }

}  // namespace

json manifest_json(const Manifest& m) {
    return {{"command", m.command},     {"config", m.config_path},  {"out", m.out_dir},
            {"seed", m.seed},           {"seed_overridden", m.seed_overridden},
            {"version", m.version},     {"config_hash", m.config_hash}};
}

std::string manifest_comment(const Manifest& m) {
    return "# command=" + m.command + " seed=" + std::to_string(m.seed) + " version=" + m.version +
           " config_hash=" + m.config_hash;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void CsvTable::add(std::vector<std::string> row) {
    if (row.size() != header_.size()) throw Error(ErrorCode::invalid_argument, "CSV row width does not match header");
    rows_.push_back(std::move(row));
}

std::string CsvTable::str(const Manifest& m) const {
    std::string out = manifest_comment(m) + "\n";
    auto line = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::invalid_argument, "cannot write " + path);
    out << content;
    if (!out) throw Error(ErrorCode::invalid_argument, "write failed for " + path);
}

void write_json(const std::string& path, json payload, const Manifest& m) {
    payload["manifest"] = manifest_json(m);
    write_text(path, payload.dump(2) + "\n");
}

json to_json(const Assumption2Report& r) {
    json off = json::array();
    for (const auto& [a, b] : r.offending) off.push_back({a, b});
    return {{"status", std::string(to_string(r.status))},
            {"sign_change", r.sign_change ? json(*r.sign_change) : json(nullptr)},
            {"offending", off},
            {"detail", r.detail}};
}

json to_json(const Threshold& t) {
    return {{"x_bar", number(t.x_bar)},
            {"boundary", std::string(to_string(t.boundary))},
            {"f_at_root", number(t.f_at_root)},
            {"ci", pair_json(t.f_at_root - t.f_ci_halfwidth, t.f_at_root + t.f_ci_halfwidth)},
            {"x_bar_ci", t.x_bar_ci ? pair_json(t.x_bar_ci->first, t.x_bar_ci->second) : json(nullptr)},
            {"assumption2", t.assumption2 ? to_json(*t.assumption2) : json(nullptr)},
            {"bracket", pair_json(t.bracket_lo, t.bracket_hi)},
            {"boundary_inconclusive", t.boundary_inconclusive},
            {"jump", t.jump},
            {"immediate_stop", t.immediate_stop},
            {"evaluations", t.evaluations},
            {"method", t.method}};
}

json to_json(const IdentityReport& r) {
    return {{"lhs", number(r.lhs)},         {"rhs", number(r.rhs)},   {"residual", number(r.residual)},
            {"stderr", number(r.std_error)}, {"z", number(r.z)},       {"paths", r.paths},
            {"censored_fraction", number(r.censored_fraction)},       {"passed", r.passed()}};
}

json to_json(const ValueEstimate& v) {
    return {{"direct", number(v.direct)},
            {"direct_stderr", number(v.direct_se)},
            {"ladder_sum", number(v.ladder_sum)},
            {"ladder_stderr", number(v.ladder_se)},
            {"residual", number(v.residual)},
            {"residual_stderr", number(v.residual_se)},
            {"z", number(v.z)},
            {"immediate", v.immediate},
            {"censored_fraction", number(v.censored_fraction)}};
}

json to_json(const Diagnostics& d) {
    auto mono = [](const MonotonicityReport& r) {
        json v = json::array();
        for (const auto& [a, b] : r.violations) v.push_back(pair_json(a, b));
        return json{{"ok", r.ok}, {"violations", v}};
    };
    return {{"ok", d.ok()},
            {"drift_estimate", number(d.drift_estimate)},
            {"drift_stderr", number(d.drift_std_error)},
            {"drift_exact", d.drift_exact ? number(*d.drift_exact) : json(nullptr)},
            {"drift_positive", d.drift_positive},
            {"transient_ok", d.transient_ok},
            {"transient_fraction", number(d.transient_fraction)},
            {"payoff_monotone", mono(d.payoff_monotone)},
            {"cost_monotone", mono(d.cost_monotone)},
            {"cost_nonnegative", d.cost_nonnegative},
            {"weight_positive", d.weight_positive},
            {"warnings", d.warnings}};
}

json to_json(const FnConvergence& c) {
    json levels = json::array();
    for (std::size_t i = 0; i < c.levels.size(); ++i) {
        json f = json::array();
        json r = json::array();
        for (std::size_t j = 0; j < c.probes.size(); ++j) {
            f.push_back(number(c.f_n[i][j]));
            r.push_back(number(c.residuals[i][j]));
        }
        levels.push_back({{"level", c.levels[i]}, {"f_n", f}, {"residuals", r}});
    }
    json ratios = json::array();
    for (const auto& row : c.ratios) {
        json r = json::array();
        for (const double v : row) r.push_back(number(v));
        ratios.push_back(r);
    }
    json order = json::array();
    for (const double v : c.order) order.push_back(number(v));
    json target = json::array();
    for (const double v : c.target) target.push_back(number(v));
    return {{"probes", c.probes}, {"target", target},     {"levels", levels},
            {"ratios", ratios},   {"order", order},       {"halving_ok", c.halving_ok}};
}

json to_json(const DiscretizationReport& r) {
    json levels = json::array();
    for (const auto& l : r.levels) {
        json values = json::array();
        for (const auto& v : l.values) {
            json e = to_json(v.value);
            e["probe"] = number(v.probe);
            e["start"] = number(v.start);
            values.push_back(e);
        }
        levels.push_back({{"level", l.level},
                          {"delta", number(l.delta)},
                          {"threshold", to_json(l.threshold)},
                          {"values", values},
                          {"grid_snap_bias", l.grid_snap_bias}});
    }
    json viol = json::array();
    for (const auto& [a, b] : r.value_violations) viol.push_back({a, b});
    auto opt = [](const std::optional<double>& v) { return v ? number(*v) : json(nullptr); };
    return {{"scheme", std::string(to_string(r.scheme))},
            {"probes", r.probes},
            {"levels", levels},
            {"monotone_values_ok", r.monotone_values_ok},
            {"monotone_thresholds_ok", r.monotone_thresholds_ok},
            {"value_violations", viol},
            {"limit_estimate", opt(r.limit_estimate)},
            {"order_estimate", opt(r.order_estimate)},
            {"continuum_threshold", opt(r.continuum_threshold)},
            {"fn_convergence", r.fn ? to_json(*r.fn) : json(nullptr)}};
}

CsvTable fcurve_table(const FCurve& c) {
    CsvTable t({"y", "f", "ci_low", "ci_high", "variant"});
    const std::string variant(to_string(c.variant));
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
        const double f = c.f_values[i];
        const double h = c.ci_halfwidths[i];
        t.add({format_double(c.grid[i]), format_double(f), format_double(f - h), format_double(f + h), variant});
    }
    return t;
}

CsvTable dp_table(const DPSolution& dp) {
    CsvTable t({"state", "V", "gamma", "stopping", "trusted"});
    for (std::size_t i = 0; i < dp.states.size(); ++i)
        t.add({format_double(dp.states[i]), format_double(dp.values[i]), format_double(dp.gamma[i]),
               dp.stopping_set[i] ? "1" : "0", dp.trusted[i] ? "1" : "0"});
    return t;
}

CsvTable discretization_table(const DiscretizationReport& r) {
    std::vector<std::string> header{"level", "delta", "x_bar_n"};
    for (std::size_t j = 0; j < r.probes.size(); ++j) header.push_back("V_n@" + format_double(r.probes[j]));
    for (std::size_t j = 0; j < r.probes.size(); ++j) header.push_back("f_residual@" + format_double(r.probes[j]));
    CsvTable t(header);
    for (std::size_t i = 0; i < r.levels.size(); ++i) {
        const auto& l = r.levels[i];
        std::vector<std::string> row{std::to_string(l.level), format_double(l.delta), format_double(l.threshold.x_bar)};
        for (const auto& v : l.values) row.push_back(format_double(v.value.direct));
        for (std::size_t j = 0; j < r.probes.size(); ++j)
            row.push_back(r.fn ? format_double(r.fn->residuals[i][j]) : "nan");
        t.add(std::move(row));
    }
    return t;
}

CsvTable fn_convergence_table(const FnConvergence& c) {
    CsvTable t({"level", "x", "f_n", "target", "residual"});
    for (std::size_t i = 0; i < c.levels.size(); ++i)
        for (std::size_t j = 0; j < c.probes.size(); ++j)
            t.add({std::to_string(c.levels[i]), format_double(c.probes[j]), format_double(c.f_n[i][j]),
                   format_double(c.target[j]), format_double(c.residuals[i][j])});
    return t;
}

CsvTable hat_table(const HatFunction& h) {
    CsvTable t({"y", "h_hat", "ci_low", "ci_high", "method"});
    const std::string method(to_string(h.method));
    for (std::size_t i = 0; i < h.grid.size(); ++i) {
        const double v = h.values[i];
        const double w = h.ci_halfwidths[i];
        t.add({format_double(h.grid[i]), format_double(v), format_double(v - w), format_double(v + w), method});
    }
    return t;
}

}  // namespace lcstop
