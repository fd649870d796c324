#include "lcstop/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "lcstop/error.hpp"

namespace lcstop {

using nlohmann::json;

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<double> GridSpec::points() const {
    if (count == 0) return {};
    if (count == 1) return {lo};
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    out.back() = hi;
    return out;
}

namespace {

double parse_double(std::string_view s, const std::string& what) {
    const std::string str(s);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(str, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != str.size() || str.empty() || !std::isfinite(v))
        throw Error(ErrorCode::invalid_argument, what + ": '" + str + "' is not a finite number");
    return v;
}

long parse_long(std::string_view s, const std::string& what) {
    const std::string str(s);
    std::size_t used = 0;
    long v = 0;
    try {
        v = std::stol(str, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != str.size() || str.empty())
        throw Error(ErrorCode::invalid_argument, what + ": '" + str + "' is not an integer");
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t at = s.find(sep, start);
        out.push_back(s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return out;
}

}  // namespace

GridSpec parse_grid(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw Error(ErrorCode::invalid_argument, "grid must look like lo:hi:count");
    GridSpec g;
    g.lo = parse_double(parts[0], "grid lo");
    g.hi = parse_double(parts[1], "grid hi");
    const long n = parse_long(parts[2], "grid count");
    if (n < 2) throw Error(ErrorCode::invalid_argument, "grid count must be >= 2");
    if (!(g.hi > g.lo)) throw Error(ErrorCode::invalid_argument, "grid needs lo < hi");
    g.count = static_cast<std::size_t>(n);
    return g;
}

std::vector<int> parse_levels(const std::string& text) {
    std::vector<int> out;
    for (const auto part : split(text, ',')) {
        const long n = parse_long(part, "level");
        if (n < 0 || n > 30) throw Error(ErrorCode::invalid_argument, "levels must lie in [0, 30]");
        if (!out.empty() && n <= out.back()) throw Error(ErrorCode::invalid_argument, "levels must be strictly increasing");
        out.push_back(static_cast<int>(n));
    }
    return out;
}

namespace {

// Line of every JSON value, keyed by JSON pointer. Assumes syntactically valid input.
class LineIndex {
public:
    explicit LineIndex(const std::string& text) : s_(text) {
        skip_ws();
        value("");
    }

    int line(std::string pointer) const {
        while (true) {
            if (const auto it = lines_.find(pointer); it != lines_.end()) return it->second;
            if (pointer.empty()) return 1;
            pointer.erase(pointer.rfind('/'));
        }
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' || s_[pos_] == '\r')) {
            if (s_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    std::string string() {
        std::string out;
        ++pos_;
        while (pos_ < s_.size() && s_[pos_] != '"') {
            if (s_[pos_] == '\\') ++pos_;
            if (pos_ < s_.size()) out += s_[pos_++];
        }
        ++pos_;
        return out;
    }

    static std::string escape(const std::string& key) {
        std::string out;
        for (const char c : key) {
            if (c == '~') {
                out += "~0";
            } else if (c == '/') {
                out += "~1";
            } else {
                out += c;
            }
        }
        return out;
    }

    void value(const std::string& pointer) {
        lines_.emplace(pointer, line_);
        if (pos_ >= s_.size()) return;
        const char c = s_[pos_];
        if (c == '{') {
            ++pos_;
            skip_ws();
            while (pos_ < s_.size() && s_[pos_] != '}') {
                const int key_line = line_;
                const std::string key = string();
                skip_ws();
                ++pos_;  // ':'
                skip_ws();
                const std::string child = pointer + "/" + escape(key);
                lines_.emplace(child, key_line);
                value(child);
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ',') {
                    ++pos_;
                    skip_ws();
                }
            }
            ++pos_;
        } else if (c == '[') {
            ++pos_;
            skip_ws();
            std::size_t i = 0;
            while (pos_ < s_.size() && s_[pos_] != ']') {
                value(pointer + "/" + std::to_string(i++));
                skip_ws();
                if (pos_ < s_.size() && s_[pos_] == ',') {
                    ++pos_;
                    skip_ws();
                }
            }
            ++pos_;
        } else if (c == '"') {
            string();
        } else {
            while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != '}' && s_[pos_] != ' ' &&
                   s_[pos_] != '\n' && s_[pos_] != '\r' && s_[pos_] != '\t')
                ++pos_;
        }
    }

    const std::string& s_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::map<std::string, int> lines_;
};

struct Context {
    std::string source;
    LineIndex index;
};

// View of one JSON node with its pointer, for line-anchored errors.
class Node {
public:
    Node(const json& j, std::string pointer, const Context& ctx) : j_(&j), ptr_(std::move(pointer)), ctx_(&ctx) {}

    [[noreturn]] void fail(const std::string& msg) const {
        std::ostringstream out;
        out << ctx_->source << ":" << ctx_->index.line(ptr_) << ": " << msg;
        throw Error(ErrorCode::config_error, out.str());
    }

    std::string name() const { return ptr_.empty() ? "top level" : "'" + ptr_ + "'"; }
    const json& raw() const { return *j_; }
    bool has(const std::string& key) const { return j_->contains(key); }

    Node object(const std::string& key) const {
        const Node n = child(key);
        if (!n.j_->is_object()) n.fail(n.name() + " must be an object");
        return n;
    }

    std::optional<Node> optional_object(const std::string& key) const {
        if (!has(key)) return std::nullopt;
        return object(key);
    }

    Node child(const std::string& key) const {
        if (!j_->is_object()) fail(name() + " must be an object");
        if (!j_->contains(key)) fail("missing key '" + key + "' in " + name());
        return Node(j_->at(key), ptr_ + "/" + key, *ctx_);
    }

    Node at(std::size_t i) const { return Node(j_->at(i), ptr_ + "/" + std::to_string(i), *ctx_); }

    void allow(std::initializer_list<std::string_view> keys) const {
        if (!j_->is_object()) fail(name() + " must be an object");
        for (auto it = j_->begin(); it != j_->end(); ++it) {
            bool ok = false;
            for (const auto k : keys) ok = ok || it.key() == k;
            if (!ok) Node(it.value(), ptr_ + "/" + it.key(), *ctx_).fail("unknown key '" + it.key() + "' in " + name());
        }
    }

    double as_number() const {
        if (!j_->is_number()) fail(name() + " must be a number");
        const double v = j_->get<double>();
        if (!std::isfinite(v)) fail(name() + " must be finite");
        return v;
    }

    std::uint64_t as_unsigned() const {
        if (!j_->is_number_integer() || (j_->is_number_integer() && !j_->is_number_unsigned() && j_->get<long long>() < 0))
            fail(name() + " must be a non-negative integer");
        return j_->get<std::uint64_t>();
    }

    std::string as_string() const {
        if (!j_->is_string()) fail(name() + " must be a string");
        return j_->get<std::string>();
    }

    std::vector<double> as_numbers() const {
        if (!j_->is_array()) fail(name() + " must be an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < j_->size(); ++i) out.push_back(at(i).as_number());
        return out;
    }

    double number(const std::string& key) const { return child(key).as_number(); }
    double number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }
    std::vector<double> numbers(const std::string& key) const { return child(key).as_numbers(); }
    std::string string(const std::string& key) const { return child(key).as_string(); }

    std::pair<double, double> interval(const std::string& key) const {
        const Node n = child(key);
        const auto v = n.as_numbers();
        if (v.size() != 2 || !(v[1] > v[0])) n.fail(n.name() + " must be [lo, hi] with lo < hi");
        return {v[0], v[1]};
    }

    /// Runs fn and re-raises model validation errors at this node.
    template <class Fn>
    auto checked(Fn&& fn) const {
        try {
            return fn();
        } catch (const Error& e) {
            if (e.code() == ErrorCode::config_error) throw;
            fail(e.what());
        }
    }

private:
    const json* j_;
    std::string ptr_;
    const Context* ctx_;
};

KnotTable knots(const Node& n) {
    KnotTable t{n.numbers("x"), n.numbers("y")};
    n.checked([&] {
        t.validate(n.name().c_str());
        return 0;
    });
    return t;
}

StepDistribution step_law(const Node& n) {
    const std::string kind = n.string("kind");
    StepDistribution s;
    if (kind == "two_point") {
        n.allow({"kind", "p", "u", "d"});
        s = StepDistribution::two_point(n.number("p"), n.number("u"), n.number("d"));
    } else if (kind == "lattice_pmf") {
        n.allow({"kind", "unit", "steps", "probs"});
        std::vector<long> steps;
        const Node st = n.child("steps");
        for (const double v : st.as_numbers()) {
            if (v != std::floor(v)) st.fail("lattice steps must be integers");
            steps.push_back(static_cast<long>(v));
        }
        s = StepDistribution::lattice(n.number("unit", 1.0), std::move(steps), n.numbers("probs"));
    } else if (kind == "gaussian") {
        n.allow({"kind", "mean", "std"});
        s = StepDistribution::gaussian(n.number("mean"), n.number("std"));
    } else {
        n.child("kind").fail("unknown step kind '" + kind + "'");
    }
    n.checked([&] {
        s.validate();
        return 0;
    });
    return s;
}

Process process(const Node& n) {
    const std::string kind = n.string("kind");
    if (kind == "two_point" || kind == "lattice_pmf" || kind == "gaussian") return step_law(n);
    if (kind == "finite_chain") {
        n.allow({"kind", "states", "kernel"});
        FiniteChainSpec c;
        c.states = n.numbers("states");
        const Node k = n.child("kernel");
        if (!k.raw().is_array()) k.fail("kernel must be an array of rows");
        for (std::size_t i = 0; i < k.raw().size(); ++i) c.kernel.push_back(k.at(i).as_numbers());
        n.checked([&] {
            c.validate();
            return 0;
        });
        return c;
    }
    LevySpec l;
    if (kind == "bm_drift") {
        n.allow({"kind", "mu", "sigma"});
        l = LevySpec::bm(n.number("mu"), n.number("sigma"));
    } else if (kind == "cpp_drift") {
        n.allow({"kind", "drift", "rate", "jump"});
        l = LevySpec::compound_poisson(n.number("drift"), n.number("rate"), step_law(n.object("jump")));
    } else if (kind == "jump_diffusion") {
        n.allow({"kind", "mu", "sigma", "rate", "jump"});
        l = LevySpec::jump_diffusion(n.number("mu"), n.number("sigma"), n.number("rate"), step_law(n.object("jump")));
    } else {
        n.child("kind").fail("unknown process kind '" + kind + "'");
    }
    n.checked([&] {
        l.validate();
        return 0;
    });
    return l;
}

PayoffSpec payoff(const Node& n) {
    n.allow({"kind", "params"});
    const std::string kind = n.string("kind");
    const Node p = n.object("params");
    PayoffSpec s;
    if (kind == "piecewise_linear_cap") {
        p.allow({"cap", "scale", "offset"});
        s = PayoffSpec::capped(p.number("cap"));
    } else if (kind == "softplus_concave") {
        p.allow({"location", "width", "scale", "offset"});
        s = PayoffSpec::softplus(p.number("location", 0.0), p.number("width", 1.0));
    } else if (kind == "lookup_table") {
        p.allow({"x", "y", "scale", "offset"});
        s = PayoffSpec::lookup(knots(p));
    } else if (kind == "affine") {
        p.allow({"intercept", "slope", "scale", "offset"});
        s = PayoffSpec::linear(p.number("slope"), p.number("intercept", 0.0));
    } else if (kind == "constant") {
        p.allow({"value", "scale", "offset"});
        s = PayoffSpec::constant(p.number("value"));
    } else if (kind == "exponential") {
        p.allow({"amplitude", "rate", "scale", "offset"});
        s = PayoffSpec::exp(p.number("amplitude"), p.number("rate"));
    } else {
        n.child("kind").fail("unknown payoff kind '" + kind + "'");
    }
    s.scale = p.number("scale", 1.0);
    s.offset = p.number("offset", 0.0);
    n.checked([&] {
        s.validate();
        return 0;
    });
    return s;
}

CostSpec cost(const Node& n) {
    n.allow({"kind", "params"});
    const std::string kind = n.string("kind");
    const Node p = n.object("params");
    CostSpec s;
    if (kind == "constant") {
        p.allow({"c"});
        s = CostSpec::constant(p.number("c"));
    } else if (kind == "affine_positive") {
        p.allow({"a", "b"});
        s = CostSpec::affine_positive(p.number("a"), p.number("b"));
    } else if (kind == "lookup_table") {
        p.allow({"x", "y"});
        s = CostSpec::lookup(knots(p));
    } else {
        n.child("kind").fail("unknown cost kind '" + kind + "'");
    }
    n.checked([&] {
        s.validate();
        return 0;
    });
    return s;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1;
        const std::size_t upto = std::min(e.byte, text.size());
        for (std::size_t i = 0; i + 1 < upto; ++i)
            if (text[i] == '\n') ++line;
        std::string msg = e.what();
        if (const auto at = msg.find("syntax error"); at != std::string::npos) msg = msg.substr(at);
        throw Error(ErrorCode::config_error, source + ":" + std::to_string(line) + ": " + msg);
    }
    const Context ctx{source, LineIndex(text)};
    const Node top(root, "", ctx);
    top.allow({"process", "payoff", "cost", "weight", "probe", "mc", "solver", "dp", "levy", "discretize", "identity",
               "value"});

    RunConfig c;
    c.source = source;
    c.hash = fnv1a_hex(text);
    c.problem.process = process(top.object("process"));
    c.problem.payoff = payoff(top.object("payoff"));
    c.problem.cost = cost(top.object("cost"));
    if (top.has("weight")) c.problem.weight = cost(top.object("weight"));

    if (const auto n = top.optional_object("probe")) {
        n->allow({"lo", "hi", "count"});
        c.problem.probe.lo = n->number("lo", c.problem.probe.lo);
        c.problem.probe.hi = n->number("hi", c.problem.probe.hi);
        if (n->has("count")) c.problem.probe.count = n->child("count").as_unsigned();
        if (!(c.problem.probe.hi > c.problem.probe.lo) || c.problem.probe.count < 2) n->fail("probe needs lo < hi and count >= 2");
    }

    const Node mc = top.object("mc");
    mc.allow({"paths", "seed", "max_steps", "ci_level"});
    c.mc.paths = mc.child("paths").as_unsigned();
    c.mc.seed = mc.child("seed").as_unsigned();
    if (mc.has("max_steps")) c.mc.max_steps = mc.child("max_steps").as_unsigned();
    c.mc.ci_level = mc.number("ci_level", c.mc.ci_level);
    mc.checked([&] {
        c.mc.validate();
        return 0;
    });

    if (const auto n = top.optional_object("solver")) {
        n->allow({"bracket", "tol", "variant", "grid"});
        if (n->has("bracket")) c.bracket = n->interval("bracket");
        c.tol = n->number("tol", c.tol);
        if (!(c.tol > 0.0)) n->child("tol").fail("tol must be positive");
        if (n->has("variant")) {
            const Node v = n->child("variant");
            const std::string s = v.as_string();
            if (s == "standard") {
                c.variant = FVariant::standard;
            } else if (s == "weighted") {
                c.variant = FVariant::weighted;
                if (!c.problem.weight) v.fail("weighted variant needs a top-level 'weight'");
            } else {
                v.fail("variant must be 'standard' or 'weighted'");
            }
        }
        if (n->has("grid")) {
            const Node g = n->child("grid");
            c.grid = g.checked([&] { return parse_grid(g.as_string()); });
        }
    }

    if (const auto n = top.optional_object("dp")) {
        n->allow({"domain", "tol"});
        if (n->has("domain")) c.dp_domain = n->interval("domain");
        c.dp_tol = n->number("tol", c.dp_tol);
        if (!(c.dp_tol > 0.0)) n->child("tol").fail("tol must be positive");
    }

    if (const auto n = top.optional_object("levy")) {
        n->allow({"backend", "delta", "dt"});
        if (n->has("backend")) {
            const Node b = n->child("backend");
            const std::string s = b.as_string();
            if (s == "automatic") {
                c.levy.backend = LevyFOptions::Backend::automatic;
            } else if (s == "bm_analytic") {
                c.levy.backend = LevyFOptions::Backend::bm_analytic;
            } else if (s == "difference_quotient") {
                c.levy.backend = LevyFOptions::Backend::difference_quotient;
            } else {
                b.fail("backend must be automatic, bm_analytic or difference_quotient");
            }
        }
        c.levy.delta = n->number("delta", c.levy.delta);
        c.levy.dt = n->number("dt", c.levy.dt);
        if (!(c.levy.delta > 0.0) || !(c.levy.dt > 0.0)) n->fail("delta and dt must be positive");
    }

    if (const auto n = top.optional_object("discretize")) {
        n->allow({"scheme", "levels", "probes"});
        if (n->has("scheme")) {
            const Node s = n->child("scheme");
            const std::string v = s.as_string();
            if (v == "time") {
                c.scheme = Scheme::time;
            } else if (v == "spatial") {
                c.scheme = Scheme::spatial;
            } else {
                s.fail("scheme must be 'time' or 'spatial'");
            }
        }
        if (n->has("levels")) {
            const Node l = n->child("levels");
            c.levels.clear();
            for (const double v : l.as_numbers()) {
                if (v != std::floor(v) || v < 0.0 || v > 30.0) l.fail("levels must be integers in [0, 30]");
                if (!c.levels.empty() && v <= c.levels.back()) l.fail("levels must be strictly increasing");
                c.levels.push_back(static_cast<int>(v));
            }
            if (c.levels.empty()) l.fail("levels must not be empty");
        }
        if (n->has("probes")) c.probes = n->numbers("probes");
    }

    if (const auto n = top.optional_object("identity")) {
        n->allow({"x", "y", "convention"});
        if (n->has("x")) c.identity_x = n->number("x");
        if (n->has("y")) c.identity_y = n->number("y");
        if (c.identity_x && c.identity_y && !(*c.identity_y > *c.identity_x)) n->fail("identity needs x < y");
        if (n->has("convention")) {
            const Node v = n->child("convention");
            const std::string s = v.as_string();
            if (s == "strict") {
                c.convention = LadderConvention::strict;
            } else if (s == "inclusive") {
                c.convention = LadderConvention::inclusive;
            } else {
                v.fail("convention must be 'strict' or 'inclusive'");
            }
        }
    }

    if (const auto n = top.optional_object("value")) {
        n->allow({"starts"});
        if (n->has("starts")) c.value_starts = n->numbers("starts");
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::config_error, path + ":0: cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

}  // namespace lcstop
