#pragma once

// Config files drive every experiment: TOML-style sections of key = value
// pairs (numbers, strings, booleans, numeric arrays), with coefficients and
// sources given as arithmetic expressions. Validation happens per scenario
// and every rejection message cites the admissibility inequality at fault.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "carlab/errors.hpp"
#include "carlab/expression.hpp"
#include "carlab/geometry.hpp"
#include "carlab/harness.hpp"
#include "carlab/weights.hpp"

namespace carlab {

class TomlValue {
public:
    using Array = std::vector<double>;
    std::variant<double, bool, std::string, Array> v;

    double as_double(const std::string& key) const {
        if (auto* d = std::get_if<double>(&v)) return *d;
        throw ConfigError("config key '" + key + "' must be a number");
    }
    bool as_bool(const std::string& key) const {
        if (auto* b = std::get_if<bool>(&v)) return *b;
        throw ConfigError("config key '" + key + "' must be a boolean");
    }
    std::string as_string(const std::string& key) const {
        if (auto* s = std::get_if<std::string>(&v)) return *s;
        throw ConfigError("config key '" + key + "' must be a string");
    }
    Array as_array(const std::string& key) const {
        if (auto* a = std::get_if<Array>(&v)) return *a;
        if (auto* d = std::get_if<double>(&v)) return {*d};
        throw ConfigError("config key '" + key + "' must be an array of numbers");
    }
};

class TomlTable {
public:
    static TomlTable parse(const std::string& text) {
        TomlTable t;
        std::istringstream in(text);
        std::string line, section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = strip_comment(line);
            s = trim(s);
            if (s.empty()) continue;
            if (s.front() == '[') {
                if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
                section = trim(s.substr(1, s.size() - 2));
                continue;
            }
            auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
            }
            std::string key = trim(s.substr(0, eq));
            std::string val = trim(s.substr(eq + 1));
            if (key.empty() || val.empty()) {
                throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
            }
            t.set(section, key, parse_value(val, lineno));
        }
        return t;
    }

    static TomlTable from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot read config file '" + path + "'");
        std::ostringstream ss;
        ss << is.rdbuf();
        return parse(ss.str());
    }

    void set(const std::string& section, const std::string& key, TomlValue value) {
        data_[section][key] = std::move(value);
    }

    // "section.key=value" override, parsed with the same value grammar.
    void apply_override(const std::string& assignment) {
        auto eq = assignment.find('=');
        if (eq == std::string::npos) throw ConfigError("override must look like section.key=value");
        std::string key = trim(assignment.substr(0, eq));
        std::string val = trim(assignment.substr(eq + 1));
        auto dot = key.find('.');
        std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
        std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
        set(section, name, parse_value(val, 0));
        overrides_.push_back(assignment);
    }

    bool has(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        return s != data_.end() && s->second.count(key) > 0;
    }

    const TomlValue& get(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        if (s == data_.end() || !s->second.count(key)) {
            throw ConfigError("missing config key [" + section + "] " + key);
        }
        return s->second.at(key);
    }

    double number(const std::string& section, const std::string& key, std::optional<double> def = {}) const {
        if (!has(section, key)) {
            if (def) return *def;
            throw ConfigError("missing config key [" + section + "] " + key);
        }
        return get(section, key).as_double(section + "." + key);
    }

    std::string str(const std::string& section, const std::string& key, std::optional<std::string> def = {}) const {
        if (!has(section, key)) {
            if (def) return *def;
            throw ConfigError("missing config key [" + section + "] " + key);
        }
        return get(section, key).as_string(section + "." + key);
    }

    bool boolean(const std::string& section, const std::string& key, bool def) const {
        if (!has(section, key)) return def;
        return get(section, key).as_bool(section + "." + key);
    }

    std::vector<double> array(const std::string& section, const std::string& key,
                              std::optional<std::vector<double>> def = {}) const {
        if (!has(section, key)) {
            if (def) return *def;
            throw ConfigError("missing config key [" + section + "] " + key);
        }
        return get(section, key).as_array(section + "." + key);
    }

    // Canonical text for hashing: sorted sections and keys with %.17g values.
    std::string canonical() const {
        std::ostringstream os;
        char buf[64];
        for (const auto& [sec, kv] : data_) {
            os << '[' << sec << "]\n";
            for (const auto& [k, val] : kv) {
                os << k << '=';
                if (auto* d = std::get_if<double>(&val.v)) {
                    std::snprintf(buf, sizeof buf, "%.17g", *d);
                    os << buf;
                } else if (auto* b = std::get_if<bool>(&val.v)) {
                    os << (*b ? "true" : "false");
                } else if (auto* s = std::get_if<std::string>(&val.v)) {
                    os << '"' << *s << '"';
                } else if (auto* a = std::get_if<TomlValue::Array>(&val.v)) {
                    os << '[';
                    for (std::size_t i = 0; i < a->size(); ++i) {
                        std::snprintf(buf, sizeof buf, "%.17g", (*a)[i]);
                        os << (i ? "," : "") << buf;
                    }
                    os << ']';
                }
                os << '\n';
            }
        }
        return os.str();
    }

    const std::vector<std::string>& overrides() const { return overrides_; }

private:
    static std::string trim(const std::string& s) {
        std::size_t a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        std::size_t b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    static std::string strip_comment(const std::string& s) {
        bool in_str = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] == '"') in_str = !in_str;
            if (s[i] == '#' && !in_str) return s.substr(0, i);
        }
        return s;
    }

    static TomlValue parse_value(const std::string& val, int lineno) {
        TomlValue out;
        if (val.front() == '"') {
            if (val.size() < 2 || val.back() != '"') {
                throw ConfigError("line " + std::to_string(lineno) + ": unterminated string");
            }
            out.v = val.substr(1, val.size() - 2);
            return out;
        }
        if (val == "true" || val == "false") {
            out.v = (val == "true");
            return out;
        }
        if (val.front() == '[') {
            if (val.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated array");
            TomlValue::Array arr;
            std::string inner = val.substr(1, val.size() - 2);
            std::istringstream ss(inner);
            std::string item;
            while (std::getline(ss, item, ',')) {
                std::string it = trim(item);
                if (it.empty()) continue;
                try {
                    arr.push_back(std::stod(it));
                } catch (const std::exception&) {
                    throw ConfigError("line " + std::to_string(lineno) + ": bad array entry '" + it + "'");
                }
            }
            out.v = std::move(arr);
            return out;
        }
        try {
            std::size_t used = 0;
            double d = std::stod(val, &used);
            if (used != val.size()) throw std::invalid_argument("trailing");
            out.v = d;
            return out;
        } catch (const std::exception&) {
            throw ConfigError("line " + std::to_string(lineno) + ": cannot parse value '" + val + "'");
        }
    }

    std::map<std::string, std::map<std::string, TomlValue>> data_;
    std::vector<std::string> overrides_;
};

inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// Typed view over a parsed config table with the defaults of the laboratory.
struct ExperimentConfig {
    TomlTable table;

    DomainSpec base_domain;     // nx from [domain] nx
    std::optional<Point> x0;    // [geometry] x0
    ScenarioFunctions functions;
    Expression f_expr;          // empty when f = "fourier"
    bool f_is_fourier = false;

    double lambda = 0.5;
    std::optional<double> beta_override;
    std::vector<double> s_sweep;

    double T = 1.0;
    double dt = 0.0;          // parabolic step; defaults to dx when 0
    double dt_factor = 0.9;   // hyperbolic step = dt_factor * dx
    std::vector<int> grids;
    int ensemble = 50;
    int modes = 8;
    std::uint64_t seed = 42;
    std::vector<double> noise_levels;
    std::string out_dir = "out";
    bool exploratory = false;
    double M_cap = 10.0;
    double epsilon = 0.0;  // Cauchy window margin; defaults to T/8 when 0

    // parabolic geometry block
    std::string gamma_name = "right";
    double eta = 0.0;  // 0: default 0.5 * diam
    std::optional<Box> omega, omega0;
    double t0 = 0.0;   // 0: default T/2
    double delta = 0.0;  // 0: default T/4

    double alpha = 1e-8;
    int max_iterations = 500;
    double cg_tolerance = 1e-12;

    static ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides = {}) {
        TomlTable t = TomlTable::from_file(path);
        for (const auto& o : overrides) t.apply_override(o);
        return from_table(std::move(t));
    }

    static ExperimentConfig from_table(TomlTable t) {
        ExperimentConfig c;
        c.table = std::move(t);
        const TomlTable& tb = c.table;

        std::string kind = tb.str("domain", "kind", std::string("interval"));
        int nx = static_cast<int>(tb.number("domain", "nx", 201));
        if (kind == "interval") {
            c.base_domain = DomainSpec::interval(tb.number("domain", "a", 0.0), tb.number("domain", "b", 1.0), nx);
        } else if (kind == "rectangle") {
            c.base_domain = DomainSpec::rectangle(tb.number("domain", "a", 0.0), tb.number("domain", "b", 1.0),
                                                  tb.number("domain", "a2", 0.0), tb.number("domain", "b2", 1.0), nx);
        } else {
            throw ConfigError("domain.kind must be \"interval\" or \"rectangle\"");
        }

        if (tb.has("geometry", "x0")) {
            auto a = tb.array("geometry", "x0");
            Point p;
            p.x1 = a.at(0);
            if (a.size() > 1) p.x2 = a[1];
            c.x0 = p;
        }

        auto expr_fn1 = [&](const std::string& key) -> std::function<double(Point)> {
            if (!tb.has("coefficients", key)) return nullptr;
            Expression e = Expression::parse(tb.str("coefficients", key));
            return [e](Point p) { return e(p.x1, p.x2, 0.0); };
        };
        c.functions.b1 = expr_fn1("b1");
        c.functions.b2 = expr_fn1("b2");
        c.functions.c = expr_fn1("c");
        if (tb.has("source", "R")) {
            Expression e = Expression::parse(tb.str("source", "R"));
            c.functions.R = [e](Point p, double t) { return e(p.x1, p.x2, t); };
        }
        if (tb.has("source", "dRdt")) {
            Expression e = Expression::parse(tb.str("source", "dRdt"));
            c.functions.dRdt = [e](Point p, double t) { return e(p.x1, p.x2, t); };
        }
        c.functions.r0 = tb.number("source", "r0", 0.5);
        std::string fspec = tb.str("source", "f", std::string("fourier"));
        if (fspec == "fourier") {
            c.f_is_fourier = true;
        } else {
            c.f_expr = Expression::parse(fspec);
        }

        c.lambda = tb.number("weight", "lambda", 0.5);
        if (tb.has("weight", "beta")) c.beta_override = tb.number("weight", "beta");
        double s_min = tb.number("weight", "s_min", 1.0);
        double s_max = tb.number("weight", "s_max", 64.0);
        int s_steps = static_cast<int>(tb.number("weight", "s_steps", 16));
        if (!(s_min > 0.0 && s_max > s_min && s_steps >= 2)) {
            throw ConfigError("weight.s_min/s_max/s_steps must define an increasing positive sweep");
        }
        c.s_sweep = geometric_spaced(s_min, s_max, s_steps);

        c.T = tb.number("run", "T", 1.0);
        c.dt = tb.number("run", "dt", 0.0);
        c.dt_factor = tb.number("run", "dt_factor", 0.9);
        for (double g : tb.array("run", "grids", std::vector<double>{static_cast<double>(nx)})) {
            c.grids.push_back(static_cast<int>(g));
        }
        c.ensemble = static_cast<int>(tb.number("run", "ensemble", 50));
        c.modes = static_cast<int>(tb.number("run", "modes", 8));
        c.seed = static_cast<std::uint64_t>(tb.number("run", "seed", 42));
        c.noise_levels = tb.array("run", "noise", std::vector<double>{1e-4, 1e-3, 1e-2, 1e-1});
        c.out_dir = tb.str("run", "out", std::string("out"));
        c.exploratory = tb.boolean("run", "exploratory", false);
        c.M_cap = tb.number("run", "M_cap", 10.0);
        c.epsilon = tb.number("run", "epsilon", 0.0);

        c.gamma_name = tb.str("parabolic", "gamma", std::string("right"));
        c.eta = tb.number("parabolic", "eta", 0.0);
        auto box_of = [&](const std::string& key) -> std::optional<Box> {
            if (!tb.has("parabolic", key)) return std::nullopt;
            auto a = tb.array("parabolic", key);
            Box b;
            b.lo1 = a.at(0);
            b.hi1 = a.at(1);
            if (a.size() >= 4) {
                b.lo2 = a[2];
                b.hi2 = a[3];
            }
            return b;
        };
        c.omega = box_of("omega");
        c.omega0 = box_of("omega0");
        c.t0 = tb.number("parabolic", "t0", 0.0);
        c.delta = tb.number("parabolic", "delta", 0.0);

        c.alpha = tb.number("reconstruction", "alpha", 1e-8);
        c.max_iterations = static_cast<int>(tb.number("reconstruction", "max_iter", 500));
        c.cg_tolerance = tb.number("reconstruction", "tol", 1e-12);
        return c;
    }

    std::uint64_t config_hash() const { return fnv1a64(table.canonical()); }

    DomainSpec domain_at(int nx) const {
        DomainSpec d = base_domain;
        d.nx = nx;
        return d;
    }

    Point require_x0() const {
        if (!x0) throw ConfigError("this experiment needs [geometry] x0");
        return *x0;
    }

    double wave_dt(const DomainSpec& dom) const { return dt_factor * cfl_limit(dom) / 0.9; }

    double heat_dt(const DomainSpec& dom) const { return dt > 0.0 ? dt : dom.dx(0); }

    double default_t0() const { return t0 > 0.0 ? t0 : 0.5 * T; }
    double default_delta() const { return delta > 0.0 ? delta : 0.25 * T; }
    double default_epsilon() const { return epsilon > 0.0 ? epsilon : T / 8.0; }

    // The parabolic geometry induced by the [parabolic] block on a given grid.
    std::shared_ptr<const ParabolicGeometry> make_parabolic_geometry(const DomainSpec& dom) const {
        BoundaryFace face = dom.face_by_name(gamma_name);
        double e = eta > 0.0 ? eta : 0.5 * dom.diameter();
        return std::make_shared<const ParabolicGeometry>(construct_d(dom, face, e, omega, omega0));
    }

    std::vector<double> sample_f(const DomainSpec& dom) const {
        if (f_is_fourier) {
            Rng rng(mix_seed(seed, 0));
            return FourierSource::draw(dom, modes, rng).sample(dom);
        }
        Expression e = f_expr;
        return sample_on_grid(dom, [e](Point p) { return e(p.x1, p.x2, 0.0); });
    }

    // Ensemble settings for the harness; an explicit f expression becomes a
    // named analytic profile instead of the random Fourier family.
    EnsembleSpec make_ensemble() const {
        EnsembleSpec e;
        e.n_samples = ensemble;
        e.n_modes = modes;
        e.seed = seed;
        e.noise_levels = noise_levels;
        if (!f_is_fourier) {
            e.family = SourceFamily::NamedProfile;
            Expression ex = f_expr;
            e.profile = [ex](Point p) { return ex(p.x1, p.x2, 0.0); };
        }
        return e;
    }

    // Time-condition validation for the hyperbolic scenarios; cites (1.9) or
    // (5.1) unless the run is explicitly exploratory.
    void validate_time_condition(const ObservationGeometry& geom, bool observability) const {
        if (exploratory) return;
        double crit = observability ? critical_time_observability(geom) : critical_time_hyperbolic(geom);
        const char* cond = observability ? "(5.1)" : "(1.9)";
        const char* name = observability ? "the observability hypothesis" : "Theorem 1 hypothesis";
        if (!(T > crit)) {
            std::ostringstream os;
            os << "T=" << T << " <= critical " << crit << ": " << name << " " << cond << " fails";
            throw ConditionViolation(cond, os.str());
        }
    }
};

}  // namespace carlab
