#include "gbsp/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace gbsp {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items())
        if (!ok.count(k)) throw ConfigError(join(path, k), "unknown key");
}

double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError(path, "must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
    return d;
}

long long integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) {
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long long>(d);
        }
        throw ConfigError(path, "must be an integer");
    }
    return v.get<long long>();
}

bool boolean(const json& v, const std::string& path) {
    if (!v.is_boolean()) throw ConfigError(path, "must be true or false");
    return v.get<bool>();
}

std::string text(const json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError(path, "must be a string");
    return v.get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError(path, "must be an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

Polynomial polynomial_from(const json& v, int dims, const std::string& path) {
    check_keys(v, path, {"terms"});
    if (!v.contains("terms") || !v["terms"].is_array()) throw ConfigError(join(path, "terms"), "must be an array");
    Polynomial p(dims);
    const auto& terms = v["terms"];
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const std::string tp = join(path, "terms") + "[" + std::to_string(i) + "]";
        check_keys(terms[i], tp, {"exp", "coef"});
        if (!terms[i].contains("exp") || !terms[i].contains("coef")) throw ConfigError(tp, "needs exp and coef");
        const auto& e = terms[i]["exp"];
        if (!e.is_array()) throw ConfigError(tp + ".exp", "must be an array of integers");
        Polynomial::Exponents exps;
        for (std::size_t k = 0; k < e.size(); ++k) {
            const long long a = integer(e[k], tp + ".exp");
            if (a < 0 || a > 64) throw ConfigError(tp + ".exp", "exponents must lie in [0, 64]");
            exps.push_back(static_cast<int>(a));
        }
        if (static_cast<int>(exps.size()) != dims)
            throw ConfigError(tp + ".exp", "must have n-1 = " + std::to_string(dims) + " entries");
        p.add_term(exps, number(terms[i]["coef"], tp + ".coef"));
    }
    return p;
}

template <class F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(path, e.what());
    }
}

}  // namespace

bool command_requires_condition_I(const std::string& command) {
    return command == "cover" || command == "certificate";
}

RunConfig validate_config(const json& doc, const std::optional<std::string>& command) {
    check_keys(doc, "", {"n", "surface", "shift", "psi", "f", "window", "q_range", "grid", "tolerances", "series",
                         "output", "threads", "seed", "strict_condition_I", "certificate", "fiber", "budget"});
    RunConfig cfg;
    if (!doc.contains("n")) throw ConfigError("n", "is required");
    const long long n = integer(doc["n"], "n");
    if (n < 2 || n > 9) throw ConfigError("n", "must lie in [2, 9]");
    cfg.n = static_cast<int>(n);
    const int d = cfg.n - 1;

    // surface
    if (!doc.contains("surface")) throw ConfigError("surface", "is required");
    const json& s = doc["surface"];
    check_keys(s, "surface", {"builtin", "params", "polynomial", "domain"});
    if (s.contains("builtin") == s.contains("polynomial"))
        throw ConfigError("surface", "give exactly one of builtin or polynomial");
    if (s.contains("builtin")) {
        if (s.contains("domain")) throw ConfigError("surface.domain", "not allowed with a builtin");
        cfg.surface_spec.builtin = text(s["builtin"], "surface.builtin");
        if (s.contains("params")) cfg.surface_spec.params = numbers(s["params"], "surface.params");
        cfg.surface = wrap("surface.params", [&] { return make_builtin(cfg.surface_spec.builtin, cfg.surface_spec.params); });
        if (cfg.surface.n() != cfg.n)
            throw ConfigError("n", "builtin " + cfg.surface_spec.builtin + " has n = " + std::to_string(cfg.surface.n()));
    } else {
        if (s.contains("params")) throw ConfigError("surface.params", "only allowed with a builtin");
        if (cfg.n < 3) throw ConfigError("n", "polynomial surfaces need n >= 3");
        if (!s.contains("domain")) throw ConfigError("surface.domain", "is required for a polynomial surface");
        const json& dm = s["domain"];
        check_keys(dm, "surface.domain", {"lower", "upper"});
        if (!dm.contains("lower") || !dm.contains("upper")) throw ConfigError("surface.domain", "needs lower and upper");
        const auto lo = numbers(dm["lower"], "surface.domain.lower");
        const auto hi = numbers(dm["upper"], "surface.domain.upper");
        if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
            throw ConfigError("surface.domain", "corners must have n-1 entries");
        Box domain = wrap("surface.domain", [&] { return Box(to_vec(lo), to_vec(hi)); });
        Polynomial g = polynomial_from(s["polynomial"], d, "surface.polynomial");
        cfg.surface = Hypersurface(cfg.n, domain, std::move(g));
    }

    // shift
    cfg.shift = Shift::zero(d);
    if (doc.contains("shift")) {
        const json& t = doc["shift"];
        if (t.is_number()) {
            cfg.shift = Shift(Polynomial::constant(d, number(t, "shift")));
        } else {
            cfg.shift = Shift(polynomial_from(t, d, "shift"));
        }
        if (!cfg.shift.is_zero() && !cfg.surface.polynomial())
            throw ConfigError("shift", "only supported on polynomial surfaces");
    }

    // psi
    if (doc.contains("psi")) {
        const json& p = doc["psi"];
        check_keys(p, "psi", {"kind", "tau", "weights", "exponent"});
        const std::string kind = p.contains("kind") ? text(p["kind"], "psi.kind") : "power";
        const double tau = p.contains("tau") ? number(p["tau"], "psi.tau") : 3.0;
        if (!(tau > 0.0)) throw ConfigError("psi.tau", "must be positive");
        if (kind != "quasi-norm-power" && p.contains("weights")) throw ConfigError("psi.weights", "only for quasi-norm-power");
        if (kind != "log-corrected" && p.contains("exponent")) throw ConfigError("psi.exponent", "only for log-corrected");
        if (kind == "power") {
            cfg.psi = ApproxFunction::power(tau);
        } else if (kind == "quasi-norm-power") {
            if (!p.contains("weights")) throw ConfigError("psi.weights", "is required for quasi-norm-power");
            const auto w = numbers(p["weights"], "psi.weights");
            if (static_cast<int>(w.size()) != cfg.n) throw ConfigError("psi.weights", "must have n entries");
            cfg.psi = wrap("psi.weights", [&] { return ApproxFunction::quasi_norm_power(tau, w); });
        } else if (kind == "log-corrected") {
            const double e = p.contains("exponent") ? number(p["exponent"], "psi.exponent") : 1.0;
            cfg.psi = wrap("psi.exponent", [&] { return ApproxFunction::log_corrected(tau, e); });
        } else {
            throw ConfigError("psi.kind", "must be power, quasi-norm-power or log-corrected");
        }
    }

    // f
    if (doc.contains("f")) {
        const json& f = doc["f"];
        check_keys(f, "f", {"kind", "s", "exponent", "condition_I_exponent"});
        const std::string kind = f.contains("kind") ? text(f["kind"], "f.kind") : "power";
        const double sv = f.contains("s") ? number(f["s"], "f.s") : 2.5;
        if (kind == "power") {
            if (f.contains("exponent")) throw ConfigError("f.exponent", "only for power-log");
            cfg.f = wrap("f.s", [&] { return DimensionFunction::power(sv); });
        } else if (kind == "power-log") {
            const double e = f.contains("exponent") ? number(f["exponent"], "f.exponent") : 1.0;
            cfg.f = wrap("f.exponent", [&] { return DimensionFunction::power_log(sv, e); });
        } else {
            throw ConfigError("f.kind", "must be power or power-log");
        }
        if (f.contains("condition_I_exponent")) {
            const double ce = number(f["condition_I_exponent"], "f.condition_I_exponent");
            cfg.f = wrap("f.condition_I_exponent", [&] { return cfg.f.with_declared_exponent(ce); });
        }
    }

    // window
    double margin = 0.1;
    bool explicit_window = false;
    if (doc.contains("window")) {
        const json& w = doc["window"];
        check_keys(w, "window", {"margin", "lower", "upper"});
        if (w.contains("margin") && (w.contains("lower") || w.contains("upper")))
            throw ConfigError("window", "give margin or lower/upper, not both");
        if (w.contains("margin")) margin = number(w["margin"], "window.margin");
        if (w.contains("lower") || w.contains("upper")) {
            if (!w.contains("lower") || !w.contains("upper")) throw ConfigError("window", "needs both lower and upper");
            const auto lo = numbers(w["lower"], "window.lower");
            const auto hi = numbers(w["upper"], "window.upper");
            if (static_cast<int>(lo.size()) != d || static_cast<int>(hi.size()) != d)
                throw ConfigError("window", "corners must have n-1 entries");
            cfg.window_box = wrap("window", [&] { return Box(to_vec(lo), to_vec(hi)); });
            explicit_window = true;
        }
    }
    if (!explicit_window) {
        cfg.window_box = wrap("window.margin", [&] { return CompactWindow::inset(cfg.surface.domain(), margin).box(); });
    }
    wrap("window", [&] { return cfg.window(); });

    // q_range
    if (doc.contains("q_range")) {
        const json& q = doc["q_range"];
        check_keys(q, "q_range", {"min", "max"});
        if (q.contains("min")) cfg.q_min = integer(q["min"], "q_range.min");
        if (q.contains("max")) cfg.q_max = integer(q["max"], "q_range.max");
    }
    if (cfg.q_min < 1) throw ConfigError("q_range.min", "must be at least 1");
    if (cfg.q_min > cfg.q_max) throw ConfigError("q_range", "min must not exceed max");
    if (cfg.q_max > 1 << 20) throw ConfigError("q_range.max", "too large");

    // grid
    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        check_keys(g, "grid", {"hessian_res", "probe_res", "box_scales", "refinements"});
        if (g.contains("hessian_res")) cfg.hessian_res = static_cast<int>(integer(g["hessian_res"], "grid.hessian_res"));
        if (g.contains("probe_res")) cfg.probe_res = static_cast<int>(integer(g["probe_res"], "grid.probe_res"));
        if (g.contains("box_scales")) cfg.box_scales = numbers(g["box_scales"], "grid.box_scales");
        if (g.contains("refinements")) {
            cfg.refinements.clear();
            for (double r : numbers(g["refinements"], "grid.refinements")) {
                if (r != std::floor(r) || r < 2 || r > 4096) throw ConfigError("grid.refinements", "entries must be integers in [2, 4096]");
                cfg.refinements.push_back(static_cast<int>(r));
            }
        }
    }
    if (cfg.hessian_res < 16 || cfg.hessian_res > 4096) throw ConfigError("grid.hessian_res", "must lie in [16, 4096]");
    if (cfg.probe_res < 3 || cfg.probe_res > 1024) throw ConfigError("grid.probe_res", "must lie in [3, 1024]");
    if (cfg.box_scales.size() < 4) throw ConfigError("grid.box_scales", "needs at least 4 scales");
    for (double h : cfg.box_scales) {
        if (!(h > 0.0)) throw ConfigError("grid.box_scales", "scales must be positive");
        const double r = std::log2(h / cfg.box_scales.front());
        if (std::abs(r - std::round(r)) > 1e-9) throw ConfigError("grid.box_scales", "scales must differ by powers of two");
    }
    if (cfg.refinements.size() < 3) throw ConfigError("grid.refinements", "needs at least 3 levels");

    // tolerances
    if (doc.contains("tolerances")) {
        const json& t = doc["tolerances"];
        check_keys(t, "tolerances", {"eps_grad", "tol_rel", "series_margin"});
        if (t.contains("eps_grad")) cfg.eps_grad = number(t["eps_grad"], "tolerances.eps_grad");
        if (t.contains("tol_rel")) cfg.tol_rel = number(t["tol_rel"], "tolerances.tol_rel");
        if (t.contains("series_margin")) cfg.series_margin = number(t["series_margin"], "tolerances.series_margin");
    }
    if (!(cfg.eps_grad > 0.0 && cfg.eps_grad < 1.0)) throw ConfigError("tolerances.eps_grad", "must lie in (0, 1)");
    if (!(cfg.tol_rel >= 0.0 && cfg.tol_rel < 1.0)) throw ConfigError("tolerances.tol_rel", "must lie in [0, 1)");
    if (!(cfg.series_margin >= 0.0 && cfg.series_margin < 1.0))
        throw ConfigError("tolerances.series_margin", "must lie in [0, 1)");

    if (doc.contains("series")) {
        const json& sr = doc["series"];
        check_keys(sr, "series", {"mode"});
        if (sr.contains("mode")) cfg.series_mode = wrap("series.mode", [&] { return parse_series_mode(text(sr["mode"], "series.mode")); });
    }
    if (doc.contains("output")) {
        const json& o = doc["output"];
        check_keys(o, "output", {"dir"});
        if (o.contains("dir")) cfg.output_dir = text(o["dir"], "output.dir");
    }
    if (doc.contains("threads")) {
        const long long t = integer(doc["threads"], "threads");
        if (t < 1 || t > 256) throw ConfigError("threads", "must lie in [1, 256]");
        cfg.threads = static_cast<int>(t);
    }
    if (doc.contains("seed")) {
        const long long sd = integer(doc["seed"], "seed");
        if (sd < 0) throw ConfigError("seed", "must be nonnegative");
        cfg.seed = static_cast<std::uint64_t>(sd);
    }
    if (doc.contains("strict_condition_I")) cfg.strict_condition_I = boolean(doc["strict_condition_I"], "strict_condition_I");
    if (doc.contains("certificate")) {
        const json& c = doc["certificate"];
        check_keys(c, "certificate", {"samples_per_shell"});
        if (c.contains("samples_per_shell")) {
            const long long k = integer(c["samples_per_shell"], "certificate.samples_per_shell");
            if (k < 1 || k > 1 << 20) throw ConfigError("certificate.samples_per_shell", "must lie in [1, 2^20]");
            cfg.samples_per_shell = static_cast<int>(k);
        }
    }
    if (doc.contains("fiber")) {
        const json& fb = doc["fiber"];
        check_keys(fb, "fiber", {"step", "max_len"});
        if (fb.contains("step")) cfg.fiber_step = number(fb["step"], "fiber.step");
        if (fb.contains("max_len")) cfg.fiber_max_len = number(fb["max_len"], "fiber.max_len");
    }
    if (!(cfg.fiber_step > 0.0)) throw ConfigError("fiber.step", "must be positive");
    if (!(cfg.fiber_max_len > 0.0)) throw ConfigError("fiber.max_len", "must be positive");
    if (doc.contains("budget")) {
        cfg.budget = integer(doc["budget"], "budget");
        if (cfg.budget < 0) throw ConfigError("budget", "must be nonnegative (0 = unlimited)");
    }

    // Condition (I): f(xy) <~ x^s f(y) with s < 2(n-2).
    if (cfg.strict_condition_I && (!command || command_requires_condition_I(*command))) {
        const double s_decl = cfg.f.declared_exponent();
        const ConditionIReport rep = check_condition_I(cfg.f, s_decl, cfg.n);
        if (rep.verdict != ConditionVerdict::Pass)
            throw ConfigError("f", "condition (I) gate: " + rep.reason +
                                       " (set strict_condition_I=false to override)");
    }
    return cfg;
}

RunConfig load_config(const std::string& path, const std::optional<std::string>& command) {
    std::ifstream in(path);
    if (!in) throw ConfigError("<config>", "cannot open " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("<config>", std::string("malformed document: ") + e.what());
    }
    return validate_config(doc, command);
}

void write_reports(const RunResult& result, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : result.files) {
        std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + name);
        out << content;
    }
}

}  // namespace gbsp
