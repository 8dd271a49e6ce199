#include "gbsp/config.hpp"

#include <cmath>

namespace gbsp {

using nlohmann::ordered_json;

namespace {

std::vector<double> as_list(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

constexpr std::size_t kMaxListedBalls = 4096;

RunResult run_series(const RunConfig& cfg, const RunOverrides& ov, int threads) {
    RunResult res;
    const long long Q = ov.qmax.value_or(cfg.q_max);
    if (Q < 16) throw ConfigError("q_range.max", "series needs Q_max >= 16");
    SeriesOptions opts;
    opts.margin = cfg.series_margin;
    opts.threads = threads;
    opts.budget = cfg.budget;
    try {
        const SeriesReport rep = series_scan(cfg.psi, cfg.f, cfg.n, Q, cfg.series_mode, opts);
        res.files["series.csv"] = rep.to_csv();
        res.files["series.json"] = rep.to_json();
        res.message = "verdict " + to_string(rep.verdict);
    } catch (const SeriesBudgetError& e) {
        res.files["series.csv"] = e.report.to_csv();
        res.files["series.json"] = e.report.to_json();
        res.exit_code = 3;
        res.message = e.what();
    }
    return res;
}

RunResult run_cover(const RunConfig& cfg, const RunOverrides& ov) {
    if (!ov.p) throw ConfigError("--p", "cover requires p");
    if (!ov.q) throw ConfigError("--q", "cover requires q");
    if (static_cast<int>(ov.q->size()) != cfg.n) throw ConfigError("--q", "must have n entries");
    if (is_zero(*ov.q)) throw ConfigError("--q", "must be nonzero");
    if (!cfg.surface.polynomial()) throw ConfigError("surface", "cover needs a polynomial surface");
    const CompactWindow window = cfg.window();
    const HField h = build_h(*ov.p, *ov.q, cfg.surface, cfg.shift, cfg.psi);
    ClassifyOptions copts;
    copts.eps_grad = cfg.eps_grad;
    copts.probe_per_axis = cfg.probe_res;
    const Regime regime = classify_regime(h, window, cfg.surface, copts);

    ordered_json j;
    j["p"] = *ov.p;
    j["q"] = *ov.q;
    j["regime"] = to_string(regime.tag);
    j["v"] = regime.tag == Regime::Tag::Case1 ? ordered_json(as_list(regime.v)) : ordered_json();
    j["rho"] = h.rho();
    if (regime.tag == Regime::Tag::Exceptional) {
        const Box& K = window.box();
        j["n_balls"] = 1;
        j["f_cost"] = cfg.f(K.diameter());
        j["bound"] = cfg.f.F(cfg.n, h.psi_value() / static_cast<double>(max_norm(*ov.q)));
        j["cover"] = "box cover of K";
        j["balls"] = ordered_json::array({{{"center", as_list(K.center())}, {"radius", 0.5 * K.diameter()}}});
    } else {
        CoverOptions opts;
        const CoverReport rep = cover_slab(h, regime, window, cfg.f, opts);
        j["n_balls"] = rep.n_balls;
        j["f_cost"] = rep.f_cost;
        j["bound"] = rep.bound;
        j["ratio"] = rep.ratio;
        j["max_count_ratio"] = rep.max_count_ratio;
        j["halvings"] = rep.halvings;
        const bool listed = rep.cover.materialized() && rep.cover.balls.size() <= kMaxListedBalls;
        j["balls_listed"] = listed;
        auto& balls = j["balls"] = ordered_json::array();
        if (listed)
            for (const Ball& b : rep.cover.balls) balls.push_back({{"center", as_list(b.center)}, {"radius", b.radius}});
        auto& groups = j["groups"] = ordered_json::array();
        for (const BallGroup& g : rep.cover.groups)
            groups.push_back({{"anchor", as_list(g.anchor)}, {"extent", g.extent}, {"radius", g.radius}, {"count", g.count}});
    }
    RunResult res;
    res.files["cover.json"] = j.dump(2);
    res.message = "regime " + to_string(regime.tag);
    return res;
}

RunResult run_certificate(const RunConfig& cfg, const RunOverrides& ov, int threads) {
    if (!cfg.surface.polynomial()) throw ConfigError("surface", "certificate needs a polynomial surface");
    const long long Q = ov.qmax.value_or(cfg.q_max);
    if (Q < cfg.q_min) throw ConfigError("--qmax", "below q_range.min");
    CertificateOptions opts;
    opts.samples_per_shell = cfg.samples_per_shell;
    opts.seed = cfg.seed;
    opts.threads = threads;
    opts.series_margin = cfg.series_margin;
    opts.budget = cfg.budget;
    opts.classify.eps_grad = cfg.eps_grad;
    opts.classify.probe_per_axis = cfg.probe_res;
    const CantelliCertificate cert = cantelli_certificate(cfg.setup(), cfg.q_min, Q, opts);
    RunResult res;
    res.files["certificate.json"] = cert.to_json();
    res.exit_code = cert.complete ? 0 : 3;
    res.message = "verdict " + to_string(cert.verdict);
    return res;
}

RunResult run_dim_estimate(const RunConfig& cfg, const RunOverrides& ov, int threads) {
    if (cfg.n < 3) throw ConfigError("n", "dim-estimate needs n >= 3");
    const long long Q = ov.qmax.value_or(cfg.q_max);
    if (Q < cfg.q_min) throw ConfigError("--qmax", "below q_range.min");
    const ProblemSetup setup = cfg.setup();
    BoxDimensionOptions opts;
    opts.threads = threads;
    opts.seed = cfg.seed;
    const BoxDimension bd = box_dimension(
        [&](const Vec& x) { return limsup_hit(x, cfg.q_min, Q, setup); }, cfg.window_box, cfg.box_scales, opts);
    std::vector<double> schedule;
    for (double t = 2.0; t <= 1e6; t *= 2.0) schedule.push_back(t);
    const double tau_hat = lower_order(cfg.psi, cfg.n, schedule);

    ordered_json j;
    j["Q_min"] = cfg.q_min;
    j["Q_max"] = Q;
    j["scales"] = bd.scales;
    j["counts"] = bd.counts;
    j["slope"] = bd.slope;
    j["tau_hat"] = tau_hat;
    j["dim_bound"] = dim_bound(cfg.n, tau_hat);
    RunResult res;
    res.files["box_counts.csv"] = bd.to_csv();
    res.files["dim_estimate.json"] = j.dump(2);
    res.message = "slope " + std::to_string(bd.slope);
    return res;
}

RunResult run_hessian(const RunConfig& cfg, int threads) {
    const SingularReport sing = singular_fraction(cfg.surface, cfg.hessian_res, cfg.tol_rel, threads);
    const ConditionIIReport c2 = condition_II_check(cfg.surface, cfg.f, cfg.refinements, cfg.tol_rel, threads);
    ordered_json j;
    j["surface"] = cfg.surface.name();
    j["singular"] = ordered_json::parse(sing.to_json());
    j["condition_II"] = ordered_json::parse(c2.to_json());
    if (const auto* fc = std::get_if<FatCantor>(&cfg.surface.body())) {
        // Grid fine enough to resolve the smallest removed interval.
        double smallest = 1.0;
        for (auto [a, b] : fc->removed()) smallest = std::min(smallest, b - a);
        const int res = static_cast<int>(std::min(1e7, std::ceil(4.0 / smallest)));
        j["marked_length"] = marked_length_1d(cfg.surface, std::max(16, res), 1e-12);
        j["ledger_measure"] = fc->measure();
    }
    RunResult res;
    res.files["hessian.json"] = j.dump(2);
    res.message = "fraction " + std::to_string(sing.fraction);
    return res;
}

RunResult run_fiber(const RunConfig& cfg, const RunOverrides& ov) {
    if (!ov.seed_point) throw ConfigError("--seed-point", "fiber requires a seed point");
    if (static_cast<int>(ov.seed_point->size()) != cfg.surface.dims())
        throw ConfigError("--seed-point", "must have n-1 entries");
    const Vec x0 = Eigen::Map<const Vec>(ov.seed_point->data(), static_cast<Eigen::Index>(ov.seed_point->size()));
    const Fiber fib = trace_fiber(cfg.surface, x0, cfg.fiber_step, cfg.fiber_max_len);
    RunResult res;
    res.files["fiber.json"] = fib.to_json();
    res.message = "length " + std::to_string(fib.length);
    return res;
}

}  // namespace

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"series", "cover", "certificate", "dim-estimate", "hessian", "fiber"};
    return names;
}

RunResult run_command(const std::string& command, const RunConfig& config, const RunOverrides& overrides) {
    const int threads = overrides.threads.value_or(config.threads);
    try {
        if (threads < 1) throw ConfigError("--threads", "must be positive");
        if (command == "series") return run_series(config, overrides, threads);
        if (command == "cover") return run_cover(config, overrides);
        if (command == "certificate") return run_certificate(config, overrides, threads);
        if (command == "dim-estimate") return run_dim_estimate(config, overrides, threads);
        if (command == "hessian") return run_hessian(config, threads);
        if (command == "fiber") return run_fiber(config, overrides);
        throw ConfigError("<command>", "unknown command '" + command + "'");
    } catch (const ConfigError& e) {
        return {2, {}, e.what()};
    } catch (const ArgumentError& e) {
        return {2, {}, e.what()};
    } catch (const std::domain_error& e) {
        return {2, {}, e.what()};
    } catch (const NoKernelError& e) {
        return {2, {}, e.what()};
    } catch (const GradientDegeneracyError& e) {
        return {2, {}, e.what()};
    } catch (const UnsupportedRegimeError& e) {
        return {2, {}, e.what()};
    }
}

}  // namespace gbsp
