#include "gbsp/series.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gbsp {

std::string to_string(SeriesMode m) { return m == SeriesMode::Gbsp ? "gbsp" : "sbv"; }

std::string to_string(SeriesVerdict v) {
    switch (v) {
        case SeriesVerdict::Converges: return "CONVERGES";
        case SeriesVerdict::Diverges: return "DIVERGES";
        case SeriesVerdict::Boundary: return "BOUNDARY";
    }
    return "?";
}

SeriesMode parse_series_mode(const std::string& s) {
    if (s == "gbsp") return SeriesMode::Gbsp;
    if (s == "sbv") return SeriesMode::Sbv;
    throw ArgumentError("series mode must be gbsp or sbv, got '" + s + "'");
}

namespace {

double term_from(double Q, double psi_q, const DimensionFunction& f, int n, SeriesMode mode) {
    const double arg = f(psi_q / Q);
    if (mode == SeriesMode::Gbsp) return std::pow(Q, n - 1) * std::pow(psi_q, 2 - n) * arg;
    return std::pow(Q, n) * std::pow(psi_q, 1 - n) * arg;
}

}  // namespace

double gbsp_term(std::span<const long long> q, const ApproxFunction& psi, const DimensionFunction& f, int n) {
    if (is_zero(q)) throw ArgumentError("gbsp_term: q must be nonzero");
    return term_from(static_cast<double>(max_norm(q)), psi(q), f, n, SeriesMode::Gbsp);
}

double sbv_term(std::span<const long long> q, const ApproxFunction& psi, const DimensionFunction& f, int n) {
    if (is_zero(q)) throw ArgumentError("sbv_term: q must be nonzero");
    return term_from(static_cast<double>(max_norm(q)), psi(q), f, n, SeriesMode::Sbv);
}

long long shell_size(long long Q, int n) {
    if (Q < 0 || n < 1) throw ArgumentError("shell_size: Q >= 0 and n >= 1 required");
    if (Q == 0) return 1;
    const double approx = std::pow(2.0 * static_cast<double>(Q) + 1.0, n);
    if (approx > 9e18) throw ArgumentError("shell_size: overflow");
    long long a = 1, b = 1;
    for (int i = 0; i < n; ++i) {
        a *= 2 * Q + 1;
        b *= 2 * Q - 1;
    }
    return a - b;
}

std::string SeriesReport::to_csv() const {
    std::ostringstream out;
    out << "Q,shell_sum,cumulative\n";
    char buf[96];
    for (const auto& row : shells) {
        std::snprintf(buf, sizeof buf, "%lld,%.17g,%.17g\n", row.Q, row.shell_sum, row.cumulative);
        out << buf;
    }
    return out.str();
}

std::string SeriesReport::to_json() const {
    nlohmann::ordered_json j;
    j["mode"] = to_string(mode);
    j["n"] = n;
    j["Q_max"] = Q_max;
    j["shells"] = shells.size();
    j["total"] = total();
    j["slope"] = slope;
    j["margin"] = margin;
    j["verdict"] = to_string(verdict);
    j["complete"] = complete;
    return j.dump(2);
}

SeriesReport series_scan(const ApproxFunction& psi, const DimensionFunction& f, int n, long long Q_max,
                         SeriesMode mode, const SeriesOptions& opts) {
    if (Q_max < 16) throw ArgumentError("series: Q_max must be at least 16");
    if (n < 1) throw ArgumentError("series: n must be positive");
    if (!psi.radial() && static_cast<int>(psi.weights().size()) != n)
        throw ArgumentError("psi.weights length must equal n");
    if (!(opts.margin >= 0.0)) throw ArgumentError("series: margin must be nonnegative");

    SeriesReport rep;
    rep.mode = mode;
    rep.n = n;
    rep.Q_max = Q_max;
    rep.margin = opts.margin;

    // Shells that fit in the budget are fixed up front so the partial result
    // does not depend on scheduling.
    long long Q_done = Q_max;
    if (opts.budget > 0) {
        long long used = 0;
        Q_done = 0;
        for (long long Q = 1; Q <= Q_max; ++Q) {
            const long long sz = shell_size(Q, n);
            if (used + sz > opts.budget) break;
            used += sz;
            Q_done = Q;
        }
    }

    rep.shells.resize(static_cast<std::size_t>(Q_done));
    const bool fast = psi.radial() && !opts.force_enumeration;
    parallel_for(static_cast<std::size_t>(Q_done), opts.threads, [&](std::size_t i) {
        const long long Q = static_cast<long long>(i) + 1;
        ShellRow& row = rep.shells[i];
        row.Q = Q;
        row.count = shell_size(Q, n);
        if (fast) {
            const double Qd = static_cast<double>(Q);
            row.shell_sum = static_cast<double>(row.count) * term_from(Qd, psi.profile(Qd), f, n, mode);
            return;
        }
        CompensatedSum acc;
        for_each_in_shell(Q, n, [&](const IntVec& q) {
            acc += term_from(static_cast<double>(Q), psi(q), f, n, mode);
        });
        row.shell_sum = acc.value();
    });

    CompensatedSum cumulative;
    for (auto& row : rep.shells) {
        cumulative += row.shell_sum;
        row.cumulative = cumulative.value();
    }

    std::vector<double> lx, ly;
    for (long long Q = 16; Q <= Q_done; Q *= 2) {
        const double s = rep.shells[static_cast<std::size_t>(Q - 1)].shell_sum;
        if (s > 0.0) {
            lx.push_back(std::log(static_cast<double>(Q)));
            ly.push_back(std::log(s));
        }
    }
    if (lx.size() >= 2) {
        rep.slope = fit_line(lx, ly).slope;
        if (rep.slope < -1.0 - opts.margin)
            rep.verdict = SeriesVerdict::Converges;
        else if (rep.slope > -1.0 + opts.margin)
            rep.verdict = SeriesVerdict::Diverges;
        else
            rep.verdict = SeriesVerdict::Boundary;
    } else if (Q_done >= 32) {
        // Terms underflowed to zero on the dyadic shells.
        rep.slope = -std::numeric_limits<double>::infinity();
        rep.verdict = SeriesVerdict::Converges;
    } else {
        rep.slope = std::numeric_limits<double>::quiet_NaN();
        rep.verdict = SeriesVerdict::Boundary;
    }

    if (Q_done < Q_max) {
        rep.complete = false;
        throw SeriesBudgetError("series: enumeration budget exhausted after shell " + std::to_string(Q_done),
                                std::move(rep));
    }
    return rep;
}

double lower_order(const ApproxFunction& psi, int n, const std::vector<double>& t_schedule) {
    if (t_schedule.empty()) throw ArgumentError("lower_order: empty schedule");
    for (std::size_t i = 0; i < t_schedule.size(); ++i) {
        if (!(t_schedule[i] >= 2.0 && t_schedule[i] <= 1e6))
            throw ArgumentError("lower_order: schedule must lie in [2, 1e6]");
        if (i > 0 && !(t_schedule[i] > t_schedule[i - 1]))
            throw ArgumentError("lower_order: schedule must be increasing");
    }
    if (!psi.radial() && static_cast<int>(psi.weights().size()) != n)
        throw ArgumentError("psi.weights length must equal n");

    auto shell_inf = [&](double t) {
        if (psi.radial()) return psi.profile(t);
        // Psi decreases in the quasi-norm; on the shell ||x|| = t >= 1 the
        // quasi-norm peaks at a coordinate equal to t with the smallest weight.
        double qn = 0.0;
        for (double v : psi.weights()) qn = std::max(qn, std::pow(t, 1.0 / v));
        return psi.profile(qn);
    };
    const std::size_t tail = (t_schedule.size() + 1) / 2;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = t_schedule.size() - tail; i < t_schedule.size(); ++i) {
        const double t = t_schedule[i];
        best = std::min(best, std::log(1.0 / shell_inf(t)) / std::log(t));
    }
    return best;
}

double dim_bound(int n, double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("dim_bound: tau must be positive");
    if (n < 3) throw ArgumentError("dim_bound: n must be at least 3");
    return n - 2 + (n + 1) / (tau + 1.0);
}

}  // namespace gbsp
