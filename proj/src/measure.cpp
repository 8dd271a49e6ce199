#include "gbsp/measure.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace gbsp {

double f_cost(const BallCover& cover, const DimensionFunction& f) {
    CompensatedSum acc;
    for (const Ball& b : cover.balls) acc += f(2.0 * b.radius);
    for (const BallGroup& g : cover.groups) acc += static_cast<double>(g.count) * f(2.0 * g.radius);
    return acc.value();
}

long long subdivision_constant(double L, int n_out) {
    if (!(L > 0.0)) throw ArgumentError("pushforward: L must be positive");
    if (n_out < 1) throw ArgumentError("pushforward: n_out must be positive");
    const auto side = static_cast<long long>(std::ceil(2.0 * L + 1.0));
    long long N = 1;
    for (int i = 0; i < n_out; ++i) N *= side;
    return N;
}

BallCover pushforward_cover(const BallCover& cover, double L, int n_out,
                            const std::function<Vec(const Vec&)>& map) {
    subdivision_constant(L, n_out);
    // k cells per axis of side 2 L rho / k; each is inside a radius-rho ball
    // once k >= L sqrt(n_out).
    const auto k = std::max<long long>(1, static_cast<long long>(std::ceil(L * std::sqrt(static_cast<double>(n_out)) - 1e-12)));
    long long per_ball = 1;
    for (int i = 0; i < n_out; ++i) per_ball *= k;

    auto image = [&](const Vec& c) {
        Vec y = map ? map(c) : c;
        if (y.size() != n_out) throw ArgumentError("pushforward: mapped centre has wrong dimension");
        return y;
    };
    BallCover out;
    out.target = cover.target.empty() ? "image" : "image of " + cover.target;
    out.balls.reserve(cover.balls.size() * static_cast<std::size_t>(per_ball));
    for (const Ball& b : cover.balls) {
        const Vec c = image(b.center);
        const double side = 2.0 * L * b.radius / static_cast<double>(k);
        std::vector<long long> idx(static_cast<std::size_t>(n_out), 0);
        for (long long t = 0; t < per_ball; ++t) {
            Vec centre(n_out);
            for (int i = 0; i < n_out; ++i)
                centre[i] = c[i] - L * b.radius + side * (static_cast<double>(idx[static_cast<std::size_t>(i)]) + 0.5);
            out.balls.push_back({std::move(centre), b.radius});
            for (int i = n_out - 1; i >= 0; --i) {
                if (++idx[static_cast<std::size_t>(i)] < k) break;
                idx[static_cast<std::size_t>(i)] = 0;
            }
        }
    }
    for (const BallGroup& g : cover.groups)
        out.groups.push_back({image(g.anchor), L * g.extent, g.radius, g.count * per_ball});
    return out;
}

// ---------------------------------------------------------------------------
// Limsup membership

namespace {

struct PointForm {
    Vec y;         // (x, g(x))
    double theta;  // theta(x)
};

PointForm point_form(const Vec& x, const ProblemSetup& setup) {
    const Jet g = setup.surface.eval(x);
    PointForm pf;
    pf.y.resize(x.size() + 1);
    pf.y.head(x.size()) = x;
    pf.y[x.size()] = g.value;
    pf.theta = setup.shift.is_zero() ? 0.0 : setup.shift.eval(x).value;
    return pf;
}

// Visits the shell ||q|| = Q lexicographically; stops when visit returns true.
template <class Visit>
bool shell_until(long long Q, int n, Visit&& visit) {
    IntVec q(static_cast<std::size_t>(n), -Q);
    const int head = n - 1;
    while (true) {
        long long m = 0;
        for (int i = 0; i < head; ++i) m = std::max(m, std::abs(q[static_cast<std::size_t>(i)]));
        if (m == Q) {
            for (long long v = -Q; v <= Q; ++v) {
                q[static_cast<std::size_t>(head)] = v;
                if (visit(static_cast<const IntVec&>(q))) return true;
            }
        } else {
            q[static_cast<std::size_t>(head)] = -Q;
            if (visit(static_cast<const IntVec&>(q))) return true;
            q[static_cast<std::size_t>(head)] = Q;
            if (visit(static_cast<const IntVec&>(q))) return true;
        }
        int i = head - 1;
        for (; i >= 0; --i) {
            if (++q[static_cast<std::size_t>(i)] <= Q) break;
            q[static_cast<std::size_t>(i)] = -Q;
        }
        if (i < 0) return false;
    }
}

template <class OnHit>
void scan_limsup(const Vec& x, long long Q_min, long long Q_max, const ProblemSetup& setup, OnHit&& on_hit) {
    if (Q_min < 1 || Q_min > Q_max) throw ArgumentError("limsup: need 1 <= Q_min <= Q_max");
    if (!setup.window.box().contains(x)) throw DomainError("limsup: x must lie in K");
    const PointForm pf = point_form(x, setup);
    const int n = setup.n();
    for (long long Q = Q_min; Q <= Q_max; ++Q) {
        const double radial = setup.psi.radial() ? setup.psi.profile(static_cast<double>(Q)) : 0.0;
        const bool stop = shell_until(Q, n, [&](const IntVec& q) {
            double v = -pf.theta;
            for (int i = 0; i < n; ++i) v += static_cast<double>(q[static_cast<std::size_t>(i)]) * pf.y[i];
            const double psi_q = setup.psi.radial() ? radial : setup.psi(q);
            const double lo = v - psi_q, hi = v + psi_q;
            const auto p_lo = static_cast<long long>(std::floor(lo)) + 1;
            const auto p_hi = static_cast<long long>(std::ceil(hi)) - 1;
            for (long long p = p_lo; p <= p_hi; ++p)
                if (on_hit(p, q)) return true;
            return false;
        });
        if (stop) return;
    }
}

}  // namespace

LimsupResult limsup_membership(const Vec& x, long long Q_min, long long Q_max, const ProblemSetup& setup) {
    LimsupResult out;
    scan_limsup(x, Q_min, Q_max, setup, [&](long long p, const IntVec& q) {
        out.witnesses.push_back({p, q});
        return false;
    });
    out.hit = !out.witnesses.empty();
    return out;
}

bool limsup_hit(const Vec& x, long long Q_min, long long Q_max, const ProblemSetup& setup) {
    bool hit = false;
    scan_limsup(x, Q_min, Q_max, setup, [&](long long, const IntVec&) { return hit = true; });
    return hit;
}

// ---------------------------------------------------------------------------
// Box counting

std::string BoxDimension::to_csv() const {
    std::ostringstream out;
    out << "scale,count\n";
    char buf[64];
    for (std::size_t i = 0; i < scales.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%lld\n", scales[i], counts[i]);
        out << buf;
    }
    return out.str();
}

BoxDimension box_dimension(const std::function<bool(const Vec&)>& membership, const Box& window,
                           const std::vector<double>& scales, const BoxDimensionOptions& opts) {
    if (scales.size() < 4) throw ArgumentError("box_dimension: at least 4 scales required");
    const int d = window.dims();
    double h0 = std::numeric_limits<double>::infinity();
    for (double h : scales) {
        if (!(h > 0.0)) throw ArgumentError("box_dimension: scales must be positive");
        h0 = std::min(h0, h);
    }
    std::vector<int> level;
    for (double h : scales) {
        const double r = std::log2(h / h0);
        if (std::abs(r - std::round(r)) > 1e-9) throw ArgumentError("box_dimension: scales must be dyadic");
        level.push_back(static_cast<int>(std::lround(r)));
    }

    std::vector<long long> cells(static_cast<std::size_t>(d));
    double total_d = 1;
    for (int i = 0; i < d; ++i) {
        cells[static_cast<std::size_t>(i)] =
            std::max<long long>(1, static_cast<long long>(std::ceil((window.upper[i] - window.lower[i]) / h0 - 1e-9)));
        total_d *= static_cast<double>(cells[static_cast<std::size_t>(i)]);
    }
    if (total_d > 5e7) throw ArgumentError("box_dimension: finest grid too large");
    const auto total = static_cast<std::size_t>(total_d);

    std::vector<std::uint8_t> occupied(total, 0);
    const int jitter = 1 << d;
    parallel_for(total, opts.threads, [&](std::size_t c) {
        std::vector<long long> idx(static_cast<std::size_t>(d));
        std::size_t rest = c;
        for (int i = d - 1; i >= 0; --i) {
            idx[static_cast<std::size_t>(i)] = static_cast<long long>(rest % static_cast<std::size_t>(cells[static_cast<std::size_t>(i)]));
            rest /= static_cast<std::size_t>(cells[static_cast<std::size_t>(i)]);
        }
        Vec lo(d), hi(d);
        for (int i = 0; i < d; ++i) {
            lo[i] = window.lower[i] + h0 * static_cast<double>(idx[static_cast<std::size_t>(i)]);
            hi[i] = std::min(lo[i] + h0, window.upper[i]);
        }
        if (membership(0.5 * (lo + hi))) {
            occupied[c] = 1;
            return;
        }
        SplitMix64 rng(opts.seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(c) + 1)));
        for (int j = 0; j < jitter; ++j) {
            Vec y(d);
            for (int i = 0; i < d; ++i) y[i] = rng.uniform(lo[i], hi[i]);
            if (membership(y)) {
                occupied[c] = 1;
                return;
            }
        }
    });

    BoxDimension out;
    out.scales = scales;
    std::vector<double> lx, ly;
    for (std::size_t s = 0; s < scales.size(); ++s) {
        const long long f = 1LL << level[s];
        std::vector<long long> coarse(static_cast<std::size_t>(d));
        std::size_t coarse_total = 1;
        for (int i = 0; i < d; ++i) {
            coarse[static_cast<std::size_t>(i)] = (cells[static_cast<std::size_t>(i)] + f - 1) / f;
            coarse_total *= static_cast<std::size_t>(coarse[static_cast<std::size_t>(i)]);
        }
        std::vector<std::uint8_t> hit(coarse_total, 0);
        for (std::size_t c = 0; c < total; ++c) {
            if (!occupied[c]) continue;
            std::size_t rest = c, key = 0, mult = 1;
            for (int i = d - 1; i >= 0; --i) {
                const auto ci = static_cast<long long>(rest % static_cast<std::size_t>(cells[static_cast<std::size_t>(i)]));
                rest /= static_cast<std::size_t>(cells[static_cast<std::size_t>(i)]);
                key += static_cast<std::size_t>(ci / f) * mult;
                mult *= static_cast<std::size_t>(coarse[static_cast<std::size_t>(i)]);
            }
            hit[key] = 1;
        }
        long long count = 0;
        for (auto b : hit) count += b;
        out.counts.push_back(count);
        if (count > 0) {
            lx.push_back(std::log(scales[s]));
            ly.push_back(std::log(static_cast<double>(count)));
        }
    }
    if (lx.empty()) throw DomainError("box_dimension: no occupied cells, slope undefined");
    if (lx.size() < 2) throw DomainError("box_dimension: fewer than two occupied scales");
    out.slope = -fit_line(lx, ly).slope;
    return out;
}

// ---------------------------------------------------------------------------
// Certificate

std::string to_string(CertificateVerdict v) {
    return v == CertificateVerdict::MeasureZeroConsistent ? "MEASURE-ZERO-CONSISTENT" : "INCONCLUSIVE";
}

std::string CantelliCertificate::to_json() const {
    nlohmann::ordered_json j;
    j["Q_min"] = Q_min;
    j["Q_max"] = Q_max;
    j["total_cost"] = total_cost;
    j["comparison_total"] = comparison_total;
    j["series_verdict"] = to_string(series_verdict);
    j["series_slope"] = series_slope;
    j["series_total"] = series_total;
    j["ratio_spread"] = ratio_spread;
    j["complete"] = complete;
    j["verdict"] = to_string(verdict);
    auto& rs = j["ranges"] = nlohmann::ordered_json::array();
    for (const auto& r : ranges)
        rs.push_back({{"Q_lo", r.Q_lo}, {"Q_hi", r.Q_hi}, {"cost", r.cost}, {"comparison", r.comparison}, {"ratio", r.ratio}});
    auto& ss = j["shells"] = nlohmann::ordered_json::array();
    for (const auto& s : shells)
        ss.push_back({{"Q", s.Q},
                      {"shell_size", s.shell_size},
                      {"sampled", s.sampled},
                      {"slabs", s.slabs},
                      {"exceptional", s.exceptional},
                      {"cost", s.cost},
                      {"comparison", s.comparison}});
    return j.dump(2);
}

namespace {

struct Job {
    std::size_t shell;
    IntVec q;
};

struct JobResult {
    double cost = 0.0;
    long long slabs = 0;
    bool exceptional = false;
};

JobResult price_q(const ProblemSetup& setup, const IntVec& q, const CertificateOptions& opts) {
    JobResult out;
    const AdmissibleCount adm = count_admissible_p(q, setup.window, setup.surface, setup.shift, setup.psi);
    out.slabs = adm.count;
    if (adm.count == 0) return out;
    const HField h = build_h(adm.p_min, q, setup.surface, setup.shift, setup.psi);
    const Regime regime = classify_regime(h, setup.window, setup.surface, opts.classify);
    auto box_cost = [&] {
        out.exceptional = true;
        out.cost = static_cast<double>(adm.count) * setup.f(setup.window.box().diameter());
    };
    if (regime.tag == Regime::Tag::Exceptional) {
        box_cost();
        return out;
    }
    try {
        const SlabFamily family(h, regime, setup.window, opts.cover);
        CompensatedSum acc;
        for (long long p = adm.p_min; p <= adm.p_max; ++p) acc += family.cost(p, setup.f);
        out.cost = acc.value();
    } catch (const GradientDegeneracyError&) {
        box_cost();
    }
    return out;
}

}  // namespace

CantelliCertificate cantelli_certificate(const ProblemSetup& setup, long long Q_min, long long Q_max,
                                         const CertificateOptions& opts) {
    if (Q_min < 1 || Q_min > Q_max) throw ArgumentError("certificate: need 1 <= Q_min <= Q_max");
    if (opts.samples_per_shell < 1) throw ArgumentError("certificate.samples_per_shell must be positive");
    const int n = setup.n();

    CantelliCertificate cert;
    cert.Q_min = Q_min;
    cert.Q_max = Q_max;

    // Sample q per shell from a per-shell stream; fix the job list up front.
    std::vector<Job> jobs;
    for (long long Q = Q_min; Q <= Q_max; ++Q) {
        const long long size = shell_size(Q, n);
        std::vector<IntVec> picks;
        if (size <= opts.samples_per_shell) {
            for_each_in_shell(Q, n, [&](const IntVec& q) { picks.push_back(q); });
        } else {
            SplitMix64 rng(opts.seed ^ (0xD1B54A32D192ED03ull * static_cast<std::uint64_t>(Q)));
            while (static_cast<int>(picks.size()) < opts.samples_per_shell) {
                IntVec q(static_cast<std::size_t>(n));
                for (auto& v : q) v = -Q + static_cast<long long>(rng.next() % static_cast<std::uint64_t>(2 * Q + 1));
                if (max_norm(q) == Q) picks.push_back(std::move(q));
            }
        }
        if (opts.budget > 0 && static_cast<long long>(jobs.size() + picks.size()) > opts.budget) {
            cert.complete = false;
            break;
        }
        CertificateShell shell;
        shell.Q = Q;
        shell.shell_size = size;
        shell.sampled = static_cast<long long>(picks.size());
        cert.shells.push_back(shell);
        for (auto& q : picks) jobs.push_back({cert.shells.size() - 1, std::move(q)});
    }

    std::vector<JobResult> results(jobs.size());
    parallel_for(jobs.size(), opts.threads, [&](std::size_t i) { results[i] = price_q(setup, jobs[i].q, opts); });

    std::vector<CompensatedSum> shell_cost(cert.shells.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto& shell = cert.shells[jobs[i].shell];
        shell_cost[jobs[i].shell] += results[i].cost;
        shell.slabs += results[i].slabs;
        shell.exceptional += results[i].exceptional ? 1 : 0;
    }
    for (std::size_t s = 0; s < cert.shells.size(); ++s) {
        auto& shell = cert.shells[s];
        const double weight = static_cast<double>(shell.shell_size) / static_cast<double>(shell.sampled);
        shell.cost = weight * shell_cost[s].value();
        const double Qd = static_cast<double>(shell.Q);
        if (setup.psi.radial()) {
            shell.comparison = static_cast<double>(shell.shell_size) * Qd * setup.f.F(n, setup.psi.profile(Qd) / Qd);
        } else {
            CompensatedSum acc;
            for_each_in_shell(shell.Q, n, [&](const IntVec& q) { acc += Qd * setup.f.F(n, setup.psi(q) / Qd); });
            shell.comparison = acc.value();
        }
    }

    CompensatedSum total, comparison;
    for (const auto& s : cert.shells) {
        total += s.cost;
        comparison += s.comparison;
    }
    cert.total_cost = total.value();
    cert.comparison_total = comparison.value();

    double lo_ratio = std::numeric_limits<double>::infinity(), hi_ratio = 0.0;
    std::size_t s = 0;
    while (s < cert.shells.size()) {
        CertificateRange r;
        r.Q_lo = cert.shells[s].Q;
        const long long top = (1LL << static_cast<int>(std::floor(std::log2(static_cast<double>(r.Q_lo))) + 1)) - 1;
        CompensatedSum c, m;
        while (s < cert.shells.size() && cert.shells[s].Q <= top) {
            c += cert.shells[s].cost;
            m += cert.shells[s].comparison;
            r.Q_hi = cert.shells[s].Q;
            ++s;
        }
        r.cost = c.value();
        r.comparison = m.value();
        r.ratio = r.comparison > 0.0 ? r.cost / r.comparison : std::numeric_limits<double>::infinity();
        lo_ratio = std::min(lo_ratio, r.ratio);
        hi_ratio = std::max(hi_ratio, r.ratio);
        cert.ranges.push_back(r);
    }
    cert.ratio_spread = cert.ranges.empty() || !(lo_ratio > 0.0) ? std::numeric_limits<double>::infinity()
                                                                 : hi_ratio / lo_ratio;

    SeriesOptions so;
    so.margin = opts.series_margin;
    so.threads = opts.threads;
    const SeriesReport series = series_scan(setup.psi, setup.f, n, std::max<long long>(Q_max, 128), SeriesMode::Gbsp, so);
    cert.series_verdict = series.verdict;
    cert.series_slope = series.slope;
    cert.series_total = series.total();

    const bool bounded = std::isfinite(cert.ratio_spread) && cert.ratio_spread <= opts.max_ratio_spread;
    cert.verdict = cert.complete && series.verdict == SeriesVerdict::Converges && bounded
                       ? CertificateVerdict::MeasureZeroConsistent
                       : CertificateVerdict::Inconclusive;
    return cert;
}

}  // namespace gbsp
