#include "gbsp/resonant.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace gbsp {

// ---------------------------------------------------------------------------
// h-field

HField::HField(long long p, IntVec q, Hypersurface surface, Shift shift, double psi_value)
    : p_(p), q_(std::move(q)), surface_(std::move(surface)), shift_(std::move(shift)),
      psi_value_(psi_value) {
    const int n = surface_.n();
    if (static_cast<int>(q_.size()) != n) throw ArgumentError("q must have length n");
    if (is_zero(q_)) throw ArgumentError("q must be nonzero");
    if (!shift_.is_zero() && shift_.polynomial().dims() != n - 1)
        throw ArgumentError("shift dimension must be n-1");
    const int d = n - 1;
    r_.resize(d);
    const long long qn = q_.back();
    if (qn != 0) {
        for (int i = 0; i < d; ++i) r_[i] = static_cast<double>(q_[static_cast<std::size_t>(i)]) / static_cast<double>(qn);
        rho_ = psi_value_ / std::abs(static_cast<double>(qn));
        g_coef_ = 1.0;
        theta_coef_ = 1.0 / static_cast<double>(qn);
        offset_ = static_cast<double>(p_) / static_cast<double>(qn);
    } else {
        for (int i = 0; i < d; ++i) r_[i] = static_cast<double>(q_[static_cast<std::size_t>(i)]);
        rho_ = psi_value_;
        g_coef_ = 0.0;
        theta_coef_ = 1.0;
        offset_ = static_cast<double>(p_);
    }
}

double HField::scale() const { return std::sqrt(r_.squaredNorm() + 1.0); }

Jet HField::eval_base(const Vec& x) const {
    const int d = dims();
    Jet out{r_.dot(x), r_, Mat::Zero(d, d)};
    if (g_coef_ != 0.0) {
        const Jet g = surface_.eval_unchecked(x);
        out.value += g.value;
        out.gradient += g.gradient;
        out.hessian += g.hessian;
    }
    if (!shift_.is_zero()) {
        const Jet t = shift_.eval(x);
        out.value -= theta_coef_ * t.value;
        out.gradient -= theta_coef_ * t.gradient;
        out.hessian -= theta_coef_ * t.hessian;
    }
    return out;
}

Jet HField::eval(const Vec& x) const {
    Jet j = eval_base(x);
    j.value -= offset_;
    return j;
}

double HField::hessian_bound(const Box& region) const {
    const int d = dims();
    std::vector<Interval> box(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) box[static_cast<std::size_t>(i)] = Interval(region.lower[i], region.upper[i]);
    Polynomial combined(d);
    if (g_coef_ != 0.0) {
        if (const auto* g = surface_.polynomial()) {
            combined += *g;
        } else {
            // d(x, T) <= 1/2 on [0, 1]; the fat-cantor body is never used with slabs
            // in practice, but keep a valid bound.
            double bound = 0.5;
            for (int i = 0; i < d; ++i)
                bound = std::max({bound, -region.lower[i], region.upper[i] - 1.0});
            return bound + (shift_.is_zero() ? 0.0 : 1e300);
        }
    }
    if (!shift_.is_zero()) combined += (-theta_coef_) * shift_.polynomial();
    double frob2 = 0.0;
    for (int i = 0; i < d; ++i) {
        const Polynomial di = combined.derivative(i);
        for (int j = 0; j < d; ++j) {
            const Interval e = di.derivative(j).enclose(box);
            const double m = std::max(std::abs(e.lo), std::abs(e.hi));
            frob2 += m * m;
        }
    }
    return std::sqrt(frob2);
}

HField HField::with_p(long long p) const {
    HField copy = *this;
    copy.p_ = p;
    copy.offset_ = q_.back() != 0 ? static_cast<double>(p) / static_cast<double>(q_.back())
                                  : static_cast<double>(p);
    return copy;
}

HField build_h(long long p, const IntVec& q, const Hypersurface& surface, const Shift& shift,
               const ApproxFunction& psi) {
    if (is_zero(q)) throw ArgumentError("q must be nonzero");
    return HField(p, q, surface, shift, psi(q));
}

// ---------------------------------------------------------------------------
// Regime classification

std::string to_string(Regime::Tag tag) {
    switch (tag) {
        case Regime::Tag::Case1: return "Case1";
        case Regime::Tag::Case2: return "Case2";
        case Regime::Tag::Exceptional: return "Exceptional";
    }
    return "?";
}

namespace {

// Regular grid of cell centres over a box, `res` per axis, row-major.
std::vector<Vec> probe_grid(const Box& box, int res) {
    const int d = box.dims();
    std::vector<Vec> pts;
    long long total = 1;
    for (int i = 0; i < d; ++i) total *= res;
    pts.reserve(static_cast<std::size_t>(total));
    std::vector<int> idx(static_cast<std::size_t>(d), 0);
    for (long long c = 0; c < total; ++c) {
        Vec x(d);
        for (int i = 0; i < d; ++i)
            x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * (idx[static_cast<std::size_t>(i)] + 0.5) / res;
        pts.push_back(std::move(x));
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < res) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return pts;
}

int probe_resolution(int d, int per_axis) {
    // Keep the probe count near per_axis^2 in higher dimensions.
    if (d <= 2) return per_axis;
    const double target = std::pow(static_cast<double>(per_axis), 2.0 / d);
    return std::max(3, static_cast<int>(std::floor(target)));
}

std::optional<Vec> newton_root(const HField& h, Vec x, const ClassifyOptions& opts, double tol) {
    Jet j = h.eval_base(x);
    double res = j.gradient.norm();
    for (int it = 0; it < opts.newton_iterations && res > tol; ++it) {
        Eigen::FullPivLU<Mat> lu(j.hessian);
        if (!lu.isInvertible()) return std::nullopt;
        const Vec step = lu.solve(j.gradient);
        double lambda = 1.0;
        bool improved = false;
        for (int back = 0; back < 40; ++back, lambda *= 0.5) {
            const Vec trial = x - lambda * step;
            const Jet jt = h.eval_base(trial);
            const double rt = jt.gradient.norm();
            if (std::isfinite(rt) && rt < res) {
                x = trial;
                j = jt;
                res = rt;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    if (res <= tol) return x;
    return std::nullopt;
}

}  // namespace

Regime classify_regime(const HField& h, const CompactWindow& window, const Hypersurface& surface,
                       const ClassifyOptions& opts) {
    const Box& K = window.box();
    const int d = K.dims();
    const double scale = h.scale();
    const double tol = opts.root_tolerance * scale;

    // Multistart: {lower, centre, upper}^d over K (includes the centre).
    std::optional<Vec> best;
    double best_res = std::numeric_limits<double>::infinity();
    long long starts = 1;
    for (int i = 0; i < d; ++i) starts *= 3;
    for (long long s = 0; s < starts; ++s) {
        Vec x0(d);
        long long code = s;
        for (int i = 0; i < d; ++i, code /= 3) {
            const int c = static_cast<int>(code % 3);
            x0[i] = c == 0 ? K.lower[i] : (c == 1 ? 0.5 * (K.lower[i] + K.upper[i]) : K.upper[i]);
        }
        auto root = newton_root(h, x0, opts, tol);
        if (!root || !surface.domain().contains(*root)) continue;
        const double res = h.eval_base(*root).gradient.norm();
        if (res < best_res) {
            best_res = res;
            best = root;
        }
    }

    const auto probes = probe_grid(K, probe_resolution(d, opts.probe_per_axis));
    Regime out;
    if (best) {
        out.tag = Regime::Tag::Case1;
        out.v = *best;
        out.c_lo = std::numeric_limits<double>::infinity();
        out.c_hi = 0.0;
        for (const Vec& x : probes) {
            const double dist = (x - out.v).norm();
            if (dist < 1e-12) continue;
            const double ratio = h.eval_base(x).gradient.norm() / dist;
            out.c_lo = std::min(out.c_lo, ratio);
            out.c_hi = std::max(out.c_hi, ratio);
        }
        return out;
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const Vec& x : probes) {
        const double g = h.eval_base(x).gradient.norm();
        lo = std::min(lo, g);
        hi = std::max(hi, g);
    }
    if (lo > opts.eps_grad * scale) {
        out.tag = Regime::Tag::Case2;
        out.gradient_scale = lo;
        out.c_lo = lo / scale;
        out.c_hi = hi / scale;
    } else {
        out.tag = Regime::Tag::Exceptional;
        out.gradient_scale = lo;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Ball covers

long long BallCover::size() const {
    long long total = static_cast<long long>(balls.size());
    for (const auto& g : groups) total += g.count;
    return total;
}

void BallCover::append(const BallCover& other) {
    balls.insert(balls.end(), other.balls.begin(), other.balls.end());
    groups.insert(groups.end(), other.groups.begin(), other.groups.end());
}

namespace {

double lemma_constant(int d, double C) { return C > 0.0 ? C : 8.0 * d; }

// Geometry of the rotated column construction for one (kappa, alpha, delta).
struct ColumnLayout {
    double pitch = 0.0;      // transverse column pitch
    double half_len = 0.0;   // w: half-length along the normal covered by one ball
    double slack = 0.0;      // delta' - delta (transverse variation allowance)
    double eta = 0.0;        // relative gradient variation over the region
    int per_column = 0;      // m: balls per column in the worst case
    long long columns = 0;
    long long k_max = 0;     // transverse lattice half-extent
};

double eta_for(int d, double kappa, double alpha, double G, double pitch) {
    const double reach = std::sqrt((d - 1) * std::pow(alpha + 0.5 * pitch, 2) + alpha * alpha);
    return G * reach / kappa;
}

std::optional<ColumnLayout> plan_columns(int d, double kappa, double alpha, double delta, double G) {
    const int t = d - 1;  // transverse dimension
    std::optional<ColumnLayout> best;
    double best_score = std::numeric_limits<double>::infinity();
    const double rt = std::sqrt(static_cast<double>(t));
    for (int m = 1; m <= 8; ++m) {
        // Half-length one ball must cover so that m balls span the column.
        auto need = [&](double pitch) {
            const double eta = eta_for(d, kappa, alpha, G, pitch);
            if (eta >= 0.9) return std::numeric_limits<double>::infinity();
            return (delta + eta * pitch * rt / 2.0) / (1.0 - eta) / m;
        };
        auto have = [&](double pitch) { return std::sqrt(std::max(0.0, delta * delta - t * pitch * pitch / 4.0)); };
        auto target = [&](double pitch) {
            const double w = need(pitch);
            return w < delta ? std::min(2.0 * std::sqrt((delta * delta - w * w) / t), 2.0 * alpha) : -1.0;
        };
        double pitch;
        if (t == 0) {
            if (need(0.0) > delta) continue;
            pitch = 0.0;
        } else {
            // have() decreases and need() increases with the pitch, so the
            // feasible pitches form an interval [0, p*] and target(p) >= p* >= p
            // whenever p >= p*.
            const double p_max = std::min(2.0 * alpha, 2.0 * delta / rt);
            pitch = target(p_max);
            if (pitch < 0.0) {
                if (have(0.0) < need(0.0)) continue;
                double lo = 0.0, hi = p_max;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (have(mid) >= need(mid) ? lo : hi) = mid;
                }
                pitch = lo;
            } else {
                const double wider = target(pitch);
                if (wider > pitch && have(wider) >= need(wider)) pitch = wider;
            }
            if (!(pitch > 0.0) || have(pitch) < need(pitch)) continue;
        }
        const double eta = eta_for(d, kappa, alpha, G, pitch);
        ColumnLayout lay{pitch, t == 0 ? delta : have(pitch), eta * pitch * rt / 2.0, eta, m, t == 0 ? 1 : 0, 0};
        const double score = t == 0 ? m : m / std::pow(pitch, t);
        if (score < best_score) {
            best_score = score;
            best = lay;
        }
    }
    if (!best) return std::nullopt;
    if (t > 0) {
        const double reach = alpha + best->pitch * std::sqrt(static_cast<double>(t)) / 2.0;
        best->k_max = static_cast<long long>(std::floor(reach / best->pitch));
        const long long side = 2 * best->k_max + 1;
        double cube = 1.0;
        for (int i = 0; i < t; ++i) cube *= static_cast<double>(side);
        if (t == 1 || cube > 4e6) {
            best->columns = static_cast<long long>(cube);
        } else {
            long long count = 0;
            std::vector<long long> k(static_cast<std::size_t>(t), -best->k_max);
            for (long long c = 0; c < static_cast<long long>(cube); ++c) {
                double r2 = 0;
                for (long long v : k) r2 += static_cast<double>(v * v);
                if (std::sqrt(r2) * best->pitch - best->pitch * std::sqrt(static_cast<double>(t)) / 2.0 < alpha) ++count;
                for (int i = t - 1; i >= 0; --i) {
                    if (++k[static_cast<std::size_t>(i)] <= best->k_max) break;
                    k[static_cast<std::size_t>(i)] = -best->k_max;
                }
            }
            best->columns = count;
        }
    }
    return best;
}

// Monotone increasing s on [lo, hi] with s(lo) <= level < s(hi): returns a
// point t with s(t) <= level (keep_low) or s(t) >= level (!keep_low) within
// tolerance of the crossing.
template <class S>
double bracket_root(S&& s, double lo, double hi, double slo, double shi, double level, bool keep_low) {
    double flo = slo - level, fhi = shi - level;
    int side = 0;
    const double tol = 1e-14 * std::max(1.0, std::abs(hi - lo)) + 1e-300;
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        double t = lo - flo * (hi - lo) / (fhi - flo);
        if (!(t > lo && t < hi)) t = 0.5 * (lo + hi);
        const double ft = s(t) - level;
        if (ft <= 0.0) {
            lo = t;
            flo = ft;
            if (side == -1) fhi *= 0.5;
            side = -1;
        } else {
            hi = t;
            fhi = ft;
            if (side == 1) flo *= 0.5;
            side = 1;
        }
        if (ft == 0.0) break;
    }
    return keep_low ? lo : hi;
}

}  // namespace

BallCover cover_sublevel(const ScalarField& phi, const Vec& x, double alpha, double delta,
                         const SublevelOptions& opts) {
    if (!(alpha > 0.0) || !(delta > 0.0)) throw ArgumentError("cover_sublevel: alpha and delta must be positive");
    const int d = static_cast<int>(x.size());
    const double C = lemma_constant(d, opts.C);
    const double G = opts.hessian_bound;
    if (!(G >= 0.0)) throw ArgumentError("cover_sublevel: hessian bound must be nonnegative");

    BallCover cover;
    cover.target = "sublevel";
    const Jet j0 = phi(x);
    const double kappa = j0.gradient.norm();
    if (kappa == 0.0 && G == 0.0) return cover;  // phi constant, target {|phi| < 0} empty
    if (kappa < C * alpha * G || kappa == 0.0)
        throw GradientDegeneracyError("cover_sublevel: ||grad phi(x)|| below C alpha sup||hess phi||");

    const double level = kappa * delta;
    const double reach = (kappa + G * alpha) * alpha;
    if (std::abs(j0.value) >= level + reach) return cover;

    // The sub-ball itself is the cheaper cover.
    if (delta >= alpha) {
        cover.balls.push_back({x, alpha});
        return cover;
    }

    const auto lay = plan_columns(d, kappa, alpha, delta, G);
    if (!lay) throw GradientDegeneracyError("cover_sublevel: no admissible column layout");

    const long long predicted = lay->columns * lay->per_column;
    if (predicted > opts.materialize_limit) {
        cover.groups.push_back({x, alpha, delta, predicted});
        return cover;
    }

    // Orthonormal frame: column 0 is the unit gradient, the rest transverse.
    const Vec e = j0.gradient / kappa;
    Mat frame(d, d);
    {
        Mat a = e;
        Eigen::HouseholderQR<Mat> qr(a);
        frame = qr.householderQ();
        if (frame.col(0).dot(e) < 0) frame.col(0) = -frame.col(0);
        frame.col(0) = e;
    }
    const int t = d - 1;
    const double lvl = kappa * (delta + lay->slack);
    std::vector<long long> k(static_cast<std::size_t>(t), -lay->k_max);
    long long total = 1;
    for (int i = 0; i < t; ++i) total *= 2 * lay->k_max + 1;
    for (long long c = 0; c < total; ++c) {
        Vec u = Vec::Zero(d);
        double r2 = 0;
        for (int i = 0; i < t; ++i) {
            const double ui = static_cast<double>(k[static_cast<std::size_t>(i)]) * lay->pitch;
            u += ui * frame.col(i + 1);
            r2 += ui * ui;
        }
        for (int i = t - 1; i >= 0; --i) {
            if (++k[static_cast<std::size_t>(i)] <= lay->k_max) break;
            k[static_cast<std::size_t>(i)] = -lay->k_max;
        }
        if (std::sqrt(r2) - lay->pitch * std::sqrt(static_cast<double>(t)) / 2.0 >= alpha) continue;

        const Vec base = x + u;
        auto s = [&](double tt) { return phi(base + tt * e).value; };
        const double s_lo = s(-alpha), s_hi = s(alpha);
        if (s_hi <= -lvl || s_lo >= lvl) continue;
        const double ta = s_lo > -lvl ? -alpha : bracket_root(s, -alpha, alpha, s_lo, s_hi, -lvl, true);
        const double tb = s_hi < lvl ? alpha : bracket_root(s, -alpha, alpha, s_lo, s_hi, lvl, false);
        if (!(tb > ta)) continue;
        const long long m = std::max<long long>(1, static_cast<long long>(std::ceil((tb - ta) / (2.0 * lay->half_len))));
        for (long long b = 0; b < m; ++b) {
            const double tc = std::min(ta + lay->half_len * (2.0 * static_cast<double>(b) + 1.0), tb);
            cover.balls.push_back({base + tc * e, delta});
        }
    }
    return cover;
}

// ---------------------------------------------------------------------------
// Case 1 annuli

AnnulusPlan case1_annuli(const Vec& v, const Box& window, double rho, double epsilon) {
    const int d = window.dims();
    double maxdist = 0.0;
    for (long long mask = 0; mask < (1LL << d); ++mask) {
        Vec c(d);
        for (int i = 0; i < d; ++i) c[i] = (mask >> i & 1) ? window.upper[i] : window.lower[i];
        maxdist = std::max(maxdist, (c - v).norm());
    }
    AnnulusPlan plan;
    plan.k0 = static_cast<int>(std::ceil(-std::log2(maxdist) - 1.0));
    plan.k_trunc = std::max(plan.k0, static_cast<int>(std::floor(std::log(2.0 / rho) / std::log(4.0))) + 1);
    plan.k_trunc = std::min(plan.k_trunc, plan.k0 + 60);
    plan.inner_radius = std::ldexp(1.0, -plan.k_trunc);

    for (int k = plan.k0; k < plan.k_trunc; ++k) {
        Annulus an;
        an.k = k;
        an.outer = std::ldexp(1.0, -k);
        an.inner = std::ldexp(1.0, -(k + 1));
        an.alpha = epsilon * an.outer;
        const double pitch = 2.0 * an.alpha / std::sqrt(static_cast<double>(d));
        Vec lo(d), hi(d);
        bool empty = false;
        for (int i = 0; i < d; ++i) {
            lo[i] = std::max(window.lower[i], v[i] - an.outer);
            hi[i] = std::min(window.upper[i], v[i] + an.outer);
            if (lo[i] > hi[i]) empty = true;
        }
        if (!empty) {
            std::vector<long long> cells(static_cast<std::size_t>(d));
            double total = 1;
            for (int i = 0; i < d; ++i) {
                cells[static_cast<std::size_t>(i)] = std::max<long long>(1, static_cast<long long>(std::ceil((hi[i] - lo[i]) / pitch)));
                total *= static_cast<double>(cells[static_cast<std::size_t>(i)]);
            }
            if (total > 5e7) throw ArgumentError("case1_annuli: epsilon too small for this window");
            std::vector<long long> idx(static_cast<std::size_t>(d), 0);
            for (long long c = 0; c < static_cast<long long>(total); ++c) {
                Vec clo(d), chi(d);
                for (int i = 0; i < d; ++i) {
                    clo[i] = lo[i] + pitch * static_cast<double>(idx[static_cast<std::size_t>(i)]);
                    chi[i] = std::min(clo[i] + pitch, std::max(hi[i], clo[i] + pitch));
                }
                for (int i = d - 1; i >= 0; --i) {
                    if (++idx[static_cast<std::size_t>(i)] < cells[static_cast<std::size_t>(i)]) break;
                    idx[static_cast<std::size_t>(i)] = 0;
                }
                // Nearest and farthest distances from v to the cell.
                double near2 = 0, far2 = 0;
                for (int i = 0; i < d; ++i) {
                    const double a = clo[i] - v[i], b = chi[i] - v[i];
                    const double nearest = (a <= 0 && b >= 0) ? 0.0 : std::min(std::abs(a), std::abs(b));
                    near2 += nearest * nearest;
                    far2 += std::max(a * a, b * b);
                }
                if (std::sqrt(near2) >= an.outer || std::sqrt(far2) < an.inner) continue;
                an.centers.push_back(0.5 * (clo + chi));
            }
        }
        plan.annuli.push_back(std::move(an));
    }
    return plan;
}

// ---------------------------------------------------------------------------
// Slab covers

namespace {

struct SubBall {
    Vec center;
    double alpha;
    Jet jet;  // of the p-independent base field
};

struct SlabPlan {
    double C;
    double epsilon;
    double G;
    std::vector<SubBall> subs;
    bool has_inner = false;
    Vec inner_center;
    double inner_radius = 0.0;
    double inner_base = 0.0;
    int halvings = 0;
};

std::vector<Vec> cell_centres(const Box& box, double alpha) {
    const int d = box.dims();
    const double pitch = 2.0 * alpha / std::sqrt(static_cast<double>(d));
    std::vector<long long> cells(static_cast<std::size_t>(d));
    long long total = 1;
    for (int i = 0; i < d; ++i) {
        cells[static_cast<std::size_t>(i)] = std::max<long long>(1, static_cast<long long>(std::ceil((box.upper[i] - box.lower[i]) / pitch - 1e-12)));
        total *= cells[static_cast<std::size_t>(i)];
    }
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(total));
    std::vector<long long> idx(static_cast<std::size_t>(d), 0);
    for (long long c = 0; c < total; ++c) {
        Vec x(d);
        for (int i = 0; i < d; ++i) x[i] = box.lower[i] + pitch * (static_cast<double>(idx[static_cast<std::size_t>(i)]) + 0.5);
        out.push_back(std::move(x));
        for (int i = d - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < cells[static_cast<std::size_t>(i)]) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return out;
}

void admit(const HField& h, const Vec& x, double alpha, int depth, int max_depth, SlabPlan& plan) {
    Jet j = h.eval_base(x);
    const double kappa = j.gradient.norm();
    const int d = h.dims();
    const bool ok = kappa > 0.0 && kappa >= plan.C * alpha * plan.G &&
                    eta_for(d, kappa, alpha, plan.G, 2.0 * alpha) < 0.9;
    if (ok) {
        plan.subs.push_back({x, alpha, std::move(j)});
        return;
    }
    if (depth >= max_depth)
        throw GradientDegeneracyError("cover_slab: lemma precondition fails after alpha-halving");
    plan.halvings = std::max(plan.halvings, depth + 1);
    const Box cube(x.array() - alpha, x.array() + alpha);
    for (const Vec& c : cell_centres(cube, 0.5 * alpha)) {
        // Only children that can reach B(x, alpha).
        if ((c - x).norm() > alpha * 1.5) continue;
        admit(h, c, 0.5 * alpha, depth + 1, max_depth, plan);
    }
}

SlabPlan plan_slab(const HField& h, const Regime& regime, const CompactWindow& window, const CoverOptions& opts) {
    const Box& K = window.box();
    const int d = K.dims();
    SlabPlan plan;
    plan.C = lemma_constant(d, opts.C);
    plan.epsilon = opts.epsilon > 0.0 ? opts.epsilon : 1.0 / (4.0 * plan.C);
    const double rho = h.rho();

    if (regime.tag == Regime::Tag::Exceptional)
        throw UnsupportedRegimeError("cover_slab: exceptional q must be covered by a box cover of K");

    std::optional<AnnulusPlan> annuli;
    double alpha_max = plan.epsilon;
    if (regime.tag == Regime::Tag::Case1) {
        annuli = case1_annuli(regime.v, K, rho, plan.epsilon);
        alpha_max = plan.epsilon * std::ldexp(1.0, -annuli->k0);
    }
    const double pad = 3.0 * alpha_max;
    plan.G = h.hessian_bound(Box(K.lower.array() - pad, K.upper.array() + pad));

    if (regime.tag == Regime::Tag::Case2) {
        for (const Vec& c : cell_centres(K, plan.epsilon)) admit(h, c, plan.epsilon, 0, opts.max_halvings, plan);
        return plan;
    }
    for (const Annulus& an : annuli->annuli)
        for (const Vec& c : an.centers) admit(h, c, an.alpha, 0, opts.max_halvings, plan);
    // Everything closer to v than the last annulus: one ball around v.
    Vec nearest = regime.v;
    for (int i = 0; i < d; ++i) nearest[i] = std::clamp(nearest[i], K.lower[i], K.upper[i]);
    if ((nearest - regime.v).norm() < annuli->inner_radius) {
        plan.has_inner = true;
        plan.inner_center = regime.v;
        plan.inner_radius = annuli->inner_radius;
        plan.inner_base = h.eval_base(regime.v).value;
    }
    return plan;
}

bool sub_meets(const SubBall& s, double G, double offset, double rho) {
    const double kappa = s.jet.gradient.norm();
    const double reach = (kappa + G * s.alpha) * s.alpha;
    return std::abs(s.jet.value - offset) < rho + reach;
}

bool inner_meets(const SlabPlan& plan, double offset, double rho) {
    return plan.has_inner &&
           std::abs(plan.inner_base - offset) < rho + 0.5 * plan.G * plan.inner_radius * plan.inner_radius;
}

long long counted_balls(int d, double kappa, double alpha, double delta, double G) {
    if (delta >= alpha) return 1;
    const auto lay = plan_columns(d, kappa, alpha, delta, G);
    if (!lay) throw GradientDegeneracyError("cover_slab: no admissible column layout");
    return lay->columns * lay->per_column;
}

}  // namespace

CoverReport cover_slab(const HField& h, const Regime& regime, const CompactWindow& window,
                       const DimensionFunction& f, const CoverOptions& opts) {
    const SlabPlan plan = plan_slab(h, regime, window, opts);
    const int d = h.dims();
    const double rho = h.rho();

    CoverReport rep;
    rep.p = h.p();
    rep.q = h.q();
    rep.regime = regime.tag;
    rep.v = regime.v;
    rep.halvings = plan.halvings;
    rep.cover.target = "S(p,q)";

    SublevelOptions sub_opts{plan.C, plan.G, opts.materialize_limit};
    const ScalarField phi = [&h](const Vec& y) { return h.eval(y); };
    for (const SubBall& s : plan.subs) {
        if (!sub_meets(s, plan.G, h.offset(), rho)) continue;
        const double kappa = s.jet.gradient.norm();
        const double delta = rho / kappa;
        BallCover part = cover_sublevel(phi, s.center, s.alpha, delta, sub_opts);
        const double unit = std::pow(std::max(1.0, s.alpha / delta), d - 1);
        rep.max_count_ratio = std::max(rep.max_count_ratio, static_cast<double>(part.size()) / unit);
        rep.cover.append(part);
    }
    if (inner_meets(plan, h.offset(), rho)) rep.cover.balls.push_back({plan.inner_center, plan.inner_radius});

    CompensatedSum cost;
    for (const Ball& b : rep.cover.balls) cost += f(2.0 * b.radius);
    for (const BallGroup& g : rep.cover.groups) cost += static_cast<double>(g.count) * f(2.0 * g.radius);
    rep.n_balls = rep.cover.size();
    rep.f_cost = cost.value();
    const double qnorm = static_cast<double>(max_norm(h.q()));
    rep.bound = f.F(h.surface().n(), h.psi_value() / qnorm);
    rep.ratio = rep.f_cost / rep.bound;
    return rep;
}

// ---------------------------------------------------------------------------

SlabFamily::SlabFamily(const HField& h, const Regime& regime, const CompactWindow& window,
                       const CoverOptions& opts)
    : rho_(h.rho()) {
    const SlabPlan plan = plan_slab(h, regime, window, opts);
    const int d = h.dims();
    p_scale_ = h.qn() != 0 ? 1.0 / static_cast<double>(h.qn()) : 1.0;
    subs_.reserve(plan.subs.size() + 1);
    for (const SubBall& s : plan.subs) {
        const double kappa = s.jet.gradient.norm();
        const double delta = rho_ / kappa;
        subs_.push_back({s.center, s.alpha, s.jet.value, (kappa + plan.G * s.alpha) * s.alpha, std::min(delta, s.alpha),
                         counted_balls(d, kappa, s.alpha, delta, plan.G)});
    }
    if (plan.has_inner) {
        subs_.push_back({plan.inner_center, plan.inner_radius, plan.inner_base,
                         0.5 * plan.G * plan.inner_radius * plan.inner_radius, plan.inner_radius, 1});
    }
}

bool SlabFamily::meets(const Sub& s, double offset) const {
    return std::abs(s.base_value - offset) < rho_ + s.reach;
}

template <class Visit>
void SlabFamily::for_each_hit(long long p, Visit&& visit) const {
    const double offset = static_cast<double>(p) * p_scale_;
    for (const Sub& s : subs_)
        if (meets(s, offset)) visit(s);
}

double SlabFamily::cost(long long p, const DimensionFunction& f) const {
    CompensatedSum acc;
    for_each_hit(p, [&](const Sub& s) { acc += static_cast<double>(s.count) * f(2.0 * s.radius); });
    return acc.value();
}

long long SlabFamily::ball_count(long long p) const {
    long long total = 0;
    for_each_hit(p, [&](const Sub& s) { total += s.count; });
    return total;
}

// ---------------------------------------------------------------------------

AdmissibleCount count_admissible_p(const IntVec& q, const CompactWindow& window,
                                   const Hypersurface& surface, const Shift& shift,
                                   const ApproxFunction& psi) {
    const int n = surface.n();
    if (static_cast<int>(q.size()) != n) throw ArgumentError("q must have length n");
    if (is_zero(q)) throw ArgumentError("q must be nonzero");
    const auto* g = surface.polynomial();
    if (!g) throw ArgumentError("count_admissible_p requires a polynomial surface");
    const int d = n - 1;
    std::vector<double> lin(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) lin[static_cast<std::size_t>(i)] = static_cast<double>(q[static_cast<std::size_t>(i)]);
    Polynomial form = Polynomial::affine(d, lin, 0.0) + static_cast<double>(q.back()) * (*g);
    if (!shift.is_zero()) form += -1.0 * shift.polynomial();

    const auto range = polynomial_range(form, window.box().lower, window.box().upper);
    const double psi_q = psi(q);
    AdmissibleCount out;
    out.range_min = range.min_value;
    out.range_max = range.max_value;
    out.p_min = static_cast<long long>(std::floor(range.min_value - psi_q)) + 1;
    out.p_max = static_cast<long long>(std::ceil(range.max_value + psi_q)) - 1;
    out.count = std::max<long long>(0, out.p_max - out.p_min + 1);
    out.constant = static_cast<double>(out.count) / static_cast<double>(std::max<long long>(1, max_norm(q)));
    return out;
}

// ---------------------------------------------------------------------------

double containment_fraction(const BallCover& cover, const std::vector<Vec>& probes) {
    if (!cover.materialized()) throw ArgumentError("containment_fraction needs a materialised cover");
    if (probes.empty()) return 1.0;
    if (cover.balls.empty()) return 0.0;
    const int d = static_cast<int>(cover.balls.front().center.size());

    // One uniform hash grid per dyadic radius class.
    struct Level {
        double cell;
        std::unordered_map<std::uint64_t, std::vector<std::size_t>> bins;
    };
    std::map<int, Level> levels;
    auto key = [d](const Vec& y, double cell) {
        std::uint64_t hsh = 1469598103934665603ull;
        for (int i = 0; i < d; ++i) {
            const auto c = static_cast<std::int64_t>(std::floor(y[i] / cell));
            hsh ^= static_cast<std::uint64_t>(c) + 0x9E3779B97F4A7C15ull + (hsh << 6) + (hsh >> 2);
        }
        return hsh;
    };
    for (std::size_t b = 0; b < cover.balls.size(); ++b) {
        const Ball& ball = cover.balls[b];
        const int cls = static_cast<int>(std::ceil(std::log2(ball.radius)));
        Level& lv = levels.try_emplace(cls, Level{2.0 * std::ldexp(1.0, cls), {}}).first->second;
        // A ball of radius <= cell/2 overlaps at most 2^d cells; register in each.
        std::vector<long long> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
        long long total = 1;
        for (int i = 0; i < d; ++i) {
            lo[static_cast<std::size_t>(i)] = static_cast<long long>(std::floor((ball.center[i] - ball.radius) / lv.cell));
            hi[static_cast<std::size_t>(i)] = static_cast<long long>(std::floor((ball.center[i] + ball.radius) / lv.cell));
            total *= hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)] + 1;
        }
        std::vector<long long> idx = lo;
        for (long long c = 0; c < total; ++c) {
            Vec corner(d);
            for (int i = 0; i < d; ++i) corner[i] = (static_cast<double>(idx[static_cast<std::size_t>(i)]) + 0.5) * lv.cell;
            lv.bins[key(corner, lv.cell)].push_back(b);
            for (int i = d - 1; i >= 0; --i) {
                if (++idx[static_cast<std::size_t>(i)] <= hi[static_cast<std::size_t>(i)]) break;
                idx[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)];
            }
        }
    }
    std::size_t inside = 0;
    for (const Vec& y : probes) {
        bool hit = false;
        for (auto& [cls, lv] : levels) {
            auto it = lv.bins.find(key(y, lv.cell));
            if (it == lv.bins.end()) continue;
            for (std::size_t b : it->second) {
                const Ball& ball = cover.balls[b];
                if ((y - ball.center).norm() <= (1.0 + 1e-6) * ball.radius) {
                    hit = true;
                    break;
                }
            }
            if (hit) break;
        }
        if (hit) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(probes.size());
}

}  // namespace gbsp
