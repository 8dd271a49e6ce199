#include "gbsp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace gbsp {

Box::Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    if (lower.size() != upper.size()) throw ArgumentError("box corners differ in dimension");
    if (lower.size() == 0) throw ArgumentError("box must have positive dimension");
    for (int i = 0; i < lower.size(); ++i) {
        if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
            throw ArgumentError("box corners must be finite");
        if (!(lower[i] < upper[i])) throw ArgumentError("box must be nonempty on every axis");
    }
}

Box Box::cube(int dims, double lo, double hi) {
    return Box(Vec::Constant(dims, lo), Vec::Constant(dims, hi));
}

bool Box::contains(const Vec& x, double slack) const {
    if (x.size() != lower.size()) return false;
    for (int i = 0; i < x.size(); ++i)
        if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
    return true;
}

// ---------------------------------------------------------------------------

FatCantor::FatCantor(int depth, double fatness) : depth_(depth), fatness_(fatness) {
    if (depth < 1 || depth > 24) throw ArgumentError("fat-cantor depth must be in [1, 24]");
    if (!(fatness > 0.0 && fatness < 1.0))
        throw ArgumentError("fat-cantor fatness must lie in (0, 1)");
    std::vector<std::pair<double, double>> kept{{0.0, 1.0}};
    for (int k = 1; k <= depth; ++k) {
        const double len = fatness * std::ldexp(1.0, 1 - 2 * k);
        std::vector<std::pair<double, double>> next;
        next.reserve(kept.size() * 2);
        for (auto [a, b] : kept) {
            if (!(len < b - a))
                throw ArgumentError("fat-cantor: removed interval does not fit at depth " +
                                    std::to_string(k));
            const double m = 0.5 * (a + b);
            removed_.emplace_back(m - 0.5 * len, m + 0.5 * len);
            next.emplace_back(a, m - 0.5 * len);
            next.emplace_back(m + 0.5 * len, b);
        }
        kept = std::move(next);
    }
    std::sort(removed_.begin(), removed_.end());
}

double FatCantor::measure() const {
    CompensatedSum total;
    for (auto [a, b] : removed_) total += b - a;
    return 1.0 - total.value();
}

double FatCantor::distance(double x) const {
    if (x <= 0.0) return -x;
    if (x >= 1.0) return x - 1.0;
    auto it = std::upper_bound(removed_.begin(), removed_.end(), std::make_pair(x, 2.0));
    if (it == removed_.begin()) return 0.0;
    --it;
    const auto [a, b] = *it;
    if (x > a && x < b) return std::min(x - a, b - x);
    return 0.0;
}

namespace {

// Linear piece alpha + beta t of d(., T) on [lo, hi].
struct Piece {
    double lo, hi, alpha, beta;
};

template <class Visit>
void for_each_piece(const std::vector<std::pair<double, double>>& removed, double x, Visit&& visit) {
    if (x < 0.0) {
        visit(Piece{0.0, x, 0.0, -1.0});
        return;
    }
    for (auto [a, b] : removed) {
        if (a >= x) break;
        const double m = 0.5 * (a + b);
        visit(Piece{a, std::min(x, m), -a, 1.0});
        if (x > m) visit(Piece{m, std::min(x, b), b, -1.0});
    }
    if (x > 1.0) visit(Piece{1.0, x, -1.0, 1.0});
}

}  // namespace

double FatCantor::first_integral(double x) const {
    CompensatedSum acc;
    for_each_piece(removed_, x, [&](const Piece& p) {
        auto prim = [&](double t) { return p.alpha * t + 0.5 * p.beta * t * t; };
        acc += prim(p.hi) - prim(p.lo);
    });
    return acc.value();
}

double FatCantor::second_integral(double x) const {
    // g(x) = int_0^x (x - t) d(t) dt, integrated piecewise in closed form.
    CompensatedSum acc;
    for_each_piece(removed_, x, [&](const Piece& p) {
        auto prim = [&](double t) {
            return x * (p.alpha * t + 0.5 * p.beta * t * t) -
                   (0.5 * p.alpha * t * t + p.beta * t * t * t / 3.0);
        };
        acc += prim(p.hi) - prim(p.lo);
    });
    return acc.value();
}

// ---------------------------------------------------------------------------

Hypersurface::Hypersurface(int n, Box domain, Polynomial g, std::string name)
    : n_(n), domain_(std::move(domain)), name_(std::move(name)) {
    if (n < 3) throw ArgumentError("hypersurface ambient dimension must be at least 3");
    if (domain_.dims() != n - 1) throw ArgumentError("domain dimension must be n-1");
    if (g.dims() != n - 1) throw ArgumentError("polynomial exponent tuples must have length n-1");
    body_ = std::make_shared<const Body>(std::move(g));
}

Hypersurface::Hypersurface(Box domain, FatCantor g, std::string name)
    : n_(2), domain_(std::move(domain)), name_(std::move(name)) {
    if (domain_.dims() != 1) throw ArgumentError("fat-cantor surface lives over R^1");
    body_ = std::make_shared<const Body>(std::move(g));
}

Jet Hypersurface::eval_unchecked(const Vec& x) const {
    if (x.size() != dims()) throw ArgumentError("point dimension must be n-1");
    if (const auto* p = polynomial()) return p->jet(x);
    const auto& fc = std::get<FatCantor>(*body_);
    Jet j{fc.second_integral(x[0]), Vec::Constant(1, fc.first_integral(x[0])),
          Mat::Constant(1, 1, fc.distance(x[0]))};
    return j;
}

Jet Hypersurface::eval(const Vec& x) const {
    if (x.size() != dims()) throw ArgumentError("point dimension must be n-1");
    if (!domain_.contains(x)) {
        std::ostringstream os;
        os << "point (" << x.transpose() << ") lies outside the surface domain";
        throw DomainError(os.str());
    }
    return eval_unchecked(x);
}

Jet eval_surface(const Hypersurface& surface, const Vec& x) { return surface.eval(x); }

Jet Shift::eval(const Vec& x) const {
    if (theta_.dims() == 0) {
        const auto d = static_cast<int>(x.size());
        return {0.0, Vec::Zero(d), Mat::Zero(d, d)};
    }
    return theta_.jet(x);
}

// ---------------------------------------------------------------------------

ApproxFunction ApproxFunction::power(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("psi.tau must be positive");
    ApproxFunction p;
    p.kind_ = Kind::Power;
    p.tau_ = tau;
    return p;
}

ApproxFunction ApproxFunction::quasi_norm_power(double tau, std::vector<double> weights) {
    ApproxFunction p = power(tau);
    if (weights.empty()) throw ArgumentError("psi.weights must be nonempty");
    double total = 0.0;
    for (double v : weights) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("psi.weights must be positive");
        total += v;
    }
    const double n = static_cast<double>(weights.size());
    if (std::abs(total - n) > 1e-9 * n)
        throw ArgumentError("psi.weights must sum to n (property P normalisation)");
    p.kind_ = Kind::QuasiNormPower;
    p.weights_ = std::move(weights);
    return p;
}

ApproxFunction ApproxFunction::log_corrected(double tau, double exponent) {
    ApproxFunction p = power(tau);
    if (!std::isfinite(exponent)) throw ArgumentError("psi.exponent must be finite");
    p.kind_ = Kind::LogCorrected;
    p.exponent_ = exponent;
    return p;
}

double ApproxFunction::quasi_norm(std::span<const double> a) const {
    if (a.size() != weights_.size()) throw ArgumentError("quasi-norm: length mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != 0.0) m = std::max(m, std::pow(std::abs(a[i]), 1.0 / weights_[i]));
    return m;
}

double ApproxFunction::profile(double t) const {
    switch (kind_) {
        case Kind::Power:
        case Kind::QuasiNormPower:
            return std::pow(t, -tau_);
        case Kind::LogCorrected:
            return std::pow(t, -tau_) * std::pow(1.0 + std::log(t), -exponent_);
    }
    return 0.0;
}

double ApproxFunction::operator()(std::span<const long long> q) const {
    const long long m = max_norm(q);
    if (m == 0) throw ArgumentError("psi is undefined at q = 0");
    if (kind_ != Kind::QuasiNormPower) return profile(static_cast<double>(m));
    if (q.size() != weights_.size())
        throw ArgumentError("psi.weights length differs from the dimension of q");
    double t = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        if (q[i] != 0)
            t = std::max(t, std::pow(static_cast<double>(q[i] < 0 ? -q[i] : q[i]),
                                     1.0 / weights_[i]));
    return profile(t);
}

double eval_psi(const ApproxFunction& psi, std::span<const long long> q) { return psi(q); }

// ---------------------------------------------------------------------------

DimensionFunction DimensionFunction::power(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ArgumentError("f.s must be positive");
    DimensionFunction f;
    f.kind_ = Kind::Power;
    f.s_ = s;
    f.declared_ = s;
    return f;
}

DimensionFunction DimensionFunction::power_log(double s, double exponent) {
    DimensionFunction f = power(s);
    if (!std::isfinite(exponent) || exponent > s)
        throw ArgumentError("f.exponent must be finite and at most s (monotonicity)");
    f.kind_ = Kind::PowerLog;
    f.exponent_ = exponent;
    return f;
}

DimensionFunction DimensionFunction::with_declared_exponent(double s) const {
    if (!std::isfinite(s)) throw ArgumentError("declared condition-(I) exponent must be finite");
    DimensionFunction f = *this;
    f.declared_ = s;
    return f;
}

double DimensionFunction::operator()(double r) const {
    if (!(r >= 0.0)) throw ArgumentError("dimension function argument must be nonnegative");
    if (r == 0.0) return 0.0;
    const double base = std::pow(r, s_);
    if (kind_ == Kind::Power || r >= 1.0) return base;
    return base * std::pow(1.0 + std::log(1.0 / r), exponent_);
}

double DimensionFunction::F(int n, double x) const {
    if (!(x > 0.0)) throw ArgumentError("F is defined for x > 0 only");
    return std::pow(x, -(n - 2)) * (*this)(x);
}

double eval_f(const DimensionFunction& f, double r) { return f(r); }
double eval_F(const DimensionFunction& f, int n, double x) { return f.F(n, x); }

// ---------------------------------------------------------------------------

CompactWindow::CompactWindow(const Box& domain, Box window) : window_(std::move(window)) {
    if (window_.dims() != domain.dims()) throw ArgumentError("window.dimension mismatch");
    margin_ = std::numeric_limits<double>::infinity();
    for (int i = 0; i < window_.dims(); ++i) {
        margin_ = std::min({margin_, window_.lower[i] - domain.lower[i],
                            domain.upper[i] - window_.upper[i]});
    }
    if (!(margin_ > 0.0))
        throw ArgumentError("window must lie strictly inside the domain (positive margin)");
}

CompactWindow CompactWindow::inset(const Box& domain, double margin) {
    if (!(margin > 0.0)) throw ArgumentError("window.margin must be positive");
    return CompactWindow(domain, Box(domain.lower.array() + margin, domain.upper.array() - margin));
}

// ---------------------------------------------------------------------------

std::string to_string(ConditionVerdict v) {
    switch (v) {
        case ConditionVerdict::Pass: return "PASS";
        case ConditionVerdict::Fail: return "FAIL";
        case ConditionVerdict::Reject: return "REJECT";
    }
    return "?";
}

ConditionIReport check_condition_I(const DimensionFunction& f, double s, int n,
                                   const ConditionIOptions& opts) {
    ConditionIReport report;
    if (!(s < 2.0 * (n - 2))) {
        report.verdict = ConditionVerdict::Reject;
        report.reason = "exponent s must satisfy s < 2(n-2)";
        return report;
    }
    if (opts.x_samples < 1 || opts.y_samples < 1 || !(opts.x_min > 1.0) || !(opts.y_max < 1.0) ||
        !(opts.y_min > 0.0))
        throw ArgumentError("condition (I) sample grid must have x > 1 and 0 < y < 1");
    auto logspace = [](double lo, double hi, int k, int i) {
        if (k == 1) return lo;
        return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (k - 1));
    };
    double worst = 0.0;
    for (int i = 0; i < opts.x_samples; ++i) {
        const double x = logspace(opts.x_min, opts.x_max, opts.x_samples, i);
        for (int j = 0; j < opts.y_samples; ++j) {
            const double y = logspace(opts.y_min, opts.y_max, opts.y_samples, j);
            worst = std::max(worst, f(x * y) / (std::pow(x, s) * f(y)));
        }
    }
    report.max_ratio = worst;
    report.verdict = worst <= opts.bound ? ConditionVerdict::Pass : ConditionVerdict::Fail;
    if (report.verdict == ConditionVerdict::Fail) report.reason = "max ratio exceeds bound";
    return report;
}

}  // namespace gbsp
