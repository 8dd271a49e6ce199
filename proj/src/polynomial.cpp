#include "gbsp/polynomial.hpp"

#include <cmath>
#include <limits>
#include <queue>

namespace gbsp {

namespace {

double down(double v) { return std::nextafter(v, -std::numeric_limits<double>::infinity()); }
double up(double v) { return std::nextafter(v, std::numeric_limits<double>::infinity()); }

}  // namespace

Interval operator+(Interval a, Interval b) { return {down(a.lo + b.lo), up(a.hi + b.hi)}; }

Interval operator-(Interval a, Interval b) { return {down(a.lo - b.hi), up(a.hi - b.lo)}; }

Interval operator*(Interval a, Interval b) {
    const double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    return {down(*std::min_element(c, c + 4)), up(*std::max_element(c, c + 4))};
}

Interval ipow(Interval a, int k) {
    if (k == 0) return {1.0, 1.0};
    if (k == 1) return a;
    const double pl = std::pow(a.lo, k), ph = std::pow(a.hi, k);
    if (k % 2 == 1) return {down(pl), up(ph)};
    if (a.lo >= 0) return {down(pl), up(ph)};
    if (a.hi <= 0) return {down(ph), up(pl)};
    return {0.0, up(std::max(pl, ph))};
}

Interval intersect(Interval a, Interval b) {
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

Polynomial::Polynomial(int dims, const std::map<Exponents, double>& terms) : dims_(dims) {
    for (const auto& [e, c] : terms) add_term(e, c);
}

Polynomial Polynomial::constant(int dims, double c) {
    Polynomial p(dims);
    p.add_term(Exponents(static_cast<std::size_t>(dims), 0), c);
    return p;
}

Polynomial Polynomial::affine(int dims, std::span<const double> coeffs, double c0) {
    if (static_cast<int>(coeffs.size()) != dims)
        throw ArgumentError("Polynomial::affine: coefficient count mismatch");
    Polynomial p = constant(dims, c0);
    for (int i = 0; i < dims; ++i) {
        Exponents e(static_cast<std::size_t>(dims), 0);
        e[static_cast<std::size_t>(i)] = 1;
        p.add_term(e, coeffs[static_cast<std::size_t>(i)]);
    }
    return p;
}

void Polynomial::add_term(const Exponents& exps, double coef) {
    if (static_cast<int>(exps.size()) != dims_)
        throw ArgumentError("polynomial exponent tuple has length " +
                            std::to_string(exps.size()) + ", expected " +
                            std::to_string(dims_));
    for (int a : exps)
        if (a < 0) throw ArgumentError("polynomial exponents must be nonnegative");
    if (!std::isfinite(coef)) throw ArgumentError("polynomial coefficient is not finite");
    if (coef == 0.0) return;
    auto [it, inserted] = terms_.emplace(exps, coef);
    if (!inserted) {
        it->second += coef;
        if (it->second == 0.0) terms_.erase(it);
    }
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) {
        int s = 0;
        for (int a : e) s += a;
        d = std::max(d, s);
    }
    return d;
}

double Polynomial::value(const Vec& x) const {
    double v = 0.0;
    for (const auto& [e, c] : terms_) {
        double m = c;
        for (int i = 0; i < dims_; ++i)
            if (e[static_cast<std::size_t>(i)] != 0) m *= std::pow(x[i], e[static_cast<std::size_t>(i)]);
        v += m;
    }
    return v;
}

Jet Polynomial::jet(const Vec& x) const {
    const int d = dims_;
    Jet out{0.0, Vec::Zero(d), Mat::Zero(d, d)};
    // Powers x_i^k for k = 0..deg so that derivatives never divide by x_i.
    const int deg = degree();
    Mat pw(d, deg + 1);
    for (int i = 0; i < d; ++i) {
        pw(i, 0) = 1.0;
        for (int k = 1; k <= deg; ++k) pw(i, k) = pw(i, k - 1) * x[i];
    }
    auto xp = [&](int i, int k) { return k < 0 ? 0.0 : pw(i, k); };

    std::vector<double> f(static_cast<std::size_t>(d)), f1(static_cast<std::size_t>(d)),
        f2(static_cast<std::size_t>(d));
    for (const auto& [e, c] : terms_) {
        for (int i = 0; i < d; ++i) {
            const int a = e[static_cast<std::size_t>(i)];
            f[static_cast<std::size_t>(i)] = xp(i, a);
            f1[static_cast<std::size_t>(i)] = a * xp(i, a - 1);
            f2[static_cast<std::size_t>(i)] = a * (a - 1) * xp(i, a - 2);
        }
        double all = c;
        for (int i = 0; i < d; ++i) all *= f[static_cast<std::size_t>(i)];
        out.value += all;
        for (int i = 0; i < d; ++i) {
            double gi = c * f1[static_cast<std::size_t>(i)];
            if (gi == 0.0) continue;
            for (int k = 0; k < d; ++k)
                if (k != i) gi *= f[static_cast<std::size_t>(k)];
            out.gradient[i] += gi;
        }
        for (int i = 0; i < d; ++i) {
            for (int j = i; j < d; ++j) {
                double hij = c;
                if (i == j) {
                    hij *= f2[static_cast<std::size_t>(i)];
                } else {
                    hij *= f1[static_cast<std::size_t>(i)] * f1[static_cast<std::size_t>(j)];
                }
                if (hij == 0.0) continue;
                for (int k = 0; k < d; ++k)
                    if (k != i && k != j) hij *= f[static_cast<std::size_t>(k)];
                out.hessian(i, j) += hij;
                if (i != j) out.hessian(j, i) += hij;
            }
        }
    }
    return out;
}

Polynomial Polynomial::derivative(int axis) const {
    if (axis < 0 || axis >= dims_) throw ArgumentError("Polynomial::derivative: bad axis");
    Polynomial out(dims_);
    for (const auto& [e, c] : terms_) {
        const int a = e[static_cast<std::size_t>(axis)];
        if (a == 0) continue;
        Exponents de = e;
        de[static_cast<std::size_t>(axis)] = a - 1;
        out.add_term(de, c * a);
    }
    return out;
}

Interval Polynomial::enclose(std::span<const Interval> box) const {
    if (static_cast<int>(box.size()) != dims_)
        throw ArgumentError("Polynomial::enclose: box dimension mismatch");
    Interval acc(0.0);
    for (const auto& [e, c] : terms_) {
        Interval m(c);
        for (int i = 0; i < dims_; ++i)
            if (e[static_cast<std::size_t>(i)] != 0)
                m = m * ipow(box[static_cast<std::size_t>(i)], e[static_cast<std::size_t>(i)]);
        acc = acc + m;
    }
    return acc;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    if (other.dims_ != dims_) throw ArgumentError("Polynomial::+=: dimension mismatch");
    for (const auto& [e, c] : other.terms_) add_term(e, c);
    return *this;
}

Polynomial& Polynomial::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (auto& [e, c] : terms_) c *= s;
    return *this;
}

namespace {

struct Cell {
    std::vector<Interval> box;
    Interval range;
};

// Minimum of p over the box by best-first branch and bound. Returns the best
// attained value and the global lower bound at termination.
std::pair<double, double> minimize(const Polynomial& p, const std::vector<Polynomial>& grad,
                                   const Vec& lower, const Vec& upper, double tol,
                                   int max_boxes) {
    const int d = p.dims();
    auto enclose = [&](const std::vector<Interval>& box) {
        Vec c(d);
        for (int i = 0; i < d; ++i) c[i] = box[static_cast<std::size_t>(i)].mid();
        Interval mv(p.value(c));
        for (int i = 0; i < d; ++i) {
            const Interval gi = grad[static_cast<std::size_t>(i)].enclose(box);
            mv = mv + gi * (box[static_cast<std::size_t>(i)] - Interval(c[i]));
        }
        return intersect(mv, p.enclose(box));
    };
    auto cmp = [](const Cell& a, const Cell& b) { return a.range.lo > b.range.lo; };
    std::priority_queue<Cell, std::vector<Cell>, decltype(cmp)> queue(cmp);

    double best = std::numeric_limits<double>::infinity();
    auto probe = [&](const std::vector<Interval>& box) {
        Vec c(d);
        for (int i = 0; i < d; ++i) c[i] = box[static_cast<std::size_t>(i)].mid();
        best = std::min(best, p.value(c));
    };

    std::vector<Interval> root(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) root[static_cast<std::size_t>(i)] = Interval(lower[i], upper[i]);
    // Corners carry the extrema of many slabs; seed the incumbent with them.
    for (long long mask = 0; mask < (1LL << d); ++mask) {
        Vec c(d);
        for (int i = 0; i < d; ++i) c[i] = (mask >> i & 1) ? upper[i] : lower[i];
        best = std::min(best, p.value(c));
    }
    probe(root);
    queue.push({root, enclose(root)});

    double lower_bound = queue.top().range.lo;
    int processed = 0;
    while (!queue.empty()) {
        Cell cell = queue.top();
        queue.pop();
        lower_bound = cell.range.lo;
        if (cell.range.lo >= best - tol * (1.0 + std::abs(best))) break;
        if (++processed > max_boxes) break;
        int axis = 0;
        for (int i = 1; i < d; ++i)
            if (cell.box[static_cast<std::size_t>(i)].width() >
                cell.box[static_cast<std::size_t>(axis)].width())
                axis = i;
        const Interval& split = cell.box[static_cast<std::size_t>(axis)];
        if (split.width() <= 0.0) continue;
        for (int half = 0; half < 2; ++half) {
            auto child = cell.box;
            child[static_cast<std::size_t>(axis)] =
                half == 0 ? Interval(split.lo, split.mid()) : Interval(split.mid(), split.hi);
            probe(child);
            Cell next{child, enclose(child)};
            if (next.range.lo < best) queue.push(std::move(next));
        }
    }
    if (queue.empty()) lower_bound = std::min(lower_bound, best);
    return {best, std::min(lower_bound, best)};
}

}  // namespace

PolynomialRange polynomial_range(const Polynomial& p, const Vec& lower, const Vec& upper,
                                 double tol, int max_boxes) {
    const int d = p.dims();
    if (lower.size() != d || upper.size() != d)
        throw ArgumentError("polynomial_range: box dimension mismatch");
    std::vector<Polynomial> grad, neg_grad;
    for (int i = 0; i < d; ++i) {
        grad.push_back(p.derivative(i));
        neg_grad.push_back(-1.0 * grad.back());
    }
    const auto [min_v, min_lb] = minimize(p, grad, lower, upper, tol, max_boxes);
    const auto [negmax_v, negmax_lb] = minimize(-1.0 * p, neg_grad, lower, upper, tol, max_boxes);
    return {min_v, -negmax_v, min_lb, -negmax_lb};
}

}  // namespace gbsp
