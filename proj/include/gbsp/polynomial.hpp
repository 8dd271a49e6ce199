#pragma once

#include "gbsp/numeric.hpp"

#include <map>
#include <utility>
#include <vector>

namespace gbsp {

/// Closed real interval with outward rounding by one ulp per operation.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    Interval(double v) : lo(v), hi(v) {}  // NOLINT(google-explicit-constructor)
    Interval(double l, double h) : lo(l), hi(h) {}

    [[nodiscard]] double width() const { return hi - lo; }
    [[nodiscard]] double mid() const { return 0.5 * (lo + hi); }
};

Interval operator+(Interval a, Interval b);
Interval operator-(Interval a, Interval b);
Interval operator*(Interval a, Interval b);
Interval ipow(Interval a, int k);
Interval intersect(Interval a, Interval b);

/// First and second derivatives of a scalar field at a point.
struct Jet {
    double value = 0.0;
    Vec gradient;
    Mat hessian;
};

/// Sparse multivariate polynomial: exponent tuple -> coefficient.
class Polynomial {
public:
    using Exponents = std::vector<int>;

    Polynomial() = default;
    explicit Polynomial(int dims) : dims_(dims) {}
    Polynomial(int dims, const std::map<Exponents, double>& terms);

    static Polynomial constant(int dims, double c);
    /// c0 + sum_i coeffs[i] * x_i
    static Polynomial affine(int dims, std::span<const double> coeffs, double c0);

    void add_term(const Exponents& exps, double coef);

    [[nodiscard]] int dims() const { return dims_; }
    [[nodiscard]] int degree() const;
    [[nodiscard]] bool is_zero() const { return terms_.empty(); }
    [[nodiscard]] const std::map<Exponents, double>& terms() const { return terms_; }

    [[nodiscard]] double value(const Vec& x) const;
    [[nodiscard]] Jet jet(const Vec& x) const;
    [[nodiscard]] Polynomial derivative(int axis) const;

    /// Natural interval extension over a box.
    [[nodiscard]] Interval enclose(std::span<const Interval> box) const;

    Polynomial& operator+=(const Polynomial& other);
    Polynomial& operator*=(double s);

    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
    friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

private:
    int dims_ = 0;
    std::map<Exponents, double> terms_;
};

/// Attained minimum and maximum of a polynomial over an axis-aligned box,
/// computed by interval branch and bound with mean-value enclosures.
/// `min_value`/`max_value` are values attained at points of the box and are
/// within `tol` of the true extrema.
struct PolynomialRange {
    double min_value = 0.0;
    double max_value = 0.0;
    double min_lower_bound = 0.0;
    double max_upper_bound = 0.0;
};

PolynomialRange polynomial_range(const Polynomial& p, const Vec& lower, const Vec& upper,
                                 double tol = 1e-12, int max_boxes = 200000);

}  // namespace gbsp
