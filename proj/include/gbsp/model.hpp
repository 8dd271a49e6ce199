#pragma once

#include "gbsp/numeric.hpp"
#include "gbsp/polynomial.hpp"

#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace gbsp {

/// Axis-aligned closed box in R^d.
struct Box {
    Vec lower;
    Vec upper;

    Box() = default;
    Box(Vec lo, Vec hi);
    static Box cube(int dims, double lo, double hi);

    [[nodiscard]] int dims() const { return static_cast<int>(lower.size()); }
    [[nodiscard]] Vec center() const { return 0.5 * (lower + upper); }
    [[nodiscard]] double diameter() const { return (upper - lower).norm(); }
    [[nodiscard]] bool contains(const Vec& x, double slack = 0.0) const;
};

/// One-dimensional fat Cantor construction on [0, 1] truncated at a finite
/// depth. Removed open intervals are kept as a ledger; g'' = d(x, T) is
/// integrated exactly (d(x, T) is a tent on every removed interval).
class FatCantor {
public:
    FatCantor(int depth, double fatness);

    [[nodiscard]] int depth() const { return depth_; }
    [[nodiscard]] double fatness() const { return fatness_; }
    [[nodiscard]] const std::vector<std::pair<double, double>>& removed() const { return removed_; }
    /// Lebesgue measure of T: 1 - total removed length.
    [[nodiscard]] double measure() const;

    [[nodiscard]] double distance(double x) const;  // d(x, T) = g''(x)
    [[nodiscard]] double first_integral(double x) const;   // r(x) = int_0^x d(t, T) dt
    [[nodiscard]] double second_integral(double x) const;  // g(x) = int_0^x r(t) dt

private:
    int depth_;
    double fatness_;
    std::vector<std::pair<double, double>> removed_;  // sorted by left end
};

/// Graph of g : U -> R, U an axis-aligned box in R^{n-1}.
class Hypersurface {
public:
    using Body = std::variant<Polynomial, FatCantor>;

    /// Polynomial graph; n >= 3.
    Hypersurface(int n, Box domain, Polynomial g, std::string name = "polynomial");
    /// One-dimensional toy used only by the singular-set detectors (n = 2).
    Hypersurface(Box domain, FatCantor g, std::string name = "fat-cantor");

    [[nodiscard]] int n() const { return n_; }
    [[nodiscard]] int dims() const { return n_ - 1; }
    [[nodiscard]] const Box& domain() const { return domain_; }
    [[nodiscard]] const std::string& name() const { return name_; }
    [[nodiscard]] const Body& body() const { return *body_; }
    [[nodiscard]] const Polynomial* polynomial() const { return std::get_if<Polynomial>(body_.get()); }

    /// Value, gradient and Hessian; throws DomainError outside the closure of U.
    [[nodiscard]] Jet eval(const Vec& x) const;
    /// Same, without the domain check (polynomials extend to all of R^{n-1}).
    [[nodiscard]] Jet eval_unchecked(const Vec& x) const;

private:
    int n_;
    Box domain_;
    std::shared_ptr<const Body> body_;
    std::string name_;
};

/// theta composed with the graph chart; zero by default.
class Shift {
public:
    Shift() = default;
    explicit Shift(Polynomial theta) : theta_(std::move(theta)) {}
    static Shift zero(int dims) { return Shift(Polynomial(dims)); }

    [[nodiscard]] const Polynomial& polynomial() const { return theta_; }
    [[nodiscard]] bool is_zero() const { return theta_.is_zero(); }
    [[nodiscard]] Jet eval(const Vec& x) const;

private:
    Polynomial theta_;
};

/// Multivariable approximating function Psi on Z^n.
class ApproxFunction {
public:
    enum class Kind { Power, QuasiNormPower, LogCorrected };

    static ApproxFunction power(double tau);
    /// Property P: Psi(q) = ||q||_v^{-tau}, ||q||_v = max |q_i|^{1/v_i}.
    static ApproxFunction quasi_norm_power(double tau, std::vector<double> weights);
    /// Psi(q) = ||q||^{-tau} (1 + log ||q||)^{-exponent}.
    static ApproxFunction log_corrected(double tau, double exponent);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double tau() const { return tau_; }
    [[nodiscard]] double exponent() const { return exponent_; }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    /// Psi depends on q only through its max-norm.
    [[nodiscard]] bool radial() const { return kind_ != Kind::QuasiNormPower; }

    /// Throws ArgumentError for q = 0 or a weight/length mismatch.
    [[nodiscard]] double operator()(std::span<const long long> q) const;
    /// Single-variable profile: psi(t) for radial kinds, t^{-tau} for the
    /// quasi-norm kind (evaluated at ||q||_v).
    [[nodiscard]] double profile(double t) const;
    [[nodiscard]] double quasi_norm(std::span<const double> a) const;

private:
    Kind kind_ = Kind::Power;
    double tau_ = 1.0;
    double exponent_ = 0.0;
    std::vector<double> weights_;
};

double eval_psi(const ApproxFunction& psi, std::span<const long long> q);

/// Dimension function f with a declared condition-(I) exponent.
class DimensionFunction {
public:
    enum class Kind { Power, PowerLog };

    static DimensionFunction power(double s);
    /// f(r) = r^s (1 + log(1/r))^exponent for r < 1, r^s for r >= 1.
    /// Increasing when 0 <= exponent <= s.
    static DimensionFunction power_log(double s, double exponent);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] double s() const { return s_; }
    [[nodiscard]] double exponent() const { return exponent_; }
    [[nodiscard]] double declared_exponent() const { return declared_; }
    [[nodiscard]] DimensionFunction with_declared_exponent(double s) const;

    [[nodiscard]] double operator()(double r) const;
    /// F(x) = x^{-(n-2)} f(x), x > 0.
    [[nodiscard]] double F(int n, double x) const;

private:
    Kind kind_ = Kind::Power;
    double s_ = 1.0;
    double exponent_ = 0.0;
    double declared_ = 1.0;
};

double eval_f(const DimensionFunction& f, double r);
double eval_F(const DimensionFunction& f, int n, double x);

/// Compact box K strictly inside U.
class CompactWindow {
public:
    CompactWindow(const Box& domain, Box window);
    /// U shrunk by `margin` on every face.
    static CompactWindow inset(const Box& domain, double margin);

    [[nodiscard]] const Box& box() const { return window_; }
    [[nodiscard]] double margin() const { return margin_; }

private:
    Box window_;
    double margin_;
};

Jet eval_surface(const Hypersurface& surface, const Vec& x);

enum class ConditionVerdict { Pass, Fail, Reject };
std::string to_string(ConditionVerdict v);

struct ConditionIReport {
    double max_ratio = 0.0;
    ConditionVerdict verdict = ConditionVerdict::Reject;
    std::string reason;
};

struct ConditionIOptions {
    int x_samples = 64;
    int y_samples = 64;
    double x_min = 1.01, x_max = 1e3;
    double y_min = 1e-6, y_max = 0.99;
    double bound = 1.001;
};

/// Empirical check of f(xy) <= C x^s f(y) for y < 1 < x on a log grid,
/// after the strictness gate s < 2(n-2).
ConditionIReport check_condition_I(const DimensionFunction& f, double s, int n,
                                   const ConditionIOptions& opts = {});

}  // namespace gbsp
