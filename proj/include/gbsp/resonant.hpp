#pragma once

#include "gbsp/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace gbsp {

/// The auxiliary function h = h_{p,q} whose rho-sublevel set inside K is the
/// resonant slab S(p,q).
///
///   q_n != 0:  h(x) = r.x + g(x) - (p + theta(x)) / q_n,  r = q'/q_n,  rho = Psi(q)/|q_n|
///   q_n == 0:  h(x) = r.x - p - theta(x),                 r = q',      rho = Psi(q)
class HField {
public:
    HField(long long p, IntVec q, Hypersurface surface, Shift shift, double psi_value);

    [[nodiscard]] long long p() const { return p_; }
    [[nodiscard]] const IntVec& q() const { return q_; }
    [[nodiscard]] long long qn() const { return q_.back(); }
    [[nodiscard]] const Vec& r() const { return r_; }
    [[nodiscard]] double rho() const { return rho_; }
    [[nodiscard]] double psi_value() const { return psi_value_; }
    [[nodiscard]] int dims() const { return static_cast<int>(r_.size()); }
    [[nodiscard]] const Hypersurface& surface() const { return surface_; }
    [[nodiscard]] const Shift& shift() const { return shift_; }
    /// ||(r, 1)||
    [[nodiscard]] double scale() const;
    /// The constant subtracted for this p (p/q_n or p).
    [[nodiscard]] double offset() const { return offset_; }

    /// h and its derivatives; defined on all of R^{n-1} for polynomial data.
    [[nodiscard]] Jet eval(const Vec& x) const;
    /// h without the p-dependent constant (identical for every p).
    [[nodiscard]] Jet eval_base(const Vec& x) const;
    [[nodiscard]] bool in_slab(const Vec& x) const { return std::abs(eval(x).value) < rho_; }
    /// Upper bound on sup ||hess h||_2 over a box (interval Frobenius bound).
    [[nodiscard]] double hessian_bound(const Box& region) const;

    [[nodiscard]] HField with_p(long long p) const;

private:
    long long p_;
    IntVec q_;
    Hypersurface surface_;
    Shift shift_;
    double psi_value_;
    Vec r_;
    double rho_;
    double g_coef_;
    double theta_coef_;
    double offset_;
};

HField build_h(long long p, const IntVec& q, const Hypersurface& surface, const Shift& shift,
               const ApproxFunction& psi);

struct Regime {
    enum class Tag { Case1, Case2, Exceptional };
    Tag tag = Tag::Exceptional;
    Vec v;                        // critical point (Case1)
    double gradient_scale = 0.0;  // inf of ||grad h|| on the probe grid (Case2)
    double c_lo = 0.0;
    double c_hi = 0.0;
};

std::string to_string(Regime::Tag tag);

struct ClassifyOptions {
    double eps_grad = 1e-3;
    int probe_per_axis = 32;
    int newton_iterations = 100;
    double root_tolerance = 1e-9;
};

/// Claim-1 dichotomy: critical point in U (Case1), gradient uniformly of the
/// order ||(r,1)|| on K (Case2), or neither (Exceptional).
Regime classify_regime(const HField& h, const CompactWindow& window, const Hypersurface& surface,
                       const ClassifyOptions& opts = {});

struct Ball {
    Vec center;
    double radius = 0.0;
};

/// Balls that were counted but not materialised: `count` balls of `radius`
/// covering the target inside B(anchor, extent).
struct BallGroup {
    Vec anchor;
    double extent = 0.0;
    double radius = 0.0;
    long long count = 0;
};

struct BallCover {
    std::vector<Ball> balls;
    std::vector<BallGroup> groups;
    std::string target;

    [[nodiscard]] long long size() const;
    [[nodiscard]] bool materialized() const { return groups.empty(); }
    void append(const BallCover& other);
};

using ScalarField = std::function<Jet(const Vec&)>;

struct SublevelOptions {
    /// Lemma constant; <= 0 selects 8(n-1) = 8(d+1).
    double C = 0.0;
    /// sup ||hess phi||_2 on the region around B(x, alpha); must be >= 0.
    double hessian_bound = 0.0;
    /// Above this many balls the cover is counted instead of listed.
    long long materialize_limit = 1 << 16;
};

/// Cover of {y in B(x, alpha) : |phi(y)| < ||grad phi(x)|| delta} by balls of
/// radius delta, or by B(x, alpha) itself when delta >= alpha. Throws GradientDegeneracyError when
/// ||grad phi(x)|| < C alpha sup||hess phi||.
BallCover cover_sublevel(const ScalarField& phi, const Vec& x, double alpha, double delta,
                         const SublevelOptions& opts);

/// C_count: cover_sublevel uses at most this many balls per unit of
/// max(1, alpha/delta)^{n-2} (calibrated for n = 3).
inline constexpr double kCoverCountConstant = 8.0;

struct CoverOptions {
    double C = 0.0;        // <= 0: 8(n-1)
    double epsilon = 0.0;  // <= 0: 1/(4C)
    long long materialize_limit = 1 << 16;
    int max_halvings = 6;
};

struct CoverReport {
    long long p = 0;
    IntVec q;
    Regime::Tag regime = Regime::Tag::Exceptional;
    Vec v;
    BallCover cover;
    long long n_balls = 0;
    double f_cost = 0.0;
    double bound = 0.0;  // F(Psi(q)/||q||)
    double ratio = 0.0;  // f_cost / bound
    double max_count_ratio = 0.0;  // max over sub-covers of count / max(1, alpha/delta)^{n-2}
    int halvings = 0;
};

/// Case1/Case2 cover of S(p, q) with its f-dimensional cost.
CoverReport cover_slab(const HField& h, const Regime& regime, const CompactWindow& window,
                       const DimensionFunction& f, const CoverOptions& opts = {});

/// Cost-only variant shared across every p of one q. The sub-ball layout and
/// per-sub-ball counts do not depend on p; only which sub-balls meet the slab
/// does. Used by the certificate to price thousands of slabs.
class SlabFamily {
public:
    SlabFamily(const HField& h, const Regime& regime, const CompactWindow& window,
               const CoverOptions& opts = {});

    /// f-cost of the counted cover of S(p, q).
    [[nodiscard]] double cost(long long p, const DimensionFunction& f) const;
    [[nodiscard]] long long ball_count(long long p) const;
    [[nodiscard]] std::size_t sub_ball_count() const { return subs_.size(); }

private:
    struct Sub {
        Vec center;
        double alpha;
        double base_value;  // h without the p constant at center
        double reach;       // |h(y) - h(center)| <= reach on B(center, alpha)
        double radius;
        long long count;
    };
    [[nodiscard]] bool meets(const Sub& s, double offset) const;
    template <class Visit>
    void for_each_hit(long long p, Visit&& visit) const;

    double rho_;
    double p_scale_;  // offset = p * p_scale_
    std::vector<Sub> subs_;
};

struct Annulus {
    int k = 0;
    double inner = 0.0;  // 2^{-(k+1)}
    double outer = 0.0;  // 2^{-k}
    std::vector<Vec> centers;
    double alpha = 0.0;
};

struct AnnulusPlan {
    std::vector<Annulus> annuli;
    int k0 = 0;
    int k_trunc = 0;      // annuli with k >= k_trunc are replaced by one ball
    double inner_radius;  // 2^{-k_trunc}
};

/// Dyadic annuli around v intersecting K, each with its sub-ball centres of
/// radius epsilon 2^{-k}; truncated once 2^k rho exceeds the annulus diameter.
AnnulusPlan case1_annuli(const Vec& v, const Box& window, double rho, double epsilon);

struct AdmissibleCount {
    long long count = 0;
    long long p_min = 0;
    long long p_max = -1;
    double range_min = 0.0;
    double range_max = 0.0;
    double constant = 0.0;  // count / max(||q||, 1)
};

/// Number of p with S(p, q) nonempty, from the range of q.(x, g(x)) - theta(x) on K.
AdmissibleCount count_admissible_p(const IntVec& q, const CompactWindow& window,
                                   const Hypersurface& surface, const Shift& shift,
                                   const ApproxFunction& psi);

/// Fraction of `probes` (points known to lie in the target) that lie within
/// (1 + 1e-6) radius of some ball. Requires a materialised cover.
double containment_fraction(const BallCover& cover, const std::vector<Vec>& probes);

}  // namespace gbsp
