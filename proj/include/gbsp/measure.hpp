#pragma once

#include "gbsp/resonant.hpp"
#include "gbsp/series.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gbsp {

/// Sum of f(2 radius) over the cover, counted groups included.
double f_cost(const BallCover& cover, const DimensionFunction& f);

/// Grid subdivision constant ceil(2L+1)^{n_out}.
long long subdivision_constant(double L, int n_out);

/// Image of a cover under an L-Lipschitz map: every ball (c, rho) becomes a
/// grid of radius-rho balls covering B(map(c), L rho). `map` defaults to the
/// identity (then centres must already have n_out coordinates).
BallCover pushforward_cover(const BallCover& cover, double L, int n_out,
                            const std::function<Vec(const Vec&)>& map = {});

/// Everything the slab family of a run depends on.
struct ProblemSetup {
    Hypersurface surface;
    Shift shift;
    ApproxFunction psi;
    DimensionFunction f;
    CompactWindow window;

    [[nodiscard]] int n() const { return surface.n(); }
};

struct Witness {
    long long p = 0;
    IntVec q;
};

struct LimsupResult {
    bool hit = false;
    std::vector<Witness> witnesses;
};

/// All (p, q) with Q_min <= ||q|| <= Q_max and |q.(x, g(x)) - p - theta(x)| < Psi(q),
/// q enumerated shell by shell in lexicographic order.
LimsupResult limsup_membership(const Vec& x, long long Q_min, long long Q_max, const ProblemSetup& setup);
/// Same predicate with early exit.
bool limsup_hit(const Vec& x, long long Q_min, long long Q_max, const ProblemSetup& setup);

struct BoxDimension {
    std::vector<double> scales;   // cell sides, as given
    std::vector<long long> counts;
    double slope = 0.0;

    [[nodiscard]] std::string to_csv() const;
};

struct BoxDimensionOptions {
    int threads = 1;
    std::uint64_t seed = 0;
};

/// Occupied-cell counts of {membership} in `window` for dyadic cell sides;
/// probes are placed only at the finest scale (cell centre plus 2^d jittered
/// points) and coarser counts are aggregated from the finest occupancy.
BoxDimension box_dimension(const std::function<bool(const Vec&)>& membership, const Box& window,
                           const std::vector<double>& scales, const BoxDimensionOptions& opts = {});

enum class CertificateVerdict { MeasureZeroConsistent, Inconclusive };
std::string to_string(CertificateVerdict v);

struct CertificateShell {
    long long Q = 0;
    long long shell_size = 0;
    long long sampled = 0;
    long long slabs = 0;        // admissible (p, q) pairs among the sampled q
    long long exceptional = 0;  // sampled q priced by the box cover of K
    double cost = 0.0;          // estimate of sum over the shell
    double comparison = 0.0;    // sum over the shell of ||q|| F(Psi(q)/||q||)
};

struct CertificateRange {
    long long Q_lo = 0;
    long long Q_hi = 0;
    double cost = 0.0;
    double comparison = 0.0;
    double ratio = 0.0;
};

struct CantelliCertificate {
    long long Q_min = 0;
    long long Q_max = 0;
    std::vector<CertificateShell> shells;
    std::vector<CertificateRange> ranges;
    double total_cost = 0.0;
    double comparison_total = 0.0;
    SeriesVerdict series_verdict = SeriesVerdict::Boundary;
    double series_slope = 0.0;
    double series_total = 0.0;
    double ratio_spread = 0.0;  // max/min range ratio
    bool complete = true;
    CertificateVerdict verdict = CertificateVerdict::Inconclusive;

    [[nodiscard]] std::string to_json() const;
};

struct CertificateOptions {
    int samples_per_shell = 16;
    std::uint64_t seed = 0;
    int threads = 1;
    double series_margin = 0.05;
    double max_ratio_spread = 10.0;
    /// Max number of sampled q; 0 = unlimited. Exhaustion gives a partial,
    /// INCONCLUSIVE certificate.
    long long budget = 0;
    ClassifyOptions classify;
    CoverOptions cover;
};

CantelliCertificate cantelli_certificate(const ProblemSetup& setup, long long Q_min, long long Q_max,
                                         const CertificateOptions& opts = {});

}  // namespace gbsp
