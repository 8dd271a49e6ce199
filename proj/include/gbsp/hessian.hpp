#pragma once

#include "gbsp/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gbsp {

/// Builtin surfaces:
///   paraboloid [n=3]                    g = sum x_i^2 on [-1,1]^{n-1}
///   degenerate-quadratic [b1..b6]       n = 3 on [-1,1]^2, b2^2 = 4 b1 b3
///   gordan-noether []                   n = 6 on [-2,2]^5
///   fat-cantor [depth=6, fatness=0.5]   n = 2 on [0,1]
///   random-poly [n=3, degree=3, seed=0] coefficients uniform in [-1,1], [-1,1]^{n-1}
Hypersurface make_builtin(const std::string& name, const std::vector<double>& params = {});
std::vector<std::string> builtin_names();

/// |det H| <= tol_rel * prod_i ||H_i|| (Hadamard normalisation).
bool hessian_singular(const Mat& hessian, double tol_rel);
/// det H / prod_i ||H_i||, 0 for a zero row.
double normalized_det(const Mat& hessian);

struct SingularReport {
    int grid_res = 0;
    double tol_rel = 0.0;
    long long marked = 0;
    long long total = 0;
    double fraction = 0.0;
    /// Box-count slope of the marked cells over grid_res, grid_res/2, ...;
    /// empty when nothing is marked.
    std::optional<double> box_dimension;

    [[nodiscard]] std::string to_json() const;
};

SingularReport singular_fraction(const Hypersurface& surface, int grid_res, double tol_rel, int threads = 1);

enum class ConditionIIVerdict { Pass, Fail, Inconclusive };
std::string to_string(ConditionIIVerdict v);

struct ConditionIILevel {
    int grid_res = 0;
    long long marked_cells = 0;
    double fraction = 0.0;
    double cell_diameter = 0.0;
    double cost = 0.0;  // marked_cells * f(cell_diameter)
};

struct ConditionIIReport {
    std::vector<ConditionIILevel> levels;
    double slope = 0.0;  // of log cost against log cell diameter
    ConditionIIVerdict verdict = ConditionIIVerdict::Inconclusive;

    [[nodiscard]] std::string to_json() const;
};

/// Cells are marked when the centre is singular or the normalised determinant
/// vanishes or changes sign over the cell corners.
ConditionIIReport condition_II_check(const Hypersurface& surface, const DimensionFunction& f,
                                     const std::vector<int>& refinements, double tol_rel = 1e-9,
                                     int threads = 1);

/// Length of the singular set of a one-dimensional surface: marked runs on a
/// grid, run ends refined by bisection.
double marked_length_1d(const Hypersurface& surface, int grid_res, double tol_rel = 1e-12);

struct KernelField {
    Vec direction;
    int nullity = 0;
    bool ambiguous = false;
    Vec eigenvalues;
};

/// Unit kernel direction of hess g(x). Sign: positive dot with `reference`
/// when given, otherwise positive first nonzero component. Throws
/// NoKernelError when the numerical nullity is 0.
KernelField kernel_field(const Hypersurface& surface, const Vec& x, const std::optional<Vec>& reference = {},
                         double rel_tol = 1e-8);

struct FiberDiagnostics {
    double gradient_drift = 0.0;
    double straightness = 0.0;
    double affinity = 0.0;
};

struct Fiber {
    Vec seed;
    std::vector<Vec> points;  // ordered end to end
    double length = 0.0;
    FiberDiagnostics diagnostics;
    bool truncated = false;
    std::string reason;

    [[nodiscard]] std::string to_json() const;
};

/// RK4 integration of the kernel field from x0 in both directions, each up to
/// max_len/2 or the boundary of U.
Fiber trace_fiber(const Hypersurface& surface, const Vec& x0, double step, double max_len,
                  const std::optional<Vec>& direction = {});

struct SemicontinuityReport {
    long long checked = 0;
    long long violations = 0;
};

/// Upper semicontinuity of x -> dim ker hess g(x): at every coarse grid point,
/// fine-grid neighbours (a shifted lattice in general position) within half a
/// coarse cell must not have larger nullity.
SemicontinuityReport semicontinuity_check(const Hypersurface& surface, int coarse_res, int fine_factor,
                                          double rel_tol = 1e-8);

}  // namespace gbsp
