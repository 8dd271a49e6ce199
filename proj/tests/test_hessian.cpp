#include "gbsp/hessian.hpp"

#include <doctest.h>

#include <cmath>

using namespace gbsp;

namespace {

Hypersurface square_of_sum() {
    Polynomial g(2);
    g.add_term({2, 0}, 1.0);
    g.add_term({1, 1}, 2.0);
    g.add_term({0, 2}, 1.0);
    return Hypersurface(3, Box::cube(2, -1.0, 1.0), g, "square-of-sum");
}

double row_scale(const Mat& h) {
    double s = 1.0;
    for (Eigen::Index i = 0; i < h.rows(); ++i) s *= h.row(i).norm();
    return s;
}

}  // namespace

TEST_CASE("builtins") {
    CHECK(make_builtin("paraboloid").n() == 3);
    CHECK(make_builtin("paraboloid", {5}).dims() == 4);
    CHECK(make_builtin("gordan-noether").n() == 6);
    CHECK(make_builtin("fat-cantor").n() == 2);
    CHECK_THROWS_AS((void)make_builtin("degenerate-quadratic", {1, 1, 1, 0, 0, 0}), ArgumentError);
    CHECK_THROWS_AS((void)make_builtin("no-such-surface"), ArgumentError);
    CHECK_THROWS_AS((void)make_builtin("fat-cantor", {3, 1.5}), ArgumentError);

    const Hypersurface a = make_builtin("random-poly", {3, 3, 7});
    const Hypersurface b = make_builtin("random-poly", {3, 3, 7});
    CHECK(a.polynomial()->terms() == b.polynomial()->terms());
    CHECK(a.polynomial()->terms() != make_builtin("random-poly", {3, 3, 8}).polynomial()->terms());

    const Hypersurface gn = make_builtin("gordan-noether");
    const Vec x{{0.3, -0.7, 1.1, 0.2, -1.5}};
    const double want = 0.09 * 1.1 + 0.3 * -0.7 * 0.2 + 0.49 * -1.5 + 0.027 - 0.343;
    CHECK(gn.eval(x).value == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("fat Cantor surface") {
    const Hypersurface s = make_builtin("fat-cantor", {5, 0.5});
    const auto& fc = std::get<FatCantor>(s.body());
    CHECK(fc.measure() > 0.0);
    for (auto [a, b] : fc.removed()) {
        const double mid = 0.5 * (a + b);
        CHECK(s.eval(Vec{{mid}}).hessian(0, 0) > 0.0);
        CHECK(s.eval(Vec{{a}}).hessian(0, 0) == 0.0);
        CHECK(s.eval(Vec{{b}}).hessian(0, 0) == 0.0);
    }
    CHECK(s.eval(Vec{{0.0}}).hessian(0, 0) == 0.0);
    CHECK(marked_length_1d(s, 4096, 1e-12) == doctest::Approx(fc.measure()).epsilon(1e-9));
}

TEST_CASE("singular fractions") {
    const SingularReport para = singular_fraction(make_builtin("paraboloid"), 32, 1e-9);
    CHECK(para.fraction == 0.0);
    CHECK_FALSE(para.box_dimension.has_value());
    const SingularReport quad = singular_fraction(make_builtin("degenerate-quadratic", {1, 2, 1, 0, 0, 0}), 32, 1e-9);
    CHECK(quad.fraction == 1.0);
    CHECK(singular_fraction(make_builtin("degenerate-quadratic", {4, -4, 1, 0.5, 0, 2}), 16, 1e-9).fraction == 1.0);
    CHECK_THROWS_AS((void)singular_fraction(make_builtin("paraboloid"), 8, 1e-9), ArgumentError);

    const Hypersurface gn = make_builtin("gordan-noether");
    SplitMix64 rng(17);
    for (int i = 0; i < 1000; ++i) {
        Vec x(5);
        for (int k = 0; k < 5; ++k) x[k] = rng.uniform(-2.0, 2.0);
        const Mat h = gn.eval(x).hessian;
        CHECK(std::abs(h.determinant()) < 1e-9 * row_scale(h));
        CHECK(hessian_singular(h, 1e-9));
    }
}

TEST_CASE("condition II") {
    const std::vector<int> levels{16, 32, 64, 128};
    CHECK(condition_II_check(make_builtin("paraboloid"), DimensionFunction::power(0.5), levels).verdict ==
          ConditionIIVerdict::Pass);
    CHECK(condition_II_check(make_builtin("degenerate-quadratic", {1, 2, 1, 0, 0, 0}), DimensionFunction::power(1.5), levels)
              .verdict == ConditionIIVerdict::Fail);
    const Hypersurface cubic = make_builtin("random-poly", {3, 3, 1});
    const ConditionIIReport pass = condition_II_check(cubic, DimensionFunction::power(1.2), levels);
    CHECK(pass.verdict == ConditionIIVerdict::Pass);
    const ConditionIIReport grow = condition_II_check(cubic, DimensionFunction::power(0.8), levels);
    CHECK(grow.verdict != ConditionIIVerdict::Pass);
    CHECK(grow.levels.back().cost > grow.levels.front().cost);
    const ConditionIIReport fat = condition_II_check(make_builtin("fat-cantor"), DimensionFunction::power(1.0), {64, 128, 256, 512});
    CHECK(fat.verdict == ConditionIIVerdict::Fail);
    CHECK_THROWS_AS((void)condition_II_check(cubic, DimensionFunction::power(1.2), {16, 32}), ArgumentError);
}

TEST_CASE("singular set refinement over random cubics") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Hypersurface s = make_builtin("random-poly", {3, 3, static_cast<double>(seed)});
        double prev = 2.0;
        for (double tol : {1e-2, 1e-3, 1e-4}) {
            const SingularReport r = singular_fraction(s, 128, tol);
            CHECK(r.fraction <= prev);
            prev = r.fraction;
            if (r.box_dimension) CHECK(*r.box_dimension <= 1.3);
        }
    }
}

TEST_CASE("kernel field") {
    const KernelField k = kernel_field(square_of_sum(), Vec{{0.2, 0.5}});
    CHECK(k.nullity == 1);
    CHECK_FALSE(k.ambiguous);
    CHECK(k.direction[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(k.direction[1] == doctest::Approx(-1.0 / std::sqrt(2.0)));
    const KernelField flipped = kernel_field(square_of_sum(), Vec{{0.2, 0.5}}, Vec{{-1.0, 0.0}});
    CHECK(flipped.direction[0] < 0.0);
    CHECK_THROWS_AS((void)kernel_field(make_builtin("paraboloid"), Vec{{0.1, 0.1}}), NoKernelError);

    const Hypersurface gn = make_builtin("gordan-noether");
    const Vec x0{{1.0, 1.0, 0.0, 0.0, 0.0}};
    const KernelField kg = kernel_field(gn, x0);
    CHECK(kg.nullity == 1);
    const Vec want = Vec{{0.0, 0.0, 1.0, -2.0, 1.0}} / std::sqrt(6.0);
    CHECK(std::abs(kg.direction.dot(want)) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK((gn.eval(x0).hessian * Vec{{0.0, 0.0, 1.0, -2.0, 1.0}}).norm() < 1e-12);

    const KernelField zero = kernel_field(make_builtin("degenerate-quadratic", {0, 0, 0, 1, 1, 0}), Vec{{0.1, 0.1}});
    CHECK(zero.nullity == 2);
    CHECK(zero.ambiguous);

    SplitMix64 rng(5);
    for (int i = 0; i < 200; ++i) {
        Vec x(5);
        for (int k2 = 0; k2 < 5; ++k2) x[k2] = rng.uniform(-2.0, 2.0);
        const Mat h = gn.eval(x).hessian;
        try {
            const KernelField kf = kernel_field(gn, x);
            CHECK((h * kf.direction).norm() <= 1e-6 * h.norm());
        } catch (const NoKernelError&) {
            FAIL("det is identically zero, a kernel must exist");
        }
    }
}

TEST_CASE("fibers") {
    const Fiber line = trace_fiber(square_of_sum(), Vec{{0.3, 0.1}}, 0.01, 1.0);
    CHECK(line.length >= 0.5);
    CHECK_FALSE(line.truncated);
    for (const Vec& p : line.points) CHECK(p[0] + p[1] == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(line.diagnostics.straightness < 1e-8);
    CHECK(line.diagnostics.gradient_drift < 1e-8);
    CHECK(line.diagnostics.affinity < 1e-8);

    const Hypersurface gn = make_builtin("gordan-noether");
    const Fiber f = trace_fiber(gn, Vec{{1.0, 1.0, 0.0, 0.0, 0.0}}, 0.01, 1.0);
    CHECK(f.length >= 0.5);
    CHECK(f.diagnostics.straightness <= 1e-6);
    CHECK(f.diagnostics.gradient_drift <= 1e-6);
    CHECK(f.diagnostics.affinity <= 1e-6);
    for (const Vec& p : f.points) {
        CHECK(gn.domain().contains(p, 1e-12));
        CHECK(gn.eval(p).value == doctest::Approx(2.0).epsilon(1e-9));
    }

    // Stops at the boundary of U.
    const Fiber edge = trace_fiber(square_of_sum(), Vec{{0.9, 0.9}}, 0.01, 10.0);
    for (const Vec& p : edge.points) CHECK(square_of_sum().domain().contains(p, 1e-12));
    CHECK_THROWS_AS((void)trace_fiber(make_builtin("paraboloid"), Vec{{0.1, 0.2}}, 0.01, 1.0), NoKernelError);
}

TEST_CASE("nullity is upper semicontinuous") {
    for (const char* name : {"paraboloid", "gordan-noether"}) {
        const Hypersurface s = make_builtin(name);
        const SemicontinuityReport r = semicontinuity_check(s, 4, 4);
        CHECK(r.checked > 0);
        CHECK(r.violations == 0);
    }
    const SemicontinuityReport c = semicontinuity_check(make_builtin("random-poly", {3, 3, 2}), 8, 4);
    CHECK(c.violations == 0);
}
