#include "gbsp/hessian.hpp"
#include "gbsp/model.hpp"

#include <doctest.h>

#include <string>

using namespace gbsp;

TEST_CASE("box validation") {
    CHECK_THROWS_AS(Box(Vec{{0.0}}, Vec{{0.0}}), ArgumentError);
    CHECK_THROWS_AS(Box(Vec{{0.0, 0.0}}, Vec{{1.0}}), ArgumentError);
    const Box b = Box::cube(2, -1.0, 1.0);
    CHECK(b.contains(Vec{{1.0, -1.0}}));
    CHECK_FALSE(b.contains(Vec{{1.1, 0.0}}));
    CHECK(b.diameter() == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("window must sit strictly inside the domain") {
    const Box U = Box::cube(2, -1.0, 1.0);
    CHECK_THROWS_AS(CompactWindow(U, Box::cube(2, -1.0, 0.5)), ArgumentError);
    CHECK(CompactWindow::inset(U, 0.1).margin() == doctest::Approx(0.1));
}

TEST_CASE("fat cantor ledger measure") {
    const FatCantor fc(3, 0.5);
    CHECK(fc.removed().size() == 7);
    CHECK(fc.measure() == doctest::Approx(1.0 - 0.5 * (1.0 - 0.125)));
    CHECK_THROWS_AS(FatCantor(0, 0.5), ArgumentError);
    CHECK_THROWS_AS(FatCantor(3, 1.0), ArgumentError);
}

TEST_CASE("fat cantor second derivative is the distance to T") {
    const FatCantor fc(5, 0.5);
    for (auto [a, b] : fc.removed()) {
        const double m = 0.5 * (a + b);
        CHECK(fc.distance(m) == doctest::Approx(0.5 * (b - a)));
        CHECK(fc.distance(a) == 0.0);
        CHECK(fc.distance(b) == 0.0);
    }
    CHECK(fc.distance(0.0) == 0.0);
    // Central differences of the closed forms.
    const double h = 1e-5;
    for (double x : {0.1, 0.37, 0.45, 0.731, 0.9}) {
        const double r_fd = (fc.second_integral(x + h) - fc.second_integral(x - h)) / (2 * h);
        CHECK(r_fd == doctest::Approx(fc.first_integral(x)).epsilon(1e-6));
        const double d_fd = (fc.first_integral(x + h) - fc.first_integral(x - h)) / (2 * h);
        CHECK(d_fd == doctest::Approx(fc.distance(x)).epsilon(1e-6).scale(1e-5));
    }
}

TEST_CASE("approximating functions") {
    const IntVec q{2, -1, 2};
    CHECK(ApproxFunction::power(3.0)(q) == doctest::Approx(0.125));
    CHECK_THROWS_AS((void)ApproxFunction::power(3.0)(IntVec{0, 0, 0}), ArgumentError);
    const auto lc = ApproxFunction::log_corrected(3.0, 1.0);
    CHECK(lc(q) == doctest::Approx(0.125 / (1.0 + std::log(2.0))));
    const auto qn = ApproxFunction::quasi_norm_power(2.0, {0.5, 1.5});
    // ||(3, 1)||_v = max(3^2, 1^{2/3}) = 9
    CHECK(qn(IntVec{3, 1}) == doctest::Approx(1.0 / 81.0));
    CHECK_FALSE(qn.radial());
}

TEST_CASE("quasi-norm weights must sum to n") {
    try {
        (void)ApproxFunction::quasi_norm_power(2.0, {0.5, 1.0});
        FAIL("expected rejection");
    } catch (const ArgumentError& e) {
        CHECK(std::string(e.what()).find("psi.weights") != std::string::npos);
    }
}

TEST_CASE("dimension functions") {
    const auto f = DimensionFunction::power(2.0);
    CHECK(f(0.1) == doctest::Approx(0.01));
    CHECK(f(0.0) == 0.0);
    CHECK_THROWS_AS((void)f(-1.0), ArgumentError);
    CHECK(f.F(3, 0.5) == doctest::Approx(0.5));
    CHECK_THROWS_AS((void)f.F(3, 0.0), ArgumentError);
    const auto pl = DimensionFunction::power_log(1.2, 1.0);
    double prev = 0.0;
    for (double r = 1e-6; r < 2.0; r *= 1.3) {
        CHECK(pl(r) > prev);
        prev = pl(r);
    }
    CHECK_THROWS_AS(DimensionFunction::power_log(1.0, 2.0), ArgumentError);
}

TEST_CASE("condition (I) gate") {
    CHECK(check_condition_I(DimensionFunction::power(1.5), 1.5, 3).verdict == ConditionVerdict::Pass);
    CHECK(check_condition_I(DimensionFunction::power(2.5), 2.5, 3).verdict == ConditionVerdict::Reject);
    CHECK(check_condition_I(DimensionFunction::power(2.0), 2.0, 3).verdict == ConditionVerdict::Reject);
    CHECK(check_condition_I(DimensionFunction::power(3.0), 3.0, 4).verdict == ConditionVerdict::Pass);
    // Declaring too small an exponent is caught empirically.
    CHECK(check_condition_I(DimensionFunction::power(1.5), 1.0, 3).verdict == ConditionVerdict::Fail);
}

TEST_CASE("surface evaluation is domain checked") {
    const Hypersurface s = make_builtin("paraboloid");
    CHECK(s.n() == 3);
    CHECK(s.eval(Vec{{0.5, 0.5}}).value == doctest::Approx(0.5));
    CHECK_THROWS_AS((void)s.eval(Vec{{1.5, 0.0}}), DomainError);
    CHECK(s.eval_unchecked(Vec{{1.5, 0.0}}).value == doctest::Approx(2.25));
}

TEST_CASE("shift evaluation") {
    Polynomial t(2);
    t.add_term({0, 0}, 0.3);
    t.add_term({1, 0}, 0.1);
    const Shift sh(t);
    const Jet j = sh.eval(Vec{{2.0, 5.0}});
    CHECK(j.value == doctest::Approx(0.5));
    CHECK(j.gradient[0] == doctest::Approx(0.1));
    CHECK(Shift::zero(2).is_zero());
}
