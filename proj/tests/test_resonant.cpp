#include "gbsp/hessian.hpp"
#include "gbsp/measure.hpp"
#include "gbsp/resonant.hpp"
#include "slab_probes.hpp"

#include <doctest.h>

using namespace gbsp;

namespace {

const Hypersurface& paraboloid() {
    static const Hypersurface s = make_builtin("paraboloid");
    return s;
}

CompactWindow window() { return CompactWindow::inset(paraboloid().domain(), 0.1); }

}  // namespace

TEST_CASE("h-field formulas") {
    const auto psi = ApproxFunction::power(3.0);
    const HField h = build_h(3, IntVec{2, -4, 8}, paraboloid(), Shift::zero(2), psi);
    CHECK(h.r()[0] == doctest::Approx(0.25));
    CHECK(h.r()[1] == doctest::Approx(-0.5));
    CHECK(h.rho() == doctest::Approx(std::pow(8.0, -3.0) / 8.0));
    const Vec x{{0.2, 0.4}};
    CHECK(h.eval(x).value == doctest::Approx(0.25 * 0.2 - 0.5 * 0.4 + 0.2 - 3.0 / 8.0));

    const HField h0 = build_h(-2, IntVec{1, 3, 0}, paraboloid(), Shift::zero(2), psi);
    CHECK(h0.rho() == doctest::Approx(1.0 / 27.0));
    CHECK(h0.eval(x).value == doctest::Approx(0.2 + 1.2 + 2.0));
    CHECK_THROWS_AS(build_h(0, IntVec{0, 0, 0}, paraboloid(), Shift::zero(2), psi), ArgumentError);
}

TEST_CASE("slab membership is |q.(x,g) - p - theta| < Psi") {
    const auto psi = ApproxFunction::power(1.0);
    Polynomial t(2);
    t.add_term({0, 0}, 0.3);
    t.add_term({1, 0}, 0.1);
    const Shift shift(t);
    const IntVec q{3, -2, 5};
    SplitMix64 rng(3);
    for (int i = 0; i < 500; ++i) {
        const Vec x{{rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)}};
        const long long p = static_cast<long long>(rng.next() % 9) - 4;
        const HField h = build_h(p, q, paraboloid(), shift, psi);
        const double form = 3 * x[0] - 2 * x[1] + 5 * x.squaredNorm() - p - shift.eval(x).value;
        CHECK(h.in_slab(x) == (std::abs(form) < psi(q)));
    }
}

TEST_CASE("regime classification") {
    const auto psi = ApproxFunction::power(3.0);
    SUBCASE("critical point at the origin") {
        const HField h = build_h(0, IntVec{0, 0, 5}, paraboloid(), Shift::zero(2), psi);
        const Regime r = classify_regime(h, window(), paraboloid());
        CHECK(r.tag == Regime::Tag::Case1);
        CHECK(r.v.norm() < 1e-9);
        CHECK(r.c_lo == doctest::Approx(2.0));
        CHECK(r.c_hi == doctest::Approx(2.0));
    }
    SUBCASE("affine h") {
        const HField h = build_h(0, IntVec{1, 2, 0}, paraboloid(), Shift::zero(2), psi);
        const Regime r = classify_regime(h, window(), paraboloid());
        CHECK(r.tag == Regime::Tag::Case2);
        CHECK(r.gradient_scale == doctest::Approx(std::sqrt(5.0)));
    }
    SUBCASE("critical point just outside U") {
        const HField h = build_h(0, IntVec{21, 0, 10}, paraboloid(), Shift::zero(2), psi);
        ClassifyOptions opts;
        opts.eps_grad = 0.5;
        const Regime r = classify_regime(h, CompactWindow::inset(paraboloid().domain(), 0.05), paraboloid(), opts);
        CHECK(r.tag == Regime::Tag::Exceptional);
        CoverOptions co;
        CHECK_THROWS_AS(cover_slab(h, r, window(), DimensionFunction::power(1.5), co), UnsupportedRegimeError);
    }
}

TEST_CASE("sublevel cover contains its target") {
    // phi = x + 0.3 y^2 around the origin.
    const ScalarField phi = [](const Vec& y) {
        Jet j{y[0] + 0.3 * y[1] * y[1], Vec{{1.0, 0.6 * y[1]}}, Mat::Zero(2, 2)};
        j.hessian(1, 1) = 0.6;
        return j;
    };
    const Vec x{{0.0, 0.0}};
    const double alpha = 0.02, delta = 0.002;
    SublevelOptions opts;
    opts.hessian_bound = 0.6;
    const BallCover cover = cover_sublevel(phi, x, alpha, delta, opts);
    CHECK(cover.materialized());
    CHECK(static_cast<double>(cover.size()) <= 4.0 * alpha / delta);
    for (const Ball& b : cover.balls) CHECK(b.radius == doctest::Approx(delta));

    std::vector<Vec> probes;
    SplitMix64 rng(11);
    while (probes.size() < 4000) {
        const Vec y{{rng.uniform(-alpha, alpha), rng.uniform(-alpha, alpha)}};
        if (y.norm() < alpha && std::abs(phi(y).value) < delta) probes.push_back(y);
    }
    CHECK(containment_fraction(cover, probes) == 1.0);
}

TEST_CASE("sublevel cover preconditions") {
    const ScalarField phi = [](const Vec& y) {
        Jet j{y[0] * y[0] - 0.25, Vec{{2 * y[0], 0.0}}, Mat::Zero(2, 2)};
        j.hessian(0, 0) = 2.0;
        return j;
    };
    SublevelOptions opts;
    opts.hessian_bound = 2.0;
    CHECK_THROWS_AS(cover_sublevel(phi, Vec{{0.01, 0.0}}, 0.1, 0.001, opts), GradientDegeneracyError);
    // Target provably empty: no balls.
    CHECK(cover_sublevel(phi, Vec{{0.9, 0.0}}, 0.001, 0.001, opts).size() == 0);
    // delta >= alpha: the sub-ball itself.
    const BallCover whole = cover_sublevel(phi, Vec{{0.9, 0.0}}, 0.001, 0.5, opts);
    REQUIRE(whole.size() == 1);
    CHECK(whole.balls[0].radius == 0.001);
    // Counted mode agrees with the materialised count.
    opts.materialize_limit = 0;
    const BallCover counted = cover_sublevel(phi, Vec{{0.5, 0.0}}, 0.01, 0.0005, opts);
    CHECK(counted.groups.size() == 1);
    opts.materialize_limit = 1 << 20;
    const BallCover listed = cover_sublevel(phi, Vec{{0.5, 0.0}}, 0.01, 0.0005, opts);
    CHECK(listed.size() <= counted.size());
}

TEST_CASE("case 1 annuli") {
    const AnnulusPlan plan = case1_annuli(Vec{{0.0, 0.0}}, window().box(), 1e-4, 1.0 / 64.0);
    // max distance from v to K is 0.9 sqrt 2 in [2^{-k0-1}, 2^{-k0})
    const double far = 0.9 * std::sqrt(2.0);
    CHECK(std::ldexp(1.0, -plan.k0 - 1) <= far);
    CHECK(far < std::ldexp(1.0, -plan.k0));
    CHECK(std::ldexp(1.0, plan.k_trunc) * 1e-4 > 2.0 * std::ldexp(1.0, -plan.k_trunc));
    CHECK(plan.inner_radius == doctest::Approx(std::ldexp(1.0, -plan.k_trunc)));
    for (const Annulus& a : plan.annuli) {
        CHECK(a.alpha == doctest::Approx(a.outer / 64.0));
        CHECK_FALSE(a.centers.empty());
    }
}

TEST_CASE("slab covers contain sampled slab points") {
    const auto psi = ApproxFunction::power(1.0);
    const auto f = DimensionFunction::power(1.5);
    const CompactWindow K = window();
    SplitMix64 rng(5);
    int checked = 0;
    for (int trial = 0; trial < 12; ++trial) {
        IntVec q(3);
        do {
            for (auto& v : q) v = static_cast<long long>(rng.next() % 41) - 20;
        } while (is_zero(q));
        const auto adm = count_admissible_p(q, K, paraboloid(), Shift::zero(2), psi);
        if (adm.count == 0) continue;
        const long long p = adm.p_min + static_cast<long long>(rng.next() % static_cast<std::uint64_t>(adm.count));
        const HField h = build_h(p, q, paraboloid(), Shift::zero(2), psi);
        const Regime r = classify_regime(h, K, paraboloid());
        if (r.tag == Regime::Tag::Exceptional) continue;
        CoverOptions opts;
        opts.materialize_limit = 1 << 22;
        const CoverReport rep = cover_slab(h, r, K, f, opts);
        REQUIRE(rep.cover.materialized());
        const auto probes = testing::slab_probes(h, K.box(), 48, 300, trial);
        CHECK(containment_fraction(rep.cover, probes) == 1.0);
        CHECK(rep.max_count_ratio <= kCoverCountConstant);
        ++checked;
    }
    CHECK(checked >= 8);
}

TEST_CASE("slab family prices the same cover as cover_slab") {
    const auto psi = ApproxFunction::power(3.0);
    const auto f = DimensionFunction::power(2.5);
    const CompactWindow K = window();
    for (const IntVec& q : {IntVec{0, 0, 5}, IntVec{7, -2, 1}, IntVec{3, 4, 10}}) {
        const auto adm = count_admissible_p(q, K, paraboloid(), Shift::zero(2), psi);
        const HField h = build_h(adm.p_min, q, paraboloid(), Shift::zero(2), psi);
        const Regime r = classify_regime(h, K, paraboloid());
        CoverOptions opts;
        opts.materialize_limit = 0;
        const SlabFamily fam(h, r, K, opts);
        for (long long p = adm.p_min; p <= adm.p_max; ++p) {
            const CoverReport rep = cover_slab(h.with_p(p), r, K, f, opts);
            CHECK(fam.ball_count(p) == rep.n_balls);
            CHECK(fam.cost(p, f) == doctest::Approx(rep.f_cost).epsilon(1e-12));
        }
    }
}

TEST_CASE("admissible p count agrees with the exact range") {
    const auto psi = ApproxFunction::power(1.0);
    const CompactWindow K = window();
    Polynomial t(2);
    t.add_term({0, 0}, 0.3);
    t.add_term({1, 0}, 0.1);
    const Shift shift(t);
    SplitMix64 rng(9);
    for (int trial = 0; trial < 150; ++trial) {
        IntVec q(3);
        do {
            for (auto& v : q) v = static_cast<long long>(rng.next() % 41) - 20;
        } while (is_zero(q));
        const bool shifted = trial % 2 == 1;
        const auto adm = count_admissible_p(q, K, paraboloid(), shifted ? shift : Shift::zero(2), psi);
        const auto [lo, hi] = testing::paraboloid_form_range(q, shifted ? 0.3 : 0.0, shifted ? 0.1 : 0.0, K.box());
        long long brute = 0, p_min = 0, p_max = -1;
        for (long long p = -200; p <= 200; ++p) {
            if (lo - psi(q) < p && p < hi + psi(q)) {
                if (brute == 0) p_min = p;
                p_max = p;
                ++brute;
            }
        }
        CHECK(adm.count == brute);
        if (brute > 0) {
            CHECK(adm.p_min == p_min);
            CHECK(adm.p_max == p_max);
        }
    }
}

TEST_CASE("module examples") {
    const auto psi = ApproxFunction::power(3.0);
    const Vec x{{0.3, -0.2}};
    SUBCASE("q_n nonzero branch") {
        const HField h = build_h(3, IntVec{2, -1, 4}, paraboloid(), Shift::zero(2), psi);
        CHECK(h.r()[0] == 0.5);
        CHECK(h.r()[1] == -0.25);
        CHECK(h.eval(x).value == doctest::Approx(0.5 * 0.3 + 0.25 * 0.2 + 0.09 + 0.04 - 0.75));
        CHECK(h.rho() == doctest::Approx(psi(IntVec{2, -1, 4}) / 4.0));
    }
    SUBCASE("q_n zero branch") {
        const HField h = build_h(1, IntVec{3, 2, 0}, paraboloid(), Shift::zero(2), psi);
        CHECK(h.eval(x).value == doctest::Approx(0.9 - 0.4 - 1.0));
        CHECK(h.rho() == doctest::Approx(psi(IntVec{3, 2, 0})));
        CHECK(h.eval(x).hessian.norm() == 0.0);
    }
    SUBCASE("large linear part is Case 2 on a small window") {
        const CompactWindow small(paraboloid().domain(), Box::cube(2, -0.5, 0.5));
        const HField h = build_h(0, IntVec{100, 0, 1}, paraboloid(), Shift::zero(2), ApproxFunction::power(1.0));
        const Regime r = classify_regime(h, small, paraboloid());
        CHECK(r.tag == Regime::Tag::Case2);
        CHECK(r.gradient_scale >= 99.0 - 1e-9);
        CHECK(r.c_hi / r.c_lo <= 1e3);
        const CoverReport rep = cover_slab(h, r, small, DimensionFunction::power(1.5));
        const auto probes = testing::slab_probes(h, small.box(), 64, 300, 1);
        CHECK(containment_fraction(rep.cover, probes) == 1.0);
        for (const Ball& b : rep.cover.balls) CHECK(b.radius <= h.rho() / 99.0 * (1 + 1e-9));
    }
    SUBCASE("Case 1 constants and cost window") {
        const auto f = DimensionFunction::power(2.0);
        for (long long p : {0, 1, 2, 4}) {
            const HField h = build_h(p, IntVec{0, 0, 5}, paraboloid(), Shift::zero(2), psi);
            const Regime r = classify_regime(h, window(), paraboloid());
            REQUIRE(r.tag == Regime::Tag::Case1);
            CHECK(r.c_hi / r.c_lo <= 1e3);
            const CoverReport rep = cover_slab(h, r, window(), f);
            CHECK(rep.bound == doctest::Approx(0.0016));
            CHECK(rep.ratio >= 1e-2);
            CHECK(rep.ratio <= 1e2);
        }
        const HField far = build_h(100, IntVec{0, 0, 5}, paraboloid(), Shift::zero(2), psi);
        const Regime r = classify_regime(far, window(), paraboloid());
        const CoverReport empty = cover_slab(far, r, window(), f);
        CHECK(empty.n_balls == 0);
        CHECK(empty.f_cost == 0.0);
    }
}

TEST_CASE("sublevel examples") {
    const ScalarField flat = [](const Vec& y) { return Jet{y[1], Vec{{0.0, 1.0}}, Mat::Zero(2, 2)}; };
    SublevelOptions opts;
    const BallCover c = cover_sublevel(flat, Vec::Zero(2), 1.0, 0.1, opts);
    CHECK(static_cast<double>(c.size()) <= kCoverCountConstant * (1.0 / 0.1));
    std::vector<Vec> probes;
    for (int i = 0; i < 200; ++i)
        for (int j = 0; j < 200; ++j) {
            const Vec y{{-1.0 + 2.0 * (i + 0.5) / 200, -1.0 + 2.0 * (j + 0.5) / 200}};
            if (y.norm() < 1.0 && std::abs(y[1]) < 0.1) probes.push_back(y);
        }
    CHECK(containment_fraction(c, probes) == 1.0);

    const ScalarField shifted = [](const Vec& y) { return Jet{y[1] + 10.0, Vec{{0.0, 1.0}}, Mat::Zero(2, 2)}; };
    CHECK(cover_sublevel(shifted, Vec::Zero(2), 1.0, 0.1, opts).size() == 0);

    // phi = h of (p, q) = (1, (0, 0, 5)) near (0.3, 0.3): count within a factor 4 of alpha/delta.
    const HField h = build_h(1, IntVec{0, 0, 5}, paraboloid(), Shift::zero(2), ApproxFunction::power(3.0));
    const ScalarField phi = [&h](const Vec& y) { return h.eval(y); };
    const Vec x{{0.3, 0.3}};
    const double kappa = h.eval(x).gradient.norm();
    const double alpha = kappa / (8.0 * 2.0 * 2.0);
    const double delta = alpha / 40.0;
    SublevelOptions o2;
    o2.hessian_bound = 2.0;
    const BallCover near = cover_sublevel(phi, x + Vec{{0.0, 0.0}}, alpha, delta, o2);
    CHECK(static_cast<double>(near.size()) <= 4.0 * alpha / delta);
}

TEST_CASE("admissible p examples") {
    const CompactWindow half(paraboloid().domain(), Box::cube(2, -0.5, 0.5));
    const auto psi = ApproxFunction::power(3.0);
    const auto a = count_admissible_p(IntVec{3, 4, 5}, half, paraboloid(), Shift::zero(2), psi);
    CHECK(a.range_min == doctest::Approx(-1.25).epsilon(1e-9));
    CHECK(a.range_max == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(a.count <= 11);
    const auto b = count_admissible_p(IntVec{0, 0, 1}, half, paraboloid(), Shift::zero(2), psi);
    // Psi = 1 at ||q|| = 1 for every supported family, so p = 1 is also admissible.
    CHECK(b.range_min == doctest::Approx(0.0));
    CHECK(b.range_max == doctest::Approx(0.5));
    CHECK(b.count == 2);
    CHECK(b.p_min == 0);
    SplitMix64 rng(12);
    for (int i = 0; i < 50; ++i) {
        IntVec q(3);
        do {
            for (auto& v : q) v = static_cast<long long>(rng.next() % 11) - 5;
        } while (is_zero(q));
        for (int k = 0; k < 3; ++k) {
            IntVec q2 = q;
            for (auto& v : q2) v *= 2;
            const auto c1 = count_admissible_p(q, half, paraboloid(), Shift::zero(2), psi).count;
            const auto c2 = count_admissible_p(q2, half, paraboloid(), Shift::zero(2), psi).count;
            CHECK(c2 <= 2 * c1 + 2);
            q = q2;
        }
    }
}

TEST_CASE("annuli partition K minus the inner ball") {
    const Vec v{{0.2, -0.1}};
    const Box K = window().box();
    const AnnulusPlan plan = case1_annuli(v, K, 1e-3, 1.0 / 64.0);
    for (std::size_t i = 1; i < plan.annuli.size(); ++i) CHECK(plan.annuli[i].outer == plan.annuli[i - 1].inner);
    SplitMix64 rng(2);
    for (int i = 0; i < 2000; ++i) {
        const Vec y{{rng.uniform(K.lower[0], K.upper[0]), rng.uniform(K.lower[1], K.upper[1])}};
        const double dist = (y - v).norm();
        if (dist < plan.inner_radius) continue;
        int owners = 0;
        bool covered = false;
        for (const Annulus& a : plan.annuli) {
            if (a.inner <= dist && dist < a.outer) {
                ++owners;
                for (const Vec& c : a.centers) covered = covered || (y - c).norm() <= a.alpha * (1 + 1e-12);
            }
        }
        CHECK(owners == 1);
        CHECK(covered);
    }
}
