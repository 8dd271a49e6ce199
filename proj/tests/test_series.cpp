#include "gbsp/series.hpp"

#include <doctest.h>

#include <cmath>

using namespace gbsp;

TEST_CASE("series terms") {
    const auto psi = ApproxFunction::power(3.0);
    const IntVec q{2, -1, 2};
    CHECK(gbsp_term(q, psi, DimensionFunction::power(2.0), 3) == doctest::Approx(0.125));
    CHECK(gbsp_term(q, psi, DimensionFunction::power(1.0), 3) == doctest::Approx(2.0));
    CHECK(gbsp_term(IntVec{5, 0, 1}, ApproxFunction::power(1.5), DimensionFunction::power(1.0), 3) == doctest::Approx(5.0));
    CHECK(sbv_term(IntVec{4, 0, 0}, psi, DimensionFunction::power(3.0), 3) == doctest::Approx(std::pow(4.0, -3.0)));
    CHECK(sbv_term(IntVec{7}, ApproxFunction::power(2.0), DimensionFunction::power(1.5), 1) ==
          doctest::Approx(7.0 * std::pow(std::pow(7.0, -2.0) / 7.0, 1.5)));
    CHECK_THROWS_AS((void)gbsp_term(IntVec{0, 0, 0}, psi, DimensionFunction::power(2.0), 3), ArgumentError);
    CHECK_THROWS_AS((void)sbv_term(IntVec{0, 0, 0}, psi, DimensionFunction::power(2.0), 3), ArgumentError);

    SplitMix64 rng(1);
    const auto qpsi = ApproxFunction::quasi_norm_power(2.0, {0.5, 1.0, 1.5});
    for (int i = 0; i < 200; ++i) {
        IntVec v(3);
        do {
            for (auto& c : v) c = static_cast<long long>(rng.next() % 31) - 15;
        } while (is_zero(v));
        const auto f = DimensionFunction::power(rng.uniform(0.5, 3.0));
        const double ratio = gbsp_term(v, qpsi, f, 3) / sbv_term(v, qpsi, f, 3);
        CHECK(ratio == doctest::Approx(qpsi(v) / static_cast<double>(max_norm(v))).epsilon(1e-12));
    }
}

TEST_CASE("shell enumeration is exact and lexicographic") {
    for (int n = 1; n <= 4; ++n) {
        for (long long Q = 1; Q <= 6; ++Q) {
            long long count = 0;
            IntVec prev;
            bool ordered = true;
            for_each_in_shell(Q, n, [&](const IntVec& q) {
                ++count;
                if (max_norm(q) != Q) ordered = false;
                if (!prev.empty() && !(prev < q)) ordered = false;
                prev = q;
            });
            CHECK(ordered);
            CHECK(count == shell_size(Q, n));
            const auto full = static_cast<long long>(std::llround(std::pow(2.0 * Q + 1, n) - std::pow(2.0 * Q - 1, n)));
            CHECK(shell_size(Q, n) == full);
        }
    }
}

TEST_CASE("reference verdicts for series_scan") {
    const auto psi = ApproxFunction::power(3.0);
    const auto at = [&](double s) { return series_scan(psi, DimensionFunction::power(s), 3, 128, SeriesMode::Gbsp); };
    const SeriesReport critical = at(2.0);
    CHECK(critical.verdict == SeriesVerdict::Boundary);
    CHECK(critical.slope == doctest::Approx(-1.0).epsilon(0.02));
    CHECK(critical.shells[63].shell_sum == doctest::Approx(24.0 / 64.0).epsilon(0.01));
    const SeriesReport conv = at(2.5);
    CHECK(conv.verdict == SeriesVerdict::Converges);
    CHECK(conv.slope == doctest::Approx(-3.0).epsilon(0.02));
    const SeriesReport div = at(1.5);
    CHECK(div.verdict == SeriesVerdict::Diverges);
    CHECK(div.slope > -0.95);

    for (const SeriesReport& r : {critical, conv, div}) {
        double prev = 0.0;
        for (const ShellRow& row : r.shells) {
            CHECK(row.shell_sum >= 0.0);
            CHECK(row.cumulative >= prev);
            prev = row.cumulative;
        }
    }
    CHECK_THROWS_AS(series_scan(psi, DimensionFunction::power(2.0), 3, 15, SeriesMode::Gbsp), ArgumentError);
}

TEST_CASE("verdict matches the critical exponent on a 3x3x5 grid") {
    for (int n : {3, 4, 5}) {
        for (double tau : {2.0, 3.0, 5.0}) {
            const double sstar = dim_bound(n, tau);
            for (double k : {-0.5, -0.2, 0.0, 0.2, 0.5}) {
                const double s = sstar + k / (tau + 1.0);
                const SeriesReport r =
                    series_scan(ApproxFunction::power(tau), DimensionFunction::power(s), n, 64, SeriesMode::Gbsp);
                const SeriesVerdict want = k < -0.05   ? SeriesVerdict::Diverges
                                           : k > 0.05 ? SeriesVerdict::Converges
                                                       : SeriesVerdict::Boundary;
                CHECK_MESSAGE(r.verdict == want, "n=" << n << " tau=" << tau << " s=" << s << " slope=" << r.slope);
            }
        }
    }
}

TEST_CASE("radial fast path matches full enumeration") {
    const auto psi = ApproxFunction::log_corrected(3.0, 1.0);
    const auto f = DimensionFunction::power_log(2.2, 0.5);
    SeriesOptions full;
    full.force_enumeration = true;
    const SeriesReport a = series_scan(psi, f, 3, 32, SeriesMode::Sbv);
    const SeriesReport b = series_scan(psi, f, 3, 32, SeriesMode::Sbv, full);
    REQUIRE(a.shells.size() == b.shells.size());
    for (std::size_t i = 0; i < a.shells.size(); ++i)
        CHECK(a.shells[i].shell_sum == doctest::Approx(b.shells[i].shell_sum).epsilon(1e-12));
}

TEST_CASE("scans are bitwise identical across thread counts") {
    const auto psi = ApproxFunction::quasi_norm_power(3.0, {1.0, 0.5, 1.5});
    const auto f = DimensionFunction::power(2.2);
    SeriesOptions opts;
    opts.threads = 1;
    const std::string one = series_scan(psi, f, 3, 40, SeriesMode::Gbsp, opts).to_csv();
    for (int t : {2, 4, 8}) {
        opts.threads = t;
        CHECK(series_scan(psi, f, 3, 40, SeriesMode::Gbsp, opts).to_csv() == one);
    }
}

TEST_CASE("budget exhaustion reports a partial scan") {
    SeriesOptions opts;
    opts.budget = 5000;
    opts.force_enumeration = true;
    try {
        (void)series_scan(ApproxFunction::power(3.0), DimensionFunction::power(2.0), 3, 64, SeriesMode::Gbsp, opts);
        FAIL("expected a budget error");
    } catch (const SeriesBudgetError& e) {
        CHECK_FALSE(e.report.complete);
        CHECK_FALSE(e.report.shells.empty());
        CHECK(e.report.shells.size() < 64);
    }
}

TEST_CASE("lower order") {
    std::vector<double> schedule;
    for (double t = 2.0; t <= 1e6; t *= 2.0) schedule.push_back(t);
    CHECK(lower_order(ApproxFunction::power(2.5), 3, schedule) == doctest::Approx(2.5).epsilon(1e-12));

    // log(1/Psi)/log t = 3 + log(1 + log t)/log t; at t = 1e6 this is 3.195.
    const double t6 = 1e6;
    const double tau_log = lower_order(ApproxFunction::log_corrected(3.0, 1.0), 3, {t6});
    CHECK(tau_log == doctest::Approx(3.0 + std::log1p(std::log(t6)) / std::log(t6)).epsilon(1e-12));
    CHECK(tau_log - 3.0 < lower_order(ApproxFunction::log_corrected(3.0, 1.0), 3, {1e3}) - 3.0);

    // Quasi-norm: brute-force minimum of Psi over each max-norm shell.
    const auto qpsi = ApproxFunction::quasi_norm_power(2.0, {0.5, 1.5});
    std::vector<double> small;
    double brute = 1e300;
    for (long long t = 2; t <= 100; ++t) {
        small.push_back(static_cast<double>(t));
        double inf = 1e300;
        for_each_in_shell(t, 2, [&](const IntVec& q) { inf = std::min(inf, qpsi(q)); });
        if (t >= 51) brute = std::min(brute, std::log(1.0 / inf) / std::log(static_cast<double>(t)));
    }
    const double tau_q = lower_order(qpsi, 2, small);
    CHECK(tau_q == doctest::Approx(brute).epsilon(1e-9));
    CHECK(tau_q == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("dimension bound") {
    CHECK(dim_bound(3, 4.0) == doctest::Approx(1.8));
    CHECK(dim_bound(4, 3.0) == doctest::Approx(3.25));
    CHECK(dim_bound(3, 1e9) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_THROWS_AS((void)dim_bound(3, 0.0), ArgumentError);
    SplitMix64 rng(42);
    double prev = dim_bound(3, 0.1);
    for (double tau = 0.2; tau < 50.0; tau += 0.1) {
        const double b = dim_bound(3, tau);
        CHECK(b < prev);
        prev = b;
    }
    for (int i = 0; i < 1000; ++i) {
        const int n = 3 + static_cast<int>(rng.next() % 8);
        const double tau = rng.uniform(0.01, 100.0);
        const double alt = (tau * (n - 2) + 2.0 * n - 1.0) / (tau + 1.0);
        CHECK(std::abs(dim_bound(n, tau) - alt) <= 4 * std::numeric_limits<double>::epsilon() * alt);
    }
}
