#pragma once

#include "gbsp/model.hpp"

#include <string>
#include <vector>

namespace gbsp {

enum class SeriesMode { Gbsp, Sbv };
enum class SeriesVerdict { Converges, Diverges, Boundary };

std::string to_string(SeriesMode m);
std::string to_string(SeriesVerdict v);
SeriesMode parse_series_mode(const std::string& s);

/// ||q||^{n-1} Psi(q)^{2-n} f(Psi(q)/||q||), max-norm.
double gbsp_term(std::span<const long long> q, const ApproxFunction& psi, const DimensionFunction& f, int n);
/// ||q||^n Psi(q)^{1-n} f(Psi(q)/||q||).
double sbv_term(std::span<const long long> q, const ApproxFunction& psi, const DimensionFunction& f, int n);

/// (2Q+1)^n - (2Q-1)^n, exact.
long long shell_size(long long Q, int n);

/// Calls visit(q) for every q in Z^n with max-norm Q, lexicographically.
template <class Visit>
void for_each_in_shell(long long Q, int n, Visit&& visit) {
    IntVec q(static_cast<std::size_t>(n), -Q);
    // hit: some earlier coordinate already has |q_j| = Q.
    auto step = [&](auto&& self, int i, bool hit) -> void {
        if (i == n) {
            if (hit) visit(static_cast<const IntVec&>(q));
            return;
        }
        const bool last = i == n - 1;
        if (last && !hit) {
            q[static_cast<std::size_t>(i)] = -Q;
            visit(static_cast<const IntVec&>(q));
            if (Q != 0) {
                q[static_cast<std::size_t>(i)] = Q;
                visit(static_cast<const IntVec&>(q));
            }
            return;
        }
        for (long long v = -Q; v <= Q; ++v) {
            q[static_cast<std::size_t>(i)] = v;
            self(self, i + 1, hit || v == Q || v == -Q);
        }
    };
    step(step, 0, false);
}

struct ShellRow {
    long long Q = 0;
    long long count = 0;
    double shell_sum = 0.0;
    double cumulative = 0.0;
};

struct SeriesReport {
    SeriesMode mode = SeriesMode::Gbsp;
    int n = 0;
    long long Q_max = 0;
    std::vector<ShellRow> shells;
    double slope = 0.0;
    double margin = 0.05;
    SeriesVerdict verdict = SeriesVerdict::Boundary;
    bool complete = true;

    [[nodiscard]] double total() const { return shells.empty() ? 0.0 : shells.back().cumulative; }
    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] std::string to_json() const;
};

struct SeriesOptions {
    double margin = 0.05;
    int threads = 1;
    /// Maximum number of lattice vectors accounted for; 0 = unlimited.
    long long budget = 0;
    /// Enumerate every vector even when Psi is radial.
    bool force_enumeration = false;
};

struct SeriesBudgetError : std::runtime_error {
    SeriesBudgetError(const std::string& what, SeriesReport partial)
        : std::runtime_error(what), report(std::move(partial)) {}
    SeriesReport report;
};

/// Shell sums for Q = 1..Q_max, cumulative sums, dyadic log-log slope and verdict.
SeriesReport series_scan(const ApproxFunction& psi, const DimensionFunction& f, int n, long long Q_max,
                         SeriesMode mode, const SeriesOptions& opts = {});

/// min over the tail (last ceil(len/2) points) of log(1/Psi(t))/log t, with
/// Psi(t) the infimum of Psi over the max-norm shell of radius t.
double lower_order(const ApproxFunction& psi, int n, const std::vector<double>& t_schedule);

/// n - 2 + (n+1)/(tau+1).
double dim_bound(int n, double tau);

}  // namespace gbsp
