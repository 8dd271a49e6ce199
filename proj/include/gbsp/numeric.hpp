#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gbsp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IntVec = std::vector<long long>;

// Error taxonomy shared by every module.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};
struct GradientDegeneracyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnsupportedRegimeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoKernelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Neumaier's variant of Kahan summation. Order-dependent, so callers fix
/// the order to get reproducible totals.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) {
        add(x);
        return *this;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = slope*x + intercept.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw ArgumentError("fit_line: need at least two matching samples");
    const double m = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw ArgumentError("fit_line: degenerate abscissae");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

inline long long max_norm(std::span<const long long> q) {
    long long m = 0;
    for (long long v : q) m = std::max(m, v < 0 ? -v : v);
    return m;
}

inline bool is_zero(std::span<const long long> q) { return max_norm(q) == 0; }

/// Runs body(i) for i in [0, count) on `threads` workers with static
/// contiguous chunking. Callers write into slot i and reduce in index order,
/// which makes results independent of the thread count.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
    const std::size_t workers =
        std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = count * w / workers;
        const std::size_t end = count * (w + 1) / workers;
        pool.emplace_back([&body, begin, end] {
            for (std::size_t i = begin; i < end; ++i) body(i);
        });
    }
}

/// SplitMix64; used wherever a reproducible stream of bits is needed
/// independent of the standard library's distribution implementations.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    std::uint64_t state_;
};

}  // namespace gbsp
