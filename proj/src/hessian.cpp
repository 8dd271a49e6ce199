#include "gbsp/hessian.hpp"

#include <json.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace gbsp {

namespace {

int integer_param(double v, const std::string& what, int lo, int hi) {
    if (!std::isfinite(v) || v != std::floor(v) || v < lo || v > hi)
        throw ArgumentError(what + " must be an integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return static_cast<int>(v);
}

void expect_params(const std::string& name, const std::vector<double>& params, std::size_t lo, std::size_t hi) {
    if (params.size() < lo || params.size() > hi)
        throw ArgumentError("surface.params for " + name + " expects " + std::to_string(lo) +
                            (lo == hi ? "" : ".." + std::to_string(hi)) + " values");
}

Polynomial::Exponents unit_exp(int d, std::initializer_list<std::pair<int, int>> powers) {
    Polynomial::Exponents e(static_cast<std::size_t>(d), 0);
    for (auto [axis, k] : powers) e[static_cast<std::size_t>(axis)] = k;
    return e;
}

}  // namespace

std::vector<std::string> builtin_names() {
    return {"paraboloid", "degenerate-quadratic", "gordan-noether", "fat-cantor", "random-poly"};
}

Hypersurface make_builtin(const std::string& name, const std::vector<double>& params) {
    if (name == "paraboloid") {
        expect_params(name, params, 0, 1);
        const int n = params.empty() ? 3 : integer_param(params[0], "paraboloid n", 3, 8);
        const int d = n - 1;
        Polynomial g(d);
        for (int i = 0; i < d; ++i) g.add_term(unit_exp(d, {{i, 2}}), 1.0);
        return Hypersurface(n, Box::cube(d, -1.0, 1.0), std::move(g), "paraboloid");
    }
    if (name == "degenerate-quadratic") {
        expect_params(name, params, 6, 6);
        const double b1 = params[0], b2 = params[1], b3 = params[2];
        const double disc = b2 * b2 - 4.0 * b1 * b3;
        if (std::abs(disc) > 1e-12 * std::max({1.0, b2 * b2, std::abs(4.0 * b1 * b3)}))
            throw ArgumentError("degenerate-quadratic requires b2^2 = 4 b1 b3");
        Polynomial g(2);
        g.add_term(unit_exp(2, {{0, 2}}), b1);
        g.add_term(unit_exp(2, {{0, 1}, {1, 1}}), b2);
        g.add_term(unit_exp(2, {{1, 2}}), b3);
        g.add_term(unit_exp(2, {{0, 1}}), params[3]);
        g.add_term(unit_exp(2, {{1, 1}}), params[4]);
        g.add_term(unit_exp(2, {}), params[5]);
        return Hypersurface(3, Box::cube(2, -1.0, 1.0), std::move(g), "degenerate-quadratic");
    }
    if (name == "gordan-noether") {
        expect_params(name, params, 0, 0);
        Polynomial g(5);
        g.add_term(unit_exp(5, {{0, 2}, {2, 1}}), 1.0);
        g.add_term(unit_exp(5, {{0, 1}, {1, 1}, {3, 1}}), 1.0);
        g.add_term(unit_exp(5, {{1, 2}, {4, 1}}), 1.0);
        g.add_term(unit_exp(5, {{0, 3}}), 1.0);
        g.add_term(unit_exp(5, {{1, 3}}), 1.0);
        return Hypersurface(6, Box::cube(5, -2.0, 2.0), std::move(g), "gordan-noether");
    }
    if (name == "fat-cantor") {
        expect_params(name, params, 0, 2);
        const int depth = params.empty() ? 6 : integer_param(params[0], "fat-cantor depth", 1, 24);
        const double fatness = params.size() < 2 ? 0.5 : params[1];
        return Hypersurface(Box::cube(1, 0.0, 1.0), FatCantor(depth, fatness), "fat-cantor");
    }
    if (name == "random-poly") {
        expect_params(name, params, 0, 3);
        const int n = params.empty() ? 3 : integer_param(params[0], "random-poly n", 3, 6);
        const int degree = params.size() < 2 ? 3 : integer_param(params[1], "random-poly degree", 1, 8);
        const double seed_v = params.size() < 3 ? 0.0 : params[2];
        if (!(seed_v >= 0.0) || seed_v != std::floor(seed_v) || seed_v > 9.0e15)
            throw ArgumentError("random-poly seed must be a nonnegative integer");
        const int d = n - 1;
        SplitMix64 rng(static_cast<std::uint64_t>(seed_v));
        Polynomial g(d);
        Polynomial::Exponents e(static_cast<std::size_t>(d), 0);
        while (true) {
            int total = 0;
            for (int a : e) total += a;
            if (total <= degree) g.add_term(e, rng.uniform(-1.0, 1.0));
            int i = d - 1;
            for (; i >= 0; --i) {
                if (++e[static_cast<std::size_t>(i)] <= degree) break;
                e[static_cast<std::size_t>(i)] = 0;
            }
            if (i < 0) break;
        }
        return Hypersurface(n, Box::cube(d, -1.0, 1.0), std::move(g), "random-poly");
    }
    throw ArgumentError("surface.builtin: unknown surface '" + name + "'");
}

// ---------------------------------------------------------------------------

double normalized_det(const Mat& hessian) {
    double scale = 1.0;
    for (int i = 0; i < hessian.rows(); ++i) scale *= hessian.row(i).norm();
    if (scale == 0.0) return 0.0;
    return hessian.determinant() / scale;
}

bool hessian_singular(const Mat& hessian, double tol_rel) {
    double scale = 1.0;
    for (int i = 0; i < hessian.rows(); ++i) scale *= hessian.row(i).norm();
    return std::abs(hessian.determinant()) <= tol_rel * scale;
}

namespace {

// Linear index -> multi-index for a grid with `res` points per axis.
void unravel(std::size_t c, int d, long long res, std::vector<long long>& idx) {
    for (int i = d - 1; i >= 0; --i) {
        idx[static_cast<std::size_t>(i)] = static_cast<long long>(c % static_cast<std::size_t>(res));
        c /= static_cast<std::size_t>(res);
    }
}

std::size_t grid_total(int d, long long res) {
    double t = std::pow(static_cast<double>(res), d);
    if (t > 2e8) throw ArgumentError("grid resolution too large for this dimension");
    return static_cast<std::size_t>(t);
}

std::optional<double> marked_box_dimension(const std::vector<std::uint8_t>& marked, int d, int res) {
    std::vector<double> lx, ly;
    std::vector<long long> idx(static_cast<std::size_t>(d));
    for (int f = 1; res / f >= 2 && lx.size() < 4; f *= 2) {
        const long long cres = (res + f - 1) / f;
        std::vector<std::uint8_t> hit(grid_total(d, cres), 0);
        for (std::size_t c = 0; c < marked.size(); ++c) {
            if (!marked[c]) continue;
            unravel(c, d, res, idx);
            std::size_t key = 0;
            for (int i = 0; i < d; ++i) key = key * static_cast<std::size_t>(cres) + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)] / f);
            hit[key] = 1;
        }
        long long count = 0;
        for (auto b : hit) count += b;
        if (count == 0) return std::nullopt;
        lx.push_back(std::log(static_cast<double>(f) / res));
        ly.push_back(std::log(static_cast<double>(count)));
    }
    if (lx.size() < 2) return std::nullopt;
    return -fit_line(lx, ly).slope;
}

}  // namespace

std::string SingularReport::to_json() const {
    nlohmann::ordered_json j;
    j["grid_res"] = grid_res;
    j["tol_rel"] = tol_rel;
    j["marked"] = marked;
    j["total"] = total;
    j["fraction"] = fraction;
    j["box_dimension"] = box_dimension ? nlohmann::ordered_json(*box_dimension) : nlohmann::ordered_json();
    return j.dump(2);
}

SingularReport singular_fraction(const Hypersurface& surface, int grid_res, double tol_rel, int threads) {
    if (grid_res < 16) throw ArgumentError("grid.hessian_res must be at least 16");
    if (!(tol_rel >= 0.0)) throw ArgumentError("tolerances.tol_rel must be nonnegative");
    const int d = surface.dims();
    const Box& U = surface.domain();
    const std::size_t total = grid_total(d, grid_res);
    std::vector<std::uint8_t> marked(total, 0);
    parallel_for(total, threads, [&](std::size_t c) {
        std::vector<long long> idx(static_cast<std::size_t>(d));
        unravel(c, d, grid_res, idx);
        Vec x(d);
        for (int i = 0; i < d; ++i)
            x[i] = U.lower[i] + (U.upper[i] - U.lower[i]) * (static_cast<double>(idx[static_cast<std::size_t>(i)]) + 0.5) / grid_res;
        marked[c] = hessian_singular(surface.eval(x).hessian, tol_rel) ? 1 : 0;
    });
    SingularReport rep;
    rep.grid_res = grid_res;
    rep.tol_rel = tol_rel;
    rep.total = static_cast<long long>(total);
    for (auto m : marked) rep.marked += m;
    rep.fraction = static_cast<double>(rep.marked) / static_cast<double>(total);
    if (rep.marked > 0) rep.box_dimension = marked_box_dimension(marked, d, grid_res);
    return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(ConditionIIVerdict v) {
    switch (v) {
        case ConditionIIVerdict::Pass: return "PASS";
        case ConditionIIVerdict::Fail: return "FAIL";
        case ConditionIIVerdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

std::string ConditionIIReport::to_json() const {
    nlohmann::ordered_json j;
    auto& ls = j["levels"] = nlohmann::ordered_json::array();
    for (const auto& l : levels)
        ls.push_back({{"grid_res", l.grid_res},
                      {"marked_cells", l.marked_cells},
                      {"fraction", l.fraction},
                      {"cell_diameter", l.cell_diameter},
                      {"cost", l.cost}});
    j["slope"] = std::isfinite(slope) ? nlohmann::ordered_json(slope) : nlohmann::ordered_json();
    j["verdict"] = to_string(verdict);
    return j.dump(2);
}

ConditionIIReport condition_II_check(const Hypersurface& surface, const DimensionFunction& f,
                                     const std::vector<int>& refinements, double tol_rel, int threads) {
    if (refinements.size() < 3) throw ArgumentError("condition II needs at least 3 refinement levels");
    const int d = surface.dims();
    const Box& U = surface.domain();
    ConditionIIReport rep;
    for (int res : refinements) {
        if (res < 2) throw ArgumentError("refinement resolution must be at least 2");
        const long long vres = res + 1;
        const std::size_t nv = grid_total(d, vres);
        const std::size_t nc = grid_total(d, res);
        Vec side = (U.upper - U.lower) / res;
        std::vector<signed char> sign(nv, 0);
        parallel_for(nv, threads, [&](std::size_t c) {
            std::vector<long long> idx(static_cast<std::size_t>(d));
            unravel(c, d, vres, idx);
            Vec x(d);
            for (int i = 0; i < d; ++i) x[i] = U.lower[i] + side[i] * static_cast<double>(idx[static_cast<std::size_t>(i)]);
            x = x.cwiseMin(U.upper);
            const Mat H = surface.eval(x).hessian;
            if (hessian_singular(H, tol_rel)) return;
            sign[c] = normalized_det(H) > 0 ? 1 : -1;
        });
        std::vector<std::uint8_t> marked(nc, 0);
        parallel_for(nc, threads, [&](std::size_t c) {
            std::vector<long long> idx(static_cast<std::size_t>(d));
            unravel(c, d, res, idx);
            Vec x(d);
            for (int i = 0; i < d; ++i) x[i] = U.lower[i] + side[i] * (static_cast<double>(idx[static_cast<std::size_t>(i)]) + 0.5);
            if (hessian_singular(surface.eval(x).hessian, tol_rel)) {
                marked[c] = 1;
                return;
            }
            signed char first = 0;
            for (long long mask = 0; mask < (1LL << d); ++mask) {
                std::size_t key = 0;
                for (int i = 0; i < d; ++i)
                    key = key * static_cast<std::size_t>(vres) + static_cast<std::size_t>(idx[static_cast<std::size_t>(i)] + ((mask >> i) & 1));
                const signed char s = sign[key];
                if (s == 0 || (first != 0 && s != first)) {
                    marked[c] = 1;
                    return;
                }
                first = s;
            }
        });
        ConditionIILevel level;
        level.grid_res = res;
        for (auto m : marked) level.marked_cells += m;
        level.fraction = static_cast<double>(level.marked_cells) / static_cast<double>(nc);
        level.cell_diameter = side.norm();
        level.cost = static_cast<double>(level.marked_cells) * f(level.cell_diameter);
        rep.levels.push_back(level);
    }

    bool all_empty = true, all_full = true;
    double fmin = std::numeric_limits<double>::infinity(), fmax = 0.0;
    std::vector<double> lx, ly;
    for (const auto& l : rep.levels) {
        all_empty = all_empty && l.marked_cells == 0;
        all_full = all_full && l.fraction >= 1.0 - 1e-3;
        fmin = std::min(fmin, l.fraction);
        fmax = std::max(fmax, l.fraction);
        if (l.cost > 0.0) {
            lx.push_back(std::log(l.cell_diameter));
            ly.push_back(std::log(l.cost));
        }
    }
    rep.slope = lx.size() >= 2 ? fit_line(lx, ly).slope : std::numeric_limits<double>::quiet_NaN();
    const double first = rep.levels.front().cost, last = rep.levels.back().cost;
    if (all_empty) {
        rep.verdict = ConditionIIVerdict::Pass;
    } else if (all_full) {
        rep.verdict = ConditionIIVerdict::Fail;
    } else if (fmin >= 0.01 && fmax <= 1.25 * fmin && last >= 0.5 * first) {
        // Marked fraction stable under refinement and cost not decaying: positive measure.
        rep.verdict = ConditionIIVerdict::Fail;
    } else if (last == 0.0 || (std::isfinite(rep.slope) && rep.slope > 0.05 && last < first)) {
        rep.verdict = ConditionIIVerdict::Pass;
    } else {
        rep.verdict = ConditionIIVerdict::Inconclusive;
    }
    return rep;
}

double marked_length_1d(const Hypersurface& surface, int grid_res, double tol_rel) {
    if (surface.dims() != 1) throw ArgumentError("marked_length_1d needs a one-dimensional domain");
    if (grid_res < 16) throw ArgumentError("marked_length_1d: grid_res must be at least 16");
    const double lo = surface.domain().lower[0], hi = surface.domain().upper[0];
    auto marked = [&](double x) {
        return hessian_singular(surface.eval(Vec::Constant(1, x)).hessian, tol_rel);
    };
    // Point where `marked` flips between a (state sa) and b.
    auto edge = [&](double a, double b, bool sa) {
        for (int it = 0; it < 200 && std::abs(b - a) > 0.0; ++it) {
            const double m = 0.5 * (a + b);
            if (m == a || m == b) break;
            (marked(m) == sa ? a : b) = m;
        }
        return 0.5 * (a + b);
    };
    auto node = [&](int i) { return lo + (hi - lo) * static_cast<double>(i) / grid_res; };
    CompensatedSum length;
    int i = 0;
    bool prev = false;
    double start = lo;
    for (; i <= grid_res; ++i) {
        const bool m = marked(node(i));
        if (m && !prev) start = i == 0 ? lo : edge(node(i - 1), node(i), false);
        if (!m && prev) length += edge(node(i - 1), node(i), true) - start;
        prev = m;
    }
    if (prev) length += hi - start;
    return length.value();
}

// ---------------------------------------------------------------------------

KernelField kernel_field(const Hypersurface& surface, const Vec& x, const std::optional<Vec>& reference,
                         double rel_tol) {
    const Mat H = surface.eval(x).hessian;
    const int d = static_cast<int>(H.rows());
    Eigen::SelfAdjointEigenSolver<Mat> eig(H);
    KernelField out;
    out.eigenvalues = eig.eigenvalues();
    const double scale = out.eigenvalues.cwiseAbs().maxCoeff();
    std::vector<int> null_idx;
    for (int i = 0; i < d; ++i)
        if (std::abs(out.eigenvalues[i]) <= rel_tol * scale) null_idx.push_back(i);
    out.nullity = static_cast<int>(null_idx.size());
    if (out.nullity == 0) throw NoKernelError("hessian is nonsingular at this point");
    if (reference && reference->size() != d) throw ArgumentError("kernel_field: reference has wrong dimension");

    Vec dir;
    if (out.nullity == 1) {
        dir = eig.eigenvectors().col(null_idx.front());
    } else {
        out.ambiguous = true;
        Mat basis(d, out.nullity);
        for (int k = 0; k < out.nullity; ++k) basis.col(k) = eig.eigenvectors().col(null_idx[static_cast<std::size_t>(k)]);
        dir = reference ? Vec(basis * (basis.transpose() * *reference)) : Vec(basis.col(0));
        if (dir.norm() < 1e-14) dir = basis.col(0);
    }
    dir.normalize();
    bool flip = false;
    if (reference) {
        flip = dir.dot(*reference) < 0.0;
    } else {
        for (int i = 0; i < d; ++i)
            if (std::abs(dir[i]) > 1e-12) {
                flip = dir[i] < 0.0;
                break;
            }
    }
    out.direction = flip ? Vec(-dir) : dir;
    return out;
}

std::string Fiber::to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = std::vector<double>(seed.data(), seed.data() + seed.size());
    j["length"] = length;
    j["truncated"] = truncated;
    j["reason"] = reason;
    j["diagnostics"] = {{"gradient_drift", diagnostics.gradient_drift},
                        {"straightness", diagnostics.straightness},
                        {"affinity", diagnostics.affinity}};
    auto& pts = j["polyline"] = nlohmann::ordered_json::array();
    for (const Vec& p : points) pts.push_back(std::vector<double>(p.data(), p.data() + p.size()));
    return j.dump(2);
}

Fiber trace_fiber(const Hypersurface& surface, const Vec& x0, double step, double max_len,
                  const std::optional<Vec>& direction) {
    if (!(step > 0.0)) throw ArgumentError("fiber.step must be positive");
    if (!(max_len > 0.0)) throw ArgumentError("fiber.max_len must be positive");
    const Box& U = surface.domain();
    if (!U.contains(x0)) throw DomainError("fiber seed lies outside U");
    const KernelField k0 = kernel_field(surface, x0, direction);
    if (k0.ambiguous && !direction) throw NoKernelError("kernel at the seed has dimension > 1; pass a direction");
    const int nullity = k0.nullity;

    Fiber fib;
    fib.seed = x0;
    auto field = [&](const Vec& x, const Vec& ref) -> std::optional<Vec> {
        if (!U.contains(x)) return std::nullopt;
        const KernelField k = kernel_field(surface, x, ref);
        if (k.nullity != nullity) throw NoKernelError("kernel dimension changed along the fiber");
        return k.direction;
    };
    auto side = [&](const Vec& start_dir) {
        std::vector<Vec> pts;
        Vec x = x0, ref = start_dir;
        double len = 0.0;
        try {
            while (len + step <= 0.5 * max_len * (1.0 + 1e-12)) {
                const auto k1 = field(x, ref);
                if (!k1) break;
                const auto k2 = field(x + 0.5 * step * *k1, *k1);
                if (!k2) break;
                const auto k3 = field(x + 0.5 * step * *k2, *k2);
                if (!k3) break;
                const auto k4 = field(x + step * *k3, *k3);
                if (!k4) break;
                const Vec next = x + step / 6.0 * (*k1 + 2.0 * *k2 + 2.0 * *k3 + *k4);
                if (!U.contains(next)) break;
                len += (next - x).norm();
                ref = (next - x).normalized();
                x = next;
                pts.push_back(x);
            }
        } catch (const NoKernelError& e) {
            fib.truncated = true;
            fib.reason = e.what();
        }
        return pts;
    };
    const std::vector<Vec> fwd = side(k0.direction);
    const std::vector<Vec> bwd = side(-k0.direction);
    for (auto it = bwd.rbegin(); it != bwd.rend(); ++it) fib.points.push_back(*it);
    fib.points.push_back(x0);
    fib.points.insert(fib.points.end(), fwd.begin(), fwd.end());

    const Jet j0 = surface.eval(x0);
    std::vector<Jet> jets;
    jets.reserve(fib.points.size());
    for (const Vec& p : fib.points) jets.push_back(surface.eval(p));
    for (std::size_t i = 0; i < fib.points.size(); ++i) {
        if (i > 0) fib.length += (fib.points[i] - fib.points[i - 1]).norm();
        fib.diagnostics.gradient_drift = std::max(fib.diagnostics.gradient_drift, (jets[i].gradient - j0.gradient).norm());
        if (i > 0 && i + 1 < fib.points.size()) {
            fib.diagnostics.straightness = std::max(
                fib.diagnostics.straightness, (fib.points[i + 1] - 2.0 * fib.points[i] + fib.points[i - 1]).norm());
            fib.diagnostics.affinity = std::max(
                fib.diagnostics.affinity, std::abs(jets[i + 1].value - 2.0 * jets[i].value + jets[i - 1].value));
        }
    }
    return fib;
}

SemicontinuityReport semicontinuity_check(const Hypersurface& surface, int coarse_res, int fine_factor,
                                          double rel_tol) {
    if (coarse_res < 2 || fine_factor < 2) throw ArgumentError("semicontinuity: resolutions too small");
    const int d = surface.dims();
    const Box& U = surface.domain();
    auto nullity = [&](const Vec& x) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(surface.eval(x).hessian, Eigen::EigenvaluesOnly);
        const Vec ev = eig.eigenvalues();
        const double scale = ev.cwiseAbs().maxCoeff();
        int k = 0;
        for (int i = 0; i < ev.size(); ++i) k += std::abs(ev[i]) <= rel_tol * scale ? 1 : 0;
        return k;
    };
    const Vec spacing = (U.upper - U.lower) / coarse_res;
    const int half = fine_factor / 2;
    long long offsets = 1;
    for (int i = 0; i < d; ++i) offsets *= 2 * half + 1;
    SemicontinuityReport rep;
    std::vector<long long> idx(static_cast<std::size_t>(d));
    for (std::size_t c = 0; c < grid_total(d, coarse_res); ++c) {
        unravel(c, d, coarse_res, idx);
        Vec x(d);
        for (int i = 0; i < d; ++i) x[i] = U.lower[i] + spacing[i] * (static_cast<double>(idx[static_cast<std::size_t>(i)]) + 0.5);
        const int base = nullity(x);
        for (long long o = 0; o < offsets; ++o) {
            Vec y = x;
            long long code = o;
            for (int i = 0; i < d; ++i, code /= 2 * half + 1) {
                const long long k = code % (2 * half + 1) - half;
                // Irrational shift keeps fine points off special subvarieties.
                const double shift = 0.5 * std::fmod(0.6180339887498949 * (i + 1), 1.0);
                y[i] += spacing[i] * (static_cast<double>(k) + shift) / (2.0 * half + 1.0);
            }
            if (!U.contains(y)) continue;
            ++rep.checked;
            if (nullity(y) > base) ++rep.violations;
        }
    }
    return rep;
}

}  // namespace gbsp
