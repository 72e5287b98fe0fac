#pragma once

#include "siegel/heisenberg.hpp"
#include "siegel/reduction.hpp"

namespace siegel {

// Theta sum data: sum over n in [0, N]^g of e(t + n^T Q n + l.n).
struct QuadraticData {
    Mat Q;
    Vec l;
    double t = 0;

    int genus() const { return static_cast<int>(Q.rows()); }
    void validate() const {
        if (Q.rows() != Q.cols() || Q.rows() < 1) throw DimensionError("QuadraticData: Q must be square");
        if (l.size() != Q.rows()) throw DimensionError("QuadraticData: l has wrong length");
        if (max_abs(Q - Q.transpose()) > 1e-14) throw DomainError("QuadraticData: Q must be symmetric");
    }
};

struct Checkpoint {
    std::int64_t N = 0;
    cplx raw;
    double normalized = 0;          // N^{-g/2} |raw|
    double running_max = 0;         // max over n <= N of |S(n)|
    double running_max_normalized = 0;  // max over running_from <= n <= N of n^{-g/2} |S(n)|
};

struct SumResult {
    std::vector<Checkpoint> checkpoints;
    bool partial = false;  // compute budget cut the range
};

struct ThetaOptions {
    std::vector<std::int64_t> checkpoints;  // explicit N values; empty = geometric grid
    std::int64_t n_max = 1000;
    int n_checkpoints = 24;
    double budget = 4e9;             // max number of lattice points
    std::int64_t running_from = 1;   // start of the normalized running max
    unsigned threads = 0;
    int tiles = 64;                  // fixed, so results do not depend on threads
};

namespace detail {

inline double frac(double x) { return x - std::floor(x); }

// frac(a k) for k an integer exactly representable in double: the product is
// split into p + e exactly, and frac(p) is exact.
inline double frac_product(double a, double k) {
    double p = a * k;
    double e = std::fma(a, k, -p);
    return frac(p) + e;
}

// Fractional part of t + n^T Q n + l.n. Each product is reduced exactly and
// the pieces are summed in long double, so the error is ~ 1e-19.
inline long double exact_phase_long(const QuadraticData& d, const std::int64_t* n) {
    const int g = d.genus();
    long double s = frac(d.t);
    auto add = [&s](double a, double k) {
        double p = a * k;
        s += static_cast<long double>(frac(p)) + std::fma(a, k, -p);
    };
    for (int i = 0; i < g; ++i) {
        add(d.Q(i, i), static_cast<double>(n[i] * n[i]));
        for (int j = i + 1; j < g; ++j) add(d.Q(i, j), static_cast<double>(2 * n[i] * n[j]));
        add(d.l(i), static_cast<double>(n[i]));
    }
    return s - std::floor(s);
}

inline double exact_phase(const QuadraticData& d, const std::int64_t* n) {
    return static_cast<double>(exact_phase_long(d, n));
}

// Phase increment from m to m + 1 along the last axis.
inline long double step_phase_long(const QuadraticData& d, const std::int64_t* n, std::int64_t m) {
    const int last = d.genus() - 1;
    long double s = 0;
    auto add = [&s](double a, double k) {
        double p = a * k;
        s += static_cast<long double>(frac(p)) + std::fma(a, k, -p);
    };
    add(d.Q(last, last), static_cast<double>(2 * m + 1));
    for (int i = 0; i < last; ++i) add(d.Q(i, last), static_cast<double>(2 * n[i]));
    add(d.l(last), 1.0);
    return s - std::floor(s);
}

inline std::complex<long double> e_long(long double x) {
    constexpr long double two_pi = 6.283185307179586476925286766559005768L;
    return {std::cos(two_pi * x), std::sin(two_pi * x)};
}

constexpr std::int64_t kAnchorInterval = 4096;

// Runs the last axis m in [m_lo, m_hi] with the prefix n[0..g-2] fixed,
// calling sink(m, z) with z = e(phase(n, m)). Phases advance by the
// second-difference recurrence in long double and are re-anchored exactly.
template <class Sink>
void run_line(const QuadraticData& d, std::vector<std::int64_t>& n, std::int64_t m_lo, std::int64_t m_hi, Sink&& sink) {
    const int last = d.genus() - 1;
    const std::complex<long double> r = e_long(frac(2.0 * d.Q(last, last)));
    std::complex<long double> z, w;
    for (std::int64_t m = m_lo; m <= m_hi; ++m) {
        if (m == m_lo || (m - m_lo) % kAnchorInterval == 0) {
            n[last] = m;
            z = e_long(exact_phase_long(d, n.data()));
            w = e_long(step_phase_long(d, n.data(), m));
        }
        sink(m, cplx(static_cast<double>(z.real()), static_cast<double>(z.imag())));
        z *= w;
        w *= r;
    }
}

// Contributions grouped by M = max_i n_i, so that S(N) is a prefix sum.
inline std::vector<cplx> shell_sums(const QuadraticData& d, std::int64_t N, int tiles, unsigned threads) {
    const int g = d.genus();
    const std::int64_t len = N + 1;
    const int T = static_cast<int>(std::min<std::int64_t>(tiles, len));
    auto tile_lo = [&](int k) { return len * k / T; };
    if (g == 1) {
        std::vector<cplx> out(len);
        parallel_for(T, [&](std::size_t k) {
            std::vector<std::int64_t> n(1);
            run_line(d, n, tile_lo(k), tile_lo(k + 1) - 1, [&](std::int64_t m, cplx z) { out[m] = z; });
        }, threads);
        return out;
    }
    std::vector<std::vector<CompensatedComplex>> part(T);
    parallel_for(T, [&](std::size_t k) {
        auto& b = part[k];
        b.assign(len, CompensatedComplex{});
        std::vector<std::int64_t> n(g, 0);
        for (std::int64_t n0 = tile_lo(k); n0 < tile_lo(k + 1); ++n0) {
            n[0] = n0;
            for (int i = 1; i < g - 1; ++i) n[i] = 0;
            while (true) {
                std::int64_t pmax = 0;
                for (int i = 0; i < g - 1; ++i) pmax = std::max(pmax, n[i]);
                CompensatedComplex inner;
                run_line(d, n, 0, N, [&](std::int64_t m, cplx z) {
                    if (m <= pmax) inner.add(z);
                    else b[m].add(z);
                });
                b[pmax].add(inner);
                int i = g - 2;
                while (i >= 1 && n[i] == N) n[i--] = 0;
                if (i < 1) break;
                ++n[i];
            }
        }
    }, threads);
    std::vector<cplx> out(len);
    for (std::int64_t M = 0; M < len; ++M) {
        CompensatedComplex acc;
        for (int k = 0; k < T; ++k) acc.add(part[k][M]);
        out[M] = acc.value();
    }
    return out;
}

}  // namespace detail

inline std::vector<std::int64_t> geometric_checkpoints(std::int64_t n_max, int count) {
    std::vector<std::int64_t> out;
    for (int j = 0; j < count; ++j) {
        auto N = static_cast<std::int64_t>(std::floor(static_cast<double>(n_max) * std::ldexp(1.0, -j)));
        if (N >= 1) out.push_back(N);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

inline SumResult theta_sum(const QuadraticData& d, const ThetaOptions& opt) {
    d.validate();
    const int g = d.genus();
    auto cps = opt.checkpoints.empty() ? geometric_checkpoints(opt.n_max, opt.n_checkpoints) : opt.checkpoints;
    if (cps.empty()) throw DomainError("theta_sum: no checkpoints");
    std::sort(cps.begin(), cps.end());
    cps.erase(std::unique(cps.begin(), cps.end()), cps.end());
    if (cps.front() < 0) throw DomainError("theta_sum: negative N");
    SumResult res;
    std::int64_t N = cps.back();
    const double cap = std::floor(std::pow(opt.budget, 1.0 / g)) - 1;
    if (static_cast<double>(N) > cap) {
        N = static_cast<std::int64_t>(cap);
        res.partial = true;
        while (!cps.empty() && cps.back() > N) cps.pop_back();
        if (cps.empty()) return res;
    }
    auto shells = detail::shell_sums(d, N, opt.tiles, opt.threads);
    CompensatedComplex S;
    double rmax = 0, rnorm = 0;
    std::size_t next = 0;
    for (std::int64_t M = 0; M <= N && next < cps.size(); ++M) {
        S.add(shells[M]);
        cplx v = S.value();
        double a = std::abs(v);
        rmax = std::max(rmax, a);
        if (M >= std::max<std::int64_t>(1, opt.running_from))
            rnorm = std::max(rnorm, a * std::pow(static_cast<double>(M), -0.5 * g));
        if (M == cps[next]) {
            double nz = M > 0 ? a * std::pow(static_cast<double>(M), -0.5 * g) : a;
            res.checkpoints.push_back({M, v, nz, rmax, rnorm});
            ++next;
        }
    }
    return res;
}

// Reference: per-term exactly reduced phase and one trig call each.
inline cplx theta_naive(const QuadraticData& d, std::int64_t N) {
    d.validate();
    const int g = d.genus();
    std::vector<std::int64_t> n(g, 0);
    CompensatedComplex acc;
    while (true) {
        acc.add(e_phase(detail::exact_phase(d, n.data())));
        int i = g - 1;
        while (i >= 0 && n[i] == N) n[i--] = 0;
        if (i < 0) break;
        ++n[i];
    }
    return acc.value();
}

// sum_n phi(t + l.n + Q[n]/2) = sum_k c_k e(2kt) Theta(kQ, 2kl; N).
inline cplx pretheta_sum(const CircleSeries& phi, const QuadraticData& d, std::int64_t N, unsigned threads = 0) {
    d.validate();
    cplx total{};
    for (const auto& [k, c] : phi.terms) {
        if (c == cplx{}) continue;
        QuadraticData dk{static_cast<double>(k) * d.Q, 2.0 * k * d.l, 0.0};
        ThetaOptions o;
        o.checkpoints = {N};
        o.threads = threads;
        auto r = theta_sum(dk, o);
        total += c * e_phase(detail::frac_product(d.t, 2.0 * k)) * r.checkpoints.back().raw;
    }
    return total;
}

enum class FitStatistic { RunningMax, Direct };

inline const char* statistic_name(FitStatistic s) { return s == FitStatistic::RunningMax ? "running-max" : "direct"; }

struct GrowthFit {
    double slope = 0, intercept = 0, residual = 0;
    std::int64_t window_min = 0, window_max = 0;
    FitStatistic statistic = FitStatistic::RunningMax;
};

// Least-squares slope of log(statistic of |raw|) against log N on the
// checkpoints inside [wmin, wmax].
inline GrowthFit growth_fit(const SumResult& r, FitStatistic stat, std::int64_t wmin = 1,
                            std::int64_t wmax = std::numeric_limits<std::int64_t>::max()) {
    std::vector<double> xs, ys;
    std::int64_t lo = 0, hi = 0;
    for (const auto& c : r.checkpoints) {
        if (c.N < std::max<std::int64_t>(wmin, 1) || c.N > wmax) continue;
        double v = stat == FitStatistic::RunningMax ? c.running_max : std::abs(c.raw);
        if (!(v > 0)) throw FitError("growth_fit: degenerate (zero) sum in the window");
        if (xs.empty()) lo = c.N;
        hi = c.N;
        xs.push_back(std::log(static_cast<double>(c.N)));
        ys.push_back(std::log(v));
    }
    if (xs.size() < 8) throw FitError("growth_fit: need at least 8 checkpoints in the window");
    if (static_cast<double>(hi) < 100.0 * static_cast<double>(lo)) throw FitError("growth_fit: window must span two decades");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i] / n;
        my += ys[i] / n;
    }
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    GrowthFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) rss += std::pow(ys[i] - f.intercept - f.slope * xs[i], 2);
    f.residual = std::sqrt(rss / n);
    f.window_min = lo;
    f.window_max = hi;
    f.statistic = stat;
    return f;
}

struct PredictedExponent {
    double power = 0;
    std::optional<double> log_power;
    bool power_is_limit = false;  // "0+": any epsilon > 0
};

// Growth targets for the normalized theta sum by Diophantine class.
inline PredictedExponent predicted_exponent(const DiophantineReport& rep, int g, bool log_law = false) {
    if (g < 1) throw DimensionError("predicted_exponent: g must be >= 1");
    if (log_law) return {0.0, g + 1.0 / (2.0 * g + 2.0), false};
    switch (rep.cls) {
        case DiophantineClass::BoundedType: return {0.0, std::nullopt, false};
        case DiophantineClass::Roth: return {0.0, std::nullopt, true};
        case DiophantineClass::DiophantineType: return {g * (1.0 - rep.sigma) / 2.0, std::nullopt, true};
        default: throw NoPredictionError(std::string("predicted_exponent: no prediction for class ") + class_name(rep.cls));
    }
}

}  // namespace siegel
