#pragma once

#include "siegel/symplectic.hpp"

#include <limits>
#include <optional>
#include <random>
#include <variant>

namespace siegel {

struct ReducedPoint {
    SiegelPoint z;
    IntegerSymplectic gamma;  // mobius(gamma, input) == z
    bool certified = false;
};

struct NonTerminationError : Error {
    ReducedPoint best;
    NonTerminationError(const std::string& what, ReducedPoint b) : Error(what), best(std::move(b)) {}
};

namespace detail {

inline IntegerSymplectic translation(const IMat& S) {
    const int g = static_cast<int>(S.rows());
    IMat I = IMat::Identity(g, g), Z = IMat::Zero(g, g);
    return {I, S, Z, I};
}

// Z -> U Z U^T, given U and its exact inverse.
inline IntegerSymplectic congruence(const IMat& U, const IMat& Uinv) {
    const int g = static_cast<int>(U.rows());
    IMat Z = IMat::Zero(g, g);
    return {U, Z, Z, Uinv.transpose()};
}

// Partial inversion on the coordinates flagged in `mask`.
inline IntegerSymplectic partial_inversion(const std::vector<int>& mask) {
    const int g = static_cast<int>(mask.size());
    IMat P = IMat::Zero(g, g);
    for (int i = 0; i < g; ++i) P(i, i) = mask[i] ? 1 : 0;
    IMat I = IMat::Identity(g, g);
    return {I - P, -P, P, I - P};
}

inline IMat round_symmetric(const Mat& X) {
    const int g = static_cast<int>(X.rows());
    IMat S(g, g);
    for (int i = 0; i < g; ++i)
        for (int j = i; j < g; ++j) S(i, j) = S(j, i) = static_cast<std::int64_t>(std::nearbyint(X(i, j)));
    return S;
}

inline double safe_height(const SiegelPoint& p) {
    try {
        return height_raw(p);
    } catch (const DomainError&) {
        return 0.0;
    }
}

}  // namespace detail

// Classical Gauss reduction into {|Re z| <= 1/2, |z| >= 1}.
inline ReducedPoint reduce_g1(const SiegelPoint& p) {
    if (p.genus() != 1) throw DimensionError("reduce_g1: genus must be 1");
    cplx z(p.X(0, 0), p.Y(0, 0));
    IMat g = IMat::Identity(2, 2);
    for (int it = 0; it < 100000; ++it) {
        double n = std::nearbyint(z.real());
        if (n != 0.0) {
            z -= n;
            IMat T(2, 2);
            T << 1, -static_cast<std::int64_t>(n), 0, 1;
            g = T * g;
        }
        if (std::norm(z) < 1.0 - 1e-14) {
            z = -1.0 / z;
            IMat S(2, 2);
            S << 0, -1, 1, 0;
            g = S * g;
            continue;
        }
        break;
    }
    IntegerSymplectic gamma{g.block(0, 0, 1, 1), g.block(0, 1, 1, 1), g.block(1, 0, 1, 1), g.block(1, 1, 1, 1)};
    return {SiegelPoint{Mat::Constant(1, 1, z.real()), Mat::Constant(1, 1, z.imag())}, gamma, true};
}

// LLL reduction of the positive quadratic form Y. Returns U (and its inverse)
// with U Y U^T reduced; rows of U are the new basis in old coordinates.
struct LatticeReduction {
    IMat U, Uinv;
};

inline LatticeReduction lll_gram(const Mat& Y, double lovasz = 0.99) {
    const int g = static_cast<int>(Y.rows());
    IMat U = IMat::Identity(g, g), Uinv = IMat::Identity(g, g);
    Mat G = Y;
    auto gs = [&](Mat& mu, Vec& b) {
        mu = Mat::Identity(g, g);
        b = Vec::Zero(g);
        for (int i = 0; i < g; ++i) {
            for (int j = 0; j < i; ++j) {
                double v = G(i, j);
                for (int k = 0; k < j; ++k) v -= mu(j, k) * mu(i, k) * b(k);
                mu(i, j) = v / b(j);
            }
            double v = G(i, i);
            for (int k = 0; k < i; ++k) v -= mu(i, k) * mu(i, k) * b(k);
            b(i) = v;
        }
    };
    Mat mu;
    Vec b;
    int k = 1, guard = 0;
    while (k < g && guard++ < 10000) {
        for (int j = k - 1; j >= 0; --j) {
            gs(mu, b);
            double r = std::nearbyint(mu(k, j));
            if (r != 0.0) {
                auto ri = static_cast<std::int64_t>(r);
                U.row(k) -= ri * U.row(j);
                Uinv.col(j) += ri * Uinv.col(k);
                // G <- E G E^T with E = I - r e_k e_j^T
                G.row(k) -= r * G.row(j);
                G.col(k) -= r * G.col(j);
            }
        }
        gs(mu, b);
        if (b(k) >= (lovasz - mu(k, k - 1) * mu(k, k - 1)) * b(k - 1)) {
            ++k;
        } else {
            U.row(k).swap(U.row(k - 1));
            Uinv.col(k).swap(Uinv.col(k - 1));
            G.row(k).swap(G.row(k - 1));
            G.col(k).swap(G.col(k - 1));
            k = std::max(k - 1, 1);
        }
    }
    return {U, Uinv};
}

// Membership in the Siegel set with parameter t, read in Iwasawa coordinates.
inline bool in_siegel_set(const SiegelPoint& p, double t) {
    const int g = p.genus();
    IwasawaCoordinates iw = iwasawa(p);
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j) {
            if (!(std::abs(iw.X(i, j)) < t)) return false;
            if (i < j && !(std::abs(iw.W(i, j)) < t)) return false;
        }
    if (!(1.0 < t * iw.D(0))) return false;
    for (int k = 0; k + 1 < g; ++k)
        if (!(iw.D(k) < t * iw.D(k + 1))) return false;
    return true;
}

struct ReduceOptions {
    double tol = 1e-12;
    int max_iter = 10000;
    int generator_depth = 1;  // range of integer shifts tried before inversions
    double certify_t = 2.0;
};

namespace detail {

struct Candidate {
    IntegerSymplectic move;
    double height;
};

// Inversion moves tried from a normalized point.
inline std::vector<IntegerSymplectic> inversion_moves(int g, int depth) {
    std::vector<IntegerSymplectic> moves;
    const IMat I = IMat::Identity(g, g);
    auto shift_diag = [&](int k, int s) {
        IMat S = IMat::Zero(g, g);
        S(k, k) = s;
        return translation(S);
    };
    // partial inversions along coordinate axes
    for (int k = 0; k < g; ++k) {
        std::vector<int> mask(g, 0);
        mask[k] = 1;
        for (int s = -depth; s <= depth; ++s) moves.push_back(partial_inversion(mask) * shift_diag(k, s));
    }
    // partial inversions along small primitive vectors v (entries in {-1,0,1})
    if (g >= 2) {
        int total = 1;
        for (int i = 0; i < g; ++i) total *= 3;
        for (int code = 0; code < total; ++code) {
            IVec v(g);
            int c = code, nz = 0;
            for (int i = 0; i < g; ++i) {
                v(i) = c % 3 - 1;
                c /= 3;
                nz += v(i) != 0;
            }
            if (nz < 2) continue;
            int lead = 0;
            while (v(lead) == 0) ++lead;
            if (v(lead) < 0) continue;  // v and -v give the same move
            IMat U = I, Uinv = I;
            U.row(lead) = v.transpose();
            // inverse of identity-with-row-replaced: row lead = (e_lead - sum_{i != lead} v_i e_i) / v_lead
            Uinv.row(lead) = -v.transpose();
            Uinv(lead, lead) = 1;
            std::vector<int> mask(g, 0);
            mask[lead] = 1;
            for (int s = -depth; s <= depth; ++s)
                moves.push_back(partial_inversion(mask) * shift_diag(lead, s) * congruence(U, Uinv));
        }
    }
    // full inversion after a symmetric shift
    std::vector<std::pair<int, int>> slots;
    for (int i = 0; i < g; ++i)
        for (int j = i; j < g; ++j)
            if (g <= 3 || i == j) slots.push_back({i, j});
    const int base = 2 * depth + 1;
    long combos = 1;
    for (std::size_t i = 0; i < slots.size() && combos < 100000; ++i) combos *= base;
    std::vector<int> all(g, 1);
    for (long code = 0; code < combos; ++code) {
        IMat S = IMat::Zero(g, g);
        long c = code;
        for (auto [i, j] : slots) {
            S(i, j) = S(j, i) = c % base - depth;
            c /= base;
        }
        moves.push_back(partial_inversion(all) * translation(S));
    }
    return moves;
}

}  // namespace detail

// Greedy ascent of det Im over integer translations, lattice reduction of Y
// and (partial) inversions, iterated to a fixed point.
inline ReducedPoint reduce_siegel(const SiegelPoint& p, const ReduceOptions& opts = {}) {
    const int g = p.genus();
    const auto moves = detail::inversion_moves(g, opts.generator_depth);
    SiegelPoint z = p;
    IntegerSymplectic gamma = IntegerSymplectic::identity(g);
    double h = height_raw(z);
    auto normalize = [&] {
        if (g >= 2) {
            auto red = lll_gram(z.Y);
            if (red.U != IMat::Identity(g, g)) {
                auto m = detail::congruence(red.U, red.Uinv);
                z = mobius(m, z);
                gamma = m * gamma;
            }
        }
        IMat S = detail::round_symmetric(z.X);
        if (!S.isZero()) {
            z.X -= S.cast<double>();
            gamma = detail::translation(-S) * gamma;
        }
    };
    for (int it = 0; it < opts.max_iter; ++it) {
        normalize();
        double best = h * (1.0 + opts.tol);
        std::optional<std::size_t> pick;
        SiegelPoint best_z;
        for (std::size_t m = 0; m < moves.size(); ++m) {
            SiegelPoint cand;
            try {
                cand = mobius(moves[m], z);
            } catch (const SingularCocycleError&) {
                continue;
            }
            double ch = detail::safe_height(cand);
            if (ch > best) {
                best = ch;
                pick = m;
                best_z = cand;
            }
        }
        if (!pick) {
            return {z, gamma, in_siegel_set(z, opts.certify_t)};
        }
        z = best_z;
        h = best;
        gamma = moves[*pick] * gamma;
    }
    throw NonTerminationError("reduce_siegel: max_iter exceeded", {z, gamma, false});
}

struct HeightValue {
    double value;
    bool certified;
};

// Hgt of the class of alpha, evaluated at alpha^{-1}(i I).
inline HeightValue hgt(const BlockSymplectic& alpha, const ReduceOptions& opts = {}) {
    SiegelPoint z = mobius(alpha.inverse(), SiegelPoint::i_identity(alpha.genus()));
    ReducedPoint r = reduce_siegel(z, opts);
    return {height_raw(r.z), r.certified};
}

struct HeightSample {
    double t;
    double log_hgt;
};

struct HeightTrajectory {
    BlockSymplectic alpha;
    CartanDirection dhat;
    std::vector<HeightSample> samples;
};

namespace detail {

using quad = __float128;

// Product alpha * kappa with exact integer kappa, accumulated in binary128
// so the cancellations in the expanding rows survive, then rounded.
inline Mat mul_exact(const Mat& a, const IMat& k) {
    Mat out(a.rows(), k.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < k.cols(); ++j) {
            quad s = 0;
            for (int l = 0; l < a.cols(); ++l) s += static_cast<quad>(a(i, l)) * static_cast<quad>(k(l, j));
            out(i, j) = static_cast<double>(s);
        }
    return out;
}

}  // namespace detail

// log Hgt(e^{-t dhat} alpha) along t_grid. The running integer element kappa
// keeps e^{-t dhat} alpha kappa well conditioned, so each step reduces a
// moderate point instead of one exponentially close to the boundary.
inline HeightTrajectory height_flow(const BlockSymplectic& alpha, const CartanDirection& dhat,
                                    const std::vector<double>& t_grid, const ReduceOptions& opts = {}) {
    if (t_grid.empty()) throw DomainError("height_flow: empty grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("height_flow: grid must be increasing");
    dhat.validate(false);
    const int g = alpha.genus();
    if (dhat.delta.size() != g) throw DimensionError("height_flow: direction size mismatch");
    const Mat M = alpha.full();
    IntegerSymplectic kappa = IntegerSymplectic::identity(g);
    HeightTrajectory out{alpha, dhat, {}};
    out.samples.reserve(t_grid.size());
    auto step = [&](double t) {
        IMat K(2 * g, 2 * g);
        K << kappa.A, kappa.B, kappa.C, kappa.D;
        Mat beta = detail::mul_exact(M, K);
        for (int i = 0; i < g; ++i) {
            beta.row(i) *= std::exp(-t * dhat.delta(i));
            beta.row(g + i) *= std::exp(t * dhat.delta(i));
        }
        auto b = BlockSymplectic::from_full_unchecked(beta);
        SiegelPoint z = mobius(b.inverse(), SiegelPoint::i_identity(g));
        ReducedPoint r = reduce_siegel(z, opts);
        kappa = kappa * r.gamma.inverse();
        return std::log(height_raw(r.z));
    };
    double prev = 0.0;
    bool first = true;
    for (double t : t_grid) {
        // keep consecutive evaluations close so the carried kappa stays useful
        double start = first ? (t > 0 ? 0.0 : t) : prev;
        double span = t - start;
        int sub = static_cast<int>(std::ceil(std::abs(span) / 0.25));
        for (int s = 1; s < sub; ++s) step(start + span * s / sub);
        out.samples.push_back({t, step(t)});
        prev = t;
        first = false;
    }
    return out;
}

struct Thresholds {
    double bounded_margin = std::log(50.0);  // theta_b = logHgt(t0) + margin
    double eps_roth = 0.1;
    double window_fraction = 0.5;  // fit window [t_max * fraction, t_max]
    double residual_bound = 2.0;   // RMS of the envelope fit, log units
    double resonance_cutoff = 1e6;  // largest denominator for the g=1 override
};

enum class DiophantineClass { BoundedType, Roth, DiophantineType, Resonant, Unclassified };

inline const char* class_name(DiophantineClass c) {
    switch (c) {
        case DiophantineClass::BoundedType: return "BoundedType";
        case DiophantineClass::Roth: return "Roth";
        case DiophantineClass::DiophantineType: return "DiophantineType";
        case DiophantineClass::Resonant: return "Resonant";
        case DiophantineClass::Unclassified: return "Unclassified";
    }
    return "?";
}

struct DiophantineReport {
    DiophantineClass cls = DiophantineClass::Unclassified;
    double sigma = 0.0;  // meaningful for DiophantineType only
    double sup_log_hgt = 0.0;
    double fitted_slope = 0.0;
    double window_min = 0.0, window_max = 0.0;
    double residual = 0.0;
    bool resonance_override = false;
};

// Finds a convergent p/k of x with k <= cutoff that reproduces x to within
// a few ulps; returns k if found.
inline std::optional<std::int64_t> rational_denominator(double x, double cutoff) {
    double a = std::floor(x), r = x - a;
    long double p0 = 1, q0 = 0, p1 = a, q1 = 1;
    for (int it = 0; it < 64; ++it) {
        if (q1 > cutoff) break;
        long double err = std::abs(static_cast<long double>(q1) * x - p1);
        if (err <= 4.0L * std::numeric_limits<double>::epsilon() * q1 * std::max(1.0, std::abs(x)))
            return static_cast<std::int64_t>(q1);
        if (r == 0.0) return static_cast<std::int64_t>(q1);
        double inv = 1.0 / r;
        double ai = std::floor(inv);
        r = inv - ai;
        long double p2 = ai * p1 + p0, q2 = ai * q1 + q0;
        p0 = p1; q0 = q1; p1 = p2; q1 = q2;
    }
    return std::nullopt;
}

inline DiophantineReport classify_diophantine(const HeightTrajectory& traj, int d, const Thresholds& th = {}) {
    const auto& s = traj.samples;
    if (s.size() < 100 || s.back().t - s.front().t < 10.0 || s.back().t < 10.0)
        throw WindowError("classify_diophantine: need >= 100 samples spanning t_max >= 10");
    if (d < 1) throw DomainError("classify_diophantine: d must be positive");
    DiophantineReport rep;
    const double tmax = s.back().t;
    rep.window_min = tmax * th.window_fraction;
    rep.window_max = tmax;
    double sup = -std::numeric_limits<double>::infinity();
    std::vector<double> ts, ys;
    for (const auto& x : s) {
        sup = std::max(sup, x.log_hgt);
        if (x.t >= rep.window_min) {
            ts.push_back(x.t);
            ys.push_back(sup);
        }
    }
    rep.sup_log_hgt = sup;
    if (ts.size() >= 2) {
        const double n = static_cast<double>(ts.size());
        double mt = 0, my = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) { mt += ts[i]; my += ys[i]; }
        mt /= n; my /= n;
        double stt = 0, sty = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            stt += (ts[i] - mt) * (ts[i] - mt);
            sty += (ts[i] - mt) * (ys[i] - my);
        }
        rep.fitted_slope = stt > 0 ? sty / stt : 0.0;
        double rss = 0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            double r = ys[i] - (my + rep.fitted_slope * (ts[i] - mt));
            rss += r * r;
        }
        rep.residual = std::sqrt(rss / n);
    }
    if (traj.alpha.genus() == 1) {
        // alpha_t^{-1}(i) runs to alpha^{-1}(infinity) = -D/C
        double c = traj.alpha.C(0, 0), dd = traj.alpha.D(0, 0);
        bool rational = (c == 0.0) || rational_denominator(-dd / c, th.resonance_cutoff).has_value();
        if (rational) {
            rep.resonance_override = true;
            rep.cls = DiophantineClass::Resonant;
            return rep;
        }
    }
    const double theta_b = s.front().log_hgt + th.bounded_margin;
    if (sup <= theta_b) {
        rep.cls = DiophantineClass::BoundedType;
        return rep;
    }
    if (rep.residual > th.residual_bound) {
        rep.cls = DiophantineClass::Unclassified;
        return rep;
    }
    const double top = 2.0 * d;
    if (rep.fitted_slope < th.eps_roth)
        rep.cls = DiophantineClass::Roth;
    else if (rep.fitted_slope >= top - th.eps_roth)
        rep.cls = DiophantineClass::Resonant;
    else {
        rep.cls = DiophantineClass::DiophantineType;
        rep.sigma = 1.0 - rep.fitted_slope / top;
    }
    return rep;
}

inline std::vector<double> uniform_grid(double t0, double t1, double dt) {
    std::vector<double> g;
    const long n = std::lround((t1 - t0) / dt);
    for (long i = 0; i <= n; ++i) g.push_back(t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n));
    return g;
}

inline BlockSymplectic lower_triangular_alpha(const Mat& Q) {
    const int g = static_cast<int>(Q.rows());
    Mat I = Mat::Identity(g, g);
    return {I, Mat::Zero(g, g), Q, I};
}

struct LogLawSummary {
    std::vector<double> statistic;  // per sample
    double median = 0, q25 = 0, q75 = 0;
};

// Sample alpha = [[I,0],[Q,I]] with Q symmetric, entries uniform on [0,1),
// from the per-sample stream of `seed`.
inline Mat sample_symmetric_q(int g, std::uint64_t seed, std::uint64_t index) {
    std::mt19937_64 eng(sample_seed(seed, index));
    Mat Q(g, g);
    for (int i = 0; i < g; ++i)
        for (int j = i; j < g; ++j) Q(i, j) = Q(j, i) = uniform01(eng);
    return Q;
}

struct LogLawOptions {
    double dt = 0.01;
    unsigned threads = 0;
    ReduceOptions reduce{};
};

// Per-sample statistic: (max over t <= t_max of log Hgt) / log t_max.
inline LogLawSummary loglaw_mc(int g, const CartanDirection& dhat, int n_samples, double t_max, std::uint64_t seed,
                               const LogLawOptions& opts = {}) {
    if (n_samples < 1) throw DomainError("loglaw_mc: need at least one sample");
    if (!(t_max > 1.0)) throw DomainError("loglaw_mc: t_max must exceed 1");
    auto grid = uniform_grid(0.0, t_max, opts.dt);
    LogLawSummary out;
    out.statistic.assign(n_samples, 0.0);
    parallel_for(
        static_cast<std::size_t>(n_samples),
        [&](std::size_t i) {
            Mat Q = sample_symmetric_q(g, seed, i);
            auto traj = height_flow(lower_triangular_alpha(Q), dhat, grid, opts.reduce);
            double m = -std::numeric_limits<double>::infinity();
            for (const auto& s : traj.samples) m = std::max(m, s.log_hgt);
            out.statistic[i] = m / std::log(t_max);
        },
        opts.threads);
    std::vector<double> sorted = out.statistic;
    std::sort(sorted.begin(), sorted.end());
    out.median = quantile_sorted(sorted, 0.5);
    out.q25 = quantile_sorted(sorted, 0.25);
    out.q75 = quantile_sorted(sorted, 0.75);
    return out;
}

inline double daleth(const Vec& delta) {
    double v = 1.0;
    for (int i = 0; i < delta.size(); ++i) {
        if (!(delta(i) > 0)) throw DomainError("daleth: entries must be positive");
        v *= delta(i) + 1.0 / delta(i);
    }
    return v;
}

}  // namespace siegel
