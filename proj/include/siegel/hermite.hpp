#pragma once

#include "siegel/core.hpp"

#include <mutex>

namespace siegel {

// Hermite model of the Schroedinger representation: coefficients against
// the L2-orthonormal eigenfunctions psi_n of x^2 - d^2/dx^2 (eigenvalue 2n+1).
//   x psi_n  = (sqrt(n) psi_{n-1} + sqrt(n+1) psi_{n+1}) / sqrt(2)
//   psi_n'   = (sqrt(n) psi_{n-1} - sqrt(n+1) psi_{n+1}) / sqrt(2)

struct HermiteTruncation {
    int g = 1;        // number of variables (0 = scalar)
    int cutoff = 16;  // per-axis mode bound A
    double h = 1.0;   // representation parameter

    void validate() const {
        if (g < 0) throw DomainError("HermiteTruncation: negative dimension");
        if (g > 0 && cutoff < 4) throw DomainError("HermiteTruncation: cutoff must be >= 4");
        if (h == 0.0 || !std::isfinite(h)) throw DomainError("HermiteTruncation: h must be nonzero");
    }
    std::size_t size() const {
        std::size_t n = 1;
        for (int i = 0; i < g; ++i) n *= static_cast<std::size_t>(cutoff);
        return n;
    }
    double root_h() const { return std::sqrt(std::abs(h)); }
    bool operator==(const HermiteTruncation& o) const { return g == o.g && cutoff == o.cutoff && h == o.h; }
    HermiteTruncation with_dim(int g2) const { return {g2, cutoff, h}; }
};

struct HermiteField {
    HermiteTruncation trunc;
    std::vector<cplx> c;  // lexicographic multi-index order, first axis slowest
    double loss = 0.0;    // accumulated a-posteriori truncation loss

    static HermiteField zero(const HermiteTruncation& t) {
        t.validate();
        return {t, std::vector<cplx>(t.size(), cplx{}), 0.0};
    }
    static HermiteField mode(const HermiteTruncation& t, const std::vector<int>& a, cplx v = 1.0) {
        auto f = zero(t);
        f.c[f.index(a)] = v;
        return f;
    }
    std::size_t index(const std::vector<int>& a) const {
        std::size_t k = 0;
        for (int i = 0; i < trunc.g; ++i) k = k * trunc.cutoff + static_cast<std::size_t>(a[i]);
        return k;
    }
    std::vector<int> multi_index(std::size_t k) const {
        std::vector<int> a(trunc.g);
        for (int i = trunc.g - 1; i >= 0; --i) {
            a[i] = static_cast<int>(k % trunc.cutoff);
            k /= trunc.cutoff;
        }
        return a;
    }
    int total_degree(std::size_t k) const {
        int s = 0;
        for (int i = 0; i < trunc.g; ++i) {
            s += static_cast<int>(k % trunc.cutoff);
            k /= trunc.cutoff;
        }
        return s;
    }
    double norm() const {
        double s = 0;
        for (auto v : c) s += std::norm(v);
        return std::sqrt(s);
    }

    HermiteField& operator+=(const HermiteField& o) {
        check_same(o);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] += o.c[i];
        loss += o.loss;
        return *this;
    }
    HermiteField& operator-=(const HermiteField& o) {
        check_same(o);
        for (std::size_t i = 0; i < c.size(); ++i) c[i] -= o.c[i];
        loss += o.loss;
        return *this;
    }
    HermiteField& operator*=(cplx s) {
        for (auto& v : c) v *= s;
        loss *= std::abs(s);
        return *this;
    }
    friend HermiteField operator+(HermiteField a, const HermiteField& b) { return a += b; }
    friend HermiteField operator-(HermiteField a, const HermiteField& b) { return a -= b; }
    friend HermiteField operator*(cplx s, HermiteField a) { return a *= s; }

    void check_same(const HermiteField& o) const {
        if (!(trunc == o.trunc)) throw DimensionError("HermiteField: truncation mismatch");
    }
};

// Strided view along one axis: calls fn(base, stride) once per fiber.
template <class Fn>
void for_each_fiber(const HermiteTruncation& t, int axis, Fn&& fn) {
    std::size_t stride = 1;
    for (int i = axis + 1; i < t.g; ++i) stride *= static_cast<std::size_t>(t.cutoff);
    std::size_t outer = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(t.cutoff);
    const std::size_t A = static_cast<std::size_t>(t.cutoff);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < stride; ++i) fn(o * A * stride + i, stride);
}

namespace detail {

// Two-band ladder operator along `axis`:
//   out_m = lower * sqrt(m+1) f_{m+1} + upper * sqrt(m) f_{m-1}
// The write to mode A (from f_{A-1}) is dropped and counted as loss.
inline HermiteField ladder(const HermiteField& f, int axis, cplx lower, cplx upper) {
    if (axis < 0 || axis >= f.trunc.g) throw DimensionError("axis out of range");
    HermiteField out = HermiteField::zero(f.trunc);
    const int A = f.trunc.cutoff;
    double lost = 0.0;
    for_each_fiber(f.trunc, axis, [&](std::size_t base, std::size_t stride) {
        for (int m = 0; m < A; ++m) {
            cplx v{};
            if (m + 1 < A) v += lower * std::sqrt(m + 1.0) * f.c[base + (m + 1) * stride];
            if (m > 0) v += upper * std::sqrt(static_cast<double>(m)) * f.c[base + (m - 1) * stride];
            out.c[base + m * stride] = v;
        }
        lost += std::norm(upper * std::sqrt(static_cast<double>(A)) * f.c[base + (A - 1) * stride]);
    });
    out.loss = f.loss + std::sqrt(lost);
    return out;
}

}  // namespace detail

// |h|^{1/2} d/dx_k
inline HermiteField apply_ddx(const HermiteField& f, int axis) {
    const double s = f.trunc.root_h() / std::sqrt(2.0);
    return detail::ladder(f, axis, s, -s);
}

// |h|^{1/2} x_k
inline HermiteField apply_x(const HermiteField& f, int axis) {
    const double s = f.trunc.root_h() / std::sqrt(2.0);
    return detail::ladder(f, axis, s, s);
}

// Image of Xi_k: -i sign(h) |h|^{1/2} x_k, so that [Xi_k, X_k] = i h.
inline HermiteField apply_xi(const HermiteField& f, int axis) {
    const double s = f.trunc.root_h() / std::sqrt(2.0);
    const cplx m = cplx(0, -(f.trunc.h > 0 ? 1.0 : -1.0)) * s;
    return detail::ladder(f, axis, m, m);
}

// (sum_a (|h| (2|a| + g))^s |f_a|^2)^{1/2}
inline double sobolev_norm(const HermiteField& f, double s) {
    if (f.trunc.g == 0) return std::abs(f.c[0]);
    const double ah = std::abs(f.trunc.h);
    double acc = 0;
    for (std::size_t k = 0; k < f.c.size(); ++k) {
        if (f.c[k] == cplx{}) continue;
        double lam = ah * (2.0 * f.total_degree(k) + f.trunc.g);
        acc += std::pow(lam, s) * std::norm(f.c[k]);
    }
    return std::sqrt(acc);
}

// d_m = integral of psi_m over R: d_0 = sqrt(2) pi^{1/4}, d_{n+1} = sqrt(n/(n+1)) d_{n-1},
// odd values vanish.
inline std::vector<double> hermite_integrals(int n) {
    std::vector<double> d(std::max(n, 2), 0.0);
    d[0] = std::sqrt(2.0) * std::pow(kPi, 0.25);
    for (int m = 2; m < n; m += 2) d[m] = std::sqrt((m - 1.0) / m) * d[m - 2];
    d.resize(n);
    return d;
}

// Mass-one Gaussian coefficient: phi_1 = e0 psi_0 with e0 d_0 = 1.
inline double gaussian_mass_one_coeff() { return 1.0 / (std::sqrt(2.0) * std::pow(kPi, 0.25)); }

struct GaussHermite {
    std::vector<double> nodes, weights;  // weight e^{-u^2}
};

inline std::vector<double> hermite_polys(int n, double x);

// Nodes from Golub-Welsch on the Jacobi matrix of the weight e^{-u^2}.
// Weights from the Christoffel sum 1 / sum_k p_k(u)^2, which keeps relative
// accuracy in the tails where eigenvector entries underflow.
inline GaussHermite gauss_hermite(int n) {
    Mat J = Mat::Zero(n, n);
    for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
    Eigen::SelfAdjointEigenSolver<Mat> es(J, Eigen::EigenvaluesOnly);
    GaussHermite gh;
    for (int i = 0; i < n; ++i) {
        double u = es.eigenvalues()(i);
        double s = 0;
        for (double p : hermite_polys(n, u)) s += p * p;
        gh.nodes.push_back(u);
        gh.weights.push_back(1.0 / s);
    }
    return gh;
}

// Values p_0..p_{n-1}(x) with psi_m(x) = p_m(x) e^{-x^2/2}.
inline std::vector<double> hermite_polys(int n, double x) {
    std::vector<double> p(std::max(n, 2));
    p[0] = std::pow(kPi, -0.25);
    p[1] = std::sqrt(2.0) * x * p[0];
    for (int m = 1; m + 1 < n; ++m) p[m + 1] = std::sqrt(2.0 / (m + 1)) * x * p[m] - std::sqrt(m / (m + 1.0)) * p[m - 1];
    p.resize(n);
    return p;
}

// Max deviation of the d_m recurrence from 200-node Gauss-Hermite quadrature
// for m < m_max. With x = sqrt(2) u the integrand becomes a polynomial times
// e^{-u^2}, so the rule is exact for these degrees.
inline double hermite_integral_check(int m_max = 60) {
    auto gh = gauss_hermite(200);
    auto d = hermite_integrals(m_max);
    std::vector<double> q(m_max, 0.0);
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
        auto p = hermite_polys(m_max, std::sqrt(2.0) * gh.nodes[i]);
        for (int m = 0; m < m_max; ++m) q[m] += std::sqrt(2.0) * gh.weights[i] * p[m];
    }
    double err = 0;
    for (int m = 0; m < m_max; ++m) err = std::max(err, std::abs(q[m] - d[m]));
    return err;
}

// Aborts if the recurrence disagrees with quadrature; run once per process.
inline void validate_hermite_integrals() {
    static std::once_flag once;
    std::call_once(once, [] {
        double e = hermite_integral_check();
        if (!(e < 1e-12)) throw AccuracyError("Hermite integral recurrence failed quadrature validation");
    });
}

// I_{d,g}: integrate over the first d variables.
inline HermiteField integrate_I(const HermiteField& f, int d) {
    const auto& t = f.trunc;
    if (d < 0 || d > t.g) throw DimensionError("integrate_I: d out of range");
    auto dm = hermite_integrals(t.cutoff);
    HermiteField out = HermiteField::zero(t.with_dim(t.g - d));
    const std::size_t inner = out.c.size();
    HermiteField head = HermiteField::zero(t.with_dim(d));
    for (std::size_t i = 0; i < head.c.size(); ++i) {
        double w = 1.0;
        std::size_t k = i;
        for (int a = 0; a < d && w != 0.0; ++a) {
            w *= dm[k % t.cutoff];
            k /= t.cutoff;
        }
        if (w == 0.0) continue;
        for (std::size_t j = 0; j < inner; ++j) out.c[j] += w * f.c[i * inner + j];
    }
    out.loss = f.loss;
    return out;
}

// E_{d,g} f (x, y) = phi_d(x) f(y), phi_d the mass-one Gaussian on R^d.
inline HermiteField extend_E(const HermiteField& f, int d) {
    const auto& t = f.trunc;
    if (d < 0) throw DimensionError("extend_E: negative d");
    HermiteField out = HermiteField::zero(t.with_dim(t.g + d));
    const double w = std::pow(gaussian_mass_one_coeff(), d);
    for (std::size_t j = 0; j < f.c.size(); ++j) out.c[j] = w * f.c[j];
    out.loss = f.loss;
    return out;
}

// E_1 I_1 along one axis (rank-one projection fiberwise).
inline HermiteField project_gaussian_axis(const HermiteField& f, int axis) {
    auto dm = hermite_integrals(f.trunc.cutoff);
    const double e0 = gaussian_mass_one_coeff();
    HermiteField out = HermiteField::zero(f.trunc);
    for_each_fiber(f.trunc, axis, [&](std::size_t base, std::size_t stride) {
        cplx s{};
        for (int m = 0; m < f.trunc.cutoff; m += 2) s += dm[m] * f.c[base + m * stride];
        out.c[base] = e0 * s;
    });
    out.loss = f.loss;
    return out;
}

// Per-fiber integrals along `axis`, as a field whose `axis` slot holds them at mode 0.
inline double axis_integral_norm(const HermiteField& f, int axis) {
    auto dm = hermite_integrals(f.trunc.cutoff);
    double acc = 0;
    for_each_fiber(f.trunc, axis, [&](std::size_t base, std::size_t stride) {
        cplx s{};
        for (int m = 0; m < f.trunc.cutoff; m += 2) s += dm[m] * f.c[base + m * stride];
        acc += std::norm(s);
    });
    return std::sqrt(acc);
}

// P f = integral_{-inf}^{x} f dt along `axis` (raw derivative, no |h| factor).
// Solved top-down in coefficient space; the m = 0 equation is the consistency
// condition and its residual is recorded as loss.
inline HermiteField primitive_P(const HermiteField& f, int axis = 0, double tol = 1e-10) {
    if (axis < 0 || axis >= f.trunc.g) throw DimensionError("primitive_P: axis out of range");
    double defect = axis_integral_norm(f, axis);
    if (defect > tol * std::max(1.0, f.norm()))
        throw PreconditionError("primitive_P: nonzero integral along the axis", defect);
    const int A = f.trunc.cutoff;
    HermiteField out = HermiteField::zero(f.trunc);
    const double r2 = std::sqrt(2.0);
    double lost = 0;
    for_each_fiber(f.trunc, axis, [&](std::size_t base, std::size_t stride) {
        auto F = [&](int m) { return f.c[base + m * stride]; };
        std::vector<cplx> g(A + 1, cplx{});
        g[A - 2] = -r2 * F(A - 1) / std::sqrt(A - 1.0);
        for (int n = A - 2; n >= 1; --n) g[n - 1] = (std::sqrt(n + 1.0) * g[n + 1] - r2 * F(n)) / std::sqrt(double(n));
        lost += std::norm(F(0) - g[1] / r2);
        for (int m = 0; m < A; ++m) out.c[base + m * stride] = g[m];
    });
    out.loss = f.loss + std::sqrt(lost);
    return out;
}

struct MetaplecticResult {
    HermiteField field;
    bool accuracy_warning = false;  // some |t_j| > 1
    std::size_t padded_modes = 0;
};

namespace detail {

inline std::size_t metaplectic_padding(int cutoff, double t) {
    double need = 2.0 * cutoff * std::exp(2.0 * std::abs(t)) + 64.0;
    std::size_t m = 64;
    while (static_cast<double>(m) < need) m *= 2;
    return m;
}

// exp(t G) v with G = (a^2 - a^{+2}) / 2, the generator of
// U_t f = e^{t/2} f(e^t x). Taylor substeps with step * ||G|| <= 2.
inline void metaplectic_1d(std::vector<cplx>& v, double t) {
    const std::size_t M = v.size();
    if (t == 0.0 || M < 3) return;
    std::vector<double> coef(M, 0.0);  // G_{n, n+2} = sqrt((n+1)(n+2))/2 = -G_{n+2, n}
    for (std::size_t n = 0; n + 2 < M; ++n) coef[n] = 0.5 * std::sqrt((n + 1.0) * (n + 2.0));
    const double gnorm = static_cast<double>(M);
    const int steps = std::max(1, static_cast<int>(std::ceil(std::abs(t) * gnorm / 2.0)));
    const double h = t / steps;
    std::vector<cplx> term(M), next(M);
    for (int s = 0; s < steps; ++s) {
        term = v;
        double vn = 0;
        for (auto x : v) vn = std::max(vn, std::abs(x));
        for (int k = 1; k < 80; ++k) {
            double tn = 0;
            for (std::size_t n = 0; n < M; ++n) {
                cplx acc{};
                if (n + 2 < M) acc += coef[n] * term[n + 2];
                if (n >= 2) acc -= coef[n - 2] * term[n - 2];
                next[n] = acc * (h / k);
                tn = std::max(tn, std::abs(next[n]));
            }
            for (std::size_t n = 0; n < M; ++n) v[n] += next[n];
            term.swap(next);
            if (tn <= 1e-18 * vn) break;
        }
    }
}

}  // namespace detail

// Unitary dilation U_t f(x, y) = e^{sum t / 2} f(e^{t} x, y) on the first
// t.size() variables, applied in a padded mode space and truncated back.
inline MetaplecticResult metaplectic_U(const HermiteField& f, const std::vector<double>& t) {
    if (static_cast<int>(t.size()) > f.trunc.g) throw DimensionError("metaplectic_U: too many flow times");
    MetaplecticResult res{f, false, 0};
    const int A = f.trunc.cutoff;
    double lost = 0;
    for (std::size_t j = 0; j < t.size(); ++j) {
        if (std::abs(t[j]) > 1.0) res.accuracy_warning = true;
        if (t[j] == 0.0) continue;
        const std::size_t M = detail::metaplectic_padding(A, t[j]);
        res.padded_modes = std::max(res.padded_modes, M);
        HermiteField& F = res.field;
        for_each_fiber(F.trunc, static_cast<int>(j), [&](std::size_t base, std::size_t stride) {
            std::vector<cplx> v(M, cplx{});
            for (int m = 0; m < A; ++m) v[m] = F.c[base + m * stride];
            detail::metaplectic_1d(v, t[j]);
            for (int m = 0; m < A; ++m) F.c[base + m * stride] = v[m];
            for (std::size_t m = A; m < M; ++m) lost += std::norm(v[m]);
        });
    }
    res.field.loss += std::sqrt(lost);
    return res;
}

// Order -s norm of the functional f -> I_1(U_t f) restricted to modes < cutoff,
// g = d = 1. Its coefficient vector is U_{-t} applied to (d_m), computed in the
// padded space with the exact d_m there.
inline double current_norm_after_flow(int cutoff, double h, double s, double t) {
    const std::size_t M = detail::metaplectic_padding(cutoff, t);
    auto dm = hermite_integrals(static_cast<int>(M));
    std::vector<cplx> v(dm.begin(), dm.end());
    detail::metaplectic_1d(v, -t);
    double acc = 0;
    for (int m = 0; m < cutoff; ++m) acc += std::pow(std::abs(h) * (2.0 * m + 1.0), -s) * std::norm(v[m]);
    return std::sqrt(acc);
}

// Order -s norm of I_g restricted to modes < cutoff in each variable.
inline double current_norm(int g, int cutoff, double h, double s) {
    auto dm = hermite_integrals(cutoff);
    HermiteField f = HermiteField::zero({g, cutoff, h});
    double acc = 0;
    for (std::size_t k = 0; k < f.c.size(); ++k) {
        auto a = f.multi_index(k);
        double w = 1;
        int deg = 0;
        for (int x : a) {
            w *= dm[x];
            deg += x;
        }
        if (w == 0) continue;
        acc += std::pow(std::abs(h) * (2.0 * deg + g), -s) * w * w;
    }
    return std::sqrt(acc);
}

}  // namespace siegel
