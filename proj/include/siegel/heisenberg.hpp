#pragma once

#include "siegel/symplectic.hpp"

#include <json.hpp>

namespace siegel {

// Polarized law: (x, xi, t)(x', xi', t') = (x + x', xi + xi', t + t' + xi.x').
// Canonical law: center t + t' + (xi.x' - xi'.x) / 2.
// The two are related by t_pol = t_can + xi.x / 2.
enum class Convention { Polarized, Canonical };

struct HeisElement {
    Vec x, xi;
    double t = 0;
    Convention conv = Convention::Polarized;

    int genus() const { return static_cast<int>(x.size()); }
    static HeisElement identity(int g, Convention c = Convention::Polarized) {
        return {Vec::Zero(g), Vec::Zero(g), 0.0, c};
    }
};

inline HeisElement mul(const HeisElement& a, const HeisElement& b) {
    if (a.conv != b.conv) throw UsageError("mul: convention mismatch");
    if (a.genus() != b.genus()) throw DimensionError("mul: genus mismatch");
    double c = a.conv == Convention::Polarized ? a.xi.dot(b.x) : 0.5 * (a.xi.dot(b.x) - b.xi.dot(a.x));
    return {a.x + b.x, a.xi + b.xi, a.t + b.t + c, a.conv};
}

inline HeisElement inv(const HeisElement& a) {
    double t = a.conv == Convention::Polarized ? -a.t + a.xi.dot(a.x) : -a.t;
    return {-a.x, -a.xi, t, a.conv};
}

inline HeisElement to_polarized(const HeisElement& a) {
    if (a.conv == Convention::Polarized) return a;
    return {a.x, a.xi, a.t + 0.5 * a.xi.dot(a.x), Convention::Polarized};
}

inline HeisElement to_canonical(const HeisElement& a) {
    if (a.conv == Convention::Canonical) return a;
    return {a.x, a.xi, a.t - 0.5 * a.xi.dot(a.x), Convention::Canonical};
}

// Element of Z^g x Z^g x Z/2 (polarized coordinates).
struct LatticeElement {
    IVec n, m;
    std::int64_t half_t = 0;  // center = half_t / 2

    HeisElement element() const {
        return {n.cast<double>(), m.cast<double>(), 0.5 * static_cast<double>(half_t), Convention::Polarized};
    }
};

// Representative of the coset a * Lambda with x, xi in [0,1)^g, t in [0, 1/2).
struct NilPoint {
    HeisElement rep;
    LatticeElement witness;  // rep = a * witness
};

inline NilPoint reduce(const HeisElement& a) {
    if (a.conv != Convention::Polarized) throw UsageError("reduce: expects polarized coordinates");
    const int g = a.genus();
    IVec n(g), m(g);
    for (int i = 0; i < g; ++i) {
        n(i) = -static_cast<std::int64_t>(std::floor(a.x(i)));
        m(i) = -static_cast<std::int64_t>(std::floor(a.xi(i)));
    }
    Vec x = a.x + n.cast<double>(), xi = a.xi + m.cast<double>();
    for (int i = 0; i < g; ++i) {  // floor can land exactly on 1 after rounding
        if (x(i) >= 1.0) { x(i) -= 1.0; --n(i); }
        if (xi(i) >= 1.0) { xi(i) -= 1.0; --m(i); }
    }
    double t = a.t + a.xi.dot(n.cast<double>());
    auto s = static_cast<std::int64_t>(std::floor(2.0 * t));
    double tr = t - 0.5 * static_cast<double>(s);
    if (tr >= 0.5) { tr -= 0.5; ++s; }
    if (tr < 0) { tr += 0.5; --s; }
    return {{x, xi, tr, Convention::Polarized}, {n, m, -s}};
}

// Commuting fields X_i = alpha^{-1}(e_i, 0), i < d, as columns (a_i; b_i) in R^{2g}.
struct IsotropicFrame {
    BlockSymplectic alpha;
    int d = 1;

    Mat fields() const {
        const int g = alpha.genus();
        if (d < 1 || d > g) throw DimensionError("IsotropicFrame: need 1 <= d <= g");
        auto ai = alpha.inverse();
        Mat F(2 * g, d);
        F.topRows(g) = ai.A.leftCols(d);
        F.bottomRows(g) = ai.C.leftCols(d);
        return F;
    }

    // Max |omega(X_i, X_j)|, zero for an isotropic frame.
    double isotropy_defect() const {
        Mat F = fields();
        const int g = alpha.genus();
        Mat w = F.topRows(g).transpose() * F.bottomRows(g) - F.bottomRows(g).transpose() * F.topRows(g);
        return max_abs(w);
    }

    void validate(double tol = 1e-10) const {
        if (verify_symplectic(alpha.full()) > 1e-9) throw DomainError("IsotropicFrame: alpha is not symplectic");
        if (isotropy_defect() > tol) throw DomainError("IsotropicFrame: frame is not isotropic");
    }
};

// exp(a, b, 0) = (a, b, a.b / 2) in polarized coordinates.
inline HeisElement heis_exp(const Vec& a, const Vec& b) { return {a, b, 0.5 * a.dot(b), Convention::Polarized}; }

// exp(sum x_i X_i) * lift, unreduced.
inline HeisElement flow_lift(const IsotropicFrame& fr, const HeisElement& lift, const Vec& x) {
    Mat F = fr.fields();
    if (x.size() != fr.d) throw DimensionError("flow: time vector has wrong length");
    const int g = fr.alpha.genus();
    Vec v = F * x;
    return mul(heis_exp(v.head(g), v.tail(g)), lift);
}

inline NilPoint flow(const IsotropicFrame& fr, const NilPoint& m, const Vec& x) {
    return reduce(flow_lift(fr, m.rep, x));
}

// Tensor bump prod_i c (1 - (y_i / r)^2)^p / r on |y_i| < r, unit mass.
struct Bump {
    double radius = 0.25;
    int order = 3;

    double norm_const() const {
        return std::tgamma(order + 1.5) / (std::sqrt(kPi) * std::tgamma(order + 1.0));
    }
    double operator()(double y) const {
        double u = y / radius;
        if (std::abs(u) >= 1.0) return 0.0;
        return norm_const() / radius * std::pow(1.0 - u * u, order);
    }
};

// Zero-mean trigonometric polynomial on R / (1/2)Z: sum_k c_k e(2 k s).
struct CircleSeries {
    std::vector<std::pair<int, cplx>> terms;

    cplx operator()(double s) const {
        cplx v{};
        for (const auto& [k, c] : terms) v += c * e_phase(2.0 * k * s);
        return v;
    }
    void validate() const {
        for (const auto& [k, c] : terms)
            if (k == 0 && c != cplx{}) throw DomainError("CircleSeries: nonzero mean");
    }
};

// f(X, Xi, T) = sum_n psi(x + n) phi(t + xi.n + n^T Q n / 2) in the adapted
// coordinates x = X, xi = Xi + Q X, t = T + X^T Q X / 2; invariant under
// right multiplication by the standard lattice.
struct Observable {
    Mat Q;
    Bump bump;
    CircleSeries phi;

    void validate() const {
        if (Q.rows() != Q.cols() || max_abs(Q - Q.transpose()) > 1e-14)
            throw DomainError("Observable: Q must be symmetric");
        if (!(bump.radius > 0 && bump.radius < 0.5)) throw DomainError("Observable: bump radius must lie in (0, 1/2)");
        if (bump.order < 2) throw DomainError("Observable: bump order must be >= 2");
        phi.validate();
    }
};

// Evaluated at the reduced representative, so phases stay small.
inline cplx observable_eval(const Observable& obs, const HeisElement& p) {
    const HeisElement a = reduce(to_polarized(p)).rep;
    const int g = a.genus();
    if (obs.Q.rows() != g) throw DimensionError("observable_eval: genus mismatch");
    const double r = obs.bump.radius;
    Vec xi = a.xi + obs.Q * a.x;
    const double t = a.t + 0.5 * a.x.dot(obs.Q * a.x);
    // The support of psi(x + n) forces n_i in (-x_i - r, -x_i + r).
    std::vector<std::int64_t> lo(g), hi(g);
    for (int i = 0; i < g; ++i) {
        lo[i] = static_cast<std::int64_t>(std::ceil(-a.x(i) - r));
        hi[i] = static_cast<std::int64_t>(std::floor(-a.x(i) + r));
        if (lo[i] > hi[i]) return 0.0;
    }
    std::vector<std::int64_t> n = lo;
    Vec nd(g);
    cplx total{};
    while (true) {
        double w = 1.0;
        for (int i = 0; i < g; ++i) {
            nd(i) = static_cast<double>(n[i]);
            w *= obs.bump(a.x(i) + nd(i));
        }
        if (w != 0.0) total += w * obs.phi(t + xi.dot(nd) + 0.5 * nd.dot(obs.Q * nd));
        int i = g - 1;
        while (i >= 0 && n[i] == hi[i]) {
            n[i] = lo[i];
            --i;
        }
        if (i < 0) break;
        ++n[i];
    }
    return total;
}

inline cplx observable_eval(const Observable& obs, const NilPoint& m) { return observable_eval(obs, m.rep); }

// The lattice sum sum_{n in [0,N]^g} phi(t + l.n + n^T Q n / 2).
inline cplx lattice_phi_sum(const Observable& obs, double t, const Vec& l, int N) {
    const int g = static_cast<int>(l.size());
    std::vector<int> n(g, 0);
    Vec nd(g);
    CompensatedComplex acc;
    while (true) {
        for (int i = 0; i < g; ++i) nd(i) = n[i];
        acc.add(obs.phi(t + l.dot(nd) + 0.5 * nd.dot(obs.Q * nd)));
        int i = g - 1;
        while (i >= 0 && n[i] == N) n[i--] = 0;
        if (i < 0) break;
        ++n[i];
    }
    return acc.value();
}

struct BirkhoffResult {
    cplx value;
    double indicator = 0;  // |full - half resolution|
    std::size_t nodes = 0;
};

struct GaussLegendre {
    std::vector<double> nodes, weights;  // on [-1, 1]
};

inline GaussLegendre gauss_legendre(int n) {
    GaussLegendre gl;
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 1;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        gl.nodes.push_back(x);
        gl.weights.push_back(2.0 / ((1 - x * x) * dp * dp));
    }
    return gl;
}

namespace detail {

// Panel ends for one axis: unit subdivisions of [lo, hi] refined at the bump
// breakpoints when the frame moves the matching x-coordinate alone.
inline std::vector<double> panel_breaks(double lo, double hi, double x0, double speed, double radius) {
    std::vector<double> b{lo, hi};
    for (double s = lo + 1.0; s < hi; s += 1.0) b.push_back(s);
    if (speed != 0.0) {
        // x0 + speed * s + n = +-radius
        double a = x0 + speed * lo, c = x0 + speed * hi;
        double mn = std::min(a, c), mx = std::max(a, c);
        for (auto n = static_cast<std::int64_t>(std::floor(-mx - 1)); n <= static_cast<std::int64_t>(std::ceil(-mn + 1)); ++n)
            for (double e : {-radius, radius}) {
                double s = (e - static_cast<double>(n) - x0) / speed;
                if (s > lo && s < hi) b.push_back(s);
            }
    }
    std::sort(b.begin(), b.end());
    std::vector<double> out;
    for (double v : b)
        if (out.empty() || v - out.back() > 1e-13) out.push_back(v);
    if (out.back() < hi) out.back() = hi;
    return out;
}

struct AxisRule {
    std::vector<double> x, w;
};

inline AxisRule axis_rule(const std::vector<double>& breaks, int per_panel) {
    auto gl = gauss_legendre(per_panel);
    AxisRule r;
    for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
        double a = breaks[p], b = breaks[p + 1], h = 0.5 * (b - a);
        for (int i = 0; i < per_panel; ++i) {
            r.x.push_back(a + h * (gl.nodes[i] + 1.0));
            r.w.push_back(h * gl.weights[i]);
        }
    }
    return r;
}

inline cplx tensor_quadrature(const IsotropicFrame& fr, const Observable& obs, const HeisElement& lift,
                              const std::vector<AxisRule>& rules, std::size_t& count) {
    const int d = fr.d;
    const int g = fr.alpha.genus();
    Mat F = fr.fields();
    const std::size_t outer = rules[0].x.size();
    std::vector<cplx> partial(outer);
    parallel_for(outer, [&](std::size_t i0) {
        std::vector<std::size_t> idx(d, 0);
        idx[0] = i0;
        Vec x(d);
        CompensatedComplex acc;
        while (true) {
            double w = 1.0;
            for (int k = 0; k < d; ++k) {
                x(k) = rules[k].x[idx[k]];
                w *= rules[k].w[idx[k]];
            }
            Vec v = F * x;
            acc.add(w * observable_eval(obs, mul(heis_exp(v.head(g), v.tail(g)), lift)));
            int k = d - 1;
            while (k >= 1 && idx[k] + 1 == rules[k].x.size()) idx[k--] = 0;
            if (k < 1) break;
            ++idx[k];
        }
        partial[i0] = acc.value();
    });
    count = 1;
    for (const auto& r : rules) count *= r.x.size();
    // Pairwise tree summation, fixed order.
    while (partial.size() > 1) {
        std::vector<cplx> next((partial.size() + 1) / 2);
        for (std::size_t i = 0; i < next.size(); ++i)
            next[i] = partial[2 * i] + (2 * i + 1 < partial.size() ? partial[2 * i + 1] : cplx{});
        partial.swap(next);
    }
    return partial.empty() ? cplx{} : partial[0];
}

}  // namespace detail

// Tensor Gauss-Legendre estimate of the integral of f(exp(sum x_i X_i) m)
// over the box [lo, hi], `per_unit` nodes per unit-length panel.
inline BirkhoffResult birkhoff(const IsotropicFrame& fr, const Observable& obs, const HeisElement& m, const Vec& lo,
                               const Vec& hi, int per_unit = 16, double tol = 1e-6) {
    if (per_unit < 8) throw DomainError("birkhoff: need at least 8 nodes per unit length");
    if (lo.size() != fr.d || hi.size() != fr.d) throw DimensionError("birkhoff: box dimension mismatch");
    obs.validate();
    Mat F = fr.fields();
    const int g = fr.alpha.genus();
    const HeisElement lift = to_polarized(m);
    std::vector<detail::AxisRule> full, half;
    for (int k = 0; k < fr.d; ++k) {
        // The x-part of field k moves only coordinate k: align panels with bump edges.
        double speed = 0.0;
        bool diagonal = k < g;
        for (int j = 0; j < g && diagonal; ++j)
            if (j != k && F(j, k) != 0.0) diagonal = false;
        if (diagonal) speed = F(k, k);
        auto br = detail::panel_breaks(lo(k), hi(k), lift.x(k), diagonal ? speed : 0.0, obs.bump.radius);
        full.push_back(detail::axis_rule(br, per_unit));
        half.push_back(detail::axis_rule(br, per_unit / 2));
    }
    std::size_t n_full = 0, n_half = 0;
    cplx a = detail::tensor_quadrature(fr, obs, lift, full, n_full);
    cplx b = detail::tensor_quadrature(fr, obs, lift, half, n_half);
    BirkhoffResult res{a, std::abs(a - b), n_full};
    if (res.indicator > tol * std::max(1.0, std::abs(a)))
        throw AccuracyError("birkhoff: quadrature indicator " + std::to_string(res.indicator) + " above tolerance");
    return res;
}

inline nlohmann::json observable_to_json(const Observable& o) {
    nlohmann::json j;
    j["q"] = nlohmann::json::array();
    for (int i = 0; i < o.Q.rows(); ++i) {
        std::vector<double> row(o.Q.cols());
        for (int k = 0; k < o.Q.cols(); ++k) row[k] = o.Q(i, k);
        j["q"].push_back(row);
    }
    j["bump"] = {{"radius", o.bump.radius}, {"order", o.bump.order}};
    j["phi"] = nlohmann::json::array();
    for (const auto& [k, c] : o.phi.terms) j["phi"].push_back({{"k", k}, {"re", c.real()}, {"im", c.imag()}});
    return j;
}

inline Observable observable_from_json(const nlohmann::json& j) {
    Observable o;
    const auto& q = j.at("q");
    const int g = static_cast<int>(q.size());
    o.Q.resize(g, g);
    for (int i = 0; i < g; ++i) {
        if (static_cast<int>(q[i].size()) != g) throw DimensionError("observable: q must be square");
        for (int k = 0; k < g; ++k) o.Q(i, k) = q[i][k].get<double>();
    }
    o.bump.radius = j.at("bump").at("radius").get<double>();
    o.bump.order = j.at("bump").at("order").get<int>();
    for (const auto& t : j.at("phi")) o.phi.terms.push_back({t.at("k").get<int>(), {t.at("re").get<double>(), t.at("im").get<double>()}});
    o.validate();
    return o;
}

}  // namespace siegel
