#pragma once

#include "siegel/forms.hpp"

#include <map>

namespace siegel {

// Linear frame V_1..V_d (columns of V) acting on the torus R^l / 2 pi Z^l.
// X_m e^{i n.x} = i (n . V_m) e^{i n.x}.
struct TorusFrame {
    Mat V;       // l x d
    int K = 8;   // Fourier cutoff |n|_inf <= K

    int ambient() const { return static_cast<int>(V.rows()); }
    int dim() const { return static_cast<int>(V.cols()); }
    void validate() const {
        if (V.cols() < 1 || V.cols() > V.rows()) throw DimensionError("TorusFrame: need 1 <= d <= l");
        Eigen::FullPivLU<Mat> lu(V);
        if (lu.rank() < V.cols()) throw DomainError("TorusFrame: frame vectors are linearly dependent");
    }
};

struct ResonanceError : Error {
    std::vector<IVec> modes;
    ResonanceError(const std::string& w, std::vector<IVec> m) : Error(w), modes(std::move(m)) {}
};

struct IVecLess {
    bool operator()(const IVec& a, const IVec& b) const {
        return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
    }
};

// Fourier coefficients of a k-form: for each mode, C(d,k) components in
// lexicographic subset order.
struct TorusForm {
    int d = 1;
    int k = 1;
    std::map<IVec, std::vector<cplx>, IVecLess> modes;
};

struct TorusSolution {
    TorusForm primitive;
    std::vector<IVec> near_resonant;  // divisor below the floor but nonzero
};

namespace detail {

inline std::vector<cplx> frame_symbol(const TorusFrame& fr, const IVec& n) {
    std::vector<cplx> v(fr.dim());
    Vec nd = n.cast<double>();
    for (int m = 0; m < fr.dim(); ++m) v[m] = cplx(0, nd.dot(fr.V.col(m)));
    return v;
}

// n . V_m is zero up to rounding for every m.
inline bool exactly_resonant(const TorusFrame& fr, const IVec& n) {
    Vec nd = n.cast<double>();
    for (int m = 0; m < fr.dim(); ++m) {
        double dot = nd.dot(fr.V.col(m));
        double scale = (nd.cwiseAbs().array() * fr.V.col(m).cwiseAbs().array()).sum();
        if (std::abs(dot) > 4 * std::numeric_limits<double>::epsilon() * scale) return false;
    }
    return true;
}

}  // namespace detail

// Per-mode exterior derivative.
inline std::vector<cplx> torus_d_mode(const std::vector<cplx>& v, const std::vector<cplx>& w, int d, int k) {
    auto in_sets = PForm::subsets(d, k), out_sets = PForm::subsets(d, k + 1);
    std::vector<cplx> out(out_sets.size());
    for (std::size_t s = 0; s < out_sets.size(); ++s) {
        const auto& J = out_sets[s];
        for (std::size_t p = 0; p < J.size(); ++p) {
            auto rest = J;
            rest.erase(rest.begin() + p);
            auto it = std::find(in_sets.begin(), in_sets.end(), rest);
            cplx term = v[J[p]] * w[it - in_sets.begin()];
            out[s] += (p % 2) ? -term : term;
        }
    }
    return out;
}

// Interior product with u: (i_u w)_J = sum_{j not in J} (-1)^{pos of j} u_j w_{J+j}.
inline std::vector<cplx> torus_interior_mode(const std::vector<cplx>& u, const std::vector<cplx>& w, int d, int k) {
    auto in_sets = PForm::subsets(d, k), out_sets = PForm::subsets(d, k - 1);
    std::vector<cplx> out(out_sets.size());
    for (std::size_t s = 0; s < out_sets.size(); ++s) {
        const auto& J = out_sets[s];
        for (int j = 0; j < d; ++j) {
            if (std::find(J.begin(), J.end(), j) != J.end()) continue;
            auto full = J;
            auto pos = std::lower_bound(full.begin(), full.end(), j);
            std::size_t p = pos - full.begin();
            full.insert(pos, j);
            auto it = std::find(in_sets.begin(), in_sets.end(), full);
            cplx term = u[j] * w[it - in_sets.begin()];
            out[s] += (p % 2) ? -term : term;
        }
    }
    return out;
}

// Mode-wise Omega_n = i_{conj v} w_n / |v|^2, the H^{-1} d^* solution.
inline TorusSolution torus_solve(const TorusFrame& fr, const TorusForm& w, double divisor_floor = 1e-14) {
    fr.validate();
    if (w.d != fr.dim()) throw DimensionError("torus_solve: form and frame dimensions differ");
    if (w.k < 1) throw DimensionError("torus_solve: degree must be >= 1");
    std::vector<IVec> resonant;
    TorusSolution sol{{w.d, w.k - 1, {}}, {}};
    for (const auto& [n, c] : w.modes) {
        if (n.size() != fr.ambient()) throw DimensionError("torus_solve: mode has wrong length");
        if (n.isZero()) throw DomainError("torus_solve: zero mode is not allowed");
        if (detail::exactly_resonant(fr, n)) {
            resonant.push_back(n);
            continue;
        }
        auto v = detail::frame_symbol(fr, n);
        double div = 0;
        std::vector<cplx> vbar(v.size());
        for (std::size_t m = 0; m < v.size(); ++m) {
            div += std::norm(v[m]);
            vbar[m] = std::conj(v[m]);
        }
        if (div <= divisor_floor) sol.near_resonant.push_back(n);
        auto omega = torus_interior_mode(vbar, c, w.d, w.k);
        for (auto& x : omega) x /= div;
        sol.primitive.modes[n] = omega;
    }
    if (!resonant.empty()) throw ResonanceError("torus_solve: resonant modes present", resonant);
    return sol;
}

inline TorusForm torus_d(const TorusFrame& fr, const TorusForm& w) {
    TorusForm out{w.d, w.k + 1, {}};
    for (const auto& [n, c] : w.modes) out.modes[n] = torus_d_mode(detail::frame_symbol(fr, n), c, w.d, w.k);
    return out;
}

struct DiophantineEstimate {
    double C = 0;
    IVec worst;
};

// min over 0 < |n|_inf <= K of (sup over unit V in span of |n . V|) * |n|^tau.
// The supremum is the length of the orthogonal projection of n onto the span.
inline DiophantineEstimate torus_diophantine(const TorusFrame& fr, double tau, int K) {
    fr.validate();
    if (K < 1) throw DomainError("torus_diophantine: cutoff must be >= 1");
    const int l = fr.ambient();
    Eigen::HouseholderQR<Mat> qr(fr.V);
    Mat Q = qr.householderQ() * Mat::Identity(l, fr.dim());
    const int d = fr.dim();
    std::vector<double> q(Q.data(), Q.data() + Q.size());  // column-major l x d
    DiophantineEstimate best{std::numeric_limits<double>::infinity(), IVec::Zero(l)};
    std::vector<std::int64_t> n(l, -K);
    // Half of the cube: n and -n give the same value.
    while (true) {
        int lead = 0;
        while (lead < l && n[lead] == 0) ++lead;
        if (lead < l && n[lead] > 0) {
            double len2 = 0, p2 = 0;
            for (int i = 0; i < l; ++i) len2 += double(n[i]) * double(n[i]);
            for (int c = 0; c < d; ++c) {
                double s = 0;
                for (int i = 0; i < l; ++i) s += q[c * l + i] * double(n[i]);
                p2 += s * s;
            }
            double val = std::sqrt(p2) * (tau == 1.0 ? std::sqrt(len2) : std::pow(len2, tau / 2));
            if (val < best.C) best = {val, Eigen::Map<IVec>(n.data(), l)};
        }
        int i = l - 1;
        while (i >= 0 && n[i] == K) n[i--] = -K;
        if (i < 0) break;
        ++n[i];
    }
    return best;
}

}  // namespace siegel
