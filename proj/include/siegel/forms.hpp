#pragma once

#include "siegel/hermite.hpp"

#include <functional>
#include <random>

namespace siegel {

// k-forms on the span of the first d coordinate directions with Hermite
// coefficients on R^g. Direction j acts as X_j = |h|^{1/2} d/dx_j.
struct PForm {
    int d = 1;
    int k = 0;
    HermiteTruncation trunc;
    std::vector<HermiteField> comps;  // one per k-subset of {0..d-1}, lexicographic

    static std::vector<std::vector<int>> subsets(int d, int k) {
        std::vector<std::vector<int>> out;
        std::vector<int> cur;
        std::function<void(int)> rec = [&](int start) {
            if (static_cast<int>(cur.size()) == k) {
                out.push_back(cur);
                return;
            }
            for (int j = start; j < d; ++j) {
                cur.push_back(j);
                rec(j + 1);
                cur.pop_back();
            }
        };
        rec(0);
        return out;
    }

    static PForm zero(int d, int k, const HermiteTruncation& t) {
        if (d < 0 || d > t.g) throw DimensionError("PForm: acting dimension must be <= g");
        if (k < 0 || k > d) throw DimensionError("PForm: degree out of range");
        PForm w{d, k, t, {}};
        w.comps.assign(subsets(d, k).size(), HermiteField::zero(t));
        return w;
    }

    std::vector<std::vector<int>> index_sets() const { return subsets(d, k); }

    int slot(const std::vector<int>& J) const {
        auto s = index_sets();
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] == J) return static_cast<int>(i);
        throw DimensionError("PForm: no such component");
    }
    HermiteField& at(const std::vector<int>& J) { return comps[slot(J)]; }
    const HermiteField& at(const std::vector<int>& J) const { return comps[slot(J)]; }

    double norm() const {
        double s = 0;
        for (const auto& c : comps) s += std::pow(c.norm(), 2);
        return std::sqrt(s);
    }
    double sobolev(double s) const {
        double acc = 0;
        for (const auto& c : comps) acc += std::pow(sobolev_norm(c, s), 2);
        return std::sqrt(acc);
    }
    double loss() const {
        double l = 0;
        for (const auto& c : comps) l += c.loss;
        return l;
    }

    void check_same(const PForm& o) const {
        if (d != o.d || k != o.k || !(trunc == o.trunc)) throw DimensionError("PForm: shape mismatch");
    }
    PForm& operator+=(const PForm& o) {
        check_same(o);
        for (std::size_t i = 0; i < comps.size(); ++i) comps[i] += o.comps[i];
        return *this;
    }
    PForm& operator-=(const PForm& o) {
        check_same(o);
        for (std::size_t i = 0; i < comps.size(); ++i) comps[i] -= o.comps[i];
        return *this;
    }
    friend PForm operator+(PForm a, const PForm& b) { return a += b; }
    friend PForm operator-(PForm a, const PForm& b) { return a -= b; }
};

// Exterior derivative: (d w)_J = sum_p (-1)^p X_{J_p} w_{J \ J_p}.
inline PForm d(const PForm& w) {
    if (w.k >= w.d) throw DimensionError("d: form is already of top degree");
    PForm out = PForm::zero(w.d, w.k + 1, w.trunc);
    auto sets = out.index_sets();
    for (std::size_t s = 0; s < sets.size(); ++s) {
        const auto& J = sets[s];
        for (std::size_t p = 0; p < J.size(); ++p) {
            std::vector<int> rest = J;
            rest.erase(rest.begin() + p);
            auto term = apply_ddx(w.at(rest), J[p]);
            if (p % 2) out.comps[s] -= term;
            else out.comps[s] += term;
        }
    }
    return out;
}

// K w: on components containing direction 0, |h|^{-1/2} P(f - E_1 I_1 f)
// on the complementary index set; other components contribute nothing.
inline PForm homotopy_K(const PForm& w) {
    if (w.k < 1) throw DimensionError("homotopy_K: degree must be >= 1");
    PForm out = PForm::zero(w.d, w.k - 1, w.trunc);
    const double inv = 1.0 / w.trunc.root_h();
    auto sets = w.index_sets();
    for (std::size_t s = 0; s < sets.size(); ++s) {
        const auto& J = sets[s];
        if (J.front() != 0) continue;
        const auto& f = w.comps[s];
        auto centered = f - project_gaussian_axis(f, 0);
        std::vector<int> rest(J.begin() + 1, J.end());
        out.at(rest) = cplx(inv) * primitive_P(centered, 0);
    }
    return out;
}

// The defect of the homotopy: E_1 I_1 on components containing direction 0.
inline PForm gaussian_part(const PForm& w) {
    PForm out = PForm::zero(w.d, w.k, w.trunc);
    auto sets = w.index_sets();
    for (std::size_t s = 0; s < sets.size(); ++s)
        if (!sets[s].empty() && sets[s].front() == 0) out.comps[s] = project_gaussian_axis(w.comps[s], 0);
    return out;
}

struct InvariantCurrent {
    int d = 1;
    HermiteField density;  // over R^{g-d}; the scalar 1 when d = g

    // Bilinear pairing D(I_{d,g} w) with a top-degree form.
    cplx pair(const PForm& w) const {
        if (w.k != w.d || w.d != d) throw DimensionError("InvariantCurrent: needs a top-degree form");
        auto moment = integrate_I(w.comps[0], d);
        moment.check_same(density);
        cplx s{};
        for (std::size_t i = 0; i < moment.c.size(); ++i) s += density.c[i] * moment.c[i];
        return s;
    }

    // Currents dual to the Hermite modes of the transverse variables.
    static std::vector<InvariantCurrent> spanning_set(int d, const HermiteTruncation& t) {
        auto tt = t.with_dim(t.g - d);
        std::vector<InvariantCurrent> out;
        for (std::size_t i = 0; i < tt.size(); ++i) {
            auto f = HermiteField::zero(tt);
            f.c[i] = 1.0;
            out.push_back({d, f});
        }
        return out;
    }
};

struct SolverOptions {
    double closed_tol = 1e-9;  // relative residual of d w
    double moment_tol = 1e-9;  // relative size of I_{d,g} w at top degree
};

namespace detail {

// Forms on directions 1..d-1 and variables 2..g obtained from the components
// of w containing direction 0, integrated over the first variable.
inline PForm peel_first(const PForm& w) {
    PForm out = PForm::zero(w.d - 1, w.k - 1, w.trunc.with_dim(w.trunc.g - 1));
    auto sets = w.index_sets();
    for (std::size_t s = 0; s < sets.size(); ++s) {
        if (sets[s].front() != 0) continue;
        std::vector<int> J;
        for (std::size_t p = 1; p < sets[s].size(); ++p) J.push_back(sets[s][p] - 1);
        out.at(J) = integrate_I(w.comps[s], 1);
    }
    return out;
}

// dx_0 wedge E_1 theta, theta living on directions 1..d-1.
inline PForm wedge_first(const PForm& theta, int d, const HermiteTruncation& t) {
    PForm out = PForm::zero(d, theta.k + 1, t);
    auto sets = theta.index_sets();
    for (std::size_t s = 0; s < sets.size(); ++s) {
        std::vector<int> J{0};
        for (int j : sets[s]) J.push_back(j + 1);
        out.at(J) = extend_E(theta.comps[s], 1);
    }
    return out;
}

inline PForm d_minus_one_unchecked(const PForm& w) {
    PForm Kw = homotopy_K(w);
    if (w.k == 1) return Kw;
    PForm theta = peel_first(w);
    PForm Theta = d_minus_one_unchecked(theta);
    return Kw - wedge_first(Theta, w.d, w.trunc);
}

}  // namespace detail

// Moment of a top-degree form, checked against the spanning set of currents.
// Throws PreconditionError carrying the norm of I_{d,g} w and the largest pairing.
inline void check_moment(const PForm& w, double tol) {
    auto m = integrate_I(w.comps[0], w.d);
    double defect = m.norm();
    if (defect > tol * std::max(1.0, w.norm())) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < m.c.size(); ++i)
            if (std::abs(m.c[i]) > std::abs(m.c[best])) best = i;
        throw PreconditionError("d_minus_one: top-degree form has nonzero moment", defect, m.c[best]);
    }
}

// Right inverse of d on exact forms: d(d_minus_one(w)) = w.
inline PForm d_minus_one(const PForm& w, const SolverOptions& opt = {}) {
    if (w.k < 1) throw DimensionError("d_minus_one: degree must be >= 1");
    if (w.k < w.d) {
        double r = d(w).norm();
        if (r > opt.closed_tol * std::max(1.0, w.norm()))
            throw PreconditionError("d_minus_one: form is not closed", r);
    } else {
        check_moment(w, opt.moment_tol);
    }
    return detail::d_minus_one_unchecked(w);
}

// Projection onto the tame complement of the coboundaries.
inline PForm project_M(const PForm& w) {
    if (w.k < w.d) return w - detail::d_minus_one_unchecked(d(w));
    PForm out = w;
    out.comps[0] -= extend_E(integrate_I(w.comps[0], w.d), w.d);
    return out;
}

// Random band-limited field with coefficients N(0,1) (1 + |a|)^{-decay}.
inline HermiteField random_field(const HermiteTruncation& t, int band, double decay, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    auto f = HermiteField::zero(t);
    HermiteField band_shape = HermiteField::zero({t.g, band, t.h});
    for (std::size_t i = 0; i < band_shape.c.size(); ++i) {
        auto a = band_shape.multi_index(i);
        int deg = 0;
        for (int x : a) deg += x;
        double w = std::pow(1.0 + deg, -decay);
        double re = n(rng), im = n(rng);
        f.c[f.index(a)] = cplx(re, im) * w;
    }
    return f;
}

inline PForm random_form(int d, int k, const HermiteTruncation& t, int band, double decay, std::mt19937_64& rng) {
    PForm w = PForm::zero(d, k, t);
    for (auto& c : w.comps) c = random_field(t, band, decay, rng);
    return w;
}

// Produces a closed (exact) k-form for a sample index.
using FormSampler = std::function<PForm(int d, int k, const HermiteTruncation&, std::mt19937_64&)>;

// d of a random (k-1)-form supported on modes < band; the draws depend on
// band only, so the same samples are reused when the cutoff grows.
inline FormSampler exact_form_sampler(int band, double decay = 2.0) {
    return [band, decay](int d, int k, const HermiteTruncation& t, std::mt19937_64& rng) {
        return siegel::d(random_form(d, k - 1, t, band, decay, rng));
    };
}

struct TameStats {
    double max = 0;
    double median = 0;
    std::vector<double> ratios;
};

// ||d_{-1} w||_s / ||w||_{s + (k+1)/2 + eps} over sampled closed forms.
inline TameStats tame_ratio(const FormSampler& sampler, double s, int k, int d, int g, double eps, int n_samples,
                            std::uint64_t seed, int cutoff, double h = 1.0, int threads = 0) {
    HermiteTruncation t{g, cutoff, h};
    t.validate();
    TameStats st;
    st.ratios.assign(n_samples, 0.0);
    const double r = s + (k + 1) / 2.0 + eps;
    parallel_for(
        n_samples,
        [&](std::size_t i) {
            std::mt19937_64 rng(sample_seed(seed, static_cast<std::uint64_t>(i)));
            PForm w = sampler(d, k, t, rng);
            PForm W = detail::d_minus_one_unchecked(w);
            st.ratios[i] = W.sobolev(s) / w.sobolev(r);
        },
        threads);
    auto sorted = st.ratios;
    std::sort(sorted.begin(), sorted.end());
    st.max = sorted.back();
    st.median = quantile_sorted(sorted, 0.5);
    return st;
}

}  // namespace siegel
