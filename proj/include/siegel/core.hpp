#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace siegel {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using IMat = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IVec = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Error taxonomy. Every failure mode named by an operation has its own type
// so callers (and the CLI exit-code mapping) can tell them apart.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct SingularCocycleError : Error { using Error::Error; };
struct RefinementRequired : Error { using Error::Error; };
struct WindowError : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };
struct UsageError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct AccuracyError : Error { using Error::Error; };
struct NoPredictionError : Error { using Error::Error; };

// Closedness / moment condition violated; carries the size of the obstruction.
struct PreconditionError : Error {
    double defect;
    cplx pairing;
    PreconditionError(const std::string& what, double defect_, cplx pairing_ = {})
        : Error(what), defect(defect_), pairing(pairing_) {}
};

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }
inline CMat symmetrize(const CMat& m) { return 0.5 * (m + m.transpose()); }

inline double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// e(x) = exp(2 pi i x)
inline cplx e_phase(double x) {
    double s, c;
    ::sincos(2.0 * kPi * x, &s, &c);
    return {c, s};
}

// Worker count: hardware concurrency, capped by SIEGEL_THETA_THREADS.
inline unsigned thread_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SIEGEL_THETA_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) n = static_cast<unsigned>(v);
    }
    return n;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items are
// independent; callers write into slot i so the result never depends on
// scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         unsigned threads = 0) {
    if (threads == 0) threads = thread_count();
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errs(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
}

// Neumaier compensated accumulator.
template <class T>
struct Compensated {
    T sum{}, comp{};
    void add(T x) {
        T t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    T value() const { return sum + comp; }
};

struct CompensatedComplex {
    Compensated<double> re, im;
    void add(cplx z) { re.add(z.real()); im.add(z.imag()); }
    void add(const CompensatedComplex& o) {
        re.add(o.re.sum); re.add(o.re.comp);
        im.add(o.im.sum); im.add(o.im.comp);
    }
    cplx value() const { return {re.value(), im.value()}; }
};

// Linear interpolation between order statistics of a sorted sample.
inline double quantile_sorted(const std::vector<double>& v, double p) {
    if (v.empty()) return 0.0;
    double pos = p * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double f = pos - static_cast<double>(lo);
    return v[lo] + f * (v[hi] - v[lo]);
}

// Counter-based per-sample seeding: sample i of a run with seed s always gets
// the same stream, whatever the thread layout.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
inline std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ (index * 0xd1b54a32d192ed03ULL + 1));
}
// Uniform double in [0,1) from 53 random bits.
template <class Engine>
double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace siegel
