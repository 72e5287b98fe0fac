#pragma once

#include "siegel/core.hpp"

namespace siegel {

// 2g x 2g real symplectic matrix [[A, B], [C, D]].
struct BlockSymplectic {
    Mat A, B, C, D;

    int genus() const { return static_cast<int>(A.rows()); }

    static BlockSymplectic identity(int g) {
        Mat I = Mat::Identity(g, g), Z = Mat::Zero(g, g);
        return {I, Z, Z, I};
    }

    Mat full() const {
        const int g = genus();
        Mat M(2 * g, 2 * g);
        M << A, B, C, D;
        return M;
    }

    static BlockSymplectic from_full_unchecked(const Mat& M) {
        const int g = static_cast<int>(M.rows() / 2);
        return {M.topLeftCorner(g, g), M.topRightCorner(g, g), M.bottomLeftCorner(g, g),
                M.bottomRightCorner(g, g)};
    }

    // Symplectic inverse [[D^T, -B^T], [-C^T, A^T]].
    BlockSymplectic inverse() const {
        return {D.transpose(), -B.transpose(), -C.transpose(), A.transpose()};
    }

    BlockSymplectic operator*(const BlockSymplectic& o) const {
        return {A * o.A + B * o.C, A * o.B + B * o.D, C * o.A + D * o.C, C * o.B + D * o.D};
    }
    BlockSymplectic operator-() const { return {-A, -B, -C, -D}; }
};

// Exact integer symplectic matrix, used to record reducing elements.
struct IntegerSymplectic {
    IMat A, B, C, D;

    int genus() const { return static_cast<int>(A.rows()); }

    static IntegerSymplectic identity(int g) {
        IMat I = IMat::Identity(g, g), Z = IMat::Zero(g, g);
        return {I, Z, Z, I};
    }
    IntegerSymplectic operator*(const IntegerSymplectic& o) const {
        return {A * o.A + B * o.C, A * o.B + B * o.D, C * o.A + D * o.C, C * o.B + D * o.D};
    }
    IntegerSymplectic inverse() const {
        return {D.transpose(), -B.transpose(), -C.transpose(), A.transpose()};
    }
    BlockSymplectic to_real() const {
        return {A.cast<double>(), B.cast<double>(), C.cast<double>(), D.cast<double>()};
    }
    bool is_symplectic() const {
        const int g = genus();
        IMat I = IMat::Identity(g, g);
        return (A.transpose() * C == C.transpose() * A) && (B.transpose() * D == D.transpose() * B) &&
               (A.transpose() * D - C.transpose() * B == I);
    }
    bool operator==(const IntegerSymplectic& o) const {
        return A == o.A && B == o.B && C == o.C && D == o.D;
    }
};

// Max-norm residual of the three block relations. Caller thresholds.
inline double verify_symplectic(const Mat& M) {
    if (M.rows() != M.cols() || M.rows() % 2 != 0 || M.rows() == 0)
        throw DimensionError("verify_symplectic: matrix must be square of even dimension");
    auto s = BlockSymplectic::from_full_unchecked(M);
    const int g = s.genus();
    double r1 = max_abs(s.A.transpose() * s.C - s.C.transpose() * s.A);
    double r2 = max_abs(s.B.transpose() * s.D - s.D.transpose() * s.B);
    double r3 = max_abs(s.A.transpose() * s.D - s.C.transpose() * s.B - Mat::Identity(g, g));
    return std::max({r1, r2, r3});
}

// Builds a BlockSymplectic, rejecting matrices that fail the relations.
inline BlockSymplectic make_symplectic(const Mat& M, double tol = 1e-10) {
    double r = verify_symplectic(M);
    if (!(r <= tol)) throw DomainError("matrix is not symplectic (residual " + std::to_string(r) + ")");
    return BlockSymplectic::from_full_unchecked(M);
}

// Z = X + iY with X, Y symmetric and Y positive definite.
struct SiegelPoint {
    Mat X, Y;

    int genus() const { return static_cast<int>(X.rows()); }
    CMat Z() const {
        CMat z(X.rows(), X.cols());
        z.real() = X;
        z.imag() = Y;
        return z;
    }
    static SiegelPoint from_complex(const CMat& z) {
        CMat s = symmetrize(z);
        return {s.real(), s.imag()};
    }
    static SiegelPoint i_identity(int g) { return {Mat::Zero(g, g), Mat::Identity(g, g)}; }

    // Validated constructor.
    static SiegelPoint make(const Mat& X, const Mat& Y) {
        if (X.rows() != X.cols() || Y.rows() != Y.cols() || X.rows() != Y.rows() || X.rows() == 0)
            throw DimensionError("SiegelPoint: X and Y must be square of equal size");
        if (max_abs(X - X.transpose()) > 1e-12 || max_abs(Y - Y.transpose()) > 1e-12)
            throw DomainError("SiegelPoint: X and Y must be symmetric");
        Eigen::LLT<Mat> llt(symmetrize(Y));
        if (llt.info() != Eigen::Success) throw DomainError("SiegelPoint: Y not positive definite");
        return {symmetrize(X), symmetrize(Y)};
    }
};

inline bool is_positive_definite(const Mat& Y) {
    Eigen::LLT<Mat> llt(Y);
    return llt.info() == Eigen::Success;
}

// Generalized Moebius action (AZ + B)(CZ + D)^{-1}.
inline SiegelPoint mobius(const BlockSymplectic& a, const SiegelPoint& p) {
    if (a.genus() != p.genus()) throw DimensionError("mobius: genus mismatch");
    CMat z = p.Z();
    CMat num = a.A.cast<cplx>() * z + a.B.cast<cplx>();
    CMat den = a.C.cast<cplx>() * z + a.D.cast<cplx>();
    Eigen::PartialPivLU<CMat> lu(den.transpose());
    double rc = lu.rcond();
    if (!(rc > 1e-12)) throw SingularCocycleError("mobius: CZ + D numerically singular");
    // Z' = num * den^{-1}  <=>  den^T Z'^T = num^T
    CMat out = lu.solve(num.transpose()).transpose();
    return SiegelPoint::from_complex(out);
}

inline SiegelPoint mobius(const IntegerSymplectic& a, const SiegelPoint& p) {
    return mobius(a.to_real(), p);
}

// det(CZ + D), the automorphy factor.
inline cplx cocycle_det(const BlockSymplectic& a, const SiegelPoint& p) {
    CMat den = a.C.cast<cplx>() * p.Z() + a.D.cast<cplx>();
    return den.determinant();
}

inline double height_raw(const SiegelPoint& p) {
    Eigen::LLT<Mat> llt(p.Y);
    if (llt.info() != Eigen::Success) throw DomainError("height_raw: Y not positive definite");
    double d = 1.0;
    const Mat& L = llt.matrixLLT();
    for (int i = 0; i < L.rows(); ++i) d *= L(i, i) * L(i, i);
    return d;
}

// Z = X + i W^T D W, W unit upper triangular, D positive diagonal.
struct IwasawaCoordinates {
    Mat X;
    Mat W;
    Vec D;

    SiegelPoint reconstruct() const {
        Mat y = W.transpose() * D.asDiagonal() * W;
        return {X, symmetrize(y)};
    }
};

// Y = L D L^T read from the top-left, with W = L^T.
inline IwasawaCoordinates iwasawa(const SiegelPoint& p) {
    const int g = p.genus();
    Mat W = Mat::Identity(g, g);
    Vec D(g);
    for (int j = 0; j < g; ++j) {
        double v = p.Y(j, j);
        for (int k = 0; k < j; ++k) v -= W(k, j) * W(k, j) * D(k);
        if (!(v > 0)) throw DomainError("iwasawa: Y not positive definite");
        D(j) = v;
        for (int i = j + 1; i < g; ++i) {
            double u = p.Y(j, i);
            for (int k = 0; k < j; ++k) u -= W(k, j) * W(k, i) * D(k);
            W(j, i) = u / v;
        }
    }
    return {p.X, W, D};
}

struct CartanDirection {
    Vec delta;

    static CartanDirection leading_ones(int g, int d) {
        Vec v = Vec::Zero(g);
        v.head(d).setOnes();
        return {v};
    }
    void validate(bool for_flow = true) const {
        if ((delta.array() < 0).any()) throw DomainError("CartanDirection: negative weight");
        if (for_flow && (delta.array() == 0).all()) throw DomainError("CartanDirection: all weights zero");
    }
};

// diag(e^{t delta}, e^{-t delta})
inline BlockSymplectic cartan_matrix(const CartanDirection& dir, double t) {
    const int g = static_cast<int>(dir.delta.size());
    Vec up = (t * dir.delta).array().exp();
    Vec down = (-t * dir.delta).array().exp();
    return {up.asDiagonal().toDenseMatrix(), Mat::Zero(g, g), Mat::Zero(g, g),
            down.asDiagonal().toDenseMatrix()};
}

// Riemannian length under ds^2 = tr(dZ Y^{-1} dZbar Y^{-1}); each step uses
// the midpoint Y. At g = 1 this is |dz|/y, the usual hyperbolic metric.
inline double path_length(const std::vector<SiegelPoint>& path) {
    if (path.size() < 2) throw DomainError("path_length: need at least two samples");
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        CMat dz = path[k + 1].Z() - path[k].Z();
        Mat ymid = 0.5 * (path[k].Y + path[k + 1].Y);
        Mat yinv = ymid.llt().solve(Mat::Identity(ymid.rows(), ymid.cols()));
        CMat yi = yinv.cast<cplx>();
        cplx tr = (dz * yi * dz.conjugate() * yi).trace();
        double inc = std::sqrt(std::max(0.0, tr.real()));
        if (!(inc < 0.5)) throw RefinementRequired("path_length: step increment >= 0.5, refine the path");
        total += inc;
    }
    return total;
}

}  // namespace siegel
