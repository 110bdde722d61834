#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace chronos {

using Real = double;
using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr Complex iu{0.0, 1.0};

// Dense square complex matrix; Hermiticity is revalidated where required.
using Operator = Matrix;

inline bool is_hermitian(const Matrix& a, Real tol = 1e-10) {
    if (a.rows() != a.cols()) return false;
    const Real scale = std::max(a.cwiseAbs().maxCoeff(), 1.0);
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline Matrix hermitize(const Matrix& a) {
    return 0.5 * (a + a.adjoint());
}

// Largest singular value, computed from the Gram matrix so the result is
// deterministic for repeated calls on identical input.
inline Real spectral_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a.adjoint() * a, Eigen::EigenvaluesOnly);
    const Real top = es.eigenvalues().maxCoeff();
    return top > 0.0 ? std::sqrt(top) : 0.0;
}

inline Matrix tensor(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Vector tensor(const Vector& x, const Vector& y) {
    Vector out(x.size() * y.size());
    for (Index i = 0; i < x.size(); ++i)
        out.segment(i * y.size(), y.size()) = x(i) * y;
    return out;
}

inline Matrix commutator(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("commutator: dimension mismatch");
    return a * b - b * a;
}

struct EigDecomposition {
    RealVector values;   // ascending
    Matrix vectors;      // orthonormal columns, phase-fixed
};

// Hermitian eigendecomposition with a deterministic phase convention: the
// first component of each vector above a relative floor is made real positive.
inline EigDecomposition eigh(const Matrix& a) {
    if (!is_hermitian(a))
        throw std::invalid_argument("eigh: input is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Matrix> es(hermitize(a));
    if (es.info() != Eigen::Success)
        throw std::runtime_error("eigh: eigensolver failed to converge");
    EigDecomposition out{es.eigenvalues(), es.eigenvectors()};
    for (Index k = 0; k < out.vectors.cols(); ++k) {
        auto col = out.vectors.col(k);
        const Real floor = 1e-6 * col.cwiseAbs().maxCoeff();
        Index lead = 0;
        for (Index i = 0; i < col.size(); ++i) {
            if (std::abs(col(i)) > floor) { lead = i; break; }
        }
        const Complex z = col(lead);
        if (std::abs(z) > 0.0) col *= std::conj(z) / std::abs(z);
    }
    return out;
}

// exp(-i g t) for an arbitrary square generator via Pade scaling-and-squaring.
inline Matrix expm_general(const Matrix& g, Real t) {
    if (g.rows() != g.cols())
        throw std::invalid_argument("expm_general: matrix must be square");
    Matrix scaled = (-iu * t) * g;
    return scaled.exp();
}

// exp(-i h t) through the eigenbasis; requires Hermitian h.
inline Matrix expm_hermitian(const EigDecomposition& eig, Real t) {
    Vector phases(eig.values.size());
    for (Index k = 0; k < eig.values.size(); ++k)
        phases(k) = std::exp(-iu * (eig.values(k) * t));
    return eig.vectors * phases.asDiagonal() * eig.vectors.adjoint();
}

inline Matrix expm_hermitian(const Matrix& h, Real t) {
    return expm_hermitian(eigh(h), t);
}

// Spectral Moore-Penrose pseudoinverse: eigenvalues within rank_tol of the
// dominant one (relatively) are treated as exact zeros.
inline Matrix pinv_hermitian(const Matrix& a, Real rank_tol = 1e-9) {
    if (!is_hermitian(a))
        throw std::invalid_argument("pinv_hermitian: input is not Hermitian");
    const EigDecomposition eig = eigh(a);
    const Real top = eig.values.cwiseAbs().maxCoeff();
    Vector inv(eig.values.size());
    for (Index k = 0; k < eig.values.size(); ++k) {
        const Real lam = eig.values(k);
        inv(k) = (std::abs(lam) > rank_tol * top) ? Complex(1.0 / lam, 0.0) : Complex(0.0, 0.0);
    }
    return eig.vectors * inv.asDiagonal() * eig.vectors.adjoint();
}

struct SubspaceBasis {
    Index ambient_dim = 0;
    Matrix columns;      // orthonormal, one per basis vector

    Index dim() const { return columns.cols(); }
};

struct KernelSpace {
    Matrix projector;
    SubspaceBasis basis;

    Index dim() const { return basis.dim(); }
};

// Projector onto the near-null eigenspace: |lambda| <= eps * ||a||_2.
inline KernelSpace kernel_projector(const Matrix& a, Real eps = 1e-9) {
    if (!is_hermitian(a))
        throw std::invalid_argument("kernel_projector: input is not Hermitian");
    const EigDecomposition eig = eigh(a);
    const Real nrm = eig.values.cwiseAbs().maxCoeff();
    const Real cut = eps * nrm;
    Index count = 0;
    for (Index k = 0; k < eig.values.size(); ++k)
        if (std::abs(eig.values(k)) <= cut) ++count;
    Matrix cols(a.rows(), count);
    Index at = 0;
    for (Index k = 0; k < eig.values.size(); ++k)
        if (std::abs(eig.values(k)) <= cut) cols.col(at++) = eig.vectors.col(k);
    KernelSpace out;
    out.basis = SubspaceBasis{a.rows(), cols};
    out.projector = cols * cols.adjoint();
    if (count == 0) out.projector = Matrix::Zero(a.rows(), a.cols());
    return out;
}

// Largest principal angle between two spans, in radians. Unequal dimensions
// can never have equal spans, so they report the maximal angle.
inline Real subspace_angle(const SubspaceBasis& a, const SubspaceBasis& b) {
    if (a.ambient_dim != b.ambient_dim)
        throw std::invalid_argument("subspace_angle: ambient dimension mismatch");
    if (a.dim() == 0 && b.dim() == 0) return 0.0;
    if (a.dim() != b.dim()) return M_PI / 2.0;
    const Matrix overlap = a.columns.adjoint() * b.columns;
    Eigen::JacobiSVD<Matrix> svd(overlap);
    const Real smin = svd.singularValues().minCoeff();
    const Real c = std::clamp(smin, 0.0, 1.0);
    // acos loses half the working digits near zero angle, so small angles
    // are taken from the projection residual instead (Bjorck-Golub).
    if (c * c > 0.5) {
        const Matrix resid = b.columns - a.columns * (a.columns.adjoint() * b.columns);
        const Real s = std::clamp(spectral_norm(resid), 0.0, 1.0);
        return std::asin(s);
    }
    return std::acos(c);
}

// Haar-like random unit vector with an explicit generator-to-double mapping,
// so identical seeds reproduce identical states on every platform.
inline Vector random_unit_vector(Index n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    auto uniform = [&gen]() {
        return (static_cast<Real>(gen() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    };
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        const Real radius = std::sqrt(-2.0 * std::log(uniform()));
        const Real angle = 2.0 * M_PI * uniform();
        v(i) = Complex(radius * std::cos(angle), radius * std::sin(angle));
    }
    return v / v.norm();
}

// Dimension of ker(a) intersected with ker(b), each factor normalized so one
// badly scaled operator cannot mask the other.
inline Index joint_kernel_dim(const Matrix& a, const Matrix& b, Real eps = 1e-9) {
    const Real na = spectral_norm(a);
    const Real nb = spectral_norm(b);
    Matrix gram = Matrix::Zero(a.rows(), a.cols());
    if (na > 0.0) gram += (a.adjoint() * a) / (na * na);
    if (nb > 0.0) gram += (b.adjoint() * b) / (nb * nb);
    return kernel_projector(hermitize(gram), eps).dim();
}

}  // namespace chronos
