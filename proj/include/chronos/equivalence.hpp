#pragma once

#include "chronos/dynamics.hpp"

namespace chronos {

struct NonUnitaryWitness : std::runtime_error {
    Real deviation;
    explicit NonUnitaryWitness(Real dev)
        : std::runtime_error("propagator family deviates from isometry; source dynamics is not unitary"),
          deviation(dev) {}
};

// Least-squares propagators on the rest space, fitted over the whole kernel
// so that a single map must serve every allowed state at once. Each U[k] is
// zero off the allowed subspace.
struct PropagatorFamily {
    RealVector t_grid;
    std::vector<Matrix> U;
    Matrix allowed_projector;   // onto the span of the reduced states at t_0
    Index allowed_rank = 0;
    Real fit_residual = 0.0;
};

inline PropagatorFamily extract_propagator_family(const UniverseModel& u, Real eps = 1e-9) {
    const KernelSpace ker = kernel_projector(u.H_U, eps);
    if (ker.dim() == 0) throw EmptyKernel{};
    const Index d = u.clock.d;
    const Index m = u.rest_dim();
    std::vector<Matrix> W(d, Matrix(m, ker.dim()));
    for (Index k = 0; k < d; ++k)
        for (Index j = 0; j < ker.dim(); ++j)
            W[k].col(j) = ker.basis.columns.col(j).segment(k * m, m);

    Eigen::JacobiSVD<Matrix> svd(W[0], Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const Real cut = 1e-9 * sv(0);
    Index rank = 0;
    while (rank < sv.size() && sv(rank) > cut) ++rank;
    const Matrix basis = svd.matrixU().leftCols(rank);
    Matrix pinv_W0 = Matrix::Zero(ker.dim(), m);
    for (Index r = 0; r < rank; ++r)
        pinv_W0 += (1.0 / sv(r)) * svd.matrixV().col(r) * svd.matrixU().col(r).adjoint();

    PropagatorFamily fam;
    fam.t_grid = u.clock.times;
    fam.allowed_projector = basis * basis.adjoint();
    fam.allowed_rank = rank;
    Real worst_dev = 0.0;
    for (Index k = 0; k < d; ++k) {
        fam.U.push_back(W[k] * pinv_W0);
        fam.fit_residual = std::max(fam.fit_residual, spectral_norm(fam.U.back() * W[0] - W[k]));
        worst_dev = std::max(worst_dev,
                             spectral_norm(fam.U.back().adjoint() * fam.U.back() - fam.allowed_projector));
    }
    if (worst_dev > 1e-6) throw NonUnitaryWitness(worst_dev);
    return fam;
}

namespace detail {

// Extend a map that is unitary on the allowed subspace by identity on the
// complement. Fails when the family does not preserve its own subspace.
inline Matrix complete_to_unitary(const Matrix& u_restricted, const Matrix& allowed) {
    const Matrix full = u_restricted * allowed
                      + (Matrix::Identity(allowed.rows(), allowed.cols()) - allowed);
    const Real dev = spectral_norm(full.adjoint() * full
                                   - Matrix::Identity(allowed.rows(), allowed.cols()));
    if (dev > 1e-6) throw NonUnitaryWitness(dev);
    return full;
}

// Hermitian logarithm of a unitary one-step map exp(-i G h), recovered by
// simultaneously diagonalizing the cosine and sine parts so that degenerate
// sine eigenvalues cannot scramble the angle. Valid for |G h| < pi.
inline Matrix step_log_generator(const Matrix& step, Real h) {
    const Matrix cosp = hermitize(0.5 * (step + step.adjoint()));
    const Matrix sinp = hermitize(0.5 * iu * (step - step.adjoint()));
    const EigDecomposition se = eigh(sinp);
    const Index n = step.rows();
    const Real gap = 1e-8 * std::max(1.0, se.values.cwiseAbs().maxCoeff());
    Matrix vectors = se.vectors;
    RealVector theta(n);
    Index lo = 0;
    while (lo < n) {
        Index hi = lo + 1;
        while (hi < n && se.values(hi) - se.values(hi - 1) <= gap) ++hi;
        const Index width = hi - lo;
        const Matrix block = vectors.middleCols(lo, width);
        const EigDecomposition ce = eigh(hermitize(block.adjoint() * cosp * block));
        vectors.middleCols(lo, width) = block * ce.vectors;
        for (Index j = 0; j < width; ++j)
            theta(lo + j) = std::atan2(se.values(lo + j), ce.values(j));
        lo = hi;
    }
    return hermitize(vectors * (theta / h).cast<Complex>().asDiagonal() * vectors.adjoint());
}

}  // namespace detail

struct GeneratorSeries {
    std::vector<Matrix> X;          // centered-difference generators, Hermitized
    Real hermitization_defect = 0.0;
    std::vector<Matrix> X_step;     // exact logarithms of the one-step maps
    std::vector<Matrix> X_band;     // from the spectral derivative of the periodic family
};

inline GeneratorSeries generator_from_propagator(const PropagatorFamily& fam) {
    const Index d = fam.t_grid.size();
    if (d < 3) throw std::invalid_argument("generator_from_propagator: need at least three grid points");
    const Real dt = fam.t_grid(1) - fam.t_grid(0);
    GeneratorSeries out;
    std::vector<Matrix> completed;
    completed.reserve(d);
    for (const Matrix& u : fam.U)
        completed.push_back(detail::complete_to_unitary(u, fam.allowed_projector));
    for (Index k = 0; k < d; ++k) {
        const Index prev = (k + d - 1) % d;
        const Index next = (k + 1) % d;
        const Matrix raw = iu * (fam.U[next] - fam.U[prev]) / (2.0 * dt) * fam.U[k].adjoint();
        out.X.push_back(hermitize(raw));
        out.hermitization_defect = std::max(out.hermitization_defect,
                                            spectral_norm(raw - out.X.back()));
        out.X_step.push_back(detail::step_log_generator(completed[next] * completed[k].adjoint(), dt));
    }
    // Differentiate the family entrywise on the grid's own frequency lattice.
    // Centered differences alias badly at energies of a few lattice units;
    // the spectral derivative is exact for any family the lattice resolves.
    Matrix frame(d, d);
    Vector inu(d);
    for (Index n = 0; n < d; ++n) {
        const Real nu = 2.0 * M_PI * static_cast<Real>(n - d / 2) / (d * dt);
        inu(n) = iu * nu;
        for (Index k = 0; k < d; ++k)
            frame(k, n) = std::exp(iu * nu * fam.t_grid(k)) / std::sqrt(static_cast<Real>(d));
    }
    const Matrix spectral_diff = frame * inu.asDiagonal() * frame.adjoint();
    const Index m = fam.allowed_projector.rows();
    for (Index k = 0; k < d; ++k) {
        Matrix deriv = Matrix::Zero(m, m);
        for (Index j = 0; j < d; ++j) deriv += spectral_diff(k, j) * completed[j];
        out.X_band.push_back(hermitize(iu * deriv * completed[k].adjoint()));
    }
    return out;
}

struct EquivalentConstraint {
    Matrix C;                   // H_C (x) I + X(T_C)
    Matrix C_prime;             // with the null-sector correction
    Matrix allowed_projector;   // on the rest space at t_0
    Matrix rate_prime;          // exact rate of C_prime: the allowed projector at each reading
    Real mu = 1.0;
};

// Assemble the first-order constraints from per-reading generators. The
// null-sector projector at reading k is I - allowed conjugated by the
// unitary completion of U[k]; without a family it is taken time-independent.
inline EquivalentConstraint build_equivalent_constraint(const FiniteClock& clock,
                                                        const std::vector<Matrix>& X_list,
                                                        const Matrix& allowed_projector,
                                                        const std::vector<Matrix>& U_list = {},
                                                        Real mu = 1.0) {
    const Index d = clock.d;
    const Index m = allowed_projector.rows();
    if (static_cast<Index>(X_list.size()) != d)
        throw std::invalid_argument("build_equivalent_constraint: one generator per reading required");
    if (!U_list.empty() && static_cast<Index>(U_list.size()) != d)
        throw std::invalid_argument("build_equivalent_constraint: one propagator per reading required");
    detail::require_hermitian(allowed_projector, "build_equivalent_constraint");

    const Matrix I_m = Matrix::Identity(m, m);
    const Index n = d * m;
    Matrix X_T = Matrix::Zero(n, n);
    Matrix P0_T = Matrix::Zero(n, n);
    for (Index k = 0; k < d; ++k) {
        detail::require_hermitian(X_list[k], "build_equivalent_constraint");
        X_T.block(k * m, k * m, m, m) = X_list[k];
        Matrix p0 = I_m - allowed_projector;
        if (!U_list.empty()) {
            const Matrix full = detail::complete_to_unitary(U_list[k], allowed_projector);
            p0 = hermitize(full * (I_m - allowed_projector) * full.adjoint());
        }
        P0_T.block(k * m, k * m, m, m) = p0;
    }
    const Matrix H_ext = tensor(clock.H_C, I_m);

    EquivalentConstraint ec;
    ec.allowed_projector = allowed_projector;
    ec.mu = mu;
    ec.C = hermitize(H_ext + X_T);
    ec.C_prime = hermitize(H_ext - P0_T * H_ext * P0_T + X_T + mu * P0_T);
    ec.rate_prime = Matrix::Identity(n, n) - P0_T;
    return ec;
}

struct EquivalenceReport {
    Real containment_residual = 0.0;   // how much of ker H_U escapes ker C
    Real equality_angle = 0.0;         // between ker C_prime and ker H_U
    ConditionReport prime_conditions;
    Index kernel_dim_HU = 0;
    Index kernel_dim_C = 0;
    Index kernel_dim_C_prime = 0;
};

inline EquivalenceReport verify_equivalence(const UniverseModel& u, const EquivalentConstraint& ec,
                                            Real eps = 1e-9) {
    const KernelSpace ker_hu = kernel_projector(u.H_U, eps);
    const KernelSpace ker_c = kernel_projector(ec.C, eps);
    const KernelSpace ker_cp = kernel_projector(ec.C_prime, eps);

    EquivalenceReport rep;
    rep.kernel_dim_HU = ker_hu.dim();
    rep.kernel_dim_C = ker_c.dim();
    rep.kernel_dim_C_prime = ker_cp.dim();
    const Index n = u.H_U.rows();
    rep.containment_residual =
        spectral_norm((Matrix::Identity(n, n) - ker_c.projector) * ker_hu.projector);
    rep.equality_angle = subspace_angle(ker_cp.basis, ker_hu.basis);

    UniverseModel first_order;
    first_order.clock = u.clock;
    first_order.factor_dims = {u.clock.d, ec.allowed_projector.rows()};
    first_order.H_U = ec.C_prime;
    first_order.construction = "first_order";
    first_order.exact_rate = ec.rate_prime;
    rep.prime_conditions = check_conditions(first_order);
    return rep;
}

struct RoundtripResult {
    PropagatorFamily family;
    GeneratorSeries generators;
    EquivalentConstraint constraint;
    EquivalenceReport report;
};

// Full pipeline: extract the shared propagator family from the constraint
// kernel, take band-limited generators, rebuild the first-order constraint,
// and compare physical subspaces.
inline RoundtripResult run_equivalence_roundtrip(const UniverseModel& u, Real eps = 1e-9,
                                                 Real mu = 1.0) {
    RoundtripResult out;
    out.family = extract_propagator_family(u, eps);
    out.generators = generator_from_propagator(out.family);
    out.constraint = build_equivalent_constraint(u.clock, out.generators.X_band,
                                                 out.family.allowed_projector, out.family.U, mu);
    out.report = verify_equivalence(u, out.constraint, eps);
    return out;
}

}  // namespace chronos
