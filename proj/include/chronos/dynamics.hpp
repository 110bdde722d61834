#pragma once

#include "chronos/model.hpp"

namespace chronos {

struct EmptyKernel : std::runtime_error {
    EmptyKernel() : std::runtime_error("constraint kernel is empty at the requested tolerance") {}
};

struct SeedAnnihilated : std::runtime_error {
    SeedAnnihilated() : std::runtime_error("seed state has no component inside the constraint kernel") {}
};

struct InvertibleAlpha : std::runtime_error {
    InvertibleAlpha() : std::runtime_error("rate operator is invertible; restriction check not applicable") {}
};

struct StationaryState {
    Vector psi_U;
    Real constraint_residual = 0.0;   // ||H_U psi|| for the normalized state
    std::string seed;
};

struct TrajectoryRecord {
    RealVector times;
    std::vector<Vector> rel_states;   // full-space conditioned states, one per reading
    std::vector<Real> norms;
    std::vector<Real> residuals;      // first-order evolution-law defect per reading
    Real gram_drift = 0.0;            // drift of the self-overlap relative to t_0
};

enum class DerivativeScheme {
    BandLimited,       // trigonometric derivative on a half-step oversampled grid
    LatticeCentered,   // cyclic centered differences on the reading grid
};

inline StationaryState prepare_stationary(const UniverseModel& u, const Vector& seed, Real eps = 1e-9) {
    if (seed.norm() == 0.0) throw std::invalid_argument("prepare_stationary: zero seed");
    const KernelSpace ker = kernel_projector(u.H_U, eps);
    if (ker.dim() == 0) throw EmptyKernel{};
    const Vector unit = seed / seed.norm();
    Vector proj = ker.projector * unit;
    if (proj.norm() < 1e-12) throw SeedAnnihilated{};
    StationaryState s;
    s.psi_U = proj / proj.norm();
    s.constraint_residual = (u.H_U * s.psi_U).norm();
    s.seed = "kernel projection";
    return s;
}

// Kernel projection reweighted by the inverse rate eigenvalue of each kernel
// mode. This is the finite-dimensional form of averaging the seed over the
// group generated by H_U: the flat projector misses the spectral density
// 1/|rate| that the time integral supplies, so modes the rate operator
// annihilates are dropped and the rest are divided by their rate.
inline StationaryState prepare_group_averaged(const UniverseModel& u, const Vector& seed,
                                              Real eps = 1e-9) {
    if (seed.norm() == 0.0) throw std::invalid_argument("prepare_group_averaged: zero seed");
    const KernelSpace ker = kernel_projector(u.H_U, eps);
    if (ker.dim() == 0) throw EmptyKernel{};
    const RateOperator rate = rate_operator(u, eps);
    const Matrix restricted = hermitize(ker.basis.columns.adjoint() * rate.alpha * ker.basis.columns);
    const EigDecomposition eig = eigh(restricted);
    const Matrix modes = ker.basis.columns * eig.vectors;
    const Real top = eig.values.cwiseAbs().maxCoeff();
    Vector out = Vector::Zero(seed.size());
    for (Index j = 0; j < eig.values.size(); ++j) {
        const Real a = eig.values(j);
        if (std::abs(a) <= 1e-12 * top) continue;
        out += modes.col(j) * (modes.col(j).dot(seed) / a);
    }
    if (out.norm() < 1e-12 * seed.norm()) throw SeedAnnihilated{};
    StationaryState s;
    s.psi_U = out / out.norm();
    s.constraint_residual = (u.H_U * s.psi_U).norm();
    s.seed = "group-averaged kernel projection";
    return s;
}

namespace detail {

// Conditioned state at continuous clock time: |phi(t)><phi(t)| (x) I applied
// to psi, with |phi(t)> the clock state evolved from reading zero.
inline Vector conditioned_state(const FiniteClock& clock, Index rest, const Vector& psi, Real t) {
    Vector spectral = Vector::Constant(clock.d, 1.0 / std::sqrt(static_cast<Real>(clock.d)));
    for (Index n = 0; n < clock.d; ++n) spectral(n) *= std::exp(-iu * (clock.omegas(n) * t));
    const Vector phi = clock.frame * spectral;
    Vector w = Vector::Zero(rest);
    for (Index k = 0; k < clock.d; ++k)
        w += std::conj(phi(k)) * psi.segment(k * rest, rest);
    return tensor(phi, w);
}

}  // namespace detail

// Conditioned states at every reading, their norms, and the residual of the
// first-order evolution law i*rate*dpsi/dt = H_U*psi. The conditioned family
// carries clock and system frequencies combined, which exceed the Nyquist
// band of the reading grid, so the default derivative interpolates from a
// grid oversampled by two; plain centered differences remain available.
inline TrajectoryRecord extract_trajectory(const UniverseModel& u, const StationaryState& s,
                                           DerivativeScheme scheme = DerivativeScheme::BandLimited) {
    const Index d = u.clock.d;
    const Index m = u.rest_dim();
    const Index n = d * m;
    TrajectoryRecord rec;
    rec.times = u.clock.times;
    rec.rel_states.reserve(d);
    rec.norms.reserve(d);
    for (Index k = 0; k < d; ++k) {
        Vector slice = Vector::Zero(n);
        slice.segment(k * m, m) = s.psi_U.segment(k * m, m);
        rec.rel_states.push_back(std::move(slice));
        rec.norms.push_back(rec.rel_states.back().norm());
    }

    const RateOperator rate = rate_operator(u);
    std::vector<Vector> deriv(d);
    if (scheme == DerivativeScheme::LatticeCentered) {
        for (Index k = 0; k < d; ++k) {
            const Index prev = (k + d - 1) % d;
            const Index next = (k + 1) % d;
            deriv[k] = (rec.rel_states[next] - rec.rel_states[prev]) / (2.0 * u.clock.dt);
        }
    } else {
        const Index M = 2 * d;
        const Real h = u.clock.dt / 2.0;
        Matrix samples(M, n);
        for (Index j = 0; j < M; ++j)
            samples.row(j) = detail::conditioned_state(u.clock, m, s.psi_U, j * h).transpose();
        Matrix fc(M, M);
        RealVector nu(M);
        const Real scale = 1.0 / std::sqrt(static_cast<Real>(M));
        for (Index q = 0; q < M; ++q) nu(q) = 2.0 * M_PI * static_cast<Real>(q - d) / (d * u.clock.dt);
        for (Index j = 0; j < M; ++j)
            for (Index q = 0; q < M; ++q)
                fc(j, q) = scale * std::exp(iu * (nu(q) * (j * h)));
        Matrix coeff = fc.adjoint() * samples;
        for (Index q = 0; q < M; ++q) coeff.row(q) *= iu * nu(q);
        const Matrix dsamples = fc * coeff;
        for (Index k = 0; k < d; ++k) deriv[k] = dsamples.row(2 * k).transpose();
    }
    rec.residuals.reserve(d);
    for (Index k = 0; k < d; ++k)
        rec.residuals.push_back((iu * (rate.alpha * deriv[k]) - u.H_U * rec.rel_states[k]).norm());

    const Real ref = rec.norms[0] * rec.norms[0];
    Real drift = 0.0;
    for (Index k = 0; k < d; ++k)
        drift = std::max(drift, std::abs(rec.norms[k] * rec.norms[k] - ref));
    rec.gram_drift = ref > 0.0 ? drift / ref : std::numeric_limits<Real>::infinity();
    return rec;
}

// exp(-i pinv(rate) H_U t). The generator is Hermitian whenever the rate
// commutes with H_U; the non-normal case falls back to the general Pade path.
inline Matrix closed_form_propagator(const UniverseModel& u, Real t, Real rank_tol = 1e-9) {
    const RateOperator rate = rate_operator(u, 1e-9, rank_tol);
    const Matrix gen = rate.pinv_alpha * u.H_U;
    if (is_hermitian(gen, 1e-10)) return expm_hermitian(hermitize(gen), t);
    return expm_general(gen, t);
}

// Largest leakage of any conditioned state into the null space of the rate
// operator; only meaningful when that null space is nontrivial.
inline Real kernel_restriction_check(const UniverseModel& u, const StationaryState& s,
                                     Real kernel_eps = 1e-9) {
    const RateOperator rate = rate_operator(u, kernel_eps);
    if (rate.kernel_dim == 0) throw InvertibleAlpha{};
    const Index d = u.clock.d;
    const Index m = u.rest_dim();
    Real worst = 0.0;
    for (Index k = 0; k < d; ++k) {
        Vector slice = Vector::Zero(d * m);
        slice.segment(k * m, m) = s.psi_U.segment(k * m, m);
        worst = std::max(worst, (rate.kernel.projector * slice).norm());
    }
    return worst;
}

struct UnitarityDiagnostics {
    Real norm_drift = 0.0;
    Real gram_drift = 0.0;
};

inline UnitarityDiagnostics unitarity_diagnostics(const TrajectoryRecord& a, const TrajectoryRecord& b) {
    if (a.times.size() != b.times.size() || (a.times - b.times).cwiseAbs().maxCoeff() > 0.0)
        throw std::invalid_argument("unitarity_diagnostics: time grids differ");
    UnitarityDiagnostics out;
    const Real na0 = a.norms[0];
    const Real nb0 = b.norms[0];
    if (na0 == 0.0 || nb0 == 0.0) {
        out.norm_drift = std::numeric_limits<Real>::infinity();
        out.gram_drift = std::numeric_limits<Real>::infinity();
        return out;
    }
    for (size_t k = 0; k < a.norms.size(); ++k) {
        out.norm_drift = std::max(out.norm_drift, std::abs(a.norms[k] - na0) / na0);
        out.norm_drift = std::max(out.norm_drift, std::abs(b.norms[k] - nb0) / nb0);
    }
    const Complex g0 = a.rel_states[0].dot(b.rel_states[0]);
    for (size_t k = 0; k < a.rel_states.size(); ++k) {
        const Complex g = a.rel_states[k].dot(b.rel_states[k]);
        out.gram_drift = std::max(out.gram_drift, std::abs(g - g0) / (na0 * nb0));
    }
    return out;
}

// Rest-of-system component at each reading, obtained by contracting the
// clock factor against the reading's time state.
inline std::vector<Vector> reduced_trajectory(const TrajectoryRecord& traj, const FiniteClock& clock) {
    const Index d = clock.d;
    std::vector<Vector> out;
    out.reserve(traj.rel_states.size());
    for (size_t k = 0; k < traj.rel_states.size(); ++k) {
        const Index m = traj.rel_states[k].size() / d;
        out.push_back(traj.rel_states[k].segment(static_cast<Index>(k) * m, m));
    }
    return out;
}

struct DriftWitness {
    Vector state;
    Real norm_drift = 0.0;
};

// Search the constraint kernel (basis vectors plus pairwise superpositions)
// for the conditioned trajectory with the largest norm drift.
inline DriftWitness sweep_kernel_for_drift(const UniverseModel& u, Real eps = 1e-9) {
    const KernelSpace ker = kernel_projector(u.H_U, eps);
    if (ker.dim() == 0) throw EmptyKernel{};
    std::vector<Vector> candidates;
    for (Index j = 0; j < ker.dim(); ++j) candidates.push_back(ker.basis.columns.col(j));
    for (Index i = 0; i < ker.dim(); ++i)
        for (Index j = i + 1; j < ker.dim(); ++j) {
            candidates.push_back((ker.basis.columns.col(i) + ker.basis.columns.col(j)) / std::sqrt(2.0));
            candidates.push_back((ker.basis.columns.col(i) + iu * ker.basis.columns.col(j)) / std::sqrt(2.0));
        }
    DriftWitness best;
    for (const Vector& cand : candidates) {
        StationaryState s;
        s.psi_U = cand;
        s.constraint_residual = (u.H_U * cand).norm();
        s.seed = "kernel sweep";
        const TrajectoryRecord rec = extract_trajectory(u, s, DerivativeScheme::LatticeCentered);
        const UnitarityDiagnostics diag = unitarity_diagnostics(rec, rec);
        if (diag.norm_drift >= best.norm_drift) {
            best.state = cand;
            best.norm_drift = diag.norm_drift;
        }
    }
    return best;
}

}  // namespace chronos
