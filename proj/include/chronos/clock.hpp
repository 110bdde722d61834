#pragma once

#include "chronos/core.hpp"

namespace chronos {

// Finite d-level cyclic clock. Time states are the computational basis
// vectors at readings t_k = k*dt; the clock Hamiltonian is diagonal in the
// discrete Fourier frame with frequencies 2*pi*n/(d*dt), n centered at zero,
// so the one-step shift exp(-i H_C dt)|k> = |k+1 mod d> holds by construction.
struct FiniteClock {
    Index d = 0;
    Real dt = 0.0;
    RealVector times;    // t_k = k*dt
    RealVector omegas;   // 2*pi*n/(d*dt), n in {-floor(d/2), ..., ceil(d/2)-1}
    Matrix frame;        // frame(j,n) = exp(i*omega_n*t_j)/sqrt(d)
    Matrix T_C;          // diag(t_k)
    Matrix H_C;          // frame * diag(omegas) * frame^dagger

    Real period() const { return d * dt; }

    // Smallest nonzero frequency; the natural energy unit of the clock.
    Real base_frequency() const { return 2.0 * M_PI / (d * dt); }

    Vector time_state(Index k) const {
        if (k < 0 || k >= d) throw std::out_of_range("time_state: index out of range");
        Vector e = Vector::Zero(d);
        e(k) = 1.0;
        return e;
    }

    // exp(-i H_C t) assembled in the Fourier frame, exact for this model.
    Matrix evolution(Real t) const {
        Vector phases(d);
        for (Index n = 0; n < d; ++n) phases(n) = std::exp(-iu * (omegas(n) * t));
        return frame * phases.asDiagonal() * frame.adjoint();
    }
};

inline FiniteClock make_clock(Index d, Real dt) {
    if (d < 2) throw std::invalid_argument("make_clock: need at least two levels");
    if (!(dt > 0.0)) throw std::invalid_argument("make_clock: grid spacing must be positive");
    FiniteClock c;
    c.d = d;
    c.dt = dt;
    c.times = RealVector::LinSpaced(d, 0.0, (d - 1) * dt);
    c.omegas = RealVector(d);
    for (Index j = 0; j < d; ++j) {
        const Index n = j - d / 2;
        c.omegas(j) = 2.0 * M_PI * static_cast<Real>(n) / (d * dt);
    }
    c.frame = Matrix(d, d);
    const Real scale = 1.0 / std::sqrt(static_cast<Real>(d));
    for (Index j = 0; j < d; ++j)
        for (Index n = 0; n < d; ++n)
            c.frame(j, n) = scale * std::exp(iu * (c.omegas(n) * c.times(j)));
    c.T_C = c.times.cast<Complex>().asDiagonal();
    c.H_C = hermitize(c.frame * c.omegas.cast<Complex>().asDiagonal() * c.frame.adjoint());
    return c;
}

inline Matrix projector_at(const FiniteClock& clock, Index k) {
    if (k < 0 || k >= clock.d) throw std::out_of_range("projector_at: index out of range");
    Matrix p = Matrix::Zero(clock.d, clock.d);
    p(k, k) = 1.0;
    return p;
}

// Normalized Gaussian amplitude profile over the time grid.
inline Vector gaussian_wavepacket(const FiniteClock& clock, Real center, Real sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_wavepacket: width must be positive");
    Vector g(clock.d);
    for (Index k = 0; k < clock.d; ++k) {
        const Real x = clock.times(k) - center;
        g(k) = std::exp(-x * x / (4.0 * sigma * sigma));
    }
    return g / g.norm();
}

// Packet width used for interior diagnostics. The d*dt/8 profile keeps a
// fixed four-sigma margin to the wrap-around seam, which stalls convergence;
// capping at sqrt(d)*dt/2 widens the margin as sqrt(d) so the boundary tail
// vanishes while the packet still spreads over ever more grid points.
inline Real interior_width(const FiniteClock& clock) {
    return std::min(clock.d * clock.dt / 8.0, std::sqrt(static_cast<Real>(clock.d)) * clock.dt / 2.0);
}

inline Vector interior_wavepacket(const FiniteClock& clock) {
    return gaussian_wavepacket(clock, (clock.d / 2) * clock.dt, interior_width(clock));
}

struct IdealnessReport {
    Real commutator_residual = 0.0;  // ||[T_C,H_C] - i I||_2
    Real interior_residual = 0.0;    // same defect applied to an interior packet
    Index d = 0;
};

inline IdealnessReport idealness_report(const FiniteClock& clock) {
    const Matrix defect = commutator(clock.T_C, clock.H_C) - iu * Matrix::Identity(clock.d, clock.d);
    IdealnessReport out;
    out.d = clock.d;
    out.commutator_residual = spectral_norm(defect);
    out.interior_residual = (defect * interior_wavepacket(clock)).norm();
    return out;
}

}  // namespace chronos
