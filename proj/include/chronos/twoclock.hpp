#pragma once

#include "chronos/clock.hpp"

namespace chronos {

// Clock + rest system driven by external time: states[i] = exp(-i H_CR t_i) psi0.
struct TwoClockRun {
    FiniteClock clock;
    Matrix H_CR;
    Vector psi0;
    RealVector t_grid;
    std::vector<Vector> states;
    Matrix T_ext;       // T_C (x) I on the composite space
    Matrix alpha_CR;    // i [H_CR, T_C (x) I]
};

inline TwoClockRun make_two_clock_run(const FiniteClock& clock, const Matrix& H_CR,
                                      const Vector& psi0, const RealVector& t_grid) {
    if (H_CR.rows() != H_CR.cols() || H_CR.rows() % clock.d != 0)
        throw std::invalid_argument("make_two_clock_run: Hamiltonian dimension mismatch");
    if (!is_hermitian(H_CR, 1e-10))
        throw std::invalid_argument("make_two_clock_run: Hamiltonian is not Hermitian");
    if (psi0.size() != H_CR.rows())
        throw std::invalid_argument("make_two_clock_run: state dimension mismatch");
    if (psi0.norm() == 0.0)
        throw std::invalid_argument("make_two_clock_run: zero initial state");
    for (Index i = 1; i < t_grid.size(); ++i)
        if (!(t_grid(i) > t_grid(i - 1)))
            throw std::invalid_argument("make_two_clock_run: time grid must be strictly increasing");

    TwoClockRun run;
    run.clock = clock;
    run.H_CR = H_CR;
    run.psi0 = psi0 / psi0.norm();
    run.t_grid = t_grid;
    const Index m = H_CR.rows() / clock.d;
    run.T_ext = tensor(clock.T_C, Matrix::Identity(m, m));
    run.alpha_CR = hermitize(iu * commutator(H_CR, run.T_ext));

    const EigDecomposition eig = eigh(H_CR);
    const Vector weights = eig.vectors.adjoint() * run.psi0;
    run.states.reserve(t_grid.size());
    for (Index i = 0; i < t_grid.size(); ++i) {
        Vector phased(weights.size());
        for (Index k = 0; k < weights.size(); ++k)
            phased(k) = weights(k) * std::exp(-iu * (eig.values(k) * t_grid(i)));
        run.states.push_back(eig.vectors * phased);
    }
    return run;
}

namespace detail {

inline Real expectation(const Vector& psi, const Matrix& op) {
    const Complex raw = psi.dot(op * psi);
    return raw.real() / psi.squaredNorm();
}

}  // namespace detail

inline Real mean_reading(const TwoClockRun& run, Index i) {
    if (i < 0 || i >= static_cast<Index>(run.states.size()))
        throw std::out_of_range("mean_reading: index out of range");
    return detail::expectation(run.states[i], run.T_ext);
}

struct RateSeries {
    std::vector<Real> expectation;        // <alpha_CR> at each grid point
    std::vector<Real> finite_difference;  // centered slope of the mean reading
    Real max_discrepancy = 0.0;           // between the two forms, interior points
};

inline RateSeries rate_series(const TwoClockRun& run) {
    const Index n = run.t_grid.size();
    if (n < 2) throw std::invalid_argument("rate_series: need at least two grid points");
    RateSeries out;
    std::vector<Real> mean(n);
    for (Index i = 0; i < n; ++i) {
        mean[i] = mean_reading(run, i);
        out.expectation.push_back(detail::expectation(run.states[i], run.alpha_CR));
    }
    out.finite_difference.resize(n);
    out.finite_difference[0] = (mean[1] - mean[0]) / (run.t_grid(1) - run.t_grid(0));
    out.finite_difference[n - 1] = (mean[n - 1] - mean[n - 2]) / (run.t_grid(n - 1) - run.t_grid(n - 2));
    for (Index i = 1; i + 1 < n; ++i) {
        out.finite_difference[i] = (mean[i + 1] - mean[i - 1]) / (run.t_grid(i + 1) - run.t_grid(i - 1));
        out.max_discrepancy = std::max(out.max_discrepancy,
                                       std::abs(out.finite_difference[i] - out.expectation[i]));
    }
    return out;
}

inline bool check_rate_constancy(const TwoClockRun& run, Real tol) {
    if (run.t_grid.size() < 2) return true;
    const RateSeries rates = rate_series(run);
    Real worst = 0.0;
    for (Real r : rates.expectation) worst = std::max(worst, std::abs(r - rates.expectation[0]));
    return worst <= tol;
}

inline bool check_linear_time(const TwoClockRun& run, Real tol) {
    if (run.t_grid.size() < 2) return true;
    const RateSeries rates = rate_series(run);
    const Real m0 = mean_reading(run, 0);
    const Real t0 = run.t_grid(0);
    Real worst = 0.0;
    for (Index i = 0; i < run.t_grid.size(); ++i)
        worst = std::max(worst, std::abs(mean_reading(run, i) - m0
                                         - rates.expectation[0] * (run.t_grid(i) - t0)));
    return worst <= tol;
}

struct VarianceSeries {
    std::vector<Real> sigma2;   // variance of the time reading at each grid point
    Real sigma2_alpha = 0.0;    // variance of the rate observable at t_0
};

inline VarianceSeries variance_series(const TwoClockRun& run) {
    VarianceSeries out;
    const Matrix T2 = run.T_ext * run.T_ext;
    for (const Vector& psi : run.states) {
        const Real m = detail::expectation(psi, run.T_ext);
        out.sigma2.push_back(detail::expectation(psi, T2) - m * m);
    }
    const Real a0 = detail::expectation(run.psi0, run.alpha_CR);
    out.sigma2_alpha = detail::expectation(run.psi0, run.alpha_CR * run.alpha_CR) - a0 * a0;
    return out;
}

}  // namespace chronos
