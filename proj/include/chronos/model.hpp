#pragma once

#include "chronos/clock.hpp"

#include <optional>
#include <string>
#include <vector>

namespace chronos {

enum class Verdict {
    UnitaryConditionsHold,
    C1Fails,
    C2Fails,
    BothFail,
    Pathological,
};

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::UnitaryConditionsHold: return "UnitaryConditionsHold";
        case Verdict::C1Fails: return "C1Fails";
        case Verdict::C2Fails: return "C2Fails";
        case Verdict::BothFail: return "BothFail";
        case Verdict::Pathological: return "Pathological";
    }
    return "Unknown";
}

// Hamiltonian of the whole system: clock factor first, then any ancilla
// factors, rest-of-system last. Constructions whose rate operator has an
// exact closed form carry it, so downstream checks are not polluted by the
// wrap-around seam of the finite clock.
struct UniverseModel {
    FiniteClock clock;
    std::vector<Index> factor_dims;   // clock first
    Matrix H_U;
    std::string construction;
    std::optional<Matrix> exact_rate;

    Index total_dim() const {
        Index n = 1;
        for (Index f : factor_dims) n *= f;
        return n;
    }

    Index rest_dim() const { return total_dim() / clock.d; }

    // T_C extended by identity on everything that is not the clock.
    Matrix time_operator() const {
        return tensor(clock.T_C, Matrix::Identity(rest_dim(), rest_dim()));
    }
};

struct RateOperator {
    Matrix alpha;             // rate used downstream: exact form when available
    Matrix commutator_form;   // i[H_U, T_C (x) I] on the finite clock
    Matrix pinv_alpha;
    KernelSpace kernel;       // near-null space of alpha
    Index kernel_dim = 0;
};

struct ConditionReport {
    Real c1_residual = 0.0;    // ||[T_C (x) I, alpha]|| / (||alpha|| ||T_C||)
    Real c2_residual = 0.0;    // ||[H_U, alpha]|| / (||alpha|| ||H_U||)
    Index pathology_dim = 0;   // dim of the common null space of alpha and H_U
    Real effective_tol = 0.0;
    Verdict verdict = Verdict::UnitaryConditionsHold;
};

namespace detail {

inline void require_hermitian(const Matrix& a, const char* what) {
    if (!is_hermitian(a, 1e-10))
        throw std::invalid_argument(std::string(what) + ": operator is not Hermitian");
}

}  // namespace detail

// H_U = H_C (x) I + I (x) H_R + V. An exact rate may be supplied by callers
// that know the derivative of V along the clock Hamiltonian; V = 0 needs none
// because the rate is the identity.
inline UniverseModel build_additive(const FiniteClock& clock, const Matrix& H_R, const Matrix& V,
                                    std::optional<Matrix> exact_rate = std::nullopt) {
    detail::require_hermitian(H_R, "build_additive");
    const Index m = H_R.rows();
    const Index n = clock.d * m;
    UniverseModel u;
    u.clock = clock;
    u.factor_dims = {clock.d, m};
    u.construction = "additive";
    u.H_U = tensor(clock.H_C, Matrix::Identity(m, m)) + tensor(Matrix::Identity(clock.d, clock.d), H_R);
    if (V.size() != 0) {
        if (V.rows() != n || V.cols() != n)
            throw std::invalid_argument("build_additive: interaction dimension mismatch");
        detail::require_hermitian(V, "build_additive");
        u.H_U += V;
        u.exact_rate = std::move(exact_rate);
    } else {
        u.exact_rate = exact_rate ? std::move(exact_rate)
                                  : std::optional<Matrix>(Matrix::Identity(n, n));
    }
    u.H_U = hermitize(u.H_U);
    return u;
}

// Ordered product of mutually commuting Hermitian factors on the full space.
// factor_rates[k], when supplied, is the exact rate of factor k alone; the
// product rate then follows from the Leibniz rule.
inline UniverseModel build_product(const FiniteClock& clock, const std::vector<Matrix>& factors,
                                   const std::vector<Matrix>& factor_rates = {}) {
    if (factors.empty()) throw std::invalid_argument("build_product: no factors");
    const Index n = factors.front().rows();
    if (n % clock.d != 0)
        throw std::invalid_argument("build_product: factor dimension not divisible by clock dimension");
    for (const Matrix& f : factors) {
        if (f.rows() != n || f.cols() != n)
            throw std::invalid_argument("build_product: factor dimension mismatch");
        detail::require_hermitian(f, "build_product");
    }
    for (size_t i = 0; i < factors.size(); ++i)
        for (size_t j = i + 1; j < factors.size(); ++j) {
            const Real scale = spectral_norm(factors[i]) * spectral_norm(factors[j]);
            if (spectral_norm(commutator(factors[i], factors[j])) > 1e-9 * std::max(scale, 1.0))
                throw std::invalid_argument("build_product: factors do not commute");
        }
    UniverseModel u;
    u.clock = clock;
    u.factor_dims = {clock.d, n / clock.d};
    u.construction = "product";
    Matrix prod = Matrix::Identity(n, n);
    for (const Matrix& f : factors) prod = prod * f;
    u.H_U = hermitize(prod);
    if (!factor_rates.empty()) {
        if (factor_rates.size() != factors.size())
            throw std::invalid_argument("build_product: one rate per factor required");
        Matrix rate = Matrix::Zero(n, n);
        for (size_t k = 0; k < factors.size(); ++k) {
            Matrix term = Matrix::Identity(n, n);
            for (size_t j = 0; j < k; ++j) term = term * factors[j];
            term = term * factor_rates[k];
            for (size_t j = k + 1; j < factors.size(); ++j) term = term * factors[j];
            rate += term;
        }
        u.exact_rate = hermitize(rate);
    }
    return u;
}

// Internal clock + center-of-mass + rest, with interaction
// Lambda(X_cm) * H_C * H_R. The squared momentum is the cyclic
// finite-difference Laplacian on a unit-spaced CM grid.
inline UniverseModel build_mass_energy(const FiniteClock& clock, Index cm_dim, Real mass,
                                       const std::vector<Real>& Lambda_profile, const Matrix& H_R) {
    if (cm_dim < 2) throw std::invalid_argument("build_mass_energy: need at least two CM sites");
    if (static_cast<Index>(Lambda_profile.size()) != cm_dim)
        throw std::invalid_argument("build_mass_energy: Lambda profile length must equal CM dimension");
    if (!(mass > 0.0)) throw std::invalid_argument("build_mass_energy: mass must be positive");
    detail::require_hermitian(H_R, "build_mass_energy");
    const Index m = H_R.rows();
    Matrix p2 = Matrix::Zero(cm_dim, cm_dim);
    for (Index x = 0; x < cm_dim; ++x) {
        p2(x, x) = 2.0;
        p2(x, (x + 1) % cm_dim) = -1.0;
        p2((x + 1) % cm_dim, x) = -1.0;
    }
    Matrix lam = Matrix::Zero(cm_dim, cm_dim);
    for (Index x = 0; x < cm_dim; ++x) lam(x, x) = Lambda_profile[x];

    const Matrix I_c = Matrix::Identity(clock.d, clock.d);
    const Matrix I_cm = Matrix::Identity(cm_dim, cm_dim);
    const Matrix I_r = Matrix::Identity(m, m);

    UniverseModel u;
    u.clock = clock;
    u.factor_dims = {clock.d, cm_dim, m};
    u.construction = "mass_energy";
    u.H_U = tensor(clock.H_C, tensor(I_cm, I_r))
          + tensor(I_c, tensor(p2 / (2.0 * mass), I_r))
          + tensor(I_c, tensor(I_cm, H_R))
          + tensor(clock.H_C, tensor(lam, H_R));
    u.H_U = hermitize(u.H_U);
    u.exact_rate = hermitize(tensor(I_c, tensor(I_cm, I_r)) + tensor(I_c, tensor(lam, H_R)));
    return u;
}

inline RateOperator rate_operator(const UniverseModel& u, Real kernel_eps = 1e-9,
                                  Real rank_tol = 1e-9) {
    RateOperator r;
    r.commutator_form = hermitize(iu * commutator(u.H_U, u.time_operator()));
    r.alpha = u.exact_rate ? *u.exact_rate : r.commutator_form;
    r.pinv_alpha = pinv_hermitian(r.alpha, rank_tol);
    r.kernel = kernel_projector(r.alpha, kernel_eps);
    r.kernel_dim = r.kernel.dim();
    return r;
}

inline ConditionReport check_conditions(const UniverseModel& u, Real tol = 1e-6) {
    if (!(tol > 0.0)) throw std::invalid_argument("check_conditions: tolerance must be positive");
    const RateOperator r = rate_operator(u);
    const Matrix T = u.time_operator();
    const Real na = spectral_norm(r.alpha);
    const Real nt = spectral_norm(T);
    const Real nh = spectral_norm(u.H_U);

    ConditionReport rep;
    rep.c1_residual = (na > 0.0 && nt > 0.0) ? spectral_norm(commutator(T, r.alpha)) / (na * nt) : 0.0;
    rep.c2_residual = (na > 0.0 && nh > 0.0) ? spectral_norm(commutator(u.H_U, r.alpha)) / (na * nh) : 0.0;
    rep.pathology_dim = joint_kernel_dim(r.alpha, u.H_U);
    // A rate taken from the finite-clock commutator carries the wrap-around
    // seam, so its residuals are only meaningful above the clock's own
    // interior defect. Exact rates have no such noise floor.
    rep.effective_tol = u.exact_rate
        ? tol
        : std::max(tol, 5.0 * idealness_report(u.clock).interior_residual);

    const bool c1_bad = rep.c1_residual > rep.effective_tol;
    const bool c2_bad = rep.c2_residual > rep.effective_tol;
    if (rep.pathology_dim > 0) rep.verdict = Verdict::Pathological;
    else if (c1_bad && c2_bad) rep.verdict = Verdict::BothFail;
    else if (c1_bad) rep.verdict = Verdict::C1Fails;
    else if (c2_bad) rep.verdict = Verdict::C2Fails;
    else rep.verdict = Verdict::UnitaryConditionsHold;
    return rep;
}

}  // namespace chronos
