#pragma once

// Core domain types for two-arm transmittance estimation: the channel
// scenario, the probe photon budget, 2x2 Fisher information matrices and
// the projected variance bound Var(Gamma_-) = n^T F^-1 n, where F^-1 is
// taken on the support of F when F is singular.
//
// Everything here is an immutable value; all functions are pure. Divergent
// quantities are represented by IEEE +infinity, never by NaN.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cdsense {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Default relative eigenvalue threshold separating the support of a
/// Fisher matrix from its numerical null space (double-precision noise
/// floor for 2x2 symmetric eigenproblems).
inline constexpr double kSupportTol = 1e-12;

namespace detail {

inline void require_unit_interval(double x, const char* name) {
    if (!(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument(std::string(name) + " must lie in [0,1], got " +
                                    std::to_string(x));
}

inline void require_nonnegative(double x, const char* name) {
    if (!(x >= 0.0) || std::isinf(x))
        throw std::invalid_argument(std::string(name) + " must be finite and >= 0, got " +
                                    std::to_string(x));
}

// num/den for nonnegative num, den with the conventions used throughout:
// a vanishing numerator wins (0/0 = 0), a vanishing denominator alone
// diverges. Keeps grid sweeps NaN-free at boundary parameters.
inline double ratio_or_inf(double num, double den) {
    if (num == 0.0) return 0.0;
    if (den == 0.0) return kInf;
    return num / den;
}

} // namespace detail

/// Channel parameters of the two polarization arms: analyte transmittances
/// t_l, t_r and excess-loss transmittances eta_l, eta_r, all in [0,1].
struct Scenario {
    double t_l;
    double t_r;
    double eta_l;
    double eta_r;

    Scenario(double tl, double tr, double etal, double etar)
        : t_l(tl), t_r(tr), eta_l(etal), eta_r(etar) {
        detail::require_unit_interval(tl, "t_l");
        detail::require_unit_interval(tr, "t_r");
        detail::require_unit_interval(etal, "eta_l");
        detail::require_unit_interval(etar, "eta_r");
    }

    /// Effective transmittance eta_j * t_j of the left / right arm.
    double eff_l() const { return eta_l * t_l; }
    double eff_r() const { return eta_r * t_r; }

    /// Same scenario with the two arms exchanged.
    Scenario swapped() const { return Scenario(t_r, t_l, eta_r, eta_l); }
};

/// Mean photon numbers of the two signal modes.
struct PhotonBudget {
    double n_l;
    double n_r;

    PhotonBudget(double nl, double nr) : n_l(nl), n_r(nr) {
        detail::require_nonnegative(nl, "n_l");
        detail::require_nonnegative(nr, "n_r");
    }

    double n_tot() const { return n_l + n_r; }

    /// Fraction r = n_l / n_tot of the energy in the left arm.
    double ratio() const {
        const double tot = n_tot();
        if (tot <= 0.0)
            throw std::domain_error("PhotonBudget::ratio requires n_tot > 0");
        return n_l / tot;
    }

    /// Budget splitting n_tot as (r * n_tot, (1-r) * n_tot).
    static PhotonBudget split(double n_tot, double r) {
        detail::require_nonnegative(n_tot, "n_tot");
        detail::require_unit_interval(r, "ratio");
        return PhotonBudget(r * n_tot, (1.0 - r) * n_tot);
    }
};

/// Coefficients of the estimated linear combination Gamma = l*T_L + r*T_R.
/// Defaults to (1, -1), i.e. the transmittance difference.
struct CombinationVector {
    double l = 1.0;
    double r = -1.0;

    double norm_sq() const { return l * l + r * r; }
};

/// Symmetric positive-semidefinite 2x2 (quantum or classical) Fisher
/// information matrix over (T_L, T_R), per shot. Diagonal entries may be
/// +infinity at degenerate channel parameters.
struct Fisher2 {
    double h_ll = 0.0;
    double h_lr = 0.0;
    double h_rr = 0.0;

    Fisher2() = default;

    Fisher2(double ll, double lr, double rl, double rr) : h_ll(ll), h_lr(lr), h_rr(rr) {
        if (std::isnan(ll) || std::isnan(lr) || std::isnan(rl) || std::isnan(rr))
            throw std::invalid_argument("Fisher2: NaN entry");
        const bool symmetric = (lr == rl) || std::abs(lr - rl) <= 1e-12;
        if (!symmetric)
            throw std::invalid_argument("Fisher2: off-diagonal entries differ by more than 1e-12");
        if (finite()) {
            const double lo = min_eigenvalue();
            const double hi = max_eigenvalue();
            if (lo < -1e-12 * std::max(1.0, hi))
                throw std::invalid_argument("Fisher2: not positive semidefinite, min eigenvalue " +
                                            std::to_string(lo));
        }
    }

    static Fisher2 diagonal(double ll, double rr) { return Fisher2(ll, 0.0, 0.0, rr); }

    double h_rl() const { return h_lr; }

    bool finite() const {
        return std::isfinite(h_ll) && std::isfinite(h_lr) && std::isfinite(h_rr);
    }

    double max_eigenvalue() const {
        const double disc = std::hypot(h_ll - h_rr, 2.0 * h_lr);
        return 0.5 * (h_ll + h_rr + disc);
    }

    double min_eigenvalue() const {
        const double disc = std::hypot(h_ll - h_rr, 2.0 * h_lr);
        return 0.5 * (h_ll + h_rr - disc);
    }
};

namespace detail {

struct EigenPair2 {
    double value;
    double vx, vy; // unit eigenvector
};

struct EigenSystem2 {
    EigenPair2 hi; // larger eigenvalue
    EigenPair2 lo;
};

// Closed-form spectral decomposition of a symmetric 2x2 matrix.
inline EigenSystem2 sym_eigen2(const Fisher2& f) {
    const double a = f.h_ll, b = f.h_lr, c = f.h_rr;
    const double disc = std::hypot(a - c, 2.0 * b);
    const double hi = 0.5 * (a + c + disc);
    const double lo = 0.5 * (a + c - disc);
    if (disc == 0.0 || b == 0.0) {
        if (a >= c) return {{hi, 1.0, 0.0}, {lo, 0.0, 1.0}};
        return {{hi, 0.0, 1.0}, {lo, 1.0, 0.0}};
    }
    // Pick the better-conditioned eigenvector formula for the larger value.
    double vx, vy;
    if (std::abs(hi - a) >= std::abs(hi - c)) {
        vx = b;
        vy = hi - a;
    } else {
        vx = hi - c;
        vy = b;
    }
    const double nrm = std::hypot(vx, vy);
    vx /= nrm;
    vy /= nrm;
    return {{hi, vx, vy}, {lo, -vy, vx}};
}

} // namespace detail

/// Moore-Penrose pseudo-inverse restricted to the eigenvalues exceeding
/// tol * (largest eigenvalue); coincides with the exact inverse for
/// well-conditioned matrices and maps the zero matrix to the zero matrix.
inline Fisher2 invert_on_support(const Fisher2& f, double tol = kSupportTol) {
    if (!f.finite())
        throw std::invalid_argument("invert_on_support: matrix must be finite");
    const auto es = detail::sym_eigen2(f);
    const double threshold = tol * std::max(es.hi.value, 0.0);
    double ll = 0.0, lr = 0.0, rr = 0.0;
    for (const auto& ep : {es.hi, es.lo}) {
        if (ep.value > threshold) {
            const double w = 1.0 / ep.value;
            ll += w * ep.vx * ep.vx;
            lr += w * ep.vx * ep.vy;
            rr += w * ep.vy * ep.vy;
        }
    }
    return Fisher2(ll, lr, lr, rr);
}

/// Single-shot quantum/classical Cramer-Rao bound n^T F^-1 n on
/// Var(Gamma). Returns +infinity (UNESTIMABLE) when n has a component
/// outside the support of f, e.g. for the zero matrix.
inline double var_gamma(const Fisher2& f, const CombinationVector& n = {},
                        double tol = kSupportTol) {
    if (!f.finite())
        throw std::invalid_argument("var_gamma: matrix must be finite");
    const auto es = detail::sym_eigen2(f);
    const double threshold = tol * std::max(es.hi.value, 0.0);
    double total = 0.0;
    for (const auto& ep : {es.hi, es.lo}) {
        const double proj = ep.vx * n.l + ep.vy * n.r;
        if (ep.value > threshold) {
            total += proj * proj / ep.value;
        } else if (proj * proj > tol * n.norm_sq()) {
            return kInf;
        }
    }
    return total;
}

} // namespace cdsense
