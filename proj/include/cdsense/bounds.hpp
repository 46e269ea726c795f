#pragma once

// Closed-form precision bounds for transmittance-difference sensing:
// the coherent-state benchmark, the loss-corrected ultimate quantum limit
// (UQL), the twin-beam (two-mode squeezed vacuum, TMSV) direct-sensing
// QFIM with its large-photon-number limit, and the SNR bound.
//
// All bounds are per shot; the repetition count is reintroduced only by
// the Monte-Carlo estimation layer. Degenerate channel parameters yield
// +infinity flags rather than errors so that full [0,1]^2 grid sweeps
// never abort.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "cdsense/core.hpp"

namespace cdsense {

enum class Arm { Left, Right };

/// QFIM for a product coherent probe: diag(eta_j N_j / T_j).
inline Fisher2 qfim_coherent(const Scenario& s, const PhotonBudget& b) {
    return Fisher2::diagonal(detail::ratio_or_inf(s.eta_l * b.n_l, s.t_l),
                             detail::ratio_or_inf(s.eta_r * b.n_r, s.t_r));
}

/// Coherent-probe bound on Var(Gamma_-): T_L/(eta_L N_L) + T_R/(eta_R N_R).
inline double var_coherent(const Scenario& s, const PhotonBudget& b) {
    return detail::ratio_or_inf(s.t_l, s.eta_l * b.n_l) +
           detail::ratio_or_inf(s.t_r, s.eta_r * b.n_r);
}

namespace detail {

// r = 1/(1 + sqrt(num/den)) with the limiting values at degenerate
// arguments: den = 0 pushes all energy to the right arm (r -> 0),
// num = 0 to the left arm (r -> 1). Both arms dead: any split works.
inline double split_ratio(double num, double den) {
    if (num == 0.0 && den == 0.0) return 0.5;
    if (den == 0.0) return 0.0;
    return 1.0 / (1.0 + std::sqrt(num / den));
}

} // namespace detail

/// Energy fraction r = N_L/N_tot minimizing the coherent-probe bound.
inline double optimal_ratio_classical(const Scenario& s) {
    return detail::split_ratio(s.eta_l * s.t_r, s.eta_r * s.t_l);
}

/// Coherent bound at the optimal energy split, the classical benchmark:
/// (sqrt(T_L/eta_L) + sqrt(T_R/eta_R))^2 / N_tot.
inline double classical_benchmark(const Scenario& s, double n_tot) {
    if (!(n_tot > 0.0))
        throw std::invalid_argument("classical_benchmark: n_tot must be > 0");
    const double root = std::sqrt(detail::ratio_or_inf(s.t_l, s.eta_l)) +
                        std::sqrt(detail::ratio_or_inf(s.t_r, s.eta_r));
    return root * root / n_tot;
}

/// Input-optimized QFIM in the presence of loss:
/// diag(eta_j N_j / (T_j (1 - eta_j T_j))).
inline Fisher2 qfim_max(const Scenario& s, const PhotonBudget& b) {
    return Fisher2::diagonal(
        detail::ratio_or_inf(s.eta_l * b.n_l, s.t_l * (1.0 - s.eff_l())),
        detail::ratio_or_inf(s.eta_r * b.n_r, s.t_r * (1.0 - s.eff_r())));
}

/// Ultimate quantum limit on Var(Gamma_-) for a fixed budget:
/// sum_j T_j (1 - eta_j T_j) / (eta_j N_j).
inline double var_uql(const Scenario& s, const PhotonBudget& b) {
    return detail::ratio_or_inf(s.t_l * (1.0 - s.eff_l()), s.eta_l * b.n_l) +
           detail::ratio_or_inf(s.t_r * (1.0 - s.eff_r()), s.eta_r * b.n_r);
}

/// Energy fraction minimizing var_uql.
inline double optimal_ratio_uql(const Scenario& s) {
    return detail::split_ratio(s.eta_l * s.t_r * (1.0 - s.eff_r()),
                               s.eta_r * s.t_l * (1.0 - s.eff_l()));
}

/// UQL at the optimal energy split:
/// (sqrt(T_L(1-eta_L T_L)/eta_L) + sqrt(T_R(1-eta_R T_R)/eta_R))^2 / N_tot.
inline double uql_optimal(const Scenario& s, double n_tot) {
    if (!(n_tot > 0.0))
        throw std::invalid_argument("uql_optimal: n_tot must be > 0");
    const double root = std::sqrt(detail::ratio_or_inf(s.t_l * (1.0 - s.eff_l()), s.eta_l)) +
                        std::sqrt(detail::ratio_or_inf(s.t_r * (1.0 - s.eff_r()), s.eta_r));
    return root * root / n_tot;
}

/// Quantum enhancement classical_benchmark / uql_optimal; equals
/// 1/(1 - eta T) for symmetric arms and diverges as eta T -> 1.
inline double enhancement_factor(const Scenario& s, double n_tot) {
    // As eta_j -> 0 with T_j > 0 both bounds diverge at the same rate.
    if ((s.eta_l == 0.0 && s.t_l > 0.0) || (s.eta_r == 0.0 && s.t_r > 0.0)) return 1.0;
    const double cb = classical_benchmark(s, n_tot);
    const double uql = uql_optimal(s, n_tot);
    if (uql == 0.0) return cb == 0.0 ? 1.0 : kInf;
    return cb / uql;
}

/// Signal-mode correlation factor chi of the TMSV QFIM diagonal,
/// guaranteed to lie in [0,1]; rounding is absorbed by a clamp whose
/// magnitude may not exceed 1e-9.
inline double chi_factor(const Scenario& s, double n, Arm j) {
    detail::require_nonnegative(n, "n");
    const double aj = (j == Arm::Left) ? s.eff_l() : s.eff_r();
    const double ak = (j == Arm::Left) ? s.eff_r() : s.eff_l();
    const double num = 1.0 - aj * (1.0 - ak) + ak * (1.0 - aj) * n;
    const double den = 1.0 + aj * (1.0 - ak) * n + ak * (1.0 - aj) * n; // >= 1
    double chi = num / den;
    if (chi < 0.0 || chi > 1.0) {
        const double excess = std::max(-chi, chi - 1.0);
        if (excess > 1e-9)
            throw std::logic_error("chi_factor: value escapes [0,1] by more than 1e-9");
        chi = std::clamp(chi, 0.0, 1.0);
    }
    return chi;
}

/// QFIM of the direct twin-beam scheme (single TMSV split over the two
/// arms, mean photon number n per signal mode).
inline Fisher2 qfim_tmsv_direct(const Scenario& s, double n) {
    detail::require_nonnegative(n, "n");
    const double al = s.eff_l(), ar = s.eff_r();
    const double h_ll = detail::ratio_or_inf(chi_factor(s, n, Arm::Left) * s.eta_l * n,
                                             s.t_l * (1.0 - al));
    const double h_rr = detail::ratio_or_inf(chi_factor(s, n, Arm::Right) * s.eta_r * n,
                                             s.t_r * (1.0 - ar));
    const double den = 1.0 + al * (1.0 - ar) * n + ar * (1.0 - al) * n; // >= 1
    const double h_lr = -s.eta_l * s.eta_r * n * (n + 1.0) / den;
    return Fisher2(h_ll, h_lr, h_lr, h_rr);
}

/// QCR bound of the direct twin-beam scheme,
/// (H_LL + H_RR + 2 H_LR) / (H_LL H_RR - H_LR^2).
/// Returns +infinity (UNESTIMABLE) for a singular QFIM, e.g. n = 0.
inline double var_tmsv_direct(const Scenario& s, double n, double tol = kSupportTol) {
    const Fisher2 h = qfim_tmsv_direct(s, n);
    const bool div_l = std::isinf(h.h_ll), div_r = std::isinf(h.h_rr);
    if (div_l && div_r) return 0.0;
    if (div_l) return h.h_rr > 0.0 ? 1.0 / h.h_rr : kInf; // T_L known exactly
    if (div_r) return h.h_ll > 0.0 ? 1.0 / h.h_ll : kInf;
    const double det = h.h_ll * h.h_rr - h.h_lr * h.h_lr;
    const double scale = std::max(std::abs(h.h_ll * h.h_rr), h.h_lr * h.h_lr);
    if (det <= tol * scale) return kInf;
    return (h.h_ll + h.h_rr + 2.0 * h.h_lr) / det;
}

/// Limit of var_tmsv_direct as n -> infinity:
/// (T_L-T_R)^2 (1-eta_L T_L)(1-eta_R T_R) / ((1-eta_L T_L)(1-eta_R T_R)
///  + eta_L T_L eta_R T_R).
inline double var_tmsv_large_n(const Scenario& s) {
    const double al = s.eff_l(), ar = s.eff_r();
    const double dt = s.t_l - s.t_r;
    const double num = dt * dt * (1.0 - al) * (1.0 - ar);
    if (num == 0.0) return 0.0;
    return num / ((1.0 - al) * (1.0 - ar) + al * ar);
}

/// Upper bound gamma^2 / Var_QCR on the signal-to-noise ratio of an
/// unbiased estimate; an UNESTIMABLE variance propagates to SNR = 0.
inline double snr_upper_bound(double gamma_minus, double var_qcr) {
    if (gamma_minus == 0.0) return 0.0;
    if (std::isinf(var_qcr)) return 0.0;
    return gamma_minus * gamma_minus / var_qcr;
}

enum class BoundKind { Coherent, Uql, TmsvDirect, TmsvLargeN };

inline const char* to_string(BoundKind k) {
    switch (k) {
        case BoundKind::Coherent: return "CB";
        case BoundKind::Uql: return "UQL";
        case BoundKind::TmsvDirect: return "TMSV-direct";
        case BoundKind::TmsvLargeN: return "TMSV-largeN";
    }
    return "?";
}

/// One bound evaluated at a scenario: the per-shot variance bound, the
/// QFIM behind it (absent for the large-N limit, whose QFIM diverges) and
/// the optimal energy split (absent for twin-beam schemes, whose split is
/// fixed at 1/2 by construction).
struct BoundReport {
    BoundKind label;
    std::optional<Fisher2> qfim;
    double var_gamma = 0.0;
    std::optional<double> optimal_ratio;
};

inline BoundReport bound_report(BoundKind kind, const Scenario& s, double n_tot) {
    BoundReport rep;
    rep.label = kind;
    switch (kind) {
        case BoundKind::Coherent: {
            const double r = optimal_ratio_classical(s);
            rep.qfim = qfim_coherent(s, PhotonBudget::split(n_tot, r));
            rep.var_gamma = classical_benchmark(s, n_tot);
            rep.optimal_ratio = r;
            break;
        }
        case BoundKind::Uql: {
            const double r = optimal_ratio_uql(s);
            rep.qfim = qfim_max(s, PhotonBudget::split(n_tot, r));
            rep.var_gamma = uql_optimal(s, n_tot);
            rep.optimal_ratio = r;
            break;
        }
        case BoundKind::TmsvDirect: {
            const double n = 0.5 * n_tot;
            rep.qfim = qfim_tmsv_direct(s, n);
            rep.var_gamma = var_tmsv_direct(s, n);
            break;
        }
        case BoundKind::TmsvLargeN: {
            rep.var_gamma = var_tmsv_large_n(s);
            break;
        }
    }
    return rep;
}

} // namespace cdsense
