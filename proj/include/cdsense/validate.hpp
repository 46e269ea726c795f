#pragma once

// End-to-end oracle suite behind the `validate` subcommand: every
// closed-form bound is checked against an independent numerical route
// (fidelity finite differences, classical FIM of the exact outcome
// distributions, geometric series, grid searches) at pinned tolerances.
// The same checks back the acceptance tests.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "cdsense/bounds.hpp"
#include "cdsense/core.hpp"
#include "cdsense/estimation.hpp"
#include "cdsense/gaussian.hpp"
#include "cdsense/pnrd.hpp"

namespace cdsense {

struct CheckResult {
    std::string name;
    bool pass = false;
    double observed = 0.0; // worst-case metric across the check's sample
    double tolerance = 0.0;
    std::string metric;
};

namespace detail {

inline double uniform_in(SplitMix64& rng, double lo, double hi) {
    return lo + (hi - lo) * rng.next_double();
}

inline double min_eig2(double a, double b, double c) {
    return 0.5 * (a + c - std::hypot(a - c, 2.0 * b));
}

// Worst |x - y| / max(|y|, floor) over matrix entries, with the matrix
// scale as floor so exact zeros compare sanely.
inline double rel_err_fisher(const Fisher2& x, const Fisher2& y) {
    const double scale = std::max({std::abs(y.h_ll), std::abs(y.h_lr), std::abs(y.h_rr), 1e-300});
    double worst = 0.0;
    worst = std::max(worst, std::abs(x.h_ll - y.h_ll) / std::max(std::abs(y.h_ll), scale));
    worst = std::max(worst, std::abs(x.h_lr - y.h_lr) / std::max(std::abs(y.h_lr), scale));
    worst = std::max(worst, std::abs(x.h_rr - y.h_rr) / std::max(std::abs(y.h_rr), scale));
    return worst;
}

inline double rel_err(double x, double y) {
    return std::abs(x - y) / std::max(std::abs(y), 1e-300);
}

inline CheckResult make_result(std::string name, double observed, double tolerance,
                               std::string metric) {
    CheckResult r;
    r.name = std::move(name);
    r.observed = observed;
    r.tolerance = tolerance;
    r.pass = observed <= tolerance;
    r.metric = std::move(metric);
    return r;
}

// Single-mode phase rotation on a two-mode covariance, used to diversify
// the random physical states beyond the twin-beam standard form.
inline Eigen::MatrixXd phase_rotated(const Eigen::MatrixXd& cov, double theta0, double theta1) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(4, 4);
    const double c0 = std::cos(theta0), s0 = std::sin(theta0);
    const double c1 = std::cos(theta1), s1 = std::sin(theta1);
    r(0, 0) = c0;
    r(0, 1) = s0;
    r(1, 0) = -s0;
    r(1, 1) = c0;
    r(2, 2) = c1;
    r(2, 3) = s1;
    r(3, 2) = -s1;
    r(3, 3) = c1;
    return r * cov * r.transpose();
}

inline GaussianState random_physical_state(SplitMix64& rng) {
    const double n = uniform_in(rng, 0.0, 3.0);
    const double tau_l = uniform_in(rng, 0.05, 1.0);
    const double tau_r = uniform_in(rng, 0.05, 1.0);
    GaussianState g = apply_loss(apply_loss(tmsv_state(n), 0, tau_l), 1, tau_r);
    return GaussianState(phase_rotated(g.cov, uniform_in(rng, 0.0, 6.28),
                                       uniform_in(rng, 0.0, 6.28)));
}

} // namespace detail

/// Analytic twin-beam QFIM against the fidelity finite-difference QFIM on
/// 50 random scenarios, T in [0.1,0.9], eta in [0.5,1], n in {0.5,1,2}.
inline CheckResult check_qfim_tmsv_fidelity_oracle() {
    SplitMix64 rng(0x51C1);
    const std::array<double, 3> ns{0.5, 1.0, 2.0};
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
        const Scenario s(detail::uniform_in(rng, 0.1, 0.9), detail::uniform_in(rng, 0.1, 0.9),
                         detail::uniform_in(rng, 0.5, 1.0), detail::uniform_in(rng, 0.5, 1.0));
        const double n = ns[static_cast<std::size_t>(i % 3)];
        worst = std::max(worst,
                         detail::rel_err_fisher(qfim_from_fidelity(s, n, 1e-4),
                                                qfim_tmsv_direct(s, n)));
    }
    return detail::make_result("qfim_tmsv_vs_fidelity_oracle", worst, 1e-6,
                               "worst per-entry relative error, 50 scenarios");
}

/// FIM of the product-Poisson PNRD distribution equals the coherent QFIM.
inline CheckResult check_fim_coherent_equals_qfim() {
    SplitMix64 rng(0xC0DE);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Scenario s(detail::uniform_in(rng, 0.05, 0.95), detail::uniform_in(rng, 0.05, 0.95),
                         detail::uniform_in(rng, 0.1, 1.0), detail::uniform_in(rng, 0.1, 1.0));
        const PhotonBudget b(detail::uniform_in(rng, 0.2, 3.0), detail::uniform_in(rng, 0.2, 3.0));
        const auto d = coherent_pnrd(s, b, coherent_cutoff_for_tail(s, b, 1e-15) + 5);
        worst = std::max(worst, detail::rel_err_fisher(fim_from_distribution(d), qfim_coherent(s, b)));
    }
    return detail::make_result("fim_coherent_equals_qfim", worst, 1e-10,
                               "worst per-entry relative error, 100 scenarios");
}

/// FIM of the product-binomial PNRD distribution equals the loss-corrected
/// maximal QFIM for integer budgets up to N = 20.
inline CheckResult check_fim_fock_equals_qfim() {
    SplitMix64 rng(0xF0CC);
    double worst = 0.0;
    for (int i = 0; i < 40; ++i) {
        const Scenario s(detail::uniform_in(rng, 0.05, 0.95), detail::uniform_in(rng, 0.05, 0.95),
                         detail::uniform_in(rng, 0.1, 1.0), detail::uniform_in(rng, 0.1, 1.0));
        const int n_l = 1 + static_cast<int>(rng.next() % 20);
        const int n_r = 1 + static_cast<int>(rng.next() % 20);
        const auto d = fock_pnrd(s, n_l, n_r);
        worst = std::max(worst,
                         detail::rel_err_fisher(fim_from_distribution(d),
                                                qfim_max(s, PhotonBudget(n_l, n_r))));
    }
    return detail::make_result("fim_fock_equals_qfim", worst, 1e-10,
                               "worst per-entry relative error, budgets to 20");
}

/// Ancilla-assisted twin-beam QFIM attains eta N / (T (1 - eta T)).
inline CheckResult check_ancilla_uql() {
    double worst = 0.0;
    for (double t : {0.3, 0.5, 0.7})
        for (double eta : {0.8, 1.0})
            for (double n : {1.0, 2.0}) {
                const double expected = eta * n / (t * (1.0 - eta * t));
                worst = std::max(worst, detail::rel_err(qfim_tmsv_ancilla(t, eta, n), expected));
            }
    return detail::make_result("qfim_tmsv_ancilla_attains_uql", worst, 1e-5,
                               "worst relative error over (T,eta,N) grid");
}

/// At T_L = T_R, eta = 0.8, N_tot = 2 the TMSV QCR bound, the TMSV PNRD
/// CR bound and the optimal UQL coincide.
inline CheckResult check_diagonal_coincidence() {
    double worst = 0.0;
    const int cutoff = tmsv_cutoff_for_tail(1.0, 1e-12);
    for (double t : {0.3, 0.5, 0.7}) {
        const Scenario s(t, t, 0.8, 0.8);
        const double qcr = var_tmsv_direct(s, 1.0);
        const double cr = cr_bound_gamma(tmsv_direct_pnrd(s, 1.0, cutoff));
        const double uql = uql_optimal(s, 2.0);
        worst = std::max({worst, detail::rel_err(cr, qcr), detail::rel_err(uql, qcr),
                          detail::rel_err(cr, uql)});
    }
    return detail::make_result("diagonal_coincidence_tmsv_cr_uql", worst, 1e-6,
                               "worst pairwise relative difference at T_L = T_R");
}

/// Symmetric enhancement factor spot values: 2 at eta=0.5, T=1 and 5/3 at
/// eta=0.8, T=0.5.
inline CheckResult check_enhancement_spots() {
    const double e1 = enhancement_factor(Scenario(1.0, 1.0, 0.5, 0.5), 2.0);
    const double e2 = enhancement_factor(Scenario(0.5, 0.5, 0.8, 0.8), 2.0);
    const double worst = std::max(std::abs(e1 - 2.0), std::abs(e2 - 5.0 / 3.0));
    return detail::make_result("enhancement_factor_spot_values", worst, 1e-9,
                               "worst absolute error at the two spot values");
}

/// The TMSV bound at n = 1e6 matches its closed-form large-n limit on 20
/// scenarios with well-separated transmittances. The residual 1/n
/// correction scales like 1/(n deltaT^2), so |T_L - T_R| >= 0.3 keeps the
/// n = 1e6 gap below the 1e-4 tolerance with margin.
inline CheckResult check_large_n_limit() {
    SplitMix64 rng(0x1A26);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double lo = detail::uniform_in(rng, 0.1, 0.55);
        const double hi = lo + detail::uniform_in(rng, 0.3, 0.4);
        const bool swap = rng.next() % 2 == 0;
        const Scenario s(swap ? hi : lo, swap ? lo : hi, detail::uniform_in(rng, 0.5, 1.0),
                         detail::uniform_in(rng, 0.5, 1.0));
        worst = std::max(worst, detail::rel_err(var_tmsv_direct(s, 1e6), var_tmsv_large_n(s)));
    }
    return detail::make_result("tmsv_large_n_limit", worst, 1e-4,
                               "worst relative error at n = 1e6, 20 scenarios");
}

/// d/d(deltaT) of (Var_TMSV - UQL_opt) vanishes at deltaT = 0 for
/// balanced losses (central difference, h = 1e-4).
inline CheckResult check_first_order_flatness() {
    const auto diff = [](double dt) {
        const Scenario s(0.5, 0.5 + dt, 0.8, 0.8);
        return var_tmsv_direct(s, 1.0) - uql_optimal(s, 2.0);
    };
    const double h = 1e-4;
    const double slope = (diff(h) - diff(-h)) / (2.0 * h);
    return detail::make_result("tmsv_uql_first_order_flatness", std::abs(slope), 1e-6,
                               "|d(Var_TMSV - UQL)/d(deltaT)| at deltaT = 0");
}

/// chi stays in [0,1] over 1e4 random draws with n in [0, 100].
inline CheckResult check_chi_bounds() {
    SplitMix64 rng(0xC41);
    double worst = -1.0; // max escape from [0,1]; negative means inside
    for (int i = 0; i < 10000; ++i) {
        const Scenario s(rng.next_double(), rng.next_double(), rng.next_double(),
                         rng.next_double());
        const double n = detail::uniform_in(rng, 0.0, 100.0);
        for (Arm arm : {Arm::Left, Arm::Right}) {
            const double chi = chi_factor(s, n, arm);
            worst = std::max({worst, -chi, chi - 1.0});
        }
    }
    return detail::make_result("chi_factor_bounds", worst, 0.0,
                               "max escape of chi from [0,1], 1e4 draws");
}

/// Fidelity symmetry, unit self-fidelity, range, the pure-state overlap
/// oracle 1/sqrt(det(V1+V2)) and monotonicity under shared loss.
inline std::vector<CheckResult> check_fidelity_axioms() {
    SplitMix64 rng(0xF1DE);
    double worst_sym = 0.0, worst_self = 0.0, worst_range = -1.0, worst_dpi = -1.0;
    for (int i = 0; i < 50; ++i) {
        const GaussianState a = detail::random_physical_state(rng);
        const GaussianState b = detail::random_physical_state(rng);
        const double fab = fidelity_two_mode(a, b);
        worst_sym = std::max(worst_sym, std::abs(fab - fidelity_two_mode(b, a)));
        worst_self = std::max({worst_self, std::abs(fidelity_two_mode(a, a) - 1.0),
                               std::abs(fidelity_two_mode(b, b) - 1.0)});
        worst_range = std::max({worst_range, -fab, fab - 1.0});
        const double tau = detail::uniform_in(rng, 0.1, 1.0);
        const Eigen::Index mode = static_cast<Eigen::Index>(rng.next() % 2);
        const double f_lossy =
            fidelity_two_mode(apply_loss(a, mode, tau), apply_loss(b, mode, tau));
        worst_dpi = std::max(worst_dpi, fab - f_lossy); // must not exceed 1e-9
    }
    double worst_pure = 0.0;
    for (int i = 0; i < 25; ++i) {
        const GaussianState a = tmsv_state(detail::uniform_in(rng, 0.0, 2.0));
        const GaussianState b = tmsv_state(detail::uniform_in(rng, 0.0, 2.0));
        const double overlap = 1.0 / std::sqrt((a.cov + b.cov).determinant());
        worst_pure = std::max(worst_pure, std::abs(fidelity_two_mode(a, b) - overlap));
    }
    return {
        detail::make_result("fidelity_symmetry", worst_sym, 1e-12, "max |F(A,B) - F(B,A)|"),
        detail::make_result("fidelity_self_identity", worst_self, 1e-12, "max |F(V,V) - 1|"),
        detail::make_result("fidelity_range", worst_range, 0.0, "max escape of F from [0,1]"),
        detail::make_result("fidelity_pure_overlap", worst_pure, 1e-9,
                            "max |F - 1/sqrt(det(V1+V2))| on pure pairs"),
        detail::make_result("fidelity_loss_monotonicity", worst_dpi, 1e-9,
                            "max F(A,B) - F(loss A, loss B)"),
    };
}

/// Distribution sanity for all three probes: nonnegativity, normalization
/// including the tail, and vanishing derivative sums.
inline CheckResult check_pnrd_sanity() {
    SplitMix64 rng(0x9A7D);
    double worst = 0.0;
    for (int i = 0; i < 12; ++i) {
        const Scenario s(detail::uniform_in(rng, 0.05, 0.95), detail::uniform_in(rng, 0.05, 0.95),
                         detail::uniform_in(rng, 0.3, 1.0), detail::uniform_in(rng, 0.3, 1.0));
        const PhotonBudget b(detail::uniform_in(rng, 0.3, 2.5), detail::uniform_in(rng, 0.3, 2.5));
        const std::array<PnrdDistribution, 3> dists{
            coherent_pnrd(s, b, coherent_cutoff_for_tail(s, b, 1e-13)),
            fock_pnrd(s, 1 + static_cast<int>(rng.next() % 12),
                      1 + static_cast<int>(rng.next() % 12)),
            tmsv_direct_pnrd(s, detail::uniform_in(rng, 0.3, 2.0),
                             tmsv_cutoff_for_tail(2.0, 1e-13))};
        for (const auto& d : dists) {
            double min_p = 0.0, sum_dl = 0.0, sum_dr = 0.0;
            for (const auto& o : d.outcomes) {
                min_p = std::min(min_p, o.prob);
                sum_dl += o.dprob_dtl;
                sum_dr += o.dprob_dtr;
            }
            // each violation measured as a fraction of its own tolerance:
            // nonnegativity (exact), normalization 1e-10, derivative sums 1e-8
            worst = std::max({worst, min_p < 0.0 ? kInf : 0.0,
                              std::abs(d.total_prob() + d.tail_mass - 1.0) / 1e-10,
                              std::abs(sum_dl) / 1e-8, std::abs(sum_dr) / 1e-8});
        }
    }
    return detail::make_result("pnrd_distribution_sanity", worst, 1.0,
                               "worst violation as a fraction of its tolerance");
}

/// Every measurement FIM is PSD and dominated by the matching QFIM.
inline CheckResult check_fim_psd_dominance() {
    SplitMix64 rng(0xD0F1);
    double worst = 0.0; // most negative eigenvalue encountered, sign-flipped
    for (int i = 0; i < 15; ++i) {
        const Scenario s(detail::uniform_in(rng, 0.1, 0.9), detail::uniform_in(rng, 0.1, 0.9),
                         detail::uniform_in(rng, 0.4, 1.0), detail::uniform_in(rng, 0.4, 1.0));
        const PhotonBudget b(detail::uniform_in(rng, 0.3, 2.0), detail::uniform_in(rng, 0.3, 2.0));
        const int n_l = 1 + static_cast<int>(rng.next() % 6);
        const int n_r = 1 + static_cast<int>(rng.next() % 6);
        const double n_tmsv = detail::uniform_in(rng, 0.3, 2.0);
        const std::array<std::pair<Fisher2, Fisher2>, 3> cases{
            std::pair{fim_from_distribution(
                          coherent_pnrd(s, b, coherent_cutoff_for_tail(s, b, 1e-13))),
                      qfim_coherent(s, b)},
            std::pair{fim_from_distribution(fock_pnrd(s, n_l, n_r)),
                      qfim_max(s, PhotonBudget(n_l, n_r))},
            std::pair{fim_from_distribution(
                          tmsv_direct_pnrd(s, n_tmsv, tmsv_cutoff_for_tail(n_tmsv, 1e-13))),
                      qfim_tmsv_direct(s, n_tmsv)},
        };
        for (const auto& [fim, qfim] : cases) {
            worst = std::max(worst, -detail::min_eig2(fim.h_ll, fim.h_lr, fim.h_rr));
            worst = std::max(worst, -detail::min_eig2(qfim.h_ll - fim.h_ll, qfim.h_lr - fim.h_lr,
                                                      qfim.h_rr - fim.h_rr));
        }
    }
    return detail::make_result("fim_psd_and_qfim_dominates", worst, 1e-8,
                               "most negative eigenvalue of FIM and QFIM - FIM");
}

/// Twin-beam vacuum probability against the geometric-series closed form
/// p(0,0) = 1 / (n + 1 - n (1 - eta_L T_L)(1 - eta_R T_R)).
inline CheckResult check_tmsv_p00_geometric() {
    SplitMix64 rng(0x6E0);
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
        const Scenario s(detail::uniform_in(rng, 0.05, 0.95), detail::uniform_in(rng, 0.05, 0.95),
                         detail::uniform_in(rng, 0.3, 1.0), detail::uniform_in(rng, 0.3, 1.0));
        const double n = detail::uniform_in(rng, 0.2, 2.0);
        const auto d = tmsv_direct_pnrd(s, n, tmsv_cutoff_for_tail(n, 1e-14));
        const double expected =
            1.0 / (n + 1.0 - n * (1.0 - s.eff_l()) * (1.0 - s.eff_r()));
        worst = std::max(worst, detail::rel_err(d.outcomes.front().prob, expected));
    }
    return detail::make_result("tmsv_p00_geometric_series", worst, 1e-10,
                               "worst relative error of p(0,0)");
}

/// Ordering chain var_uql <= var_coherent and uql_optimal <= classical
/// benchmark on 1000 random scenarios, strict away from eta T = 0.
inline CheckResult check_ordering_chain() {
    SplitMix64 rng(0x0DE2);
    double worst = -kInf; // max signed violation uql - cb (negative = ok)
    for (int i = 0; i < 1000; ++i) {
        const Scenario s(detail::uniform_in(rng, 0.01, 0.99), detail::uniform_in(rng, 0.01, 0.99),
                         detail::uniform_in(rng, 0.05, 1.0), detail::uniform_in(rng, 0.05, 1.0));
        const PhotonBudget b(detail::uniform_in(rng, 0.1, 3.0), detail::uniform_in(rng, 0.1, 3.0));
        const double n_tot = detail::uniform_in(rng, 0.5, 4.0);
        worst = std::max(worst, var_uql(s, b) - var_coherent(s, b));
        worst = std::max(worst, uql_optimal(s, n_tot) - classical_benchmark(s, n_tot));
    }
    return detail::make_result("bound_ordering_chain", worst, 0.0,
                               "max of var_uql - var_coherent and uql_opt - cb");
}

/// The full suite in a fixed order; all checks are deterministic.
inline std::vector<CheckResult> run_validation_suite() {
    std::vector<CheckResult> results;
    results.push_back(check_qfim_tmsv_fidelity_oracle());
    results.push_back(check_fim_coherent_equals_qfim());
    results.push_back(check_fim_fock_equals_qfim());
    results.push_back(check_ancilla_uql());
    results.push_back(check_diagonal_coincidence());
    results.push_back(check_enhancement_spots());
    results.push_back(check_large_n_limit());
    results.push_back(check_first_order_flatness());
    results.push_back(check_chi_bounds());
    for (auto& r : check_fidelity_axioms()) results.push_back(std::move(r));
    results.push_back(check_pnrd_sanity());
    results.push_back(check_fim_psd_dominance());
    results.push_back(check_tmsv_p00_geometric());
    results.push_back(check_ordering_chain());
    return results;
}

} // namespace cdsense
