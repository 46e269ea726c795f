#pragma once

// Photon-number-resolving detection statistics for the three probes
// (product coherent, product Fock, direct twin-beam), their analytic
// parameter derivatives, the classical Fisher information matrix of the
// outcome distribution and the resulting Cramer-Rao bound on Gamma_-.
//
// Derivatives are analytic everywhere; finite differences appear only in
// test oracles. Outcomes are stored in row-major (m_l outer, m_r inner)
// order, which samplers and CSV writers rely on for determinism.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cdsense/bounds.hpp"
#include "cdsense/core.hpp"

namespace cdsense {

struct CutoffTooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PnrdOutcome {
    int m_l;
    int m_r;
    double prob;
    double dprob_dtl;
    double dprob_dtr;
};

/// Finite table of photon-count outcome probabilities with analytic
/// derivatives in (T_L, T_R); tail_mass is the probability excluded by
/// the truncation.
struct PnrdDistribution {
    std::vector<PnrdOutcome> outcomes;
    double tail_mass = 0.0;

    double total_prob() const {
        double s = 0.0;
        for (const auto& o : outcomes) s += o.prob;
        return s;
    }
};

namespace detail {

// Poisson pmf row p(0..cutoff | mu) by upward recurrence (exact at mu = 0).
inline std::vector<double> poisson_row(double mu, int cutoff) {
    std::vector<double> p(static_cast<std::size_t>(cutoff) + 1, 0.0);
    p[0] = std::exp(-mu);
    for (int m = 0; m < cutoff; ++m) p[m + 1] = p[m] * mu / (m + 1);
    return p;
}

// Binomial pmf row p(0..k | k, q), log-space so that rows stay correct
// for q arbitrarily close to 0 or 1 (a plain upward recurrence underflows
// at (1-q)^k and never recovers).
inline std::vector<double> binomial_row(int k, double q) {
    std::vector<double> p(static_cast<std::size_t>(k) + 1, 0.0);
    if (q == 0.0) {
        p[0] = 1.0;
        return p;
    }
    if (q == 1.0) {
        p[k] = 1.0;
        return p;
    }
    const double lq = std::log(q), l1q = std::log1p(-q);
    const double lgk = std::lgamma(k + 1.0);
    for (int m = 0; m <= k; ++m) {
        const double lp = lgk - std::lgamma(m + 1.0) - std::lgamma(k - m + 1.0) +
                          m * lq + (k - m) * l1q;
        p[m] = std::exp(lp);
    }
    return p;
}

// d/dq of the binomial pmf via d binom(m|k,q)/dq = k (binom(m-1|k-1,q)
// - binom(m|k-1,q)), boundary-safe for q in {0,1} and m in {0,k}.
inline std::vector<double> binomial_row_dq(int k, const std::vector<double>& row_km1) {
    std::vector<double> d(static_cast<std::size_t>(k) + 1, 0.0);
    if (k == 0) return d;
    for (int m = 0; m <= k; ++m) {
        double v = 0.0;
        if (m >= 1 && m - 1 <= k - 1) v += row_km1[m - 1];
        if (m <= k - 1) v -= row_km1[m];
        d[m] = k * v;
    }
    return d;
}

} // namespace detail

/// Smallest cutoff keeping the coherent-probe truncation tail below
/// tail_tol (union bound over the two Poisson marginals).
inline int coherent_cutoff_for_tail(const Scenario& s, const PhotonBudget& b,
                                    double tail_tol = 1e-12) {
    const double mu_l = s.eff_l() * b.n_l;
    const double mu_r = s.eff_r() * b.n_r;
    double pl = std::exp(-mu_l), pr = std::exp(-mu_r);
    double cl = pl, cr = pr;
    for (int c = 0; c < 100000; ++c) {
        if ((1.0 - cl) + (1.0 - cr) < tail_tol) return c;
        pl *= mu_l / (c + 1);
        pr *= mu_r / (c + 1);
        cl += pl;
        cr += pr;
    }
    throw CutoffTooSmall("coherent_cutoff_for_tail: tail tolerance unreachable");
}

/// Product-Poisson PNRD distribution of the coherent probe, means
/// eta_j T_j N_j, with analytic derivatives d p / d T_j.
inline PnrdDistribution coherent_pnrd(const Scenario& s, const PhotonBudget& b, int cutoff) {
    if (cutoff < 0) throw std::invalid_argument("coherent_pnrd: cutoff must be >= 0");
    const double mu_l = s.eff_l() * b.n_l;
    const double mu_r = s.eff_r() * b.n_r;
    const auto pl = detail::poisson_row(mu_l, cutoff);
    const auto pr = detail::poisson_row(mu_r, cutoff);
    // d pois(m|mu(T))/dT = eta N (pois(m-1|mu) - pois(m|mu))
    const auto drow = [](const std::vector<double>& p, double eta_n) {
        std::vector<double> d(p.size());
        for (std::size_t m = 0; m < p.size(); ++m)
            d[m] = eta_n * ((m > 0 ? p[m - 1] : 0.0) - p[m]);
        return d;
    };
    const auto dl = drow(pl, s.eta_l * b.n_l);
    const auto dr = drow(pr, s.eta_r * b.n_r);

    PnrdDistribution dist;
    dist.outcomes.reserve(static_cast<std::size_t>(cutoff + 1) * (cutoff + 1));
    double covered_l = 0.0, covered_r = 0.0;
    for (int ml = 0; ml <= cutoff; ++ml) {
        covered_l += pl[ml];
        for (int mr = 0; mr <= cutoff; ++mr) {
            dist.outcomes.push_back(
                {ml, mr, pl[ml] * pr[mr], dl[ml] * pr[mr], pl[ml] * dr[mr]});
        }
    }
    for (int mr = 0; mr <= cutoff; ++mr) covered_r += pr[mr];
    dist.tail_mass = std::max(0.0, 1.0 - covered_l * covered_r);
    return dist;
}

/// Product-binomial PNRD distribution of the Fock probe |n_l, n_r> with
/// success probabilities eta_j T_j; the support {0..n_l} x {0..n_r} is
/// exact, tail_mass = 0.
inline PnrdDistribution fock_pnrd(const Scenario& s, int n_l, int n_r) {
    if (n_l < 0 || n_r < 0)
        throw std::invalid_argument("fock_pnrd: photon numbers must be >= 0");
    const auto pl = detail::binomial_row(n_l, s.eff_l());
    const auto pr = detail::binomial_row(n_r, s.eff_r());
    const auto pl_m1 = detail::binomial_row(std::max(n_l - 1, 0), s.eff_l());
    const auto pr_m1 = detail::binomial_row(std::max(n_r - 1, 0), s.eff_r());
    auto dl = detail::binomial_row_dq(n_l, pl_m1);
    auto dr = detail::binomial_row_dq(n_r, pr_m1);
    for (auto& v : dl) v *= s.eta_l; // chain rule q = eta T
    for (auto& v : dr) v *= s.eta_r;

    PnrdDistribution dist;
    dist.outcomes.reserve(static_cast<std::size_t>(n_l + 1) * (n_r + 1));
    for (int ml = 0; ml <= n_l; ++ml)
        for (int mr = 0; mr <= n_r; ++mr)
            dist.outcomes.push_back(
                {ml, mr, pl[ml] * pr[mr], dl[ml] * pr[mr], pl[ml] * dr[mr]});
    dist.tail_mass = 0.0;
    return dist;
}

/// Smallest cutoff with thermal tail (n/(n+1))^(cutoff+1) < tail_tol.
inline int tmsv_cutoff_for_tail(double n, double tail_tol = 1e-12) {
    detail::require_nonnegative(n, "n");
    if (n == 0.0) return 0;
    int c = 0;
    double tail = n / (n + 1.0);
    while (tail >= tail_tol) {
        tail *= n / (n + 1.0);
        if (++c > 100000)
            throw CutoffTooSmall("tmsv_cutoff_for_tail: tail tolerance unreachable");
    }
    return c;
}

/// PNRD distribution of the direct twin-beam scheme: thermal mixture of
/// perfectly correlated pairs filtered by per-arm binomial losses,
///   p(m_L, m_R) = sum_k n^k/(n+1)^(k+1) binom(m_L|k, eta_L T_L)
///                 binom(m_R|k, eta_R T_R),
/// truncated at total photon number k = cutoff with exact tail mass
/// (n/(n+1))^(cutoff+1). Derivatives are accumulated term by term.
inline PnrdDistribution tmsv_direct_pnrd(const Scenario& s, double n, int cutoff,
                                         double max_tail = kInf) {
    detail::require_nonnegative(n, "n");
    if (cutoff < 0) throw std::invalid_argument("tmsv_direct_pnrd: cutoff must be >= 0");
    const double tail = n == 0.0 ? 0.0 : std::pow(n / (n + 1.0), cutoff + 1);
    if (tail > max_tail)
        throw CutoffTooSmall("tmsv_direct_pnrd: tail mass " + std::to_string(tail) +
                             " exceeds requested tolerance");
    const double q_l = s.eff_l(), q_r = s.eff_r();
    const std::size_t dim = static_cast<std::size_t>(cutoff) + 1;
    std::vector<double> p(dim * dim, 0.0), dl(dim * dim, 0.0), dr(dim * dim, 0.0);

    double w = 1.0 / (n + 1.0);
    std::vector<double> row_l_prev, row_r_prev;
    for (int k = 0; k <= cutoff; ++k) {
        const auto row_l = detail::binomial_row(k, q_l);
        const auto row_r = detail::binomial_row(k, q_r);
        std::vector<double> d_l(static_cast<std::size_t>(k) + 1, 0.0);
        std::vector<double> d_r(static_cast<std::size_t>(k) + 1, 0.0);
        if (k > 0) {
            d_l = detail::binomial_row_dq(k, row_l_prev);
            d_r = detail::binomial_row_dq(k, row_r_prev);
            for (auto& v : d_l) v *= s.eta_l;
            for (auto& v : d_r) v *= s.eta_r;
        }
        for (int ml = 0; ml <= k; ++ml) {
            const std::size_t base = static_cast<std::size_t>(ml) * dim;
            for (int mr = 0; mr <= k; ++mr) {
                p[base + mr] += w * row_l[ml] * row_r[mr];
                dl[base + mr] += w * d_l[ml] * row_r[mr];
                dr[base + mr] += w * row_l[ml] * d_r[mr];
            }
        }
        row_l_prev = row_l;
        row_r_prev = row_r;
        w *= n / (n + 1.0);
    }

    PnrdDistribution dist;
    dist.outcomes.reserve(dim * dim);
    for (int ml = 0; ml <= cutoff; ++ml)
        for (int mr = 0; mr <= cutoff; ++mr) {
            const std::size_t i = static_cast<std::size_t>(ml) * dim + mr;
            dist.outcomes.push_back({ml, mr, p[i], dl[i], dr[i]});
        }
    dist.tail_mass = tail;
    return dist;
}

/// Classical Fisher information matrix of a PNRD distribution,
/// F_jk = sum_m (1/p)(dp/dT_j)(dp/dT_k) over the truncated support.
/// Outcomes with p < 1e-300 are skipped to avoid division underflow.
inline Fisher2 fim_from_distribution(const PnrdDistribution& d) {
    double f_ll = 0.0, f_lr = 0.0, f_rr = 0.0;
    for (const auto& o : d.outcomes) {
        if (o.prob < 1e-300) continue;
        const double inv = 1.0 / o.prob;
        f_ll += inv * o.dprob_dtl * o.dprob_dtl;
        f_lr += inv * o.dprob_dtl * o.dprob_dtr;
        f_rr += inv * o.dprob_dtr * o.dprob_dtr;
    }
    return Fisher2(f_ll, f_lr, f_lr, f_rr);
}

/// Cramer-Rao bound on Var(Gamma_-) of the given measurement statistics.
inline double cr_bound_gamma(const PnrdDistribution& d) {
    return var_gamma(fim_from_distribution(d));
}

} // namespace cdsense
