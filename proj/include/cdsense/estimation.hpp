#pragma once

// Monte-Carlo sampling of PNRD outcomes, maximum-likelihood estimation of
// (T_L, T_R) and the plug-in estimate Gamma_- = T_L - T_R, and the
// empirical check that the Cramer-Rao bound is approached at large
// repetition counts.
//
// Randomness comes from SplitMix64, a counter-based 64-bit generator that
// is bit-reproducible across platforms; reports carry the algorithm name.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "cdsense/pnrd.hpp"

namespace cdsense {

struct TailTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DegenerateLikelihood : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// SplitMix64: output(i) = mix(seed + (i+1) * 0x9E3779B97F4A7C15).
class SplitMix64 {
public:
    static constexpr std::string_view algorithm = "splitmix64";

    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// A batch of i.i.d. PNRD outcomes drawn with a fixed seed.
struct SampleBatch {
    std::vector<std::pair<int, int>> outcomes;
    std::uint64_t seed = 0;

    std::size_t nu() const { return outcomes.size(); }
};

/// Inverse-CDF sampling over the enumerated support; deterministic for a
/// fixed seed. Tail mass below max_tail is folded into the largest-m
/// outcome bucket, larger tails are rejected.
inline SampleBatch sample(const PnrdDistribution& d, std::size_t nu, std::uint64_t seed,
                          double max_tail = 1e-9) {
    if (d.outcomes.empty()) throw std::invalid_argument("sample: empty distribution");
    if (d.tail_mass > max_tail)
        throw TailTooLarge("sample: tail mass " + std::to_string(d.tail_mass) +
                           " exceeds " + std::to_string(max_tail));
    std::vector<double> cum(d.outcomes.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < d.outcomes.size(); ++i) {
        acc += d.outcomes[i].prob;
        cum[i] = acc;
    }
    cum.back() = 1.0; // fold truncation tail into the last bucket

    SampleBatch batch;
    batch.seed = seed;
    batch.outcomes.reserve(nu);
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < nu; ++i) {
        const double u = rng.next_double();
        const auto it = std::upper_bound(cum.begin(), cum.end(), u);
        const std::size_t idx =
            std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
        batch.outcomes.emplace_back(d.outcomes[idx].m_l, d.outcomes[idx].m_r);
    }
    return batch;
}

enum class Probe { Coherent, Fock, Tmsv };

inline const char* to_string(Probe p) {
    switch (p) {
        case Probe::Coherent: return "coherent";
        case Probe::Fock: return "fock";
        case Probe::Tmsv: return "tmsv";
    }
    return "?";
}

/// Closed-form MLE for the product probes: T_hat_j = mean(m_j)/(eta_j N_j),
/// clamped to [0,1] for the Fock probe (whose parameter is a probability).
inline std::pair<double, double> mle_product(const SampleBatch& batch, const Scenario& s,
                                             const PhotonBudget& b, Probe probe) {
    if (probe == Probe::Tmsv)
        throw std::invalid_argument("mle_product: use mle_tmsv for the twin-beam probe");
    if (!(s.eta_l * b.n_l > 0.0) || !(s.eta_r * b.n_r > 0.0))
        throw std::invalid_argument("mle_product: requires eta_j N_j > 0");
    if (batch.outcomes.empty()) throw std::invalid_argument("mle_product: empty batch");
    double sum_l = 0.0, sum_r = 0.0;
    for (const auto& [ml, mr] : batch.outcomes) {
        sum_l += ml;
        sum_r += mr;
    }
    const double inv_nu = 1.0 / static_cast<double>(batch.nu());
    double t_l = sum_l * inv_nu / (s.eta_l * b.n_l);
    double t_r = sum_r * inv_nu / (s.eta_r * b.n_r);
    if (probe == Probe::Fock) {
        t_l = std::clamp(t_l, 0.0, 1.0);
        t_r = std::clamp(t_r, 0.0, 1.0);
    }
    return {t_l, t_r};
}

namespace detail {

// Log-likelihood of observed twin-beam PNRD counts at candidate (tl, tr),
// evaluated only at the observed outcomes.
class TmsvLogLik {
public:
    TmsvLogLik(const SampleBatch& batch, const Scenario& s, double n, int cutoff)
        : eta_l_(s.eta_l), eta_r_(s.eta_r), n_(n), cutoff_(cutoff) {
        for (const auto& o : batch.outcomes) ++hist_[o];
    }

    double operator()(double tl, double tr) const {
        require_unit_interval(tl, "t_l");
        require_unit_interval(tr, "t_r");
        const double q_l = eta_l_ * tl, q_r = eta_r_ * tr;
        std::map<std::pair<int, int>, double> prob;
        for (const auto& [m, cnt] : hist_) prob[m] = 0.0;
        double w = 1.0 / (n_ + 1.0);
        for (int k = 0; k <= cutoff_; ++k) {
            const auto row_l = binomial_row(k, q_l);
            const auto row_r = binomial_row(k, q_r);
            for (auto& [m, p] : prob)
                if (m.first <= k && m.second <= k) p += w * row_l[m.first] * row_r[m.second];
            w *= n_ / (n_ + 1.0);
        }
        double ll = 0.0;
        for (const auto& [m, cnt] : hist_)
            ll += static_cast<double>(cnt) * std::log(std::max(prob[m], 1e-300));
        return ll;
    }

    int max_count() const {
        int mx = 0;
        for (const auto& [m, cnt] : hist_) mx = std::max({mx, m.first, m.second});
        return mx;
    }

    bool all_zero() const { return max_count() == 0; }

private:
    double eta_l_, eta_r_, n_;
    int cutoff_;
    std::map<std::pair<int, int>, std::size_t> hist_;
};

// Golden-section maximization of f over [lo, hi] to absolute tolerance.
template <typename F>
double golden_max(F&& f, double lo, double hi, double tol) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        }
    }
    return 0.5 * (a + b);
}

} // namespace detail

/// Numerical MLE for the twin-beam probe: coarse grid search over
/// (T_L, T_R) followed by alternating coordinate-wise golden-section
/// refinement to 1e-5 in T. Throws DegenerateLikelihood when every
/// recorded outcome is (0,0).
inline std::pair<double, double> mle_tmsv(const SampleBatch& batch, const Scenario& s, double n,
                                          int grid_points = 21, int cutoff = -1) {
    if (batch.outcomes.empty()) throw std::invalid_argument("mle_tmsv: empty batch");
    if (grid_points < 2) throw std::invalid_argument("mle_tmsv: grid_points must be >= 2");
    if (cutoff < 0) cutoff = tmsv_cutoff_for_tail(n, 1e-12);
    detail::TmsvLogLik loglik(batch, s, n, cutoff);
    if (loglik.all_zero())
        throw DegenerateLikelihood("mle_tmsv: all outcomes are (0,0)");
    cutoff = std::max(cutoff, loglik.max_count());
    detail::TmsvLogLik ll(batch, s, n, cutoff);

    // Coarse grid over the open square.
    double best_tl = 0.5, best_tr = 0.5, best = -kInf;
    for (int i = 0; i < grid_points; ++i) {
        const double tl = (i + 0.5) / grid_points;
        for (int j = 0; j < grid_points; ++j) {
            const double tr = (j + 0.5) / grid_points;
            const double v = ll(tl, tr);
            if (v > best) {
                best = v;
                best_tl = tl;
                best_tr = tr;
            }
        }
    }
    const double span = 1.0 / grid_points;
    for (int pass = 0; pass < 2; ++pass) {
        best_tl = detail::golden_max(
            [&](double t) { return ll(t, best_tr); }, std::max(0.0, best_tl - span),
            std::min(1.0, best_tl + span), 1e-5);
        best_tr = detail::golden_max(
            [&](double t) { return ll(best_tl, t); }, std::max(0.0, best_tr - span),
            std::min(1.0, best_tr + span), 1e-5);
    }
    return {best_tl, best_tr};
}

/// Empirical CR-saturation summary across seeds: sample variance of the
/// plug-in estimate Gamma_hat versus cr_bound / nu.
struct EstimationReport {
    double gamma_hat_mean = 0.0;
    double gamma_hat_var = 0.0;
    double cr_bound_per_nu = 0.0;
    double ratio = 0.0; // empirical variance / (CR bound / nu)
    double bias = 0.0;
    std::size_t nu = 0;
    std::size_t n_seeds = 0;
};

namespace detail {

inline EstimationReport summarize(const std::vector<double>& gammas, double cr_per_shot,
                                  std::size_t nu, double gamma_true) {
    if (gammas.size() < 2)
        throw std::invalid_argument("saturation_report: need at least two seeds");
    EstimationReport rep;
    rep.nu = nu;
    rep.n_seeds = gammas.size();
    double mean = 0.0;
    for (double g : gammas) mean += g;
    mean /= static_cast<double>(gammas.size());
    double var = 0.0;
    for (double g : gammas) var += (g - mean) * (g - mean);
    var /= static_cast<double>(gammas.size() - 1);
    rep.gamma_hat_mean = mean;
    rep.gamma_hat_var = var;
    rep.cr_bound_per_nu = cr_per_shot / static_cast<double>(nu);
    rep.ratio = rep.cr_bound_per_nu > 0.0 ? var / rep.cr_bound_per_nu : kInf;
    rep.bias = mean - gamma_true;
    return rep;
}

} // namespace detail

namespace detail {

// The Fock probe needs integer photon numbers; the rounded budget is
// used consistently for both the distribution and the estimator.
inline PhotonBudget integerized(const PhotonBudget& b) {
    return PhotonBudget(static_cast<double>(std::lround(b.n_l)),
                        static_cast<double>(std::lround(b.n_r)));
}

} // namespace detail

/// Saturation experiment for the coherent or Fock probe: one MLE of
/// Gamma_- per seed, each from nu i.i.d. PNRD draws.
inline EstimationReport saturation_report(Probe probe, const Scenario& s, const PhotonBudget& b,
                                          std::size_t nu, const std::vector<std::uint64_t>& seeds) {
    if (probe == Probe::Tmsv)
        throw std::invalid_argument("saturation_report: use saturation_report_tmsv");
    const PhotonBudget budget = probe == Probe::Fock ? detail::integerized(b) : b;
    PnrdDistribution dist;
    if (probe == Probe::Coherent) {
        dist = coherent_pnrd(s, budget, coherent_cutoff_for_tail(s, budget, 1e-13));
    } else {
        dist = fock_pnrd(s, static_cast<int>(budget.n_l), static_cast<int>(budget.n_r));
    }
    const double cr = cr_bound_gamma(dist);
    std::vector<double> gammas(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const SampleBatch batch = sample(dist, nu, seeds[i]);
        const auto [tl, tr] = mle_product(batch, s, budget, probe);
        gammas[i] = tl - tr;
    }
    return detail::summarize(gammas, cr, nu, s.t_l - s.t_r);
}

/// Saturation experiment for the direct twin-beam probe (numerical MLE).
inline EstimationReport saturation_report_tmsv(const Scenario& s, double n, std::size_t nu,
                                               const std::vector<std::uint64_t>& seeds,
                                               int grid_points = 21) {
    const int cutoff = tmsv_cutoff_for_tail(n, 1e-12);
    const PnrdDistribution dist = tmsv_direct_pnrd(s, n, cutoff);
    const double cr = cr_bound_gamma(dist);
    std::vector<double> gammas(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const SampleBatch batch = sample(dist, nu, seeds[i]);
        const auto [tl, tr] = mle_tmsv(batch, s, n, grid_points, cutoff);
        gammas[i] = tl - tr;
    }
    return detail::summarize(gammas, cr, nu, s.t_l - s.t_r);
}

} // namespace cdsense
