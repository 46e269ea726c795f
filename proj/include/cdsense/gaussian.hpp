#pragma once

// Covariance-matrix representation of zero-mean Gaussian bosonic states,
// the beam-splitter loss channel, the closed-form two-mode fidelity of
// Marian/Banchi type, and a fidelity-based numerical QFIM that serves as
// the independent oracle for the analytic twin-beam results.
//
// Convention lock: quadrature ordering (x1, p1, x2, p2, ...), vacuum
// variance 1/2 per quadrature, symplectic form with [[0,1],[-1,0]] blocks.
// All determinant prefactors below (16, I/4, i Omega/2) are tied to this
// convention; the F(V,V) = 1 and pure-overlap tests are the guards.
//
// The fidelity determinants are evaluated in extended precision: the QFIM
// extraction divides fidelity deficits of order 1e-8 by step^2, which in
// plain double leaves too little headroom for the 1e-6 oracle tolerance.

#include <algorithm>
#include <complex>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cdsense/core.hpp"

namespace cdsense {

struct NonPhysicalState : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonzeroDisplacement : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StepTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Block-diagonal symplectic form Omega with [[0,1],[-1,0]] per mode;
/// satisfies Omega^2 = -Identity.
inline Eigen::MatrixXd symplectic_form(Eigen::Index n_modes) {
    Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
    for (Eigen::Index m = 0; m < n_modes; ++m) {
        omega(2 * m, 2 * m + 1) = 1.0;
        omega(2 * m + 1, 2 * m) = -1.0;
    }
    return omega;
}

/// Gaussian state of n modes: real symmetric 2n x 2n covariance matrix in
/// the (x1, p1, x2, p2, ...) ordering plus a length-2n displacement vector.
struct GaussianState {
    Eigen::MatrixXd cov;
    Eigen::VectorXd disp;

    GaussianState(Eigen::MatrixXd covariance, Eigen::VectorXd displacement)
        : cov(std::move(covariance)), disp(std::move(displacement)) {
        if (cov.rows() != cov.cols() || cov.rows() % 2 != 0 || cov.rows() == 0)
            throw std::invalid_argument("GaussianState: covariance must be square with even dim");
        if (disp.size() != cov.rows())
            throw std::invalid_argument("GaussianState: displacement size mismatch");
        const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw std::invalid_argument("GaussianState: covariance not symmetric to 1e-12");
    }

    explicit GaussianState(const Eigen::MatrixXd& covariance)
        : GaussianState(covariance, Eigen::VectorXd::Zero(covariance.rows())) {}

    Eigen::Index modes() const { return cov.rows() / 2; }
};

/// Two-mode vacuum state (covariance Identity/2).
inline GaussianState vacuum_state(Eigen::Index n_modes) {
    return GaussianState(0.5 * Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes),
                         Eigen::VectorXd::Zero(2 * n_modes));
}

/// Smallest eigenvalue of the Hermitian matrix cov + (i/2) Omega; the
/// state is physical iff this is >= 0 up to rounding.
inline double min_physicality_eigenvalue(const GaussianState& g) {
    const Eigen::Index d = g.cov.rows();
    Eigen::MatrixXcd h = g.cov.cast<std::complex<double>>();
    h += std::complex<double>(0.0, 0.5) * symplectic_form(d / 2).cast<std::complex<double>>();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_physical(const GaussianState& g, double tol = 1e-10) {
    return min_physicality_eigenvalue(g) >= -tol;
}

/// Two-mode squeezed vacuum with mean photon number n per mode
/// (squeezing phase fixed to zero, r = asinh(sqrt(n))): covariance with
/// v1 = v2 = 1/2 + n and cross terms -+ sqrt(n(n+1)) on the x / p blocks.
inline GaussianState tmsv_state(double n) {
    detail::require_nonnegative(n, "n");
    const double v = 0.5 + n;
    const double v3 = std::sqrt(n * (n + 1.0)); // (1/2) sinh 2r
    Eigen::MatrixXd cov(4, 4);
    cov << v, 0.0, -v3, 0.0, //
        0.0, v, 0.0, v3,     //
        -v3, 0.0, v, 0.0,    //
        0.0, v3, 0.0, v;
    return GaussianState(std::move(cov), Eigen::VectorXd::Zero(4));
}

/// Beam-splitter loss channel of transmittance tau on one mode:
/// V -> X V X^T + Y with X = sqrt(tau) on that mode and Y = (1-tau)/2 on
/// its diagonal; the displacement scales by sqrt(tau). Consecutive losses
/// on the same mode compose multiplicatively in tau.
inline GaussianState apply_loss(const GaussianState& g, Eigen::Index mode, double tau) {
    if (mode < 0 || mode >= g.modes())
        throw std::out_of_range("apply_loss: mode index out of range");
    detail::require_unit_interval(tau, "tau");
    const double st = std::sqrt(tau);
    Eigen::MatrixXd cov = g.cov;
    Eigen::VectorXd disp = g.disp;
    const Eigen::Index x = 2 * mode, p = 2 * mode + 1;
    cov.row(x) *= st;
    cov.row(p) *= st;
    cov.col(x) *= st;
    cov.col(p) *= st;
    cov(x, x) += 0.5 * (1.0 - tau);
    cov(p, p) += 0.5 * (1.0 - tau);
    disp(x) *= st;
    disp(p) *= st;
    return GaussianState(std::move(cov), std::move(disp));
}

namespace detail {

using Real = long double;
using Mat4 = Eigen::Matrix<Real, 4, 4>;
using CMat4 = Eigen::Matrix<std::complex<Real>, 4, 4>;

inline Mat4 omega4() {
    Mat4 o = Mat4::Zero();
    o(0, 1) = 1;
    o(1, 0) = -1;
    o(2, 3) = 1;
    o(3, 2) = -1;
    return o;
}

// Covariance of a TMSV state whose modes went through beam splitters of
// transmittances tau_l, tau_r (the x/p sign pattern follows from the
// two-mode squeezing operator with real squeezing parameter).
inline Mat4 lossy_tmsv_cov(Real tau_l, Real tau_r, Real n) {
    const Real v1 = Real(0.5) + tau_l * n;
    const Real v2 = Real(0.5) + tau_r * n;
    const Real v3 = std::sqrt(tau_l * tau_r) * std::sqrt(n * (n + 1));
    Mat4 v = Mat4::Zero();
    v(0, 0) = v(1, 1) = v1;
    v(2, 2) = v(3, 3) = v2;
    v(0, 2) = v(2, 0) = -v3;
    v(1, 3) = v(3, 1) = v3;
    return v;
}

// TMSV with loss on the signal mode only; the ancilla mode is lossless.
inline Mat4 ancilla_tmsv_cov(Real tau, Real n) { return lossy_tmsv_cov(tau, Real(1), n); }

struct FidelityTerms {
    Real delta;  // det(V1 + V2)
    Real gamma;  // 16 det(Omega V1 Omega V2 - I/4)
    Real lambda; // 16 det(V1 + i Omega/2) det(V2 + i Omega/2)
};

inline FidelityTerms fidelity_terms(const Mat4& v1, const Mat4& v2) {
    const Mat4 omega = omega4();
    FidelityTerms t;
    t.delta = (v1 + v2).determinant();
    t.gamma = 16 * Real((omega * v1 * omega * v2 - Mat4::Identity() / 4).determinant());
    const std::complex<Real> half_i(0, Real(0.5));
    const CMat4 c1 = v1.cast<std::complex<Real>>() + half_i * omega.cast<std::complex<Real>>();
    const CMat4 c2 = v2.cast<std::complex<Real>>() + half_i * omega.cast<std::complex<Real>>();
    // A pure state has det(V + i Omega/2) = 0 exactly; rounding leaves an
    // O(eps |V|^4) residue whose square root would contaminate F at the
    // 1e-9 level, so sub-noise determinants are flushed to zero.
    const auto denoised_det = [](const CMat4& c, const Mat4& v) {
        const std::complex<Real> d = c.determinant();
        const Real scale = std::pow(Real(1) + v.cwiseAbs().maxCoeff(), Real(4));
        const Real noise = Real(1e4) * std::numeric_limits<Real>::epsilon() * scale;
        return std::abs(d) < noise ? std::complex<Real>(0) : d;
    };
    const std::complex<Real> lam = Real(16) * denoised_det(c1, v1) * denoised_det(c2, v2);
    // For physical states lambda is real up to rounding; the residue is
    // discarded after this check.
    if (std::abs(lam.imag()) > Real(1e-10) * std::max<Real>(1, std::abs(lam.real())))
        throw NonPhysicalState("fidelity: non-real lambda determinant");
    t.lambda = std::max<Real>(lam.real(), 0);
    t.gamma = std::max<Real>(t.gamma, 0);
    return t;
}

// 1 - sqrt(F), evaluated without forming F itself so that values of
// order 1e-9 survive to be divided by step^2 in the QFIM extraction.
inline Real sqrt_fidelity_deficit(const Mat4& v1, const Mat4& v2) {
    const FidelityTerms t = fidelity_terms(v1, v2);
    const Real a = std::sqrt(t.gamma) + std::sqrt(t.lambda);
    // For a pair of pure states a^2 - delta vanishes identically; taking
    // the square root of its rounding residue would cost half the digits,
    // so sub-noise arguments are flushed to zero.
    Real arg = a * a - t.delta;
    const Real noise = Real(1e4) * std::numeric_limits<Real>::epsilon() *
                       std::max(a * a, std::abs(t.delta));
    arg = std::abs(arg) < noise ? Real(0) : std::max<Real>(arg, 0);
    // 1/F = a - sqrt(arg), computed through the cancellation-free
    // companion root: (a - sqrt(arg))(a + sqrt(arg)) = delta.
    const Real w = t.delta / (a + std::sqrt(arg));
    if (!(w > 0))
        throw NonPhysicalState("fidelity: non-positive inverse fidelity");
    const Real sw = std::sqrt(w);
    return (sw - 1) / sw;
}

// 8 (1 - sqrt F), the quadratic form sum_jk H_jk dT_j dT_k for
// infinitesimally separated states.
inline Real qfim_quadratic_form(const Mat4& v1, const Mat4& v2) {
    return 8 * sqrt_fidelity_deficit(v1, v2);
}

} // namespace detail

/// Uhlmann fidelity of two zero-displacement two-mode Gaussian states via
/// the closed determinant formula
///   F = [sqrt(gamma) + sqrt(lambda) - sqrt((sqrt(gamma)+sqrt(lambda))^2
///        - delta)]^-1.
inline double fidelity_two_mode(const GaussianState& a, const GaussianState& b) {
    if (a.modes() != 2 || b.modes() != 2)
        throw std::invalid_argument("fidelity_two_mode: states must be two-mode");
    if (a.disp.cwiseAbs().maxCoeff() > 1e-12 || b.disp.cwiseAbs().maxCoeff() > 1e-12)
        throw NonzeroDisplacement("fidelity_two_mode: displacement must vanish");
    if (!is_physical(a) || !is_physical(b))
        throw NonPhysicalState("fidelity_two_mode: covariance violates the uncertainty relation");
    const detail::Mat4 v1 = a.cov.cast<detail::Real>();
    const detail::Mat4 v2 = b.cov.cast<detail::Real>();
    const double f = 1.0 - static_cast<double>(detail::sqrt_fidelity_deficit(v1, v2));
    const double fidelity = f * f; // F = (sqrt F)^2
    if (fidelity < -1e-9 || fidelity > 1.0 + 1e-9)
        throw std::logic_error("fidelity_two_mode: result escapes [0,1] beyond tolerance");
    return std::clamp(fidelity, 0.0, 1.0);
}

namespace detail {

// Central second differences of the Bures quadratic form with one
// Richardson extrapolation level (steps h and h/2). The residual between
// the two levels measures departure from the quadratic model.
template <typename QForm>
Fisher2 qfim_second_difference(QForm&& q, double step) {
    const auto estimate = [&](Real h) {
        struct {
            Real ll, rr, lr;
        } e{};
        e.ll = (q(h, Real(0)) + q(-h, Real(0))) / (2 * h * h);
        e.rr = (q(Real(0), h) + q(Real(0), -h)) / (2 * h * h);
        e.lr = (q(h, h) + q(-h, -h) - q(h, -h) - q(-h, h)) / (8 * h * h);
        return e;
    };
    const auto e1 = estimate(Real(step));
    const auto e2 = estimate(Real(step) / 2);
    const double h_ll = static_cast<double>((4 * e2.ll - e1.ll) / 3);
    const double h_rr = static_cast<double>((4 * e2.rr - e1.rr) / 3);
    const double h_lr = static_cast<double>((4 * e2.lr - e1.lr) / 3);
    const double lead =
        std::max({std::abs(h_ll), std::abs(h_rr), std::abs(h_lr), 1e-12});
    const double residual =
        std::max({std::abs(static_cast<double>(e1.ll - e2.ll)),
                  std::abs(static_cast<double>(e1.rr - e2.rr)),
                  std::abs(static_cast<double>(e1.lr - e2.lr))});
    if (residual > 1e-4 * lead)
        throw StepTooLarge("qfim finite difference: quadratic-fit residual " +
                           std::to_string(residual) + " exceeds 1e-4 of leading term");
    return Fisher2(h_ll, h_lr, h_lr, h_rr);
}

inline void require_interior(double t, double step, const char* name) {
    if (!(t - step > 0.0 && t + step < 1.0))
        throw std::domain_error(std::string(name) +
                                " +- step must stay inside (0,1) for the finite-difference QFIM");
}

} // namespace detail

/// Numerical QFIM of the direct twin-beam scheme from the fidelity route:
/// 8 [1 - sqrt F(rho_T, rho_{T+dT})] ~ sum_jk H_jk dT_j dT_k, with central
/// second differences for the diagonal, a four-point stencil for the
/// off-diagonal and one Richardson extrapolation level. Independent of the
/// closed-form QFIM; used as its oracle.
inline Fisher2 qfim_from_fidelity(const Scenario& s, double n, double step = 1e-4) {
    detail::require_nonnegative(n, "n");
    if (!(step > 0.0)) throw std::invalid_argument("qfim_from_fidelity: step must be > 0");
    detail::require_interior(s.t_l, step, "t_l");
    detail::require_interior(s.t_r, step, "t_r");
    using detail::Real;
    const detail::Mat4 base = detail::lossy_tmsv_cov(
        Real(s.eta_l) * Real(s.t_l), Real(s.eta_r) * Real(s.t_r), Real(n));
    const auto q = [&](Real dl, Real dr) {
        return detail::qfim_quadratic_form(
            base, detail::lossy_tmsv_cov(Real(s.eta_l) * (Real(s.t_l) + dl),
                                         Real(s.eta_r) * (Real(s.t_r) + dr), Real(n)));
    };
    return detail::qfim_second_difference(q, step);
}

/// Single-parameter fidelity QFIM of the ancilla-assisted twin-beam
/// scheme: one TMSV, loss eta*t on the signal mode, lossless ancilla.
/// Expected value eta n / (t (1 - eta t)).
inline double qfim_tmsv_ancilla(double t, double eta, double n, double step = 1e-4) {
    detail::require_unit_interval(eta, "eta");
    detail::require_nonnegative(n, "n");
    if (!(step > 0.0)) throw std::invalid_argument("qfim_tmsv_ancilla: step must be > 0");
    detail::require_interior(t, step, "t");
    using detail::Real;
    const detail::Mat4 base = detail::ancilla_tmsv_cov(Real(eta) * Real(t), Real(n));
    const auto q = [&](Real dt) {
        return detail::qfim_quadratic_form(
            base, detail::ancilla_tmsv_cov(Real(eta) * (Real(t) + dt), Real(n)));
    };
    const auto estimate = [&](Real h) { return (q(h) + q(-h)) / (2 * h * h); };
    const Real e1 = estimate(Real(step));
    const Real e2 = estimate(Real(step) / 2);
    const double value = static_cast<double>((4 * e2 - e1) / 3);
    const double residual = std::abs(static_cast<double>(e1 - e2));
    if (residual > 1e-4 * std::max(std::abs(value), 1e-12))
        throw StepTooLarge("qfim_tmsv_ancilla: quadratic-fit residual exceeds 1e-4 of leading term");
    return value;
}

} // namespace cdsense
