#pragma once

// Linearized fluctuation spectra of the phonon, their equal-time moments and
// the zero-delay second-order coherence under Gaussian statistics.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "phonolase/branch.hpp"
#include "phonolase/errors.hpp"
#include "phonolase/params.hpp"
#include "phonolase/quadrature.hpp"
#include "phonolase/stability.hpp"

namespace phonolase {

/// Coefficients of the frequency-domain elimination at one frequency.
/// The "+" partner of f is f+(w) = conj(f(-w)).
struct FrequencyCoefficients {
    double omega = 0.0;
    std::array<cplx, 4> lambda{};  // lambda1..lambda4
    std::array<cplx, 6> m{};
    std::array<cplx, 6> n{};
    std::array<cplx, 6> p{};
    cplx d1{}, d2{};
};

namespace detail {

struct LambdaSet {
    cplx l1, l2, l3, l4;
};

/// Evaluates the elimination ladder at +w and -w together, since each needs the other.
class FluctuationLadder {
public:
    FluctuationLadder(const SteadyStateBranch& br, const SystemParams& p)
        : p_(p), a1_(br.a1_ss), a2_(br.a2_ss), b_(br.b_ss), chi_(p.coupling()), s_(std::sqrt(2.0 * p.gamma_m)) {}

    std::pair<FrequencyCoefficients, FrequencyCoefficients> at(double w) const {
        const LambdaSet lp = lambdas(w), lm = lambdas(-w);
        std::array<cplx, 6> mp, mm, np, nm;
        cplx d2p, d2m;
        m_set(lp, lm, mp, d2p);
        m_set(lm, lp, mm, d2m);
        n_set(lp, mm, np);
        n_set(lm, mp, nm);
        return {p_set(w, lp, mp, np, nm, d2p), p_set(-w, lm, mm, nm, np, d2m)};
    }

private:
    LambdaSet lambdas(double w) const {
        const cplx i{0.0, 1.0};
        LambdaSet l;
        l.l1 = cplx(p_.gamma_c / 2.0, p_.g - p_.delta_drive) - i * w;
        l.l2 = cplx(p_.gamma_c / 2.0, -(p_.g + p_.delta_drive)) - i * w;
        l.l3 = cplx(p_.gamma_m, p_.omega_m) - i * w;
        l.l4 = l.l1 * l.l2 + chi_ * chi_ * std::norm(b_);
        return l;
    }

    // l: lambdas at w; lo: lambdas at -w (their conjugates are the "+" partners)
    void m_set(const LambdaSet& l, const LambdaSet& lo, std::array<cplx, 6>& m, cplx& d2) const {
        const cplx i{0.0, 1.0};
        const cplx l1p = std::conj(lo.l1), l3p = std::conj(lo.l3), l4p = std::conj(lo.l4);
        const double c2 = chi_ * chi_;
        const cplx a1c = std::conj(a1_), bc = std::conj(b_);
        d2 = 1.0 + c2 * std::norm(a2_) / (l1p * l3p) - c2 * std::norm(a1_) * l.l1 / (l3p * l.l4) -
             c2 * c2 * std::norm(b_) * std::norm(a2_) / (l1p * l3p * l4p);
        m[0] = i * c2 * chi_ * a1c * a2_ * bc * (l.l4 + l4p) / (d2 * l3p * l.l4 * l4p);
        m[1] = s_ / (l3p * d2);
        m[2] = c2 * a1c * bc / (l3p * l.l4 * d2);
        m[3] = i * chi_ * a2_ * (c2 * std::norm(b_) - l4p) / (l1p * l3p * l4p * d2);
        m[4] = -i * chi_ * l.l1 * a1c / (l3p * l.l4 * d2);
        m[5] = -c2 * a2_ * bc / (d2 * l3p * l4p);
    }

    // mo: m at -w (conjugated here to the "+" partner)
    void n_set(const LambdaSet& l, const std::array<cplx, 6>& mo, std::array<cplx, 6>& n) const {
        const cplx i{0.0, 1.0};
        const double c2 = chi_ * chi_;
        const cplx bc = std::conj(b_);
        std::array<cplx, 6> mp;
        for (int k = 0; k < 6; ++k) mp[k] = std::conj(mo[k]);
        n[0] = i * chi_ * (a1_ * l.l1 + i * chi_ * bc * a2_ * mp[0]) / l.l4;
        n[1] = -c2 * bc * a2_ * mp[1] / l.l4;
        n[2] = -c2 * bc * a2_ * mp[2] / l.l4;
        n[3] = i * chi_ * (bc + i * chi_ * bc * a2_ * mp[3]) / l.l4;
        n[4] = -c2 * bc * a2_ * mp[4] / l.l4;
        n[5] = (l.l1 - c2 * bc * a2_ * mp[5]) / l.l4;
    }

    FrequencyCoefficients p_set(double w, const LambdaSet& l, const std::array<cplx, 6>& m,
                                const std::array<cplx, 6>& n, const std::array<cplx, 6>& no, cplx d2) const {
        const cplx i{0.0, 1.0};
        const double c2 = chi_ * chi_;
        const cplx a2c = std::conj(a2_);
        std::array<cplx, 6> np;
        for (int k = 0; k < 6; ++k) np[k] = std::conj(no[k]);
        FrequencyCoefficients f;
        f.omega = w;
        f.lambda = {l.l1, l.l2, l.l3, l.l4};
        f.m = m;
        f.n = n;
        f.d2 = d2;
        const cplx d1 = l.l1 * l.l3 - i * chi_ * a1_ * np[0] * l.l1 + c2 * a2c * b_ * n[0] * m[0] + c2 * std::norm(a2_);
        f.d1 = d1;
        const double d1_scale = std::abs(l.l1 * l.l3) + c2 * std::norm(a2_);
        if (std::abs(d1) < 1e-12 * d1_scale || std::abs(d2) < 1e-12)
            throw PoleAtFrequency("fluctuation denominator vanishes", w);
        const cplx ca = i * chi_ * a2c * b_;
        f.p[0] = (s_ * l.l1 - c2 * a2c * b_ * n[1]) / d1;
        f.p[1] = i * chi_ * (a1_ * np[1] * l.l1 + ca * n[0] * m[1]) / d1;
        f.p[2] = i * chi_ * (a1_ * np[2] * l.l1 + a2c + ca * (n[3] + n[0] * m[2])) / d1;
        f.p[3] = i * chi_ * (a1_ * np[3] * l.l1 + ca * (n[2] + n[0] * m[3])) / d1;
        f.p[4] = i * chi_ * (a1_ * np[4] * l.l1 + ca * (n[5] + n[0] * m[4])) / d1;
        f.p[5] = i * chi_ * (a1_ * np[5] * l.l1 + ca * (n[4] + n[0] * m[5])) / d1;
        return f;
    }

    SystemParams p_;
    cplx a1_, a2_, b_;
    double chi_, s_;
};

}  // namespace detail

inline FrequencyCoefficients frequency_coefficients(double omega, const SteadyStateBranch& br, const SystemParams& p) {
    return detail::FluctuationLadder(br, p).at(omega).first;
}

/// Response coefficients from the resolvent of the fluctuation matrix.
/// Independent of the elimination ladder; used to cross-check it.
inline std::array<cplx, 6> resolvent_coefficients(double omega, const SteadyStateBranch& br, const SystemParams& p) {
    Matrix6c a = build_matrix(br, p);
    for (int k = 0; k < 6; ++k) a(k, k) += cplx(0.0, omega);
    const Matrix6c r = a.fullPivLu().inverse();
    const double s = std::sqrt(2.0 * p.gamma_m);
    return {-s * r(4, 4), -s * r(4, 5), -r(4, 0), -r(4, 1), -r(4, 2), -r(4, 3)};
}

struct SpectralPoint {
    double omega = 0.0;
    cplx gamma_bb{};
    double gamma_nb = 0.0;
};

namespace detail {

inline SpectralPoint spectral_point(const FluctuationLadder& lad, double w, double nb, double gc) {
    const auto [fp, fm] = lad.at(w);
    const auto& p = fp.p;   // at w
    const auto& q = fm.p;   // at -w
    SpectralPoint s;
    s.omega = w;
    s.gamma_bb = p[0] * q[1] * (nb + 1.0) + p[1] * q[0] * nb + gc * (p[2] * q[3] + p[4] * q[5]);
    s.gamma_nb = nb * std::norm(q[0]) + (nb + 1.0) * std::norm(q[1]) + gc * (std::norm(q[3]) + std::norm(q[5]));
    return s;
}

}  // namespace detail

/// Gamma_bb and Gamma_b+b on a frequency grid.
inline std::vector<SpectralPoint> spectra(const SteadyStateBranch& br, const SystemParams& p,
                                          const std::vector<double>& omega_grid) {
    const detail::FluctuationLadder lad(br, p);
    const double nb = thermal_occupation(p);
    std::vector<SpectralPoint> out;
    out.reserve(omega_grid.size());
    for (double w : omega_grid) out.push_back(detail::spectral_point(lad, w, nb, p.gamma_c));
    return out;
}

struct MomentOptions {
    double window_scale = 100.0;          // W = window_scale * max(omega_m + gamma_c, max |eigenvalue|)
    std::size_t initial_subdivisions = 1; // each initial panel is cut into this many pieces
    double rel_tol = 1e-11;
    std::size_t max_panels = 400000;
    std::size_t tail_samples = 16;
};

struct Moments {
    cplx y_bb{};
    double y_nb = 0.0;
    double error_nb = 0.0;   // absolute error estimate of y_nb
    double error_bb = 0.0;   // absolute error estimate of y_bb (modulus)
    double window = 0.0;     // W
    std::size_t panels = 0;
    bool converged = false;
};

namespace detail {

struct TailFit {
    std::array<double, 3> integral3{};  // c2/W + c3/(2W^2) + c4/(3W^3) per component
    std::array<double, 3> integral2{};  // the same with c4 dropped from the fit
    double worst_residual = 0.0;
};

/// Fit g(s) ~ c2/s^2 + c3/s^3 + c4/s^4 on [W/10, W] (log-spaced samples) per component
/// and return the tail integral over [W, inf).
template <class G>
TailFit fit_tail(G&& g, double W, std::size_t samples) {
    TailFit t;
    const std::size_t m = std::max<std::size_t>(samples, 6);
    Eigen::MatrixXd a3(m, 3), a2(m, 2);
    Eigen::MatrixXd y(m, 3);
    for (std::size_t k = 0; k < m; ++k) {
        const double s = W * std::pow(10.0, -1.0 + double(k) / double(m - 1));
        const double x = W / s;
        a3(k, 0) = x * x;
        a3(k, 1) = x * x * x;
        a3(k, 2) = x * x * x * x;
        a2(k, 0) = x * x;
        a2(k, 1) = x * x * x;
        const auto v = g(s);
        for (int c = 0; c < 3; ++c) y(k, c) = v[c];
    }
    const Eigen::MatrixXd c3 = a3.colPivHouseholderQr().solve(y);
    const Eigen::MatrixXd c2 = a2.colPivHouseholderQr().solve(y);
    for (int c = 0; c < 3; ++c) {
        // scaled coefficient a_k = c_k / W^k integrates to a_k W / (k - 1)
        t.integral3[c] = W * (c3(0, c) + c3(1, c) / 2.0 + c3(2, c) / 3.0);
        t.integral2[c] = W * (c2(0, c) + c2(1, c) / 2.0);
        const double scale = y.col(c).cwiseAbs().maxCoeff();
        if (scale > 0.0) t.worst_residual = std::max(t.worst_residual, (a3 * c3.col(c) - y.col(c)).cwiseAbs().maxCoeff() / scale);
        for (int k = 0; k < 3; ++k)
            if (!std::isfinite(c3(k, c))) t.worst_residual = std::numeric_limits<double>::infinity();
    }
    return t;
}

}  // namespace detail

/// Y = (1/2pi) integral of the spectra over the real line: adaptive quadrature on
/// [-W, W] with breakpoints at the resonances, plus fitted power-law tails.
inline Moments equal_time_moments(const SteadyStateBranch& br, const SystemParams& p, const MomentOptions& opt = {}) {
    const detail::FluctuationLadder lad(br, p);
    const double nb = thermal_occupation(p);
    const auto rep = spectrum(build_matrix(br, p));
    double lam_max = 0.0;
    for (const auto& l : rep.eigenvalues) lam_max = std::max(lam_max, std::abs(l));
    const double W = opt.window_scale * std::max(p.omega_m + p.gamma_c, lam_max);

    auto f = [&](double w) {
        const auto s = detail::spectral_point(lad, w, nb, p.gamma_c);
        return VecN<3>{s.gamma_nb, s.gamma_bb.real(), s.gamma_bb.imag()};
    };

    std::vector<double> br_pts = {-W, 0.0, W};
    for (const auto& l : rep.eigenvalues) {
        const double c = -l.imag(), hw = std::abs(l.real());
        for (double sgn : {-1.0, 1.0})
            for (double k : {0.0, -30.0, -3.0, -1.0, 1.0, 3.0, 30.0}) {
                const double x = sgn * c + k * hw;
                if (x > -W && x < W) br_pts.push_back(x);
            }
    }
    std::sort(br_pts.begin(), br_pts.end());
    br_pts.erase(std::unique(br_pts.begin(), br_pts.end()), br_pts.end());
    if (opt.initial_subdivisions > 1) {
        std::vector<double> fine;
        for (std::size_t k = 0; k + 1 < br_pts.size(); ++k)
            for (std::size_t j = 0; j < opt.initial_subdivisions; ++j)
                fine.push_back(br_pts[k] + (br_pts[k + 1] - br_pts[k]) * double(j) / double(opt.initial_subdivisions));
        fine.push_back(br_pts.back());
        br_pts.swap(fine);
    }

    QuadOptions qo;
    qo.rel_tol = opt.rel_tol;
    qo.max_panels = opt.max_panels;
    const auto q = integrate_adaptive<3>(f, br_pts, qo);

    const auto right = detail::fit_tail([&](double s) { return f(s); }, W, opt.tail_samples);
    const auto left = detail::fit_tail([&](double s) { return f(-s); }, W, opt.tail_samples);
    if (!(right.worst_residual < 1e-2 && left.worst_residual < 1e-2))
        throw TailDivergence("spectral tail does not follow a power law beyond the window");

    std::array<double, 3> total{}, err{};
    for (int c = 0; c < 3; ++c) {
        total[c] = q.value[c] + right.integral3[c] + left.integral3[c];
        const double eps_floor = 64.0 * std::numeric_limits<double>::epsilon() * q.l1[c];
        err[c] = q.error[c] + std::abs(right.integral3[c] - right.integral2[c]) +
                 std::abs(left.integral3[c] - left.integral2[c]) + eps_floor;
    }
    Moments mo;
    mo.y_nb = total[0] / kTwoPi;
    mo.y_bb = cplx(total[1], total[2]) / kTwoPi;
    mo.error_nb = err[0] / kTwoPi;
    mo.error_bb = std::hypot(err[1], err[2]) / kTwoPi;
    mo.window = W;
    mo.panels = q.panels;
    mo.converged = q.converged;
    return mo;
}

/// Fourth moment of a Gaussian fluctuation with the given second moments.
inline double fourth_moment(double y_nb, cplx y_bb) { return 2.0 * y_nb * y_nb + std::norm(y_bb); }

/// g2(0) of the displaced Gaussian state b = B0 + beta.
inline double g2_zero(cplx b0, double y_nb, cplx y_bb) {
    const double b2 = std::norm(b0);
    const double den = b2 + y_nb;
    if (!(den >= 1e-30)) throw DegenerateDenominator("g2_zero: |B0|^2 + Y vanishes");
    const double num = b2 * b2 + 2.0 * (std::conj(b0) * std::conj(b0) * y_bb).real() + 4.0 * b2 * y_nb +
                       fourth_moment(y_nb, y_bb);
    return num / (den * den);
}

struct CoherenceResult {
    std::vector<double> omega_grid;
    std::vector<cplx> spectrum_bb;
    std::vector<double> spectrum_nb;
    cplx y_bb{};
    double y_nb = 0.0;
    double fourth_moment = 0.0;
    double g2_zero = 0.0;
    double error_nb = 0.0;
};

/// Moments and g2(0) at a stable branch; optional spectrum samples on `omega_grid`.
inline CoherenceResult coherence(const SteadyStateBranch& br, const SystemParams& p,
                                 const std::vector<double>& omega_grid = {}, const MomentOptions& opt = {}) {
    CoherenceResult r;
    const auto mo = equal_time_moments(br, p, opt);
    r.y_bb = mo.y_bb;
    r.y_nb = mo.y_nb;
    r.error_nb = mo.error_nb;
    r.fourth_moment = fourth_moment(mo.y_nb, mo.y_bb);
    r.g2_zero = g2_zero(br.b_ss, mo.y_nb, mo.y_bb);
    if (!omega_grid.empty()) {
        r.omega_grid = omega_grid;
        for (const auto& s : spectra(br, p, omega_grid)) {
            r.spectrum_bb.push_back(s.gamma_bb);
            r.spectrum_nb.push_back(s.gamma_nb);
        }
    }
    return r;
}

}  // namespace phonolase
