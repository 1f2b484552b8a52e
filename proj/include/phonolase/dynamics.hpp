#pragma once

// Semiclassical mean-field equations for the two supermodes and the phonon,
// and an adaptive Dormand-Prince 5(4) integrator for them.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "phonolase/errors.hpp"
#include "phonolase/params.hpp"

namespace phonolase {

struct SemiclassicalState {
    cplx a1{};
    cplx a2{};
    cplx b{};

    /// Interleaved (re, im) pairs: a1, a2, b.
    std::array<double, 6> to_real() const {
        return {a1.real(), a1.imag(), a2.real(), a2.imag(), b.real(), b.imag()};
    }
    static SemiclassicalState from_real(const std::array<double, 6>& x) {
        return {{x[0], x[1]}, {x[2], x[3]}, {x[4], x[5]}};
    }
    double max_abs() const { return std::max({std::abs(a1), std::abs(a2), std::abs(b)}); }
    bool finite() const {
        for (double v : to_real())
            if (!std::isfinite(v)) return false;
        return true;
    }
    friend SemiclassicalState operator-(const SemiclassicalState& x, const SemiclassicalState& y) {
        return {x.a1 - y.a1, x.a2 - y.a2, x.b - y.b};
    }
    friend SemiclassicalState operator+(const SemiclassicalState& x, const SemiclassicalState& y) {
        return {x.a1 + y.a1, x.a2 + y.a2, x.b + y.b};
    }
};

inline double max_norm(const SemiclassicalState& s) { return s.max_abs(); }

/// Time derivative of the mean fields with <a2 b> = <a2><b>.
inline SemiclassicalState rhs(const SemiclassicalState& s, const SystemParams& p) {
    const double chi = p.coupling();
    const cplx i{0.0, 1.0};
    const cplx f = p.omega_drive / std::sqrt(2.0);
    const cplx l1{p.gamma_c / 2.0, p.g - p.delta_drive};
    const cplx l2{p.gamma_c / 2.0, -(p.g + p.delta_drive)};
    const cplx lm{p.gamma_m, p.omega_m};
    return {-l1 * s.a1 + i * chi * s.a2 * s.b + f,
            -l2 * s.a2 + i * chi * s.a1 * std::conj(s.b) + f,
            -lm * s.b + i * chi * std::conj(s.a2) * s.a1};
}

/// Scale used to judge how close a state is to a fixed point.
inline double residual_scale(const SemiclassicalState& s, const SystemParams& p) {
    return std::max({p.drive_abs(), p.gamma_c * s.max_abs(), p.gamma_c});
}

/// ||rhs||_inf relative to residual_scale.
inline double relative_residual(const SemiclassicalState& s, const SystemParams& p) {
    return max_norm(rhs(s, p)) / residual_scale(s, p);
}

struct Trajectory {
    std::vector<double> times;
    std::vector<SemiclassicalState> states;
    bool converged = false;
    bool diverged = false;  // a component exceeded the divergence bound or became non-finite
    double final_residual = 0.0;
    std::size_t steps = 0;
    std::size_t rejected = 0;
};

struct IntegrateOptions {
    std::size_t record_every = 1;  // keep every n-th accepted step (first and last always kept)
    std::size_t max_steps = 50'000'000;
    double divergence_bound = 1e12;
    double initial_step = 0.0;  // 0 picks one from the rates
};

namespace detail {

using Vec6 = std::array<double, 6>;

inline Vec6 axpy(const Vec6& y, double h, std::initializer_list<std::pair<double, const Vec6*>> terms) {
    Vec6 out = y;
    for (auto [c, k] : terms)
        if (c != 0.0)
            for (int j = 0; j < 6; ++j) out[j] += h * c * (*k)[j];
    return out;
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) with PI step control. `tol` bounds the local
/// error relative to the current amplitude.
inline Trajectory integrate(const SemiclassicalState& initial, const SystemParams& p, double t_end, double tol,
                            const IntegrateOptions& opt = {}) {
    using detail::Vec6;
    if (!(t_end > 0.0)) throw InvalidParameter("integrate: t_end must be > 0");
    if (!(tol > 0.0)) throw InvalidParameter("integrate: tol must be > 0");
    p.validate();

    auto f = [&](const Vec6& y) { return rhs(SemiclassicalState::from_real(y), p).to_real(); };

    // Dormand-Prince tableau
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;

    Trajectory tr;
    Vec6 y = initial.to_real();
    double t = 0.0;
    tr.times.push_back(t);
    tr.states.push_back(initial);

    const double rate = std::max({p.omega_m, p.gamma_c, p.g + std::abs(p.delta_drive), p.gamma_m,
                                  p.coupling() * (initial.max_abs() + p.drive_abs() / p.gamma_c)});
    double h = opt.initial_step > 0.0 ? opt.initial_step : 0.01 / rate;
    h = std::min(h, t_end);
    double err_prev = 1.0;
    Vec6 k1 = f(y);
    std::size_t since_record = 0;

    while (t < t_end) {
        if (tr.steps + tr.rejected >= opt.max_steps) throw StepSizeUnderflow("integrate: step budget exhausted");
        if (t + h > t_end) h = t_end - t;
        const Vec6 k2 = f(detail::axpy(y, h, {{a21, &k1}}));
        const Vec6 k3 = f(detail::axpy(y, h, {{a31, &k1}, {a32, &k2}}));
        const Vec6 k4 = f(detail::axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const Vec6 k5 = f(detail::axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const Vec6 k6 = f(detail::axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const Vec6 yn = detail::axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        const Vec6 k7 = f(yn);

        double ymax = 0.0;
        for (int j = 0; j < 6; ++j) ymax = std::max({ymax, std::abs(y[j]), std::abs(yn[j])});
        const double sc = tol * std::max(ymax, 1e-300);
        double err = 0.0;
        for (int j = 0; j < 6; ++j) {
            const double ej = h * (e1 * k1[j] + e3 * k3[j] + e4 * k4[j] + e5 * k5[j] + e6 * k6[j] + e7 * k7[j]);
            err = std::max(err, std::abs(ej) / sc);
        }
        if (!std::isfinite(err)) err = 1e10;

        if (err <= 1.0) {
            t = (t + h >= t_end) ? t_end : t + h;
            y = yn;
            k1 = k7;
            ++tr.steps;
            const auto s = SemiclassicalState::from_real(y);
            const bool blown = !s.finite() || s.max_abs() > opt.divergence_bound;
            if (++since_record >= opt.record_every || t == t_end || blown) {
                tr.times.push_back(t);
                tr.states.push_back(s);
                since_record = 0;
            }
            if (blown) {
                tr.diverged = true;
                break;
            }
            const double e = std::max(err, 1e-10);
            h *= std::clamp(0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0), 0.2, 5.0);
            err_prev = e;
        } else {
            ++tr.rejected;
            h *= std::max(0.2, 0.9 * std::pow(err, -1.0 / 5.0));
        }
        if (t < t_end && h < 1e-14 * std::max(t, 1.0 / rate))
            throw StepSizeUnderflow("integrate: step size underflow at t = " + std::to_string(t));
    }

    const auto last = tr.states.back();
    if (!tr.diverged) {
        tr.final_residual = max_norm(rhs(last, p)) / std::max(p.drive_abs(), p.gamma_c);
        tr.converged = tr.final_residual < tol;
    } else {
        tr.final_residual = std::numeric_limits<double>::infinity();
    }
    return tr;
}

}  // namespace phonolase
