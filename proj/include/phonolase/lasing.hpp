#pragma once

// Phonon gain from the supermode inversion, the near-threshold cubic amplitude
// equation with its coefficient ladder, the planar (u1, u2) flow and the
// scalar potentials built from it.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "phonolase/param_file.hpp"
#include "phonolase/params.hpp"
#include "phonolase/steady_state.hpp"

namespace phonolase {

/// eps3 as 1/(N0^2 + gamma_c^2 Delta^2), which reproduces the exact b = 0
/// inversion, or the uncorrected 1/(M^2 + gamma_c^2 Delta^2).
enum class Eps3Form { corrected, uncorrected };

struct LasingOptions {
    Eps3Form eps3 = Eps3Form::corrected;
};

inline double eps3_value(const DerivedScalars& d, Eps3Form form) {
    return form == Eps3Form::corrected ? d.eps3 : d.eps3_uncorrected;
}

// ---------------------------------------------------------------- inversion

struct JzExpansion {
    double j0 = 0.0;
    cplx j1{}, j2{}, j3{};
    double jz = 0.0;               // expansion evaluated at b
    bool near_threshold = true;    // 4 chi^2 |b|^2 / |eps1|^2 <= 0.1
};

inline bool near_threshold_valid(const SystemParams& p, double b_abs2) {
    const auto d = derive_scalars(p);
    return 4.0 * d.chi2 * b_abs2 / std::norm(d.eps1) <= 0.1;
}

/// Third-order expansion of the inversion in the phonon amplitude.
inline JzExpansion population_inversion_expansion(const SystemParams& p, cplx b, const LasingOptions& opt = {}) {
    const auto d = derive_scalars(p);
    const cplx i{0.0, 1.0};
    const double chi = p.coupling();
    const double gc = p.gamma_c, g = p.g, D = p.delta_drive, M = d.m_param;
    const double w2 = p.drive_abs2();
    const double e3 = eps3_value(d, opt.eps3);
    const double e1a = std::norm(d.eps1);
    const cplx e1c = std::conj(d.eps1), e2c = std::conj(d.eps2);

    JzExpansion x;
    x.j0 = g * D * w2 * e3;
    x.j1 = i * chi * e3 * w2 * (M + (d.eps2 * M + gc * d.eps1 * D * D) / e1a) / (2.0 * gc);
    x.j2 = 2.0 * chi * chi * D * e3 * w2 * (p.omega_m / e1a + g * M * e3);
    x.j3 = (i * chi * chi * chi * e3 * w2 / (2.0 * gc * e1a)) *
           ((2.0 * e3 * M * M - 1.0) * e1a + 2.0 * e3 * (e2c * M * M + gc * e1c * D * D * M) - e2c + 4.0 * M +
            4.0 * (e2c * M + gc * e1c * D * D) / e1a);
    const double n = std::norm(b);
    const cplx bc = std::conj(b);
    const cplx v = x.j0 + x.j1 * b + std::conj(x.j1) * bc - x.j2 * n + x.j3 * bc * bc * b + std::conj(x.j3) * bc * b * b;
    x.jz = v.real();
    x.near_threshold = near_threshold_valid(p, n);
    return x;
}

/// Inversion with the cavities slaved to a fixed phonon amplitude.
inline double jz_adiabatic(const SystemParams& p, cplx b) {
    const auto [a1, a2] = linear_amplitudes(p, b);
    return 0.5 * (std::norm(a1) - std::norm(a2));
}

// ---------------------------------------------------------------- gain

/// Gain proportional to the inversion alone.
inline double gain_simple(const SystemParams& p, double jz) {
    const double chi = p.coupling();
    const double dl = 2.0 * p.g - p.omega_m;
    return 2.0 * chi * chi * p.gamma_c * jz / (p.gamma_c * p.gamma_c + dl * dl);
}

/// Gain including the drive-detuning correction at phonon occupation b_abs2.
inline double gain_full(const SystemParams& p, double jz, double b_abs2) {
    const auto d = derive_scalars(p);
    const double gc = p.gamma_c, D = p.delta_drive, dl = d.delta_small;
    const double n = d.n_param(b_abs2);
    const double corr = D * dl * gc * d.chi2 * p.drive_abs2() / ((gc * gc + dl * dl) * (n * n + D * D * gc * gc));
    return gain_simple(p, jz) - corr;
}

inline bool above_threshold(const SystemParams& p, double gain) { return gain > p.gamma_m; }

// ---------------------------------------------------------------- cubic amplitude equation

struct LasingCoefficients {
    double j0 = 0.0;
    cplx j1{}, j2{}, j3{};
    std::array<cplx, 5> G{};        // G0..G4
    std::array<double, 9> eta{};    // eta[1]..eta[8]; eta[0] unused
    std::array<double, 10> epsB{};  // epsB[6]..epsB[9]; lower entries unused
    double alpha_prime = 0.0;
    double im_g1 = 0.0;
    double gain_gprime = 0.0;       // at b = 0
    double gain_full = 0.0;         // at b = 0
    double delta_small = 0.0;
    double gamma_c = 0.0;
    double gamma_m = 0.0;
    double omega_m = 0.0;
};

inline LasingCoefficients cubic_coefficients(const SystemParams& p, const LasingOptions& opt = {}) {
    const auto d = derive_scalars(p);
    const auto jx = population_inversion_expansion(p, cplx{}, opt);
    const double chi = p.coupling(), chi2 = chi * chi, chi3 = chi2 * chi;
    const double gc = p.gamma_c, D = p.delta_drive, M = d.m_param, dl = d.delta_small;
    const double w2 = p.drive_abs2();
    const double e3 = eps3_value(d, opt.eps3);
    const double e1a = std::norm(d.eps1);
    const double e4 = d.eps4, e5 = d.eps5;

    LasingCoefficients c;
    c.j0 = jx.j0;
    c.j1 = jx.j1;
    c.j2 = jx.j2;
    c.j3 = jx.j3;
    auto& eta = c.eta;
    eta[1] = chi * gc * e3 * w2 * (e4 * M + 2.0 * dl * D * D) / (2.0 * e1a);
    eta[2] = chi * e3 * w2 * (e5 * M + 2.0 * gc * gc * D * D) / (2.0 * e1a);
    eta[3] = gc * chi2 * (2.0 * c.j0 - dl * D * w2 * e3) / e1a;
    eta[4] = chi2 * (2.0 * dl * c.j0 + gc * gc * D * w2 * e3) / e1a;
    eta[5] = gc * chi3 * e3 * w2 / (2.0 * e1a) * (e4 - 2.0 * e3 * M * w2 * (e4 * M + 2.0 * dl * D * D));
    eta[6] = chi3 * e3 * w2 / (2.0 * e1a) * (e5 - 2.0 * e3 * M * w2 * (e5 * M + 2.0 * gc * gc * D * D));
    const double j2r = c.j2.real();
    eta[7] = 2.0 * gc * chi2 * (j2r - 2.0 * dl * chi2 * D * e3 * e3 * w2 * M) / e1a;
    eta[8] = 2.0 * chi2 * (dl * j2r + chi2 * gc * gc * D * e3 * e3 * w2 * M) / e1a;

    const double rj = c.j1.real(), ij = c.j1.imag();
    c.epsB[6] = 4.0 * chi2 * (gc * rj) / e1a;
    c.epsB[7] = 4.0 * chi2 * (dl * rj - gc * ij) / e1a;
    c.epsB[8] = 4.0 * chi2 * (gc * ij) / e1a;
    c.epsB[9] = 4.0 * chi2 * (gc * rj + dl * ij) / e1a;

    c.G[0] = cplx(eta[1], eta[2]);
    c.G[1] = cplx(eta[3] - p.gamma_m, -(p.omega_m + eta[4]));
    c.G[2] = 2.0 * chi2 * std::conj(c.j1) / d.eps1 + cplx(eta[5], eta[6]);
    c.G[3] = 2.0 * chi2 * c.j1 / d.eps1;
    c.G[4] = cplx(eta[7], -eta[8]);

    c.alpha_prime = eta[3] - p.gamma_m;
    c.im_g1 = c.G[1].imag();
    c.gain_gprime = gain_simple(p, c.j0);
    c.gain_full = phonolase::gain_full(p, c.j0, 0.0);
    c.delta_small = dl;
    c.gamma_c = gc;
    c.gamma_m = p.gamma_m;
    c.omega_m = p.omega_m;
    return c;
}

// ---------------------------------------------------------------- planar flow

struct Flow2 {
    double du1 = 0.0;
    double du2 = 0.0;
};

/// Full (u1, u2) flow with u1 = Re b, u2 = Im b.
inline Flow2 flow_field(double u1, double u2, const LasingCoefficients& c) {
    const auto& eta = c.eta;
    const auto& e = c.epsB;
    const double r2 = u1 * u1 + u2 * u2;
    const double dl = c.delta_small;
    const double k8 = dl == 0.0 ? 0.0 : dl * e[8] / c.gamma_c;
    const double k6 = dl == 0.0 ? 0.0 : dl * e[6] / c.gamma_c;
    Flow2 f;
    f.du1 = eta[1] + c.alpha_prime * u1 - c.im_g1 * u2 + (eta[5] + e[6]) * u1 * u1 + e[7] * u1 * u2 +
            (eta[5] - k8) * u2 * u2 - r2 * (eta[7] * u1 + eta[8] * u2);
    f.du2 = eta[2] + c.alpha_prime * u2 + c.im_g1 * u1 + (eta[6] - e[8]) * u2 * u2 + e[9] * u1 * u2 +
            (eta[6] - k6) * u1 * u1 - r2 * (eta[7] * u2 - eta[8] * u1);
    return f;
}

/// Reduced flow for delta = 0, using eps7 = -eps8 and eps9 = eps6 and the cubic terms as printed.
inline Flow2 flow_field_reduced(double u1, double u2, const LasingCoefficients& c) {
    const auto& eta = c.eta;
    const auto& e = c.epsB;
    const double r2 = u1 * u1 + u2 * u2;
    Flow2 f;
    f.du1 = eta[1] + c.alpha_prime * u1 - c.im_g1 * u2 + e[6] * u1 * u1 - e[8] * u1 * u2 + eta[5] * u2 * u2 +
            eta[8] * r2 * u1 - eta[8] * r2 * u2;
    f.du2 = eta[2] + c.im_g1 * u1 + c.alpha_prime * u2 + e[6] * u1 * u2 + (eta[6] - e[8]) * u2 * u2 +
            eta[6] * u1 * u1 + eta[8] * r2 * u2 + eta[8] * r2 * u1;
    return f;
}

/// Identity defects |eps7 + eps8| and |eps9 - eps6| that vanish for delta = 0.
inline std::pair<double, double> reduced_flow_defects(const LasingCoefficients& c) {
    return {std::abs(c.epsB[7] + c.epsB[8]), std::abs(c.epsB[9] - c.epsB[6])};
}

/// Jacobian of flow_field at the origin (row-major 2x2).
inline std::array<double, 4> flow_jacobian_origin(const LasingCoefficients& c) {
    return {c.alpha_prime, -c.im_g1, c.im_g1, c.alpha_prime};
}

// ---------------------------------------------------------------- potentials

template <class T>
T potential_2d_value(T u1, T u2, const LasingCoefficients& c) {
    const T r2 = u1 * u1 + u2 * u2;
    return -c.eta[1] * u1 - c.eta[2] * u2 + c.im_g1 * u1 * u2 - (c.alpha_prime / 2.0) * r2 -
           (c.epsB[6] / 3.0) * u1 * u1 * u1 + (c.eta[7] / 4.0) * r2 * r2 - c.eta[8] * u1 * u1 * u1 * u2 -
           (c.eta[8] / 3.0) * u2 * u2 * u2 * u1;
}

template <class T>
T potential_1d_value(T u1, const LasingCoefficients& c) {
    return -c.eta[1] * u1 - (c.alpha_prime / 2.0) * u1 * u1 - (c.epsB[6] / 3.0) * u1 * u1 * u1 +
           (c.eta[7] / 4.0) * u1 * u1 * u1 * u1;
}

/// -dV/du1 of the one-dimensional potential.
inline double potential_1d_force(double u1, const LasingCoefficients& c) {
    return c.eta[1] + c.alpha_prime * u1 + c.epsB[6] * u1 * u1 - c.eta[7] * u1 * u1 * u1;
}

inline std::array<double, 2> potential_2d_gradient(double u1, double u2, const LasingCoefficients& c) {
    const double r2 = u1 * u1 + u2 * u2;
    const double e8 = c.eta[8];
    return {-c.eta[1] + c.im_g1 * u2 - c.alpha_prime * u1 - c.epsB[6] * u1 * u1 + c.eta[7] * r2 * u1 -
                3.0 * e8 * u1 * u1 * u2 - (e8 / 3.0) * u2 * u2 * u2,
            -c.eta[2] + c.im_g1 * u1 - c.alpha_prime * u2 + c.eta[7] * r2 * u2 - e8 * u1 * u1 * u1 -
                e8 * u2 * u2 * u1};
}

inline std::array<double, 3> potential_2d_hessian(double u1, double u2, const LasingCoefficients& c) {
    const double r2 = u1 * u1 + u2 * u2;
    const double e8 = c.eta[8];
    return {-c.alpha_prime - 2.0 * c.epsB[6] * u1 + c.eta[7] * (r2 + 2.0 * u1 * u1) - 6.0 * e8 * u1 * u2,
            c.im_g1 + 2.0 * c.eta[7] * u1 * u2 - 3.0 * e8 * u1 * u1 - e8 * u2 * u2,
            -c.alpha_prime + c.eta[7] * (r2 + 2.0 * u2 * u2) - 2.0 * e8 * u1 * u2};
}

struct Minimum {
    double u1 = 0.0;
    double u2 = 0.0;
    double value = 0.0;
    bool u1_dominant = true;  // |u2| <= |u1|, where the planar potential is meant to apply
};

struct GridAxis {
    double min = 0.0;
    double max = 0.0;
    std::size_t n = 2;
    double at(std::size_t k) const { return min + (max - min) * double(k) / double(n - 1); }
};

struct PotentialSurface {
    GridAxis axis1, axis2;
    std::vector<double> values;  // values[i * axis2.n + j] at (axis1.at(i), axis2.at(j))
    std::vector<Minimum> minima; // ordered by u1
    bool symmetry_broken = false;
};

inline bool depths_unequal(const std::vector<Minimum>& m) {
    if (m.size() < 2) return false;
    for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t b = a + 1; b < m.size(); ++b)
            if (std::abs(m[a].value - m[b].value) > 1e-9 * std::max(std::abs(m[a].value), std::abs(m[b].value)))
                return true;
    return false;
}

/// Potential on a grid, its local minima (grid candidates polished by Newton on the gradient).
inline PotentialSurface potential_2d(const GridAxis& ax1, const GridAxis& ax2, const LasingCoefficients& c) {
    if (ax1.n < 3 || ax2.n < 3 || !(ax1.min < ax1.max) || !(ax2.min < ax2.max))
        throw InvalidParameter("potential_2d: each axis needs min < max and at least 3 points");
    PotentialSurface s;
    s.axis1 = ax1;
    s.axis2 = ax2;
    s.values.resize(ax1.n * ax2.n);
    for (std::size_t i = 0; i < ax1.n; ++i)
        for (std::size_t j = 0; j < ax2.n; ++j) s.values[i * ax2.n + j] = potential_2d_value(ax1.at(i), ax2.at(j), c);

    const double h1 = (ax1.max - ax1.min) / double(ax1.n - 1), h2 = (ax2.max - ax2.min) / double(ax2.n - 1);
    for (std::size_t i = 1; i + 1 < ax1.n; ++i)
        for (std::size_t j = 1; j + 1 < ax2.n; ++j) {
            const double v = s.values[i * ax2.n + j];
            bool is_min = true;
            for (int di = -1; di <= 1 && is_min; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                    if ((di || dj) && s.values[(i + di) * ax2.n + (j + dj)] < v) {
                        is_min = false;
                        break;
                    }
            if (!is_min) continue;
            double u1 = ax1.at(i), u2 = ax2.at(j);
            bool ok = false;
            for (int it = 0; it < 100; ++it) {
                const auto gr = potential_2d_gradient(u1, u2, c);
                const auto hs = potential_2d_hessian(u1, u2, c);
                const double det = hs[0] * hs[2] - hs[1] * hs[1];
                if (!(hs[0] > 0.0 && det > 0.0)) break;
                const double d1 = (hs[2] * gr[0] - hs[1] * gr[1]) / det;
                const double d2 = (hs[0] * gr[1] - hs[1] * gr[0]) / det;
                u1 -= d1;
                u2 -= d2;
                if (std::abs(d1) <= 1e-13 * (std::abs(u1) + h1) && std::abs(d2) <= 1e-13 * (std::abs(u2) + h2)) {
                    ok = true;
                    break;
                }
            }
            if (!ok) continue;
            const auto hs = potential_2d_hessian(u1, u2, c);
            if (!(hs[0] > 0.0 && hs[0] * hs[2] - hs[1] * hs[1] > 0.0)) continue;
            if (std::abs(u1 - ax1.at(i)) > 2.0 * h1 || std::abs(u2 - ax2.at(j)) > 2.0 * h2) continue;
            const bool dup = std::any_of(s.minima.begin(), s.minima.end(), [&](const Minimum& m) {
                return std::abs(m.u1 - u1) <= 1e-6 * (h1 + std::abs(u1)) && std::abs(m.u2 - u2) <= 1e-6 * (h2 + std::abs(u2));
            });
            if (!dup) s.minima.push_back({u1, u2, potential_2d_value(u1, u2, c), std::abs(u2) <= std::abs(u1)});
        }
    std::sort(s.minima.begin(), s.minima.end(), [](const Minimum& a, const Minimum& b) { return a.u1 < b.u1; });
    s.symmetry_broken = depths_unequal(s.minima);
    return s;
}

struct Potential1d {
    GridAxis axis;
    std::vector<double> values;
    std::vector<Minimum> minima;  // u2 = 0
    bool symmetry_broken = false;
};

inline Potential1d potential_1d(const GridAxis& ax, const LasingCoefficients& c) {
    if (ax.n < 3 || !(ax.min < ax.max)) throw InvalidParameter("potential_1d: need min < max and at least 3 points");
    Potential1d s;
    s.axis = ax;
    s.values.resize(ax.n);
    for (std::size_t i = 0; i < ax.n; ++i) s.values[i] = potential_1d_value(ax.at(i), c);
    const double h = (ax.max - ax.min) / double(ax.n - 1);
    for (std::size_t i = 1; i + 1 < ax.n; ++i) {
        if (s.values[i] > s.values[i - 1] || s.values[i] > s.values[i + 1]) continue;
        double u = ax.at(i);
        bool ok = false;
        for (int it = 0; it < 100; ++it) {
            const double f = -potential_1d_force(u, c);
            const double fp = -c.alpha_prime - 2.0 * c.epsB[6] * u + 3.0 * c.eta[7] * u * u;
            if (!(fp > 0.0)) break;
            const double du = f / fp;
            u -= du;
            if (std::abs(du) <= 1e-13 * (std::abs(u) + h)) {
                ok = true;
                break;
            }
        }
        if (!ok || std::abs(u - ax.at(i)) > 2.0 * h) continue;
        const bool dup = std::any_of(s.minima.begin(), s.minima.end(),
                                     [&](const Minimum& m) { return std::abs(m.u1 - u) <= 1e-6 * (h + std::abs(u)); });
        if (!dup) s.minima.push_back({u, 0.0, potential_1d_value(u, c), true});
    }
    std::sort(s.minima.begin(), s.minima.end(), [](const Minimum& a, const Minimum& b) { return a.u1 < b.u1; });
    s.symmetry_broken = depths_unequal(s.minima);
    return s;
}

// ---------------------------------------------------------------- coefficient files

/// Keys of a coefficient file (all in Hz, i.e. divided by 2 pi).
inline const std::vector<std::string>& coefficient_keys() {
    static const std::vector<std::string> keys = {
        "eta1_hz", "eta2_hz", "eta3_hz", "eta4_hz", "eta5_hz",        "eta6_hz",    "eta7_hz",
        "eta8_hz", "alpha_prime_hz", "im_g1_hz", "eps6_hz", "eps7_hz", "eps8_hz", "eps9_hz",
        "delta_small_hz", "gamma_c_hz"};
    return keys;
}

inline bool is_coefficient_key(const std::string& k) {
    const auto& ks = coefficient_keys();
    return std::find(ks.begin(), ks.end(), k) != ks.end();
}

/// True when the keys select the coefficient set; a file mixing both sets is an error.
inline bool is_coefficient_file(const std::vector<KeyValue>& kvs) {
    bool coeff = false, sys = false;
    for (const auto& kv : kvs) {
        const bool c = is_coefficient_key(kv.key), s = is_system_key(kv.key);
        if (!c && !s) throw ConfigError("unknown key '" + kv.key + "'", kv.line);
        if (c && s) continue;  // gamma_c_hz belongs to both sets
        coeff |= c;
        sys |= s;
    }
    if (coeff && sys) throw ConfigError("file mixes physical parameters and potential coefficients");
    return coeff;
}

inline void apply_coefficient_key(LasingCoefficients& c, const std::string& key, double v, std::size_t line = 0) {
    const double w = hz_to_rad(v);
    if (key.rfind("eta", 0) == 0 && key.size() == 7) c.eta[key[3] - '0'] = w;
    else if (key.rfind("eps", 0) == 0 && key.size() == 7) c.epsB[key[3] - '0'] = w;
    else if (key == "alpha_prime_hz") c.alpha_prime = w;
    else if (key == "im_g1_hz") c.im_g1 = w;
    else if (key == "delta_small_hz") c.delta_small = w;
    else if (key == "gamma_c_hz") c.gamma_c = w;
    else throw ConfigError("unknown key '" + key + "'", line);
}

/// Coefficients given directly rather than derived from physical parameters.
/// Missing keys are zero; alpha_prime_hz is required.
inline LasingCoefficients coefficients_from(const std::vector<KeyValue>& kvs) {
    LasingCoefficients c;
    bool have_alpha = false;
    for (const auto& kv : kvs) {
        apply_coefficient_key(c, kv.key, kv.value, kv.line);
        have_alpha |= kv.key == "alpha_prime_hz";
    }
    if (!have_alpha) throw ConfigError("missing required key 'alpha_prime_hz'");
    if (c.delta_small != 0.0 && !(c.gamma_c > 0.0))
        throw ConfigError("gamma_c_hz > 0 is required when delta_small_hz is nonzero");
    c.G[0] = cplx(c.eta[1], c.eta[2]);
    c.G[1] = cplx(c.alpha_prime, c.im_g1);
    c.G[4] = cplx(c.eta[7], -c.eta[8]);
    return c;
}

inline double coefficient_value(const LasingCoefficients& c, const std::string& key) {
    if (key.rfind("eta", 0) == 0 && key.size() == 7) return rad_to_hz(c.eta[key[3] - '0']);
    if (key.rfind("eps", 0) == 0 && key.size() == 7) return rad_to_hz(c.epsB[key[3] - '0']);
    if (key == "alpha_prime_hz") return rad_to_hz(c.alpha_prime);
    if (key == "im_g1_hz") return rad_to_hz(c.im_g1);
    if (key == "delta_small_hz") return rad_to_hz(c.delta_small);
    if (key == "gamma_c_hz") return rad_to_hz(c.gamma_c);
    throw ConfigError("unknown key '" + key + "'");
}

}  // namespace phonolase
