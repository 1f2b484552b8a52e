#pragma once

// Physical parameters of the two-cavity phonon laser, unit conventions and the
// derived scalars shared by every analysis stage. All frequencies held here are
// angular (rad/s); conversion from ordinary frequency happens at the I/O boundary.

#include <cmath>
#include <complex>
#include <numbers>

#include "phonolase/errors.hpp"

namespace phonolase {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// CODATA 2018 (exact SI definitions); hbar = h / 2pi.
inline constexpr double kPlanck = 6.6260701500000000e-34;     // J s
inline constexpr double kHbar = 1.0545718176461565e-34;       // J s
inline constexpr double kBoltzmann = 1.3806490000000000e-23;  // J / K

inline constexpr double hz_to_rad(double f) noexcept { return kTwoPi * f; }
inline constexpr double rad_to_hz(double w) noexcept { return w / kTwoPi; }

/// Chi is multiplied by this factor: 1 for the membrane-in-the-middle layout,
/// 1/2 for a cavity side-coupled to an optomechanical resonator.
enum class Geometry { membrane, coupled_toroid };

inline constexpr double geometry_factor(Geometry g) noexcept {
    return g == Geometry::membrane ? 1.0 : 0.5;
}

struct SystemParams {
    double omega_m = 0.0;         // mechanical frequency
    double chi = 0.0;             // optomechanical coupling (bare, before geometry factor)
    double gamma_m = 0.0;         // mechanical amplitude decay
    double gamma_c = 0.0;         // cavity amplitude decay, both cavities
    double g = 0.0;               // inter-cavity coupling
    double delta_drive = 0.0;     // drive minus cavity frequency
    cplx omega_drive{0.0, 0.0};   // drive amplitude
    double temperature = 0.0;     // mechanical bath temperature, K
    Geometry geometry = Geometry::membrane;

    double coupling() const noexcept { return chi * geometry_factor(geometry); }
    double drive_abs() const noexcept { return std::abs(omega_drive); }
    double drive_abs2() const noexcept { return std::norm(omega_drive); }

    SystemParams with_drive(cplx drive) const {
        SystemParams p = *this;
        p.omega_drive = drive;
        return p;
    }

    void validate() const {
        auto finite = [](double v) { return std::isfinite(v); };
        if (!(finite(omega_m) && omega_m > 0.0)) throw InvalidParameter("omega_m must be finite and > 0");
        if (!(finite(gamma_m) && gamma_m > 0.0)) throw InvalidParameter("gamma_m must be finite and > 0");
        if (!(finite(gamma_c) && gamma_c > 0.0)) throw InvalidParameter("gamma_c must be finite and > 0");
        if (!(finite(chi) && chi >= 0.0)) throw InvalidParameter("chi must be finite and >= 0");
        if (!(finite(g) && g >= 0.0)) throw InvalidParameter("g must be finite and >= 0");
        if (!finite(delta_drive)) throw InvalidParameter("delta must be finite");
        if (!(finite(omega_drive.real()) && finite(omega_drive.imag())))
            throw InvalidParameter("drive amplitude must be finite");
        if (!(finite(temperature) && temperature >= 0.0)) throw InvalidParameter("temperature must be finite and >= 0");
    }
};

/// Mean thermal phonon number 1/(exp(hbar w / kB T) - 1); exactly 0 at T = 0.
inline double thermal_occupation(double omega_m, double temperature) {
    if (!(omega_m > 0.0)) throw InvalidParameter("thermal_occupation: omega_m must be > 0");
    if (!(temperature >= 0.0)) throw InvalidParameter("thermal_occupation: temperature must be >= 0");
    if (temperature == 0.0) return 0.0;
    const double x = kHbar * omega_m / (kBoltzmann * temperature);
    return 1.0 / std::expm1(x);
}

inline double thermal_occupation(const SystemParams& p) { return thermal_occupation(p.omega_m, p.temperature); }

/// Scalars shared by the adiabatic-elimination ladder. `eps1`..`eps5` are the
/// coefficient-ladder definitions; the linearization matrix uses its own,
/// unrelated diagonal rates (see stability.hpp).
struct DerivedScalars {
    double delta_small = 0.0;  // 2g - omega_m
    cplx xi;                   // gamma_c/2 - i g
    double m_param = 0.0;      // gamma_c^2/4 + g^2
    double n0 = 0.0;           // m_param - Delta^2, the b = 0 value of N
    cplx eps1;                 // gamma_c + i delta
    cplx eps2;                 // gamma_c^2 - 2 g delta + 2 i g gamma_c + i gamma_c delta
    double eps3 = 0.0;         // 1 / (N0^2 + gamma_c^2 Delta^2)
    double eps3_uncorrected = 0.0; // 1 / (M^2 + gamma_c^2 Delta^2), the uncorrected form
    double eps4 = 0.0;         // delta + 2g
    double eps5 = 0.0;         // gamma_c^2 - 2 delta g
    double chi2 = 0.0;         // effective chi squared, used by n_param
    double delta_drive2 = 0.0;

    /// N(|b|^2) = gamma_c^2/4 + g^2 - Delta^2 + chi^2 |b|^2
    double n_param(double b_abs2) const noexcept { return m_param - delta_drive2 + chi2 * b_abs2; }
};

inline DerivedScalars derive_scalars(const SystemParams& p) {
    DerivedScalars d;
    const double gc = p.gamma_c;
    const double g = p.g;
    const double D = p.delta_drive;
    d.delta_small = 2.0 * g - p.omega_m;
    const double dl = d.delta_small;
    d.xi = cplx(gc / 2.0, -g);
    d.m_param = gc * gc / 4.0 + g * g;
    d.delta_drive2 = D * D;
    d.n0 = d.m_param - d.delta_drive2;
    d.eps1 = cplx(gc, dl);
    d.eps2 = cplx(gc * gc - 2.0 * g * dl, 2.0 * g * gc + gc * dl);
    d.eps3 = 1.0 / (d.n0 * d.n0 + gc * gc * D * D);
    d.eps3_uncorrected = 1.0 / (d.m_param * d.m_param + gc * gc * D * D);
    d.eps4 = dl + 2.0 * g;
    d.eps5 = gc * gc - 2.0 * dl * g;
    const double chi = p.coupling();
    d.chi2 = chi * chi;
    return d;
}

}  // namespace phonolase
