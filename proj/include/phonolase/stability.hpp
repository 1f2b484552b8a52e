#pragma once

// Linearization about a fixed point in the fluctuation basis
// (L1, L1^+, L2, L2^+, beta, beta^+) and its spectrum.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "phonolase/branch.hpp"
#include "phonolase/errors.hpp"
#include "phonolase/params.hpp"

namespace phonolase {

using Matrix6c = Eigen::Matrix<cplx, 6, 6>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;

/// Diagonal rates of the fluctuation matrix. Not the coefficient-ladder eps1..eps3.
struct LinearizationRates {
    cplx lin1;  // -gamma_c/2 - i(g - Delta)
    cplx lin2;  // -gamma_c/2 + i(g + Delta)
    cplx lin3;  // -gamma_m - i omega_m
};

inline LinearizationRates linearization_rates(const SystemParams& p) {
    return {cplx(-p.gamma_c / 2.0, -(p.g - p.delta_drive)), cplx(-p.gamma_c / 2.0, p.g + p.delta_drive),
            cplx(-p.gamma_m, -p.omega_m)};
}

inline Matrix6c build_matrix(const SemiclassicalState& s, const SystemParams& p) {
    const auto r = linearization_rates(p);
    const cplx c{0.0, p.coupling()};
    const cplx A1 = s.a1, A2 = s.a2, B = s.b;
    auto cj = [](cplx z) { return std::conj(z); };
    Matrix6c m = Matrix6c::Zero();
    m(0, 0) = r.lin1;        m(0, 2) = c * B;       m(0, 4) = c * A2;
    m(1, 1) = cj(r.lin1);    m(1, 3) = -c * cj(B);  m(1, 5) = -c * cj(A2);
    m(2, 0) = c * cj(B);     m(2, 2) = r.lin2;      m(2, 5) = c * A1;
    m(3, 1) = -c * B;        m(3, 3) = cj(r.lin2);  m(3, 4) = -c * cj(A1);
    m(4, 0) = c * cj(A2);    m(4, 3) = c * A1;      m(4, 4) = r.lin3;
    m(5, 1) = -c * A2;       m(5, 2) = -c * cj(A1); m(5, 5) = cj(r.lin3);
    return m;
}

inline Matrix6c build_matrix(const SteadyStateBranch& br, const SystemParams& p) { return build_matrix(br.state(), p); }

/// Jacobian of rhs() in the interleaved real coordinates of SemiclassicalState::to_real().
inline Matrix6d real_jacobian(const Matrix6c& m) {
    Matrix6d j;
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col) {
            const cplx dz = m(2 * row, 2 * col);
            const cplx dzc = m(2 * row, 2 * col + 1);
            const cplx dx = dz + dzc;
            const cplx dy = cplx(0.0, 1.0) * (dz - dzc);
            j(2 * row, 2 * col) = dx.real();
            j(2 * row + 1, 2 * col) = dx.imag();
            j(2 * row, 2 * col + 1) = dy.real();
            j(2 * row + 1, 2 * col + 1) = dy.imag();
        }
    return j;
}

inline Matrix6d real_jacobian(const SemiclassicalState& s, const SystemParams& p) {
    return real_jacobian(build_matrix(s, p));
}

struct StabilityReport {
    Matrix6c matrix = Matrix6c::Zero();
    std::array<cplx, 6> eigenvalues{};  // sorted by decreasing real part, then decreasing imaginary part
    double max_re = 0.0;
    bool stable = false;
    bool marginal = false;  // |max_re| inside the marginal band
};

namespace detail {

/// Parlett-Reinsch balancing with radix-2 scalings; returns D^-1 A D.
inline Matrix6c balance(Matrix6c a) {
    constexpr double radix = 2.0;
    bool done = false;
    for (int sweep = 0; sweep < 100 && !done; ++sweep) {
        done = true;
        for (int i = 0; i < 6; ++i) {
            double c = 0.0, r = 0.0;
            for (int j = 0; j < 6; ++j)
                if (j != i) {
                    c += std::abs(a(j, i));
                    r += std::abs(a(i, j));
                }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
    return a;
}

}  // namespace detail

/// All six eigenvalues. Values with |max_re| <= marginal_band are flagged marginal
/// and never classified stable.
inline StabilityReport spectrum(const Matrix6c& m, double marginal_band = 0.0) {
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            if (!std::isfinite(m(i, j).real()) || !std::isfinite(m(i, j).imag()))
                throw EigenSolverFailure("spectrum: non-finite matrix entry");
    Eigen::ComplexEigenSolver<Matrix6c> es(detail::balance(m), false);
    if (es.info() != Eigen::Success) throw EigenSolverFailure("spectrum: eigenvalue iteration did not converge");
    StabilityReport rep;
    rep.matrix = m;
    for (int i = 0; i < 6; ++i) rep.eigenvalues[i] = es.eigenvalues()(i);
    std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end(), [](cplx x, cplx y) {
        if (x.real() != y.real()) return x.real() > y.real();
        return x.imag() > y.imag();
    });
    rep.max_re = rep.eigenvalues[0].real();
    rep.marginal = std::abs(rep.max_re) <= marginal_band;
    rep.stable = rep.max_re < 0.0 && !rep.marginal;
    return rep;
}

inline double marginal_band(const SystemParams& p) { return 1e-6 * p.gamma_c; }

inline StabilityReport analyze(const SemiclassicalState& s, const SystemParams& p) {
    return spectrum(build_matrix(s, p), marginal_band(p));
}

/// Fill the stability tag of a branch and return the full report.
inline StabilityReport classify(SteadyStateBranch& br, const SystemParams& p) {
    auto rep = analyze(br.state(), p);
    br.stable = rep.stable;
    return rep;
}

/// Smallest achievable max |conj(l_k) - l_pi(k)| over permutations pi.
inline double conjugate_pairing_defect(const std::array<cplx, 6>& ev) {
    std::array<int, 6> perm;
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0.0;
        for (int k = 0; k < 6 && worst < best; ++k) worst = std::max(worst, std::abs(std::conj(ev[k]) - ev[perm[k]]));
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Smallest achievable max |a_k - b_pi(k)| over permutations pi.
inline double matched_distance(const std::array<cplx, 6>& a, const std::array<cplx, 6>& b) {
    std::array<int, 6> perm;
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0.0;
        for (int k = 0; k < 6 && worst < best; ++k) worst = std::max(worst, std::abs(a[k] - b[perm[k]]));
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

}  // namespace phonolase
