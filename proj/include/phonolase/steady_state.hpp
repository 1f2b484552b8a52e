#pragma once

// Fixed points of the mean-field equations: Newton refinement, seeds from the
// closed-form drive/phonon relation, continuation in the drive, and the
// multivaluedness sweep.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "phonolase/branch.hpp"
#include "phonolase/dynamics.hpp"
#include "phonolase/errors.hpp"
#include "phonolase/parallel.hpp"
#include "phonolase/params.hpp"
#include "phonolase/stability.hpp"

namespace phonolase {

inline constexpr double kConvergedResidual = 1e-9;

// ---------------------------------------------------------------- optical amplitudes at fixed b

/// Cavity amplitudes that make da1/dt = da2/dt = 0 for a given phonon amplitude.
inline std::pair<cplx, cplx> linear_amplitudes(const SystemParams& p, cplx b) {
    const double chi = p.coupling();
    const cplx i{0.0, 1.0};
    const cplx f = p.omega_drive / std::sqrt(2.0);
    const cplx l1{p.gamma_c / 2.0, p.g - p.delta_drive};
    const cplx l2{p.gamma_c / 2.0, -(p.g + p.delta_drive)};
    const cplx det = l1 * l2 + chi * chi * std::norm(b);
    return {f * (l2 + i * chi * b) / det, f * (l1 + i * chi * std::conj(b)) / det};
}

inline SemiclassicalState state_from_phonon(const SystemParams& p, cplx b) {
    auto [a1, a2] = linear_amplitudes(p, b);
    return {a1, a2, b};
}

/// Right-hand side of the drive/phonon relation: the value of |Omega|^2 implied
/// by a phonon amplitude b. Real and positive exactly on fixed points.
inline cplx drive_squared_from_phonon(const SystemParams& p, cplx b) {
    const auto d = derive_scalars(p);
    const double chi = p.coupling();
    const double n = d.n_param(std::norm(b));
    const double pp = n * n + p.gamma_c * p.gamma_c * d.delta_drive2;
    const cplx den = cplx(0.0, chi) * (d.xi * d.xi + (chi * b - p.delta_drive) * (chi * b - p.delta_drive));
    return 2.0 * b * cplx(p.gamma_m, p.omega_m) * pp / den;
}

// ---------------------------------------------------------------- Newton

struct NewtonOptions {
    int max_iterations = 60;
    double target_residual = 1e-13;  // stop early below this
};

/// Damped Newton on the six real unknowns with the analytic Jacobian.
/// Returns the refined state when its relative residual is below kConvergedResidual.
inline std::optional<SteadyStateBranch> newton_refine(const SemiclassicalState& seed, const SystemParams& p,
                                                      const NewtonOptions& opt = {}) {
    using Vec6 = Eigen::Matrix<double, 6, 1>;
    auto to_vec = [](const SemiclassicalState& s) {
        const auto a = s.to_real();
        return Vec6(Vec6::Map(a.data()));
    };
    auto from_vec = [](const Vec6& v) {
        std::array<double, 6> a;
        for (int k = 0; k < 6; ++k) a[k] = v[k];
        return SemiclassicalState::from_real(a);
    };
    if (!seed.finite()) return std::nullopt;
    SemiclassicalState x = seed;
    double res = relative_residual(x, p);
    for (int it = 0; it < opt.max_iterations && res > opt.target_residual; ++it) {
        const Vec6 fx = to_vec(rhs(x, p));
        const Matrix6d j = real_jacobian(x, p);
        Eigen::FullPivLU<Matrix6d> lu(j);
        if (!lu.isInvertible()) return std::nullopt;
        const Vec6 dx = lu.solve(-fx);
        if (!dx.allFinite()) return std::nullopt;
        double lambda = 1.0;
        bool improved = false;
        for (int k = 0; k < 30; ++k, lambda *= 0.5) {
            const SemiclassicalState trial = from_vec(to_vec(x) + lambda * dx);
            const double r = relative_residual(trial, p);
            if (std::isfinite(r) && r < res * (1.0 - 1e-4 * lambda)) {
                x = trial;
                res = r;
                improved = true;
                break;
            }
        }
        if (!improved) break;
    }
    if (!(res < kConvergedResidual)) return std::nullopt;
    return SteadyStateBranch::from_state(x, res);
}

// ---------------------------------------------------------------- deduplication

inline bool same_fixed_point(const SemiclassicalState& x, const SemiclassicalState& y) {
    const auto a = x.to_real();
    const auto b = y.to_real();
    double d2 = 0.0, nx = 0.0, ny = 0.0;
    for (int k = 0; k < 6; ++k) {
        d2 += (a[k] - b[k]) * (a[k] - b[k]);
        nx += a[k] * a[k];
        ny += b[k] * b[k];
    }
    return std::sqrt(d2) <= std::max(1e-6 * std::sqrt(std::max(nx, ny)), 1e-12);
}

/// Drop duplicates (keeping the smaller residual) and order by |B0|, then residual.
inline std::vector<SteadyStateBranch> dedup_branches(std::vector<SteadyStateBranch> in) {
    std::vector<SteadyStateBranch> out;
    for (const auto& br : in) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const SteadyStateBranch& o) { return same_fixed_point(o.state(), br.state()); });
        if (it == out.end()) out.push_back(br);
        else if (br.residual < it->residual) *it = br;
    }
    std::sort(out.begin(), out.end(), [](const SteadyStateBranch& x, const SteadyStateBranch& y) {
        const double bx = std::abs(x.b_ss), by = std::abs(y.b_ss);
        if (bx != by) return bx < by;
        return std::arg(x.b_ss) < std::arg(y.b_ss);
    });
    return out;
}

/// Refine every seed at drive `omega_drive`; converged roots are deduplicated.
inline std::vector<SteadyStateBranch> solve_fixed_points(const SystemParams& params, cplx omega_drive,
                                                         const std::vector<SemiclassicalState>& seeds) {
    if (seeds.empty()) throw InvalidParameter("solve_fixed_points: at least one seed required");
    const SystemParams p = params.with_drive(omega_drive);
    p.validate();
    std::vector<SteadyStateBranch> found;
    for (const auto& s : seeds)
        if (auto br = newton_refine(s, p)) found.push_back(*br);
    if (found.empty()) throw NoConvergence("solve_fixed_points: no seed converged");
    return dedup_branches(std::move(found));
}

// ---------------------------------------------------------------- closed-form seeds

struct SeedOptions {
    std::size_t radial_points = 4000;  // log-spaced |b| samples (minimum)
    double realness_tol = 1e-6;        // accepted |Im RHS| / |RHS|
};

/// Phonon amplitudes b = r e^{i theta} at which the implied |Omega|^2 equals the
/// actual |Omega|^2. For fixed r the condition is quadratic in e^{i theta}; roots
/// of |e^{i theta}| - 1 in r are bracketed on a log grid and bisected.
inline std::vector<cplx> phonon_seeds(const SystemParams& p, const SeedOptions& opt = {}) {
    std::vector<cplx> out;
    const double chi = p.coupling();
    const double w2 = p.drive_abs2();
    if (chi == 0.0 || w2 == 0.0) {
        out.push_back(cplx{});
        return out;
    }
    const auto d = derive_scalars(p);
    const double D = p.delta_drive;
    const cplx lm{p.gamma_m, p.omega_m};
    const cplx i{0.0, 1.0};
    const cplx xd = d.xi * d.xi + D * D;

    auto roots = [&](double r) {
        const double n = d.n_param(r * r);
        const double pp = n * n + p.gamma_c * p.gamma_c * d.delta_drive2;
        const cplx a = i * chi * chi * chi * w2 * r / 2.0;
        const cplx bq = -i * chi * chi * w2 * D - lm * pp;
        const cplx c = i * chi * w2 * xd / (2.0 * r);
        const cplx disc = std::sqrt(bq * bq - 4.0 * a * c);
        const cplx q = -0.5 * ((std::real(std::conj(bq) * disc) >= 0.0) ? bq + disc : bq - disc);
        std::array<cplx, 2> z{q / a, c / q};
        if (std::abs(z[0]) > std::abs(z[1])) std::swap(z[0], z[1]);
        return z;
    };
    auto h = [&](double r, int which) { return std::abs(roots(r)[which]) - 1.0; };

    const double p0 = d.n0 * d.n0 + p.gamma_c * p.gamma_c * d.delta_drive2;
    const double r_lin = chi * w2 * std::abs(xd) / (2.0 * (std::abs(lm) * p0 + chi * chi * w2 * std::abs(D)));
    const double r_asym = std::cbrt(w2 / (2.0 * std::abs(lm) * chi));
    const double r_pole = (std::abs(d.xi) + std::abs(D)) / chi;
    const double r_hi = 10.0 * std::max({r_asym, r_pole, r_lin});
    const double r_lo = std::min(1e-3 * r_lin, 1e-3 * r_hi);
    const double decades = std::log10(r_hi / r_lo);
    const std::size_t n = std::max<std::size_t>(opt.radial_points, static_cast<std::size_t>(400.0 * decades));

    std::vector<double> rs(n);
    for (std::size_t k = 0; k < n; ++k) rs[k] = r_lo * std::pow(r_hi / r_lo, double(k) / double(n - 1));

    for (int which = 0; which < 2; ++which) {
        double h_prev = h(rs[0], which);
        for (std::size_t k = 1; k < n; ++k) {
            const double h_cur = h(rs[k], which);
            if (std::isfinite(h_prev) && std::isfinite(h_cur) && ((h_prev < 0.0) != (h_cur < 0.0))) {
                double lo = rs[k - 1], hi = rs[k], hlo = h_prev;
                for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double hm = h(mid, which);
                    if ((hm < 0.0) == (hlo < 0.0)) {
                        lo = mid;
                        hlo = hm;
                    } else {
                        hi = mid;
                    }
                }
                const double r = 0.5 * (lo + hi);
                const cplx z = roots(r)[which];
                const cplx b = r * z / std::abs(z);
                const cplx rhs9 = drive_squared_from_phonon(p, b);
                if (std::abs(rhs9.imag()) <= opt.realness_tol * std::abs(rhs9) && rhs9.real() > 0.0) out.push_back(b);
            }
            h_prev = h_cur;
        }
    }
    return out;
}

/// All fixed points at p.omega_drive found from the closed-form seeds.
inline std::vector<SteadyStateBranch> enumerate_fixed_points(const SystemParams& p, const SeedOptions& opt = {}) {
    std::vector<SemiclassicalState> seeds;
    for (cplx b : phonon_seeds(p, opt)) seeds.push_back(state_from_phonon(p, b));
    if (seeds.empty()) throw NoConvergence("enumerate_fixed_points: no seed candidates");
    return solve_fixed_points(p, p.omega_drive, seeds);
}

// ---------------------------------------------------------------- continuation

struct ContinuationOptions {
    double min_fraction = 1e-9;   // smallest drive step relative to |Omega|
    double jump_tolerance = 0.05; // accepted |b - b_predicted| relative to |b|
};

/// A branch followed in the drive amplitude. Holds the last two accepted
/// points for a secant predictor.
class BranchFollower {
public:
    explicit BranchFollower(SystemParams p, ContinuationOptions opt = {}) : p_(std::move(p)), opt_(opt) {
        p_.omega_drive = cplx{};
        branch_ = SteadyStateBranch{};
        drive_ = cplx{};
        history_.clear();
    }

    /// Start from an arbitrary converged branch at drive `drive`.
    void reset(const SteadyStateBranch& br, cplx drive) {
        branch_ = br;
        drive_ = drive;
        history_.clear();
    }

    const SteadyStateBranch& branch() const { return branch_; }
    cplx drive() const { return drive_; }
    bool lost() const { return lost_; }

    /// Move to `target`. Returns false when the branch ends (fold) before it is reached;
    /// the follower then stays at the last accepted point.
    bool advance(cplx target) {
        lost_ = false;
        if (target == drive_) return true;
        double frac_done = 0.0;
        double step = 1.0;
        const cplx start = drive_;
        const double scale = std::max(std::abs(target), std::abs(start));
        while (frac_done < 1.0) {
            step = std::min(step, 1.0 - frac_done);
            const cplx next = start + (target - start) * (frac_done + step);
            if (auto br = try_step(next)) {
                push(*br, next);
                frac_done += step;
                step *= 2.0;
            } else {
                step *= 0.5;
                if (step * std::abs(target - start) < opt_.min_fraction * scale) {
                    lost_ = true;
                    return false;
                }
            }
        }
        drive_ = target;
        return true;
    }

private:
    void push(const SteadyStateBranch& br, cplx drive) {
        history_.push_back({drive_, branch_.b_ss});
        if (history_.size() > 1) history_.erase(history_.begin());
        branch_ = br;
        drive_ = drive;
    }

    cplx predict(cplx next) const {
        if (drive_ == cplx{}) {
            // linear response about the empty cavity
            const SystemParams q = p_.with_drive(next);
            const auto [a1, a2] = linear_amplitudes(q, cplx{});
            return cplx(0.0, q.coupling()) * std::conj(a2) * a1 / cplx(q.gamma_m, q.omega_m);
        }
        if (history_.empty()) return branch_.b_ss;
        const auto [d0, b0] = history_.back();
        const double s0 = std::abs(d0), s1 = std::abs(drive_), s2 = std::abs(next);
        if (s1 == s0) return branch_.b_ss;
        return branch_.b_ss + (branch_.b_ss - b0) * ((s2 - s1) / (s1 - s0));
    }

    std::optional<SteadyStateBranch> try_step(cplx next) const {
        const SystemParams q = p_.with_drive(next);
        if (next == cplx{}) return SteadyStateBranch::from_state({}, 0.0);
        const cplx b_pred = predict(next);
        auto br = newton_refine(state_from_phonon(q, b_pred), q);
        if (!br) return std::nullopt;
        const double db = std::abs(br->b_ss - b_pred);
        if (db > opt_.jump_tolerance * std::max(std::abs(br->b_ss), std::abs(b_pred)) + 1e-300) return std::nullopt;
        return br;
    }

    SystemParams p_;
    ContinuationOptions opt_;
    SteadyStateBranch branch_;
    cplx drive_;
    std::vector<std::pair<cplx, cplx>> history_;
    bool lost_ = false;
};

/// The branch reached by raising the drive from zero along the ray of p.omega_drive.
inline std::optional<SteadyStateBranch> continuation_branch(const SystemParams& p) {
    BranchFollower f(p);
    if (!f.advance(p.omega_drive)) return std::nullopt;
    return f.branch();
}

// ---------------------------------------------------------------- multivaluedness sweep

struct BistabilitySweep {
    std::vector<double> control_values;                          // |Omega|, rad/s
    std::vector<std::vector<SteadyStateBranch>> branches_per_point;
    std::vector<double> fold_points;                             // |Omega| where the count changes
    std::vector<std::size_t> gaps;                               // grid indices without any converged branch
};

struct BistabilityOptions {
    std::size_t threads = 1;
    double fold_rel_tol = 1e-4;
    SeedOptions seeds{};
};

namespace detail {

inline std::vector<SteadyStateBranch> branches_at(const SystemParams& base, double w,
                                                  const std::vector<SemiclassicalState>& extra,
                                                  const SeedOptions& so) {
    const cplx phase = base.drive_abs() > 0.0 ? base.omega_drive / base.drive_abs() : cplx(1.0, 0.0);
    const SystemParams p = base.with_drive(w * phase);
    std::vector<SemiclassicalState> seeds = extra;
    for (cplx b : phonon_seeds(p, so)) seeds.push_back(state_from_phonon(p, b));
    if (seeds.empty()) return {};
    std::vector<SteadyStateBranch> out;
    try {
        out = solve_fixed_points(p, p.omega_drive, seeds);
    } catch (const NoConvergence&) {
        return {};
    }
    for (auto& br : out) classify(br, p);
    return out;
}

}  // namespace detail

/// Every fixed point on a uniform |Omega| grid. Continuation seeds are produced in a
/// serial pre-pass; refinement at each grid point is independent, so the result does
/// not depend on the thread count.
inline BistabilitySweep sweep_bistability(const SystemParams& params, double omega_min, double omega_max,
                                          std::size_t n_points, const BistabilityOptions& opt = {}) {
    if (!(omega_min >= 0.0 && omega_min < omega_max)) throw InvalidParameter("sweep_bistability: need 0 <= min < max");
    if (n_points < 2) throw InvalidParameter("sweep_bistability: need at least 2 points");
    params.validate();
    const cplx phase = params.drive_abs() > 0.0 ? params.omega_drive / params.drive_abs() : cplx(1.0, 0.0);

    BistabilitySweep out;
    out.control_values.resize(n_points);
    for (std::size_t k = 0; k < n_points; ++k)
        out.control_values[k] = omega_min + (omega_max - omega_min) * double(k) / double(n_points - 1);

    // serial pre-pass: the branch continued from zero drive
    std::vector<std::vector<SemiclassicalState>> cont(n_points);
    BranchFollower follow(params);
    for (std::size_t k = 0; k < n_points; ++k) {
        if (follow.advance(out.control_values[k] * phase)) cont[k].push_back(follow.branch().state());
        else break;
    }

    out.branches_per_point = parallel_map(n_points, opt.threads, [&](std::size_t k) {
        return detail::branches_at(params, out.control_values[k], cont[k], opt.seeds);
    });
    for (std::size_t k = 0; k < n_points; ++k)
        if (out.branches_per_point[k].empty()) out.gaps.push_back(k);

    // fold brackets between neighbours with different counts
    std::vector<std::size_t> brackets;
    for (std::size_t k = 0; k + 1 < n_points; ++k) {
        const auto c0 = out.branches_per_point[k].size(), c1 = out.branches_per_point[k + 1].size();
        if (c0 && c1 && c0 != c1) brackets.push_back(k);
    }
    out.fold_points = parallel_map(brackets.size(), opt.threads, [&](std::size_t j) {
        const std::size_t k = brackets[j];
        double lo = out.control_values[k], hi = out.control_values[k + 1];
        const auto c_lo = out.branches_per_point[k].size();
        while (hi - lo > opt.fold_rel_tol * hi) {
            const double mid = 0.5 * (lo + hi);
            const auto c = detail::branches_at(params, mid, {}, opt.seeds).size();
            if (c == c_lo) lo = mid;
            else hi = mid;
        }
        return 0.5 * (lo + hi);
    });
    return out;
}

}  // namespace phonolase
