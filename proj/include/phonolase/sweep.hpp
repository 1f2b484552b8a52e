#pragma once

// Drive sweeps along the adiabatically followed branch: stability curves, their
// zero crossings, and the drive window with positive net gain and linear stability.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "phonolase/lasing.hpp"
#include "phonolase/stability.hpp"
#include "phonolase/steady_state.hpp"

namespace phonolase {

struct FollowedPoint {
    double omega = 0.0;                    // |Omega|, rad/s
    std::optional<SteadyStateBranch> branch;
    StabilityReport report;
    bool jumped = false;                   // left the continued branch for another one here
};

/// Follows the fixed point an adiabatic experiment would track while the drive
/// rises along the ray of p.omega_drive: continuation from zero drive; when the
/// tracked point is lost at a fold or turns unstable, it moves to the stable fixed
/// point (nearest in b if several) if one exists.
class AdiabaticTracker {
public:
    explicit AdiabaticTracker(const SystemParams& p, SeedOptions seeds = {})
        : p_(p), follower_(p), seeds_(seeds),
          phase_(p.drive_abs() > 0.0 ? p.omega_drive / p.drive_abs() : cplx(1.0, 0.0)) {}

    FollowedPoint step(double w) {
        FollowedPoint pt;
        pt.omega = w;
        const cplx drive = w * phase_;
        const SystemParams q = p_.with_drive(drive);
        const bool ok = follower_.advance(drive);
        std::optional<SteadyStateBranch> cur;
        if (ok) cur = follower_.branch();
        std::optional<StabilityReport> rep;
        if (cur) rep = classify(*cur, q);
        if (!cur || !rep->stable) {
            std::vector<SteadyStateBranch> all;
            try {
                all = enumerate_fixed_points(q, seeds_);
            } catch (const NoConvergence&) {
            }
            std::optional<SteadyStateBranch> best;
            const cplx ref = cur ? cur->b_ss : follower_.branch().b_ss;
            for (auto& br : all) {
                if (!classify(br, q).stable) continue;
                if (!best || std::abs(br.b_ss - ref) < std::abs(best->b_ss - ref)) best = br;
            }
            if (best) {
                pt.jumped = !cur || !same_fixed_point(best->state(), cur->state());
                cur = best;
                rep = classify(*cur, q);
                follower_.reset(*cur, drive);
            } else if (!cur && !all.empty()) {
                // lost at a fold with nothing stable around: keep the nearest fixed point
                cur = all.front();
                for (auto& br : all)
                    if (std::abs(br.b_ss - ref) < std::abs(cur->b_ss - ref)) cur = br;
                rep = classify(*cur, q);
                follower_.reset(*cur, drive);
                pt.jumped = true;
            }
        }
        if (cur) {
            pt.branch = cur;
            pt.report = *rep;
        }
        return pt;
    }

    /// Current tracked state (for restarting a local bisection).
    const BranchFollower& follower() const { return follower_; }

private:
    SystemParams p_;
    BranchFollower follower_;
    SeedOptions seeds_;
    cplx phase_;
};

/// Followed branch on an increasing grid of |Omega| values (rad/s).
inline std::vector<FollowedPoint> follow_sweep(const SystemParams& p, const std::vector<double>& grid) {
    if (grid.empty()) throw InvalidParameter("follow_sweep: empty grid");
    if (!std::is_sorted(grid.begin(), grid.end())) throw InvalidParameter("follow_sweep: grid must be increasing");
    AdiabaticTracker tr(p);
    std::vector<FollowedPoint> out;
    out.reserve(grid.size());
    for (double w : grid) out.push_back(tr.step(w));
    return out;
}

namespace detail {

/// Evaluate a predicate at drive w by continuing from a known branch at drive w0.
template <class Pred>
std::optional<bool> predicate_from(const SystemParams& p, const SteadyStateBranch& start, double w0, double w,
                                   Pred&& pred) {
    const cplx phase = p.drive_abs() > 0.0 ? p.omega_drive / p.drive_abs() : cplx(1.0, 0.0);
    BranchFollower f(p);
    f.reset(start, w0 * phase);
    if (!f.advance(w * phase)) return std::nullopt;
    SteadyStateBranch br = f.branch();
    const SystemParams q = p.with_drive(w * phase);
    return pred(br, q);
}

/// Bisect the boundary of `pred` between grid points lo (value v_lo, branch b_lo) and hi.
template <class Pred>
double bisect_edge(const SystemParams& p, const SteadyStateBranch& b_lo, double lo, double hi, bool v_lo,
                   double rel_tol, Pred&& pred) {
    const double w0 = lo;
    while (hi - lo > rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        const auto v = predicate_from(p, b_lo, w0, mid, pred);
        if (!v) {
            hi = mid;  // branch lost before mid: the edge is at or before the fold
            continue;
        }
        if (*v == v_lo) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

struct StabilitySweep {
    std::vector<FollowedPoint> points;
    std::vector<double> crossings;  // |Omega| where max_re changes sign, rad/s
    std::vector<std::size_t> gaps;
};

inline StabilitySweep stability_sweep(const SystemParams& p, const std::vector<double>& grid, double rel_tol = 1e-4) {
    StabilitySweep s;
    s.points = follow_sweep(p, grid);
    for (std::size_t k = 0; k < s.points.size(); ++k)
        if (!s.points[k].branch) s.gaps.push_back(k);
    auto unstable = [](SteadyStateBranch& br, const SystemParams& q) { return analyze(br.state(), q).max_re >= 0.0; };
    for (std::size_t k = 0; k + 1 < s.points.size(); ++k) {
        const auto& a = s.points[k];
        const auto& b = s.points[k + 1];
        if (!a.branch || !b.branch || b.jumped) continue;
        const bool ua = a.report.max_re >= 0.0, ub = b.report.max_re >= 0.0;
        if (ua != ub) s.crossings.push_back(detail::bisect_edge(p, *a.branch, a.omega, b.omega, ua, rel_tol, unstable));
    }
    return s;
}

// ---------------------------------------------------------------- lasing window

struct LasingWindow {
    bool found = false;
    double lower = 0.0;  // rad/s
    double upper = 0.0;
    double width() const { return found ? upper - lower : 0.0; }
};

/// Largest contiguous |Omega| interval on which alpha' > 0 and the followed branch
/// is linearly stable; edges refined by bisection to relative `rel_tol`.
inline LasingWindow lasing_window(const SystemParams& p, double omega_lo, double omega_hi, std::size_t n,
                                  double rel_tol = 1e-3, const LasingOptions& lopt = {}) {
    std::vector<double> grid(n);
    for (std::size_t k = 0; k < n; ++k) grid[k] = omega_lo + (omega_hi - omega_lo) * double(k) / double(n - 1);
    const auto pts = follow_sweep(p, grid);
    auto pred = [&](SteadyStateBranch& br, const SystemParams& q) {
        return cubic_coefficients(q, lopt).alpha_prime > 0.0 && analyze(br.state(), q).stable;
    };
    const cplx phase = p.drive_abs() > 0.0 ? p.omega_drive / p.drive_abs() : cplx(1.0, 0.0);
    std::vector<char> in(n, 0);
    for (std::size_t k = 0; k < n; ++k)
        if (pts[k].branch) {
            SteadyStateBranch br = *pts[k].branch;
            in[k] = pred(br, p.with_drive(pts[k].omega * phase));
        }
    std::size_t best_start = 0, best_len = 0;
    for (std::size_t k = 0; k < n;) {
        if (!in[k]) {
            ++k;
            continue;
        }
        std::size_t j = k;
        while (j < n && in[j]) ++j;
        if (j - k > best_len) {
            best_len = j - k;
            best_start = k;
        }
        k = j;
    }
    LasingWindow win;
    if (best_len == 0) return win;
    win.found = true;
    const std::size_t a = best_start, b = best_start + best_len - 1;
    // lower edge: bracket [a-1, a], continue from the point outside the window
    if (a > 0 && pts[a - 1].branch)
        win.lower = detail::bisect_edge(p, *pts[a - 1].branch, pts[a - 1].omega, pts[a].omega, false, rel_tol, pred);
    else
        win.lower = pts[a].omega;
    if (b + 1 < n && pts[b].branch)
        win.upper = detail::bisect_edge(p, *pts[b].branch, pts[b].omega, pts[b + 1].omega, true, rel_tol, pred);
    else
        win.upper = pts[b].omega;
    return win;
}

}  // namespace phonolase
