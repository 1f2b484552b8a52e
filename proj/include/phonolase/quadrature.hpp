#pragma once

// Adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands with a
// deterministic refinement order and summation order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "phonolase/errors.hpp"

namespace phonolase {

template <std::size_t N>
using VecN = std::array<double, N>;

struct QuadOptions {
    double rel_tol = 1e-11;
    double abs_tol = 0.0;
    std::size_t max_panels = 200000;
};

template <std::size_t N>
struct QuadResult {
    VecN<N> value{};
    VecN<N> error{};
    VecN<N> l1{};  // integral of |f|, used for relative scales
    std::size_t panels = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                              0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
struct Panel {
    double a = 0.0, b = 0.0;
    VecN<N> value{}, error{}, l1{};
};

template <std::size_t N, class F>
Panel<N> gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    Panel<N> p;
    p.a = a;
    p.b = b;
    VecN<N> rk{}, rabs{};
    const VecN<N> fc = f(c);
    std::array<VecN<N>, 7> f1, f2;
    for (std::size_t j = 0; j < 7; ++j) {
        f1[j] = f(c - h * kXgk[j]);
        f2[j] = f(c + h * kXgk[j]);
    }
    for (std::size_t n = 0; n < N; ++n) {
        double k = kWgk[7] * fc[n], g = kWg[3] * fc[n], ab = kWgk[7] * std::abs(fc[n]);
        for (std::size_t j = 0; j < 7; ++j) {
            k += kWgk[j] * (f1[j][n] + f2[j][n]);
            ab += kWgk[j] * (std::abs(f1[j][n]) + std::abs(f2[j][n]));
            if (j % 2 == 1) g += kWg[j / 2] * (f1[j][n] + f2[j][n]);
        }
        const double mean = 0.5 * k;
        double asc = kWgk[7] * std::abs(fc[n] - mean);
        for (std::size_t j = 0; j < 7; ++j) asc += kWgk[j] * (std::abs(f1[j][n] - mean) + std::abs(f2[j][n] - mean));
        double err = std::abs((k - g) * h);
        const double resasc = asc * std::abs(h), resabs = ab * std::abs(h);
        if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
        if (resabs > std::numeric_limits<double>::min() / (50.0 * std::numeric_limits<double>::epsilon()))
            err = std::max(err, 50.0 * std::numeric_limits<double>::epsilon() * resabs);
        rk[n] = k * h;
        rabs[n] = resabs;
        p.error[n] = err;
    }
    p.value = rk;
    p.l1 = rabs;
    return p;
}

/// Pairwise sum of v[lo, hi).
inline double pairwise_sum(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    if (hi - lo <= 8) {
        double s = 0.0;
        for (std::size_t k = lo; k < hi; ++k) s += v[k];
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(v, lo, mid) + pairwise_sum(v, mid, hi);
}

}  // namespace detail

/// Integrate f over [breaks.front(), breaks.back()], starting from the panels
/// delimited by the sorted breakpoints. Panels whose normalized error is within a
/// factor 4 of the worst are bisected each round, until every component meets
/// max(abs_tol, rel_tol * integral |f|).
template <std::size_t N, class F>
QuadResult<N> integrate_adaptive(F&& f, std::vector<double> breaks, const QuadOptions& opt = {}) {
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    if (breaks.size() < 2) throw InvalidParameter("integrate_adaptive: need at least two distinct breakpoints");
    using P = detail::Panel<N>;
    std::vector<P> panels;
    QuadResult<N> res;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) panels.push_back(detail::gk15<N>(f, breaks[k], breaks[k + 1]));
    res.evaluations = 15 * panels.size();

    auto totals = [&](VecN<N>& val, VecN<N>& err, VecN<N>& l1) {
        std::sort(panels.begin(), panels.end(), [](const P& x, const P& y) { return x.a < y.a; });
        std::vector<double> buf(panels.size());
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t k = 0; k < panels.size(); ++k) buf[k] = panels[k].value[n];
            val[n] = detail::pairwise_sum(buf, 0, buf.size());
            for (std::size_t k = 0; k < panels.size(); ++k) buf[k] = panels[k].error[n];
            err[n] = detail::pairwise_sum(buf, 0, buf.size());
            for (std::size_t k = 0; k < panels.size(); ++k) buf[k] = panels[k].l1[n];
            l1[n] = detail::pairwise_sum(buf, 0, buf.size());
        }
    };

    for (;;) {
        totals(res.value, res.error, res.l1);
        VecN<N> tol{};
        bool done = true;
        for (std::size_t n = 0; n < N; ++n) {
            tol[n] = std::max(opt.abs_tol, opt.rel_tol * res.l1[n]);
            if (res.error[n] > tol[n]) done = false;
        }
        if (done) {
            res.converged = true;
            break;
        }
        if (panels.size() >= opt.max_panels) break;
        std::vector<double> score(panels.size(), 0.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < panels.size(); ++k) {
            for (std::size_t n = 0; n < N; ++n)
                if (tol[n] > 0.0) score[k] = std::max(score[k], panels[k].error[n] / tol[n]);
                else if (panels[k].error[n] > 0.0) score[k] = std::numeric_limits<double>::infinity();
            worst = std::max(worst, score[k]);
        }
        std::vector<P> next;
        next.reserve(panels.size() * 2);
        bool split_any = false;
        for (std::size_t k = 0; k < panels.size(); ++k) {
            const P& p = panels[k];
            const double mid = 0.5 * (p.a + p.b);
            if (score[k] >= 0.25 * worst && score[k] > 0.0 && mid > p.a && mid < p.b &&
                next.size() + (panels.size() - k) < opt.max_panels) {
                next.push_back(detail::gk15<N>(f, p.a, mid));
                next.push_back(detail::gk15<N>(f, mid, p.b));
                res.evaluations += 30;
                split_any = true;
            } else {
                next.push_back(p);
            }
        }
        panels.swap(next);
        if (!split_any) break;
    }
    res.panels = panels.size();
    return res;
}

}  // namespace phonolase
