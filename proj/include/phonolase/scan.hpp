#pragma once

// Sweep orchestration behind the command-line tool: resolves parameters, runs one
// subcommand over a grid, writes the CSV and a JSON sidecar that is enough to
// replay the run.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phonolase/csv.hpp"
#include "phonolase/dynamics.hpp"
#include "phonolase/lasing.hpp"
#include "phonolase/param_file.hpp"
#include "phonolase/parallel.hpp"
#include "phonolase/statistics.hpp"
#include "phonolase/steady_state.hpp"
#include "phonolase/sweep.hpp"

namespace phonolase {

inline constexpr const char* kVersion = "0.1.0";

enum class BranchPolicy { continuation, all };
enum class UnstablePolicy { not_applicable, formal };

struct SweepAxis {
    std::string key;
    double min = 0.0;
    double max = 0.0;
    std::size_t n = 2;
    double at(std::size_t k) const { return k + 1 == n ? max : min + (max - min) * double(k) / double(n - 1); }
};

struct SweepSpec {
    std::string subcommand;
    std::vector<KeyValue> params;  // file contents with overrides applied
    std::vector<SweepAxis> sweeps;
    std::string output_path;
    BranchPolicy branch = BranchPolicy::continuation;
    UnstablePolicy unstable = UnstablePolicy::not_applicable;
    Eps3Form eps3 = Eps3Form::corrected;
    double phase = 0.0;        // drive phase, rad
    double tolerance = 1e-10;  // integrate only
    std::size_t threads = 1;   // does not affect any output
};

struct RunResult {
    int status = 0;  // 0 complete, 2 partial
    std::size_t rows = 0;
    std::vector<std::size_t> gaps;  // grid indices without a result
    nlohmann::ordered_json summary = nlohmann::ordered_json::object();
};

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"steady", "bistability", "stability", "gain",
                                               "potential", "potential1d", "flow", "g2",
                                               "spectra", "integrate", "coefficients"};
    return s;
}

// ---------------------------------------------------------------- argument parsing

inline SweepAxis parse_sweep(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    for (;;) {
        const auto c = text.find(':', pos);
        parts.push_back(text.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
        if (c == std::string::npos) break;
        pos = c + 1;
    }
    if (parts.size() != 4) throw ConfigError("sweep must be key:min:max:n, got '" + text + "'");
    SweepAxis a;
    a.key = std::string(detail::trim(parts[0]));
    a.min = detail::parse_double(detail::trim(parts[1]), 0);
    a.max = detail::parse_double(detail::trim(parts[2]), 0);
    const double n = detail::parse_double(detail::trim(parts[3]), 0);
    if (!(n >= 2.0) || n != std::floor(n) || n > 1e8) throw ConfigError("sweep needs an integer n >= 2: '" + text + "'");
    a.n = static_cast<std::size_t>(n);
    if (!(a.min < a.max)) throw ConfigError("sweep needs min < max: '" + text + "'");
    return a;
}

inline std::string sweep_text(const SweepAxis& a) {
    return a.key + ":" + fmt17(a.min) + ":" + fmt17(a.max) + ":" + std::to_string(a.n);
}

/// Later entries replace earlier ones with the same key.
inline std::vector<KeyValue> apply_overrides(std::vector<KeyValue> kvs, const std::vector<KeyValue>& overrides) {
    for (const auto& o : overrides) {
        bool found = false;
        for (auto& kv : kvs)
            if (kv.key == o.key) {
                kv = o;
                found = true;
            }
        if (!found) kvs.push_back(o);
    }
    return kvs;
}

inline BranchPolicy parse_branch_policy(const std::string& s) {
    if (s == "continuation") return BranchPolicy::continuation;
    if (s == "all") return BranchPolicy::all;
    throw ConfigError("branch must be 'continuation' or 'all', got '" + s + "'");
}

inline std::string to_string(BranchPolicy b) { return b == BranchPolicy::all ? "all" : "continuation"; }

inline UnstablePolicy parse_unstable_policy(const std::string& s) {
    if (s == "na") return UnstablePolicy::not_applicable;
    if (s == "formal") return UnstablePolicy::formal;
    throw ConfigError("unstable must be 'na' or 'formal', got '" + s + "'");
}

inline std::string to_string(UnstablePolicy u) { return u == UnstablePolicy::formal ? "formal" : "na"; }

inline Eps3Form parse_eps3_form(const std::string& s) {
    if (s == "corrected") return Eps3Form::corrected;
    if (s == "uncorrected") return Eps3Form::uncorrected;
    throw ConfigError("eps3 must be 'corrected' or 'uncorrected', got '" + s + "'");
}

inline std::string to_string(Eps3Form e) { return e == Eps3Form::uncorrected ? "uncorrected" : "corrected"; }

/// Worker count: explicit value, else PHONOLASE_THREADS, else the machine.
inline std::size_t resolve_threads(std::optional<long> flag) {
    if (flag) {
        if (*flag < 1) throw ConfigError("--threads must be >= 1");
        return static_cast<std::size_t>(*flag);
    }
    if (const char* env = std::getenv("PHONOLASE_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1) throw ConfigError(std::string("PHONOLASE_THREADS must be a positive integer, got '") + env + "'");
        return static_cast<std::size_t>(v);
    }
    return default_threads();
}

// ---------------------------------------------------------------- helpers

namespace detail {

inline std::string flag(bool b) { return b ? "1" : "0"; }

inline const std::string kNan = "nan";

struct SystemContext {
    SystemParams base;             // drive carries the requested phase
    SweepAxis axis;
    bool drive_sweep = false;      // axis is omega_drive_hz
    std::vector<SystemParams> points;
};

inline SystemContext system_context(const SweepSpec& spec) {
    if (spec.sweeps.size() != 1) throw ConfigError(spec.subcommand + " takes exactly one --sweep");
    SystemContext c;
    c.base = system_params_from(spec.params);
    c.base.omega_drive = std::polar(c.base.drive_abs(), spec.phase);
    c.axis = spec.sweeps.front();
    if (!is_system_key(c.axis.key) || c.axis.key == "geometry_factor")
        throw ConfigError("cannot sweep '" + c.axis.key + "'");
    c.drive_sweep = c.axis.key == "omega_drive_hz";
    if (c.drive_sweep && c.axis.min < 0.0) throw ConfigError("omega_drive_hz sweep must start at >= 0");
    for (std::size_t k = 0; k < c.axis.n; ++k) {
        SystemParams q = c.base;
        const double v = c.axis.at(k);
        if (c.drive_sweep) q.omega_drive = std::polar(hz_to_rad(v), spec.phase);
        else apply_system_key(q, c.axis.key, v);
        try {
            q.validate();
        } catch (const InvalidParameter& e) {
            throw ConfigError(std::string("sweep point ") + fmt17(v) + ": " + e.what());
        }
        c.points.push_back(q);
    }
    return c;
}

/// Followed branch at each point: one adiabatic pass for a drive sweep, else an
/// independent ramp from zero drive at each point.
inline std::vector<FollowedPoint> followed(const SystemContext& c, std::size_t threads) {
    if (c.drive_sweep) {
        std::vector<double> grid;
        for (const auto& q : c.points) grid.push_back(q.drive_abs());
        return follow_sweep(c.base.with_drive(std::polar(1.0, std::arg(c.points.back().omega_drive))), grid);
    }
    return parallel_map(c.points.size(), threads, [&](std::size_t k) {
        AdiabaticTracker tr(c.points[k]);
        return tr.step(c.points[k].drive_abs());
    });
}

inline std::vector<SteadyStateBranch> all_branches(const SystemParams& q) {
    return branches_at(q, q.drive_abs(), {}, SeedOptions{});
}

/// Rows to report per grid point: the followed branch or every fixed point.
struct PointBranches {
    std::vector<SteadyStateBranch> branches;
    bool gap = false;
};

inline std::vector<PointBranches> collect_branches(const SystemContext& c, BranchPolicy policy, std::size_t threads,
                                                   RunResult& res) {
    std::vector<PointBranches> out(c.points.size());
    if (policy == BranchPolicy::continuation) {
        const auto pts = followed(c, threads);
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (pts[k].branch) {
                SteadyStateBranch br = *pts[k].branch;
                br.stable = pts[k].report.stable;
                out[k].branches.push_back(br);
            } else {
                out[k].gap = true;
            }
        }
    } else if (c.drive_sweep) {
        const SystemParams ray = c.base.with_drive(std::polar(1.0, std::arg(c.points.back().omega_drive)));
        BistabilityOptions bo;
        bo.threads = threads;
        const auto sw = sweep_bistability(ray, c.points.front().drive_abs(), c.points.back().drive_abs(), c.points.size(), bo);
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            out[k].branches = sw.branches_per_point[k];
            out[k].gap = out[k].branches.empty();
        }
        auto folds = nlohmann::ordered_json::array();
        for (double f : sw.fold_points) folds.push_back(rad_to_hz(f));
        res.summary["fold_points_hz"] = folds;
    } else {
        auto all = parallel_map(c.points.size(), threads, [&](std::size_t k) { return all_branches(c.points[k]); });
        for (std::size_t k = 0; k < c.points.size(); ++k) {
            out[k].branches = std::move(all[k]);
            out[k].gap = out[k].branches.empty();
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k)
        if (out[k].gap) res.gaps.push_back(k);
    return out;
}

inline std::vector<std::string> lead_header(const SystemContext& c) {
    if (c.drive_sweep) return {"omega_drive_hz"};
    return {c.axis.key, "omega_drive_hz"};
}

inline std::vector<std::string> lead_fields(const SystemContext& c, std::size_t k) {
    std::vector<std::string> f;
    if (!c.drive_sweep) f.push_back(fmt17(c.axis.at(k)));
    f.push_back(fmt17(c.drive_sweep ? c.axis.at(k) : rad_to_hz(c.points[k].drive_abs())));
    return f;
}

inline void append(std::vector<std::string>& to, std::initializer_list<double> vals) {
    for (double v : vals) to.push_back(fmt17(v));
}

inline void nan_fill(std::vector<std::string>& f, std::size_t width) {
    while (f.size() < width) f.push_back(kNan);
}

/// Coefficients from a coefficient file, or derived from physical parameters.
inline LasingCoefficients coefficient_source(const SweepSpec& spec) {
    if (is_coefficient_file(spec.params)) return coefficients_from(spec.params);
    SystemParams p = system_params_from(spec.params);
    p.omega_drive = std::polar(p.drive_abs(), spec.phase);
    LasingOptions lo;
    lo.eps3 = spec.eps3;
    return cubic_coefficients(p, lo);
}

inline const SweepAxis* find_axis(const SweepSpec& spec, const std::string& key) {
    for (const auto& a : spec.sweeps)
        if (a.key == key) return &a;
    return nullptr;
}

inline void check_axes(const SweepSpec& spec, std::initializer_list<const char*> allowed) {
    for (const auto& a : spec.sweeps) {
        bool ok = false;
        for (const char* k : allowed) ok |= a.key == k;
        if (!ok) throw ConfigError(spec.subcommand + " cannot sweep '" + a.key + "'");
    }
}

inline nlohmann::ordered_json minima_json(const std::vector<Minimum>& ms) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& m : ms) arr.push_back({{"u1", m.u1}, {"u2", m.u2}, {"v", m.value}});
    return arr;
}

// ---------------------------------------------------------------- subcommands

inline RunResult run_steady(const SweepSpec& spec, std::ostream& os, BranchPolicy policy) {
    RunResult res;
    const auto c = system_context(spec);
    const auto pb = collect_branches(c, policy, spec.threads, res);
    auto header = lead_header(c);
    for (const char* h : {"branch_index", "re_a1", "im_a1", "re_a2", "im_a2", "re_b0", "im_b0", "abs_b0", "residual", "stable"})
        header.push_back(h);
    CsvWriter w(os, header);
    for (std::size_t k = 0; k < pb.size(); ++k) {
        if (pb[k].gap) {
            auto f = lead_fields(c, k);
            nan_fill(f, header.size());
            w.row(f);
            ++res.rows;
            continue;
        }
        for (std::size_t j = 0; j < pb[k].branches.size(); ++j) {
            const auto& br = pb[k].branches[j];
            auto f = lead_fields(c, k);
            f.push_back(std::to_string(j));
            append(f, {br.a1_ss.real(), br.a1_ss.imag(), br.a2_ss.real(), br.a2_ss.imag(), br.b_ss.real(),
                       br.b_ss.imag(), std::abs(br.b_ss), br.residual});
            f.push_back(flag(br.stable.value_or(false)));
            w.row(f);
            ++res.rows;
        }
    }
    return res;
}

inline RunResult run_stability(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    const auto c = system_context(spec);
    const auto pb = collect_branches(c, spec.branch, spec.threads, res);
    auto header = lead_header(c);
    header.push_back("max_re_hz");
    header.push_back("stable");
    for (int j = 1; j <= 6; ++j) {
        header.push_back("re_lambda" + std::to_string(j) + "_hz");
        header.push_back("im_lambda" + std::to_string(j) + "_hz");
    }
    // flatten (point, branch) pairs so the eigen-solves run in parallel
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t k = 0; k < pb.size(); ++k)
        for (std::size_t j = 0; j < pb[k].branches.size(); ++j) jobs.push_back({k, j});
    const auto reps = parallel_map(jobs.size(), spec.threads, [&](std::size_t i) {
        return analyze(pb[jobs[i].first].branches[jobs[i].second].state(), c.points[jobs[i].first]);
    });
    CsvWriter w(os, header);
    std::size_t i = 0;
    for (std::size_t k = 0; k < pb.size(); ++k) {
        if (pb[k].gap) {
            auto f = lead_fields(c, k);
            nan_fill(f, header.size());
            w.row(f);
            ++res.rows;
            continue;
        }
        for (std::size_t j = 0; j < pb[k].branches.size(); ++j, ++i) {
            const auto& r = reps[i];
            auto f = lead_fields(c, k);
            f.push_back(fmt17(rad_to_hz(r.max_re)));
            f.push_back(flag(r.stable));
            for (const auto& l : r.eigenvalues) append(f, {rad_to_hz(l.real()), rad_to_hz(l.imag())});
            w.row(f);
            ++res.rows;
        }
    }
    if (c.drive_sweep && spec.branch == BranchPolicy::continuation) {
        std::vector<double> grid;
        for (const auto& q : c.points) grid.push_back(q.drive_abs());
        const auto ss = stability_sweep(c.base.with_drive(std::polar(1.0, spec.phase)), grid);
        auto cr = nlohmann::ordered_json::array();
        for (double x : ss.crossings) cr.push_back(rad_to_hz(x));
        res.summary["stability_crossings_hz"] = cr;
    }
    return res;
}

inline RunResult run_gain(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    const auto c = system_context(spec);
    const auto pb = collect_branches(c, spec.branch, spec.threads, res);
    LasingOptions lo;
    lo.eps3 = spec.eps3;
    auto header = lead_header(c);
    for (const char* h : {"alpha_prime_hz", "gprime_hz", "g_hz", "threshold_flag"}) header.push_back(h);
    CsvWriter w(os, header);
    for (std::size_t k = 0; k < pb.size(); ++k) {
        const auto& q = c.points[k];
        if (pb[k].gap) {
            auto f = lead_fields(c, k);
            nan_fill(f, header.size());
            w.row(f);
            ++res.rows;
            continue;
        }
        const double alpha = cubic_coefficients(q, lo).alpha_prime;
        for (const auto& br : pb[k].branches) {
            const double jz = br.jz();
            const double gp = gain_simple(q, jz), g = gain_full(q, jz, std::norm(br.b_ss));
            auto f = lead_fields(c, k);
            append(f, {rad_to_hz(alpha), rad_to_hz(gp), rad_to_hz(g)});
            f.push_back(flag(above_threshold(q, g)));
            w.row(f);
            ++res.rows;
        }
    }
    if (c.drive_sweep) {
        const auto win = lasing_window(c.base.with_drive(std::polar(1.0, spec.phase)), c.points.front().drive_abs(),
                                       c.points.back().drive_abs(), c.points.size(), 1e-3, lo);
        res.summary["lasing_window_found"] = win.found;
        if (win.found) {
            res.summary["lasing_window_lower_hz"] = rad_to_hz(win.lower);
            res.summary["lasing_window_upper_hz"] = rad_to_hz(win.upper);
        }
    }
    return res;
}

struct G2Row {
    bool gap = false;
    bool applicable = true;
    double g2 = 0.0, y_nb = 0.0, b0_abs2 = 0.0;
    cplx y_bb{};
};

inline RunResult run_g2(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    const auto c = system_context(spec);
    const auto pb = collect_branches(c, spec.branch, spec.threads, res);
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t k = 0; k < pb.size(); ++k)
        for (std::size_t j = 0; j < pb[k].branches.size(); ++j) jobs.push_back({k, j});
    const auto rows = parallel_map(jobs.size(), spec.threads, [&](std::size_t i) {
        const auto& br = pb[jobs[i].first].branches[jobs[i].second];
        const auto& q = c.points[jobs[i].first];
        G2Row r;
        r.b0_abs2 = std::norm(br.b_ss);
        if (!br.stable.value_or(false) && spec.unstable == UnstablePolicy::not_applicable) {
            r.applicable = false;
            return r;
        }
        try {
            const auto co = coherence(br, q);
            r.g2 = co.g2_zero;
            r.y_nb = co.y_nb;
            r.y_bb = co.y_bb;
        } catch (const Error&) {
            r.gap = true;
        }
        return r;
    });
    auto header = lead_header(c);
    for (const char* h : {"g2_zero", "y_nb", "re_y_bb", "im_y_bb", "b0_abs2"}) header.push_back(h);
    CsvWriter w(os, header);
    std::size_t i = 0;
    for (std::size_t k = 0; k < pb.size(); ++k) {
        if (pb[k].gap) {
            auto f = lead_fields(c, k);
            nan_fill(f, header.size());
            w.row(f);
            ++res.rows;
            continue;
        }
        bool failed = false;
        for (std::size_t j = 0; j < pb[k].branches.size(); ++j, ++i) {
            const auto& r = rows[i];
            auto f = lead_fields(c, k);
            if (r.gap || !r.applicable) {
                failed |= r.gap;
                f.insert(f.end(), 4, kNan);
            } else {
                append(f, {r.g2, r.y_nb, r.y_bb.real(), r.y_bb.imag()});
            }
            f.push_back(fmt17(r.b0_abs2));
            w.row(f);
            ++res.rows;
        }
        if (failed) res.gaps.push_back(k);
    }
    std::sort(res.gaps.begin(), res.gaps.end());
    return res;
}

inline RunResult run_spectra(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    if (spec.sweeps.size() != 1 || spec.sweeps.front().key != "omega_hz")
        throw ConfigError("spectra takes one --sweep omega_hz:min:max:n");
    const auto& ax = spec.sweeps.front();
    SystemParams p = system_params_from(spec.params);
    p.omega_drive = std::polar(p.drive_abs(), spec.phase);
    AdiabaticTracker tr(p);
    const auto pt = tr.step(p.drive_abs());
    CsvWriter w(os, {"omega_hz", "re_gamma_bb", "im_gamma_bb", "gamma_nb"});
    const bool usable = pt.branch && (pt.report.stable || spec.unstable == UnstablePolicy::formal);
    std::vector<double> grid(ax.n);
    for (std::size_t k = 0; k < ax.n; ++k) grid[k] = hz_to_rad(ax.at(k));
    std::vector<std::optional<SpectralPoint>> pts(ax.n);
    if (usable) {
        const detail::FluctuationLadder lad(*pt.branch, p);
        const double nb = thermal_occupation(p);
        pts = parallel_map(ax.n, spec.threads, [&](std::size_t k) -> std::optional<SpectralPoint> {
            try {
                return spectral_point(lad, grid[k], nb, p.gamma_c);
            } catch (const PoleAtFrequency&) {
                return std::nullopt;
            }
        });
    }
    for (std::size_t k = 0; k < ax.n; ++k) {
        std::vector<std::string> f = {fmt17(ax.at(k))};
        if (pts[k]) append(f, {pts[k]->gamma_bb.real(), pts[k]->gamma_bb.imag(), pts[k]->gamma_nb});
        else {
            nan_fill(f, 4);
            res.gaps.push_back(k);
        }
        w.row(f);
        ++res.rows;
    }
    if (pt.branch) {
        res.summary["b0_abs"] = std::abs(pt.branch->b_ss);
        res.summary["stable"] = pt.report.stable;
    }
    return res;
}

inline RunResult run_integrate(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    if (spec.sweeps.size() != 1 || spec.sweeps.front().key != "t")
        throw ConfigError("integrate takes one --sweep t:min:max:n (seconds)");
    const auto& ax = spec.sweeps.front();
    if (ax.min < 0.0) throw ConfigError("integrate: times must be >= 0");
    SystemParams p = system_params_from(spec.params);
    p.omega_drive = std::polar(p.drive_abs(), spec.phase);
    CsvWriter w(os, {"t", "re_a1", "im_a1", "re_a2", "im_a2", "re_b", "im_b"});
    SemiclassicalState s{};
    double t = 0.0;
    bool dead = false;
    for (std::size_t k = 0; k < ax.n; ++k) {
        const double tk = ax.at(k);
        std::vector<std::string> f = {fmt17(tk)};
        if (!dead && tk > t) {
            try {
                const auto tr = integrate(s, p, tk - t, spec.tolerance);
                s = tr.states.back();
                dead = tr.diverged;
            } catch (const StepSizeUnderflow&) {
                dead = true;
            }
            t = tk;
        }
        if (dead) {
            nan_fill(f, 7);
            res.gaps.push_back(k);
        } else {
            append(f, {s.a1.real(), s.a1.imag(), s.a2.real(), s.a2.imag(), s.b.real(), s.b.imag()});
        }
        w.row(f);
        ++res.rows;
    }
    if (!dead) res.summary["final_relative_residual"] = relative_residual(s, p);
    return res;
}

inline RunResult run_potential(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    check_axes(spec, {"u1", "u2"});
    const SweepAxis* a1 = find_axis(spec, "u1");
    if (!a1) throw ConfigError("potential needs --sweep u1:min:max:n");
    const SweepAxis* a2 = find_axis(spec, "u2");
    if (!a2) a2 = a1;
    const auto coef = coefficient_source(spec);
    const auto surf = potential_2d({a1->min, a1->max, a1->n}, {a2->min, a2->max, a2->n}, coef);
    CsvWriter w(os, {"u1", "u2", "V"});
    for (std::size_t i = 0; i < a1->n; ++i)
        for (std::size_t j = 0; j < a2->n; ++j) {
            w.row(std::vector<double>{a1->at(i), a2->at(j), surf.values[i * a2->n + j]});
            ++res.rows;
        }
    res.summary["minima"] = minima_json(surf.minima);
    res.summary["symmetry_broken"] = surf.symmetry_broken;
    return res;
}

inline RunResult run_potential1d(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    check_axes(spec, {"u1"});
    if (spec.sweeps.size() != 1) throw ConfigError("potential1d takes one --sweep u1:min:max:n");
    const auto& a = spec.sweeps.front();
    const auto coef = coefficient_source(spec);
    const auto pot = potential_1d({a.min, a.max, a.n}, coef);
    CsvWriter w(os, {"u1", "V"});
    for (std::size_t i = 0; i < a.n; ++i) {
        w.row(std::vector<double>{a.at(i), pot.values[i]});
        ++res.rows;
    }
    res.summary["minima"] = minima_json(pot.minima);
    res.summary["symmetry_broken"] = pot.symmetry_broken;
    return res;
}

inline RunResult run_flow(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    check_axes(spec, {"u1", "u2"});
    const SweepAxis* a1 = find_axis(spec, "u1");
    if (!a1) throw ConfigError("flow needs --sweep u1:min:max:n");
    const SweepAxis* a2 = find_axis(spec, "u2");
    if (!a2) a2 = a1;
    const auto coef = coefficient_source(spec);
    CsvWriter w(os, {"u1", "u2", "du1", "du2", "du1_reduced", "du2_reduced"});
    for (std::size_t i = 0; i < a1->n; ++i)
        for (std::size_t j = 0; j < a2->n; ++j) {
            const double u1 = a1->at(i), u2 = a2->at(j);
            const auto f = flow_field(u1, u2, coef);
            const auto r = flow_field_reduced(u1, u2, coef);
            w.row(std::vector<double>{u1, u2, rad_to_hz(f.du1), rad_to_hz(f.du2), rad_to_hz(r.du1), rad_to_hz(r.du2)});
            ++res.rows;
        }
    const auto [d78, d96] = reduced_flow_defects(coef);
    res.summary["eps7_plus_eps8_hz"] = rad_to_hz(d78);
    res.summary["eps9_minus_eps6_hz"] = rad_to_hz(d96);
    return res;
}

/// Coefficient dump in the key = value format accepted back by the potential commands.
inline RunResult run_coefficients(const SweepSpec& spec, std::ostream& os) {
    RunResult res;
    if (!spec.sweeps.empty()) throw ConfigError("coefficients takes no --sweep");
    const auto coef = coefficient_source(spec);
    for (const auto& k : coefficient_keys()) {
        os << k << " = " << fmt17(coefficient_value(coef, k)) << '\n';
        ++res.rows;
    }
    return res;
}

}  // namespace detail

/// Run one subcommand, writing its table to `os`.
inline RunResult run_to_stream(const SweepSpec& spec, std::ostream& os) {
    const auto& s = spec.subcommand;
    RunResult r;
    if (s == "steady") r = detail::run_steady(spec, os, spec.branch);
    else if (s == "bistability") r = detail::run_steady(spec, os, BranchPolicy::all);
    else if (s == "stability") r = detail::run_stability(spec, os);
    else if (s == "gain") r = detail::run_gain(spec, os);
    else if (s == "g2") r = detail::run_g2(spec, os);
    else if (s == "spectra") r = detail::run_spectra(spec, os);
    else if (s == "integrate") r = detail::run_integrate(spec, os);
    else if (s == "potential") r = detail::run_potential(spec, os);
    else if (s == "potential1d") r = detail::run_potential1d(spec, os);
    else if (s == "flow") r = detail::run_flow(spec, os);
    else if (s == "coefficients") r = detail::run_coefficients(spec, os);
    else throw ConfigError("unknown subcommand '" + s + "'");
    r.status = r.gaps.empty() ? 0 : 2;
    return r;
}

inline std::string metadata_path(const std::string& out) { return out + ".meta.json"; }

/// Resolved parameter set: every key of the active set, with defaults filled in.
inline nlohmann::ordered_json resolved_params(const std::vector<KeyValue>& kvs) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    const bool coeff = is_coefficient_file(kvs);
    const auto& keys = coeff ? coefficient_keys() : system_keys();
    std::map<std::string, double> given;
    for (const auto& kv : kvs) given[kv.key] = kv.value;
    const SystemParams defaults;
    const LasingCoefficients zero;
    for (const auto& k : keys) {
        if (auto it = given.find(k); it != given.end()) j[k] = it->second;
        else if (coeff) j[k] = coefficient_value(zero, k);
        else if (k == "omega_drive_hz" || k == "delta_hz" || k == "temperature_k" || k == "geometry_factor")
            j[k] = system_key_value(defaults, k);
    }
    return j;
}

inline nlohmann::ordered_json metadata(const SweepSpec& spec, const RunResult& r) {
    nlohmann::ordered_json j;
    j["software"] = "phonolase";
    j["version"] = kVersion;
    j["subcommand"] = spec.subcommand;
    j["param_set"] = is_coefficient_file(spec.params) ? "coefficients" : "system";
    j["params"] = resolved_params(spec.params);
    auto sw = nlohmann::ordered_json::array();
    for (const auto& a : spec.sweeps) sw.push_back({{"key", a.key}, {"min", a.min}, {"max", a.max}, {"n", a.n}});
    j["sweeps"] = sw;
    j["branch"] = to_string(spec.branch);
    j["unstable"] = to_string(spec.unstable);
    j["eps3"] = to_string(spec.eps3);
    j["phase_rad"] = spec.phase;
    j["tolerance"] = spec.tolerance;
    j["output"] = spec.output_path;
    j["status"] = r.status;
    j["rows"] = r.rows;
    j["gaps"] = r.gaps;
    j["summary"] = r.summary;
    return j;
}

/// Run and write `output_path` plus its sidecar.
inline RunResult run(const SweepSpec& spec) {
    if (spec.output_path.empty()) throw ConfigError("--out is required");
    std::ostringstream buf;
    const RunResult r = run_to_stream(spec, buf);
    {
        std::ofstream out(spec.output_path, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + spec.output_path + "'");
        out << buf.str();
        if (!out) throw ConfigError("write failed for '" + spec.output_path + "'");
    }
    std::ofstream meta(metadata_path(spec.output_path), std::ios::binary);
    if (!meta) throw ConfigError("cannot write '" + metadata_path(spec.output_path) + "'");
    meta << metadata(spec, r).dump(2) << '\n';
    return r;
}

/// Rebuild the run described by a sidecar file.
inline SweepSpec spec_from_metadata(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
        SweepSpec s;
        s.subcommand = j.at("subcommand").get<std::string>();
        for (const auto& [k, v] : j.at("params").items()) s.params.push_back({k, v.get<double>(), 0});
        for (const auto& a : j.at("sweeps"))
            s.sweeps.push_back({a.at("key").get<std::string>(), a.at("min").get<double>(), a.at("max").get<double>(),
                                a.at("n").get<std::size_t>()});
        s.branch = parse_branch_policy(j.at("branch").get<std::string>());
        s.unstable = parse_unstable_policy(j.at("unstable").get<std::string>());
        s.eps3 = parse_eps3_form(j.at("eps3").get<std::string>());
        s.phase = j.at("phase_rad").get<double>();
        s.tolerance = j.at("tolerance").get<double>();
        s.output_path = j.at("output").get<std::string>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad metadata file '" + path + "': " + e.what());
    }
}

}  // namespace phonolase
