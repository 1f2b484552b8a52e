#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "phonolase/branch.hpp"
#include "phonolase/dynamics.hpp"
#include "phonolase/params.hpp"

namespace testsupport {

using phonolase::hz_to_rad;
using phonolase::SystemParams;

/// Parameters used throughout the examples: 23.4 MHz mechanics, half-splitting detuning.
inline SystemParams baseline(double delta_over_g = 0.5) {
    SystemParams p;
    p.omega_m = hz_to_rad(23.4e6);
    p.chi = hz_to_rad(1570.0);
    p.gamma_m = hz_to_rad(0.125e6);
    p.gamma_c = hz_to_rad(4.8e6);
    p.g = hz_to_rad(11.7e6);
    p.delta_drive = delta_over_g * p.g;
    p.temperature = 1e-3;
    return p;
}

/// Small seeded generator for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
    double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
    int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
    phonolase::cplx complex_in_disc(double r) { return std::polar(r * std::sqrt(uniform(0, 1)), uniform(-phonolase::kPi, phonolase::kPi)); }

    /// Physical parameter set around the baseline: rates within a factor 2, any detuning sign.
    SystemParams params() {
        SystemParams p = baseline();
        p.omega_m = hz_to_rad(log_uniform(10e6, 40e6));
        p.chi = hz_to_rad(log_uniform(500.0, 3000.0));
        p.gamma_m = hz_to_rad(log_uniform(0.05e6, 0.3e6));
        p.gamma_c = hz_to_rad(log_uniform(2e6, 10e6));
        p.g = hz_to_rad(log_uniform(5e6, 20e6));
        p.delta_drive = uniform(-1.5, 1.5) * p.g;
        p.temperature = log_uniform(1e-4, 1e-2);
        p.omega_drive = std::polar(hz_to_rad(log_uniform(1e6, 8e9)), uniform(-phonolase::kPi, phonolase::kPi));
        return p;
    }

private:
    std::mt19937_64 rng_;
};

/// Kick a fixed point along a random direction and integrate for `rates` e-folds of
/// the slowest linear rate; true when the kick has grown.
inline bool perturbation_grows(const phonolase::SteadyStateBranch& br, const SystemParams& p, double max_re,
                               std::uint64_t seed, double rates = 8.0) {
    using namespace phonolase;
    Gen gen(seed);
    const auto s0 = br.state();
    const double size = 1e-6 * std::max(1.0, s0.max_abs());
    const SemiclassicalState kick{gen.complex_in_disc(size), gen.complex_in_disc(size), gen.complex_in_disc(size)};
    const double t_end = rates / std::max(std::abs(max_re), 1e-3 * p.gamma_m);
    IntegrateOptions opt;
    opt.record_every = 1u << 30;
    const auto tr = integrate(s0 + kick, p, t_end, 1e-11, opt);
    if (tr.diverged) return true;
    return (tr.states.back() - s0).max_abs() > kick.max_abs();
}

inline std::string params_path(const std::string& name) { return std::string(PHONOLASE_PARAMS_DIR) + "/" + name; }

}  // namespace testsupport
