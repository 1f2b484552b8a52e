#pragma once

#include <optional>

#include "phonolase/dynamics.hpp"

namespace phonolase {

/// A fixed point of the mean-field equations.
struct SteadyStateBranch {
    cplx a1_ss{};
    cplx a2_ss{};
    cplx b_ss{};
    double residual = 0.0;        // relative, see relative_residual()
    std::optional<bool> stable;   // filled by classify()

    SemiclassicalState state() const { return {a1_ss, a2_ss, b_ss}; }
    static SteadyStateBranch from_state(const SemiclassicalState& s, double residual) {
        return {s.a1, s.a2, s.b, residual, std::nullopt};
    }
    /// Half the supermode population difference.
    double jz() const { return 0.5 * (std::norm(a1_ss) - std::norm(a2_ss)); }
};

}  // namespace phonolase
