#include <gtest/gtest.h>

#include <cmath>

#include "phonolase/dynamics.hpp"
#include "phonolase/steady_state.hpp"
#include "support.hpp"

using namespace phonolase;

TEST(Rhs, LinearInDriveWithoutCoupling) {
    SystemParams p = testsupport::baseline();
    p.chi = 0.0;
    p.omega_drive = cplx(3.0e8, -1.0e8);
    const SemiclassicalState s{{1.0, 2.0}, {-0.5, 0.25}, {3.0, -1.0}};
    const auto r = rhs(s, p);
    const cplx f = p.omega_drive / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(r.a1 - (-cplx(p.gamma_c / 2, p.g - p.delta_drive) * s.a1 + f)), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(r.a2 - (-cplx(p.gamma_c / 2, -(p.g + p.delta_drive)) * s.a2 + f)), 0.0, 1e-6);
    EXPECT_NEAR(std::abs(r.b - (-cplx(p.gamma_m, p.omega_m) * s.b)), 0.0, 1e-6);
}

TEST(Rhs, StateRoundTripThroughRealVector) {
    testsupport::Gen gen(2);
    for (int i = 0; i < 20; ++i) {
        const SemiclassicalState s{gen.complex_in_disc(10), gen.complex_in_disc(10), gen.complex_in_disc(10)};
        const auto t = SemiclassicalState::from_real(s.to_real());
        EXPECT_EQ(t.a1, s.a1);
        EXPECT_EQ(t.a2, s.a2);
        EXPECT_EQ(t.b, s.b);
    }
}

TEST(Integrate, MatchesClosedFormWithoutCoupling) {
    SystemParams p = testsupport::baseline();
    p.chi = 0.0;
    p.omega_drive = hz_to_rad(2e6);
    const SemiclassicalState s0{{0.0, 0.0}, {0.0, 0.0}, {1.0, 0.5}};
    const double T = 2e-7;
    const auto tr = integrate(s0, p, T, 1e-11);
    const cplx f = p.omega_drive / std::sqrt(2.0);
    const cplx l1{p.gamma_c / 2, p.g - p.delta_drive}, l2{p.gamma_c / 2, -(p.g + p.delta_drive)};
    const cplx lm{p.gamma_m, p.omega_m};
    const auto& s = tr.states.back();
    EXPECT_EQ(tr.times.back(), T);
    EXPECT_NEAR(std::abs(s.a1 - f / l1 * (1.0 - std::exp(-l1 * T))), 0.0, 1e-8 * std::abs(f / l1));
    EXPECT_NEAR(std::abs(s.a2 - f / l2 * (1.0 - std::exp(-l2 * T))), 0.0, 1e-8 * std::abs(f / l2));
    EXPECT_NEAR(std::abs(s.b - s0.b * std::exp(-lm * T)), 0.0, 1e-8);
}

TEST(Integrate, ConvergesToStableFixedPoint) {
    SystemParams p = testsupport::baseline();
    p.omega_drive = hz_to_rad(3e9);
    const auto br = continuation_branch(p);
    ASSERT_TRUE(br.has_value());
    const auto tr = integrate(SemiclassicalState{}, p, 2e-4, 1e-10);
    EXPECT_FALSE(tr.diverged);
    const auto& s = tr.states.back();
    EXPECT_NEAR(std::abs(s.b - br->b_ss) / std::abs(br->b_ss), 0.0, 1e-5);
}

TEST(Integrate, FixedPointIsStationary) {
    testsupport::Gen gen(8);
    for (int i = 0; i < 5; ++i) {
        const SystemParams p = gen.params();
        const auto br = continuation_branch(p);
        if (!br) continue;
        const auto tr = integrate(br->state(), p, 1e-7, 1e-12);
        const auto d = tr.states.back() - br->state();
        EXPECT_LT(d.max_abs(), 1e-6 * std::max(1.0, br->state().max_abs()));
    }
}

TEST(Integrate, ErrorShrinksWithTolerance) {
    SystemParams p = testsupport::baseline();
    p.omega_drive = hz_to_rad(5e9);
    const double T = 5e-7;
    const auto ref = integrate(SemiclassicalState{}, p, T, 1e-13).states.back();
    const auto loose = integrate(SemiclassicalState{}, p, T, 1e-6).states.back();
    const auto tight = integrate(SemiclassicalState{}, p, T, 1e-10).states.back();
    EXPECT_LT((tight - ref).max_abs(), (loose - ref).max_abs());
}

TEST(Integrate, DivergenceIsFlaggedNotThrown) {
    SystemParams p = testsupport::baseline();
    p.omega_drive = hz_to_rad(1e9);
    IntegrateOptions opt;
    opt.divergence_bound = 1e-3;  // trips quickly
    const auto tr = integrate(SemiclassicalState{}, p, 1e-5, 1e-8, opt);
    EXPECT_TRUE(tr.diverged);
}

TEST(Integrate, RejectsBadArguments) {
    const auto p = testsupport::baseline();
    EXPECT_THROW(integrate(SemiclassicalState{}, p, 0.0, 1e-8), InvalidParameter);
    EXPECT_THROW(integrate(SemiclassicalState{}, p, 1.0, 0.0), InvalidParameter);
}

TEST(Integrate, StepBudgetExhaustionThrows) {
    SystemParams p = testsupport::baseline();
    p.omega_drive = hz_to_rad(1e9);
    IntegrateOptions opt;
    opt.max_steps = 10;
    EXPECT_THROW(integrate(SemiclassicalState{}, p, 1e-3, 1e-10, opt), StepSizeUnderflow);
}

TEST(Residual, ZeroAtExactFixedPoint) {
    SystemParams p = testsupport::baseline();
    p.chi = 0.0;
    p.omega_drive = hz_to_rad(1e7);
    const auto s = state_from_phonon(p, 0.0);
    EXPECT_LT(relative_residual(s, p), 1e-15);
}
