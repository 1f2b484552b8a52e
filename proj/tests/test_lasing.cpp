#include <gtest/gtest.h>

#include <cmath>

#include "phonolase/lasing.hpp"
#include "phonolase/steady_state.hpp"
#include "support.hpp"

using namespace phonolase;

TEST(Inversion, LeadingTermEqualsSlavedInversionAtZeroPhonon) {
    testsupport::Gen gen(51);
    for (int i = 0; i < 40; ++i) {
        const SystemParams p = gen.params();
        const auto x = population_inversion_expansion(p, cplx{});
        const double exact = jz_adiabatic(p, cplx{});
        EXPECT_NEAR(x.j0, exact, 1e-12 * std::abs(exact) + 1e-300);
    }
}

TEST(Inversion, ExpansionErrorVanishesWithPhononAmplitude) {
    // at least linear decay of |Jz(b) - expansion(b)| as b -> 0
    testsupport::Gen gen(52);
    for (int i = 0; i < 10; ++i) {
        const SystemParams p = gen.params();
        const auto d = derive_scalars(p);
        const cplx dir = std::polar(1.0, gen.uniform(-kPi, kPi));
        const double b0 = 1e-2 * std::abs(d.eps1) / p.coupling();
        double prev = INFINITY;
        for (double s : {1.0, 0.1, 0.01}) {
            const cplx b = s * b0 * dir;
            const double err = std::abs(jz_adiabatic(p, b) - population_inversion_expansion(p, b).jz);
            EXPECT_LT(err, 0.15 * prev) << "case " << i << " s=" << s;
            prev = err;
        }
    }
}

TEST(Inversion, NearThresholdFlag) {
    const SystemParams p = testsupport::baseline();
    const auto d = derive_scalars(p);
    const double edge2 = 0.1 * std::norm(d.eps1) / (4.0 * d.chi2);
    EXPECT_TRUE(near_threshold_valid(p, 0.99 * edge2));
    EXPECT_FALSE(near_threshold_valid(p, 1.01 * edge2));
}

TEST(Gain, FullEqualsSimpleWhenDetuningOrOffsetVanishes) {
    testsupport::Gen gen(61);
    for (int i = 0; i < 50; ++i) {
        SystemParams p = gen.params();
        if (i % 2) p.delta_drive = 0.0;
        else p.omega_m = 2.0 * p.g;
        const double jz = gen.uniform(-1e6, 1e6), n = gen.uniform(0, 1e3);
        EXPECT_EQ(gain_full(p, jz, n), gain_simple(p, jz));
    }
}

TEST(Gain, FullDiffersOtherwise) {
    SystemParams p = testsupport::baseline();
    p.g = hz_to_rad(12.2e6);
    p.delta_drive = p.g / 2;
    p.omega_drive = hz_to_rad(5e9);
    EXPECT_NE(gain_full(p, 1e5, 0.0), gain_simple(p, 1e5));
}

TEST(Gain, LinearGainIsRealPartOfG1) {
    testsupport::Gen gen(62);
    for (int i = 0; i < 50; ++i) {
        const auto c = cubic_coefficients(gen.params());
        EXPECT_EQ(c.alpha_prime, c.G[1].real());
    }
}

TEST(Gain, LinearGainMatchesFullGainAtZeroPhonon) {
    // eta3 - gamma_m and G(b = 0) - gamma_m coincide with the corrected eps3
    testsupport::Gen gen(63);
    for (int i = 0; i < 50; ++i) {
        const SystemParams p = gen.params();
        const auto c = cubic_coefficients(p);
        const double g = gain_full(p, c.j0, 0.0);
        EXPECT_NEAR(c.alpha_prime + p.gamma_m, g, 1e-10 * (std::abs(g) + p.gamma_m));
    }
}

TEST(Gain, UncorrectedEps3BreaksThatAgreement) {
    SystemParams p = testsupport::baseline();
    p.g = hz_to_rad(12.2e6);
    p.delta_drive = p.g / 2;
    p.omega_drive = hz_to_rad(6e9);
    const auto c = cubic_coefficients(p, {Eps3Form::uncorrected});
    const double g = gain_full(p, c.j0, 0.0);
    EXPECT_GT(std::abs(c.alpha_prime + p.gamma_m - g), 1e-3 * std::abs(g));
}

TEST(Gain, ThresholdComparesAgainstMechanicalDamping) {
    const SystemParams p = testsupport::baseline();
    EXPECT_TRUE(above_threshold(p, 1.01 * p.gamma_m));
    EXPECT_FALSE(above_threshold(p, p.gamma_m));
}

TEST(Flow, JacobianAtOriginFromLinearTerms) {
    const auto c = coefficients_from(read_key_value_file(testsupport::params_path("planar_b.txt")));
    const auto J = flow_jacobian_origin(c);
    const double h = 1e-3;
    const auto fx = flow_field(h, 0, c), fmx = flow_field(-h, 0, c);
    const auto fy = flow_field(0, h, c), fmy = flow_field(0, -h, c);
    EXPECT_NEAR((fx.du1 - fmx.du1) / (2 * h), J[0], 1e-6 * std::abs(J[0]));
    EXPECT_NEAR((fy.du1 - fmy.du1) / (2 * h), J[1], 1e-6 * std::abs(J[0]));
    EXPECT_NEAR((fx.du2 - fmx.du2) / (2 * h), J[2], 1e-6 * std::abs(J[0]));
    EXPECT_NEAR((fy.du2 - fmy.du2) / (2 * h), J[3], 1e-6 * std::abs(J[0]));
}

TEST(Flow, ReducedIdentitiesHoldAtZeroOffset) {
    testsupport::Gen gen(64);
    for (int i = 0; i < 20; ++i) {
        SystemParams p = gen.params();
        p.omega_m = 2.0 * p.g;
        const auto c = cubic_coefficients(p);
        const auto [d78, d96] = reduced_flow_defects(c);
        const double s = std::abs(c.epsB[6]) + std::abs(c.epsB[8]) + 1e-300;
        EXPECT_LT(d78, 1e-12 * s);
        EXPECT_LT(d96, 1e-12 * s);
    }
}

TEST(Potential, GradientAndHessianMatchFiniteDifferences) {
    testsupport::Gen gen(71);
    for (const char* f : {"planar_a.txt", "planar_b.txt", "planar_c.txt", "planar_d.txt"}) {
        const auto c = coefficients_from(read_key_value_file(testsupport::params_path(f)));
        for (int i = 0; i < 10; ++i) {
            const double u1 = gen.uniform(-300, 300), u2 = gen.uniform(-300, 300), h = 1e-3;
            const auto g = potential_2d_gradient(u1, u2, c);
            const auto H = potential_2d_hessian(u1, u2, c);
            const double gx = (potential_2d_value(u1 + h, u2, c) - potential_2d_value(u1 - h, u2, c)) / (2 * h);
            const double gy = (potential_2d_value(u1, u2 + h, c) - potential_2d_value(u1, u2 - h, c)) / (2 * h);
            const double sg = std::abs(g[0]) + std::abs(g[1]);
            EXPECT_NEAR(gx, g[0], 1e-6 * sg);
            EXPECT_NEAR(gy, g[1], 1e-6 * sg);
            const auto gp = potential_2d_gradient(u1 + h, u2, c), gm = potential_2d_gradient(u1 - h, u2, c);
            const auto gq = potential_2d_gradient(u1, u2 + h, c), gn = potential_2d_gradient(u1, u2 - h, c);
            const double sh = std::abs(H[0]) + std::abs(H[1]) + std::abs(H[2]);
            EXPECT_NEAR((gp[0] - gm[0]) / (2 * h), H[0], 1e-6 * sh);
            EXPECT_NEAR((gq[0] - gn[0]) / (2 * h), H[1], 1e-6 * sh);
            EXPECT_NEAR((gp[1] - gm[1]) / (2 * h), H[1], 1e-6 * sh);
            EXPECT_NEAR((gq[1] - gn[1]) / (2 * h), H[2], 1e-6 * sh);
        }
    }
}

TEST(Potential, OneDimensionalForceIsMinusDerivative) {
    testsupport::Gen gen(72);
    for (const char* f : {"line_a.txt", "line_b.txt", "line_c.txt", "line_d.txt"}) {
        const auto c = coefficients_from(read_key_value_file(testsupport::params_path(f)));
        for (int i = 0; i < 10; ++i) {
            const double u = gen.uniform(-500, 500), h = 1e-3;
            const double fd = -(potential_1d_value(u + h, c) - potential_1d_value(u - h, c)) / (2 * h);
            EXPECT_NEAR(fd, potential_1d_force(u, c), 1e-6 * (std::abs(potential_1d_force(u, c)) + std::abs(c.eta[1])));
        }
    }
}

TEST(Potential, PlanarCaseCountsMinima) {
    auto count = [](const char* f) {
        const auto c = coefficients_from(read_key_value_file(testsupport::params_path(f)));
        return potential_2d({-400, 400, 161}, {-400, 400, 161}, c).minima.size();
    };
    EXPECT_EQ(count("planar_a.txt"), 1u);
    EXPECT_EQ(count("planar_b.txt"), 2u);
}

TEST(Potential, MinimaAreStationary) {
    const auto c = coefficients_from(read_key_value_file(testsupport::params_path("planar_b.txt")));
    const auto s = potential_2d({-400, 400, 161}, {-400, 400, 161}, c);
    for (const auto& m : s.minima) {
        const auto g = potential_2d_gradient(m.u1, m.u2, c);
        EXPECT_LT(std::hypot(g[0], g[1]), 1e-6 * std::abs(c.eta[1]));
    }
    EXPECT_TRUE(s.symmetry_broken);
}

TEST(Potential, SymmetricDoubleWellIsNotFlaggedAsBroken) {
    LasingCoefficients c;
    c.alpha_prime = 1.0;
    c.eta[7] = 1.0;
    const auto s = potential_1d({-3, 3, 601}, c);
    ASSERT_EQ(s.minima.size(), 2u);
    EXPECT_FALSE(s.symmetry_broken);
}
