#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "phonolase/lasing.hpp"
#include "phonolase/stability.hpp"
#include "phonolase/steady_state.hpp"
#include "phonolase/sweep.hpp"
#include "support.hpp"

using namespace phonolase;

namespace {

SystemParams offset_params(double delta_over_g, double gamma_c_hz) {
    SystemParams p = testsupport::baseline();
    p.g = hz_to_rad(12.2e6);
    p.gamma_c = hz_to_rad(gamma_c_hz);
    p.delta_drive = delta_over_g * p.g;
    return p;
}

}  // namespace

TEST(Bistability, FoldOpensThreeBranchRegionAtHighDrive) {
    const SystemParams p = testsupport::baseline();
    BistabilityOptions opt;
    opt.threads = 4;
    const auto sw = sweep_bistability(p, hz_to_rad(1.0e12), hz_to_rad(1.1e12), 41, opt);
    std::size_t most = 0;
    for (const auto& b : sw.branches_per_point) most = std::max(most, b.size());
    EXPECT_GE(most, 3u);
    ASSERT_EQ(sw.fold_points.size(), 1u);
    EXPECT_GT(sw.fold_points[0], hz_to_rad(1.05e12));
    EXPECT_LT(sw.fold_points[0], hz_to_rad(1.06e12));
    EXPECT_EQ(sw.branches_per_point.front().size(), 1u);
    EXPECT_EQ(sw.branches_per_point.back().size(), 3u);
    EXPECT_TRUE(sw.gaps.empty());
}

TEST(Bistability, BranchTagsAgreeWithTimeIntegration) {
    const SystemParams p = testsupport::baseline().with_drive(hz_to_rad(1.06e12));
    const auto brs = enumerate_fixed_points(p);
    ASSERT_EQ(brs.size(), 3u);
    std::size_t seed = 1;
    for (auto br : brs) {
        const auto rep = classify(br, p);
        EXPECT_EQ(testsupport::perturbation_grows(br, p, rep.max_re, seed++), !rep.stable) << std::abs(br.b_ss);
    }
}

TEST(Bistability, SingleBranchAtLowDrive) {
    const auto sw = sweep_bistability(testsupport::baseline(), 0.0, hz_to_rad(40e6), 41);
    for (const auto& b : sw.branches_per_point) EXPECT_EQ(b.size(), 1u);
}

TEST(Followed, HopfPointOnBaselineBranch) {
    std::vector<double> grid;
    for (int k = 0; k <= 100; ++k) grid.push_back(hz_to_rad(0.1e9 * k));
    const auto s = stability_sweep(testsupport::baseline(), grid);
    ASSERT_EQ(s.crossings.size(), 1u);
    EXPECT_NEAR(rad_to_hz(s.crossings[0]), 7.93e9, 0.02e9);
    EXPECT_TRUE(s.gaps.empty());
}

TEST(Followed, TagsAgreeWithTimeIntegrationAlongBranch) {
    const SystemParams base = testsupport::baseline();
    std::size_t seed = 10;
    for (double f : {2e9, 6e9, 7.8e9, 8.1e9, 9e9}) {
        const SystemParams p = base.with_drive(hz_to_rad(f));
        auto br = *continuation_branch(p);
        const auto rep = classify(br, p);
        EXPECT_EQ(testsupport::perturbation_grows(br, p, rep.max_re, seed++), !rep.stable) << f;
    }
}

TEST(LasingWindow, HalfDetuningWiderThanFullDetuning) {
    const auto half = lasing_window(offset_params(0.5, 4.8e6), 0.0, hz_to_rad(12e9), 121);
    const auto full = lasing_window(offset_params(1.0, 4.8e6), 0.0, hz_to_rad(12e9), 121);
    ASSERT_TRUE(half.found);
    EXPECT_GT(half.width(), full.width());
}

TEST(LasingWindow, SlowerDecayContainsFasterDecay) {
    const auto slow = lasing_window(offset_params(0.5, 2.8e6), 0.0, hz_to_rad(12e9), 121);
    const auto fast = lasing_window(offset_params(0.5, 4.8e6), 0.0, hz_to_rad(12e9), 121);
    ASSERT_TRUE(slow.found && fast.found);
    EXPECT_LT(slow.lower, fast.lower);
    EXPECT_GT(slow.upper, fast.upper);
}

TEST(LasingWindow, UpperEdgeIsTheStabilityCrossing) {
    const SystemParams p = offset_params(0.5, 4.8e6);
    const auto w = lasing_window(p, 0.0, hz_to_rad(12e9), 121);
    std::vector<double> grid;
    for (int k = 0; k <= 120; ++k) grid.push_back(hz_to_rad(0.1e9 * k));
    const auto s = stability_sweep(p, grid);
    ASSERT_FALSE(s.crossings.empty());
    EXPECT_NEAR(w.upper / s.crossings.front(), 1.0, 2e-3);
}

TEST(Gain, ThresholdCrossingsMatchLinearGainSign) {
    // sign changes of G - gamma_m along the followed branch and of alpha' coincide to a grid step
    const SystemParams p = offset_params(0.5, 4.8e6);
    std::vector<double> grid;
    for (int k = 0; k <= 120; ++k) grid.push_back(hz_to_rad(0.1e9 * k));
    const auto pts = follow_sweep(p, grid);
    std::vector<int> sg, sa;
    for (const auto& pt : pts) {
        const SystemParams q = p.with_drive(pt.omega);
        const double g = gain_full(q, jz_adiabatic(q, cplx{}), 0.0);
        sg.push_back(g > q.gamma_m);
        sa.push_back(cubic_coefficients(q).alpha_prime > 0.0);
    }
    std::vector<std::size_t> cg, ca;
    for (std::size_t k = 1; k < sg.size(); ++k) {
        if (sg[k] != sg[k - 1]) cg.push_back(k);
        if (sa[k] != sa[k - 1]) ca.push_back(k);
    }
    ASSERT_EQ(cg.size(), ca.size());
    for (std::size_t i = 0; i < cg.size(); ++i) EXPECT_LE(std::abs(long(cg[i]) - long(ca[i])), 1);
}
