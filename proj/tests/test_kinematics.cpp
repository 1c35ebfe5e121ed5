#include <random>

#include <gtest/gtest.h>

#include "volerr/kinematics.hpp"

using namespace volerr;

namespace {

JointPose random_pose(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> lin(-300.0, 300.0), a(-deg_to_rad(90), deg_to_rad(90)), c(-kPi, kPi);
    return {lin(rng), lin(rng), lin(rng), a(rng), c(rng)};
}

LinkErrorVector random_link_errors(std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> ang(-100e-6, 100e-6), off(-0.05, 0.05);
    LinkErrorVector dq;
    for (std::size_t i = 0; i < 7; ++i) dq[i] = scale * ang(rng);
    dq[7] = scale * off(rng);
    return dq;
}

std::vector<JointPose> random_poses(std::mt19937_64& rng, std::size_t n) {
    std::vector<JointPose> p(n);
    for (auto& q : p) q = random_pose(rng);
    return p;
}

DeviationMatrix linear_deviations(const std::vector<JointPose>& poses, const LinkErrorVector& dq,
                                  const MachineGeometry& g) {
    DeviationMatrix d(static_cast<Eigen::Index>(poses.size()), 3);
    for (std::size_t k = 0; k < poses.size(); ++k)
        d.row(static_cast<Eigen::Index>(k)) = (link_jacobian(poses[k], g) * dq.as_vector()).transpose();
    return d;
}

}  // namespace

TEST(Dkt, HomePoseByHand) {
    const MachineGeometry g;
    // tool nose at (0, 0, 600 - 200); ball at a_pivot + c_pivot + ball_offset
    const Vec3 tau = dkt({}, g);
    EXPECT_NEAR(tau.x(), -60.0, 1e-12);
    EXPECT_NEAR(tau.y(), 0.0, 1e-12);
    EXPECT_NEAR(tau.z(), 400.0 - 330.0, 1e-12);
}

TEST(Dkt, LinearAxesTranslateRigidly) {
    const MachineGeometry g;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        JointPose p = random_pose(rng);
        const Vec3 base = dkt(p, g);
        const double dx = 3.0, dy = -7.0, dz = 11.0;
        p.x += dx;
        p.y += dy;
        p.z += dz;
        // X and Z move the tool, Y moves the part
        EXPECT_TRUE((dkt(p, g) - base).isApprox(Vec3(dx, -dy, dz), 1e-9));
    }
}

TEST(Dkt, RotationsPreserveBallDistanceFromAPivot) {
    const MachineGeometry g;
    std::mt19937_64 rng(2);
    const double r0 = (g.c_pivot + g.ball_offset).norm();
    for (int i = 0; i < 100; ++i) {
        const JointPose p = random_pose(rng);
        const Vec3 tool(p.x, 0.0, p.z + g.spindle_home.z() - g.tool_length);
        const Vec3 ball = tool - dkt(p, g) - Vec3(0.0, p.y, 0.0);
        EXPECT_NEAR((ball - g.a_pivot).norm(), r0, 1e-9);
    }
}

TEST(Dkt, ZeroLinkErrorsGiveNominal) {
    const MachineGeometry g;
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i) {
        const JointPose p = random_pose(rng);
        EXPECT_EQ(dkt_with_errors(p, g, LinkErrorVector{}), dkt(p, g));
    }
}

TEST(Dkt, RejectsNonFinitePose) {
    const MachineGeometry g;
    JointPose p;
    p.a = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(dkt(p, g), DataError);
}

TEST(Geometry, RejectsBadTilt) {
    MachineGeometry g;
    g.a_tilt = 0.0;
    EXPECT_THROW(g.validate(), ConfigError);
    g.a_tilt = deg_to_rad(90.0);
    EXPECT_THROW(g.validate(), ConfigError);
}

TEST(LinkJacobian, OffsetColumnIsUnitLength) {
    const MachineGeometry g;
    std::mt19937_64 rng(4);
    for (int i = 0; i < 50; ++i) EXPECT_NEAR(link_jacobian(random_pose(rng), g).col(7).norm(), 1.0, 1e-12);
}

// First-order model: the remainder shrinks quadratically with the error size.
TEST(LinkJacobian, LinearisationRemainderIsSecondOrder) {
    const MachineGeometry g;
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const JointPose p = random_pose(rng);
        const LinkErrorVector dq = random_link_errors(rng);
        auto remainder = [&](double s) {
            LinkErrorVector d;
            for (std::size_t k = 0; k < 8; ++k) d[k] = s * dq[k];
            return (dkt_with_errors(p, g, d) - dkt(p, g) - link_jacobian(p, g) * d.as_vector()).norm();
        };
        const double r1 = remainder(1.0), r2 = remainder(0.5);
        if (r1 < 1e-10) continue;  // below round-off
        EXPECT_NEAR(r1 / r2, 4.0, 0.3);
    }
}

TEST(Identify, NoiselessRecovery) {
    const MachineGeometry g;
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 10; ++rep) {
        const auto poses = random_poses(rng, 300);
        const auto dq = random_link_errors(rng);
        const auto id = identify_link_errors(poses, linear_deviations(poses, dq, g), g);
        for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(id.dq[i], dq[i], 1e-12);
        EXPECT_LT(id.residual_rms, 1e-12);
        EXPECT_EQ(id.rank, 8u);
        EXPECT_EQ(id.residuals.rows(), 300);
    }
}

TEST(Identify, NullMachineGivesZeros) {
    const MachineGeometry g;
    std::mt19937_64 rng(7);
    const auto poses = random_poses(rng, 100);
    const auto id = identify_link_errors(poses, DeviationMatrix::Zero(100, 3), g);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(id.dq[i], 0.0);
}

// The exact model is nonlinear; at realistic magnitudes the first-order fit
// still lands within a fraction of a percent.
TEST(Identify, NonlinearDataCloseToTruth) {
    const MachineGeometry g;
    std::mt19937_64 rng(8);
    const auto poses = random_poses(rng, 500);
    const auto dq = random_link_errors(rng);
    DeviationMatrix d(500, 3);
    for (std::size_t k = 0; k < poses.size(); ++k)
        d.row(static_cast<Eigen::Index>(k)) = (dkt_with_errors(poses[k], g, dq) - dkt(poses[k], g)).transpose();
    const auto id = identify_link_errors(poses, d, g);
    double scale = 0.0;
    for (std::size_t i = 0; i < 8; ++i) scale = std::max(scale, std::abs(dq[i]));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(id.dq[i], dq[i], 1e-3 * scale);
}

TEST(Identify, StandardErrorsScaleWithNoise) {
    const MachineGeometry g;
    std::mt19937_64 rng(9);
    const auto poses = random_poses(rng, 1000);
    std::array<double, 8> se1{}, se2{};
    for (double sigma : {1e-4, 2e-4}) {
        std::mt19937_64 r(10);
        std::normal_distribution<double> noise(0.0, sigma);
        DeviationMatrix d(1000, 3);
        for (Eigen::Index k = 0; k < 1000; ++k) d.row(k) << noise(r), noise(r), noise(r);
        const auto id = identify_link_errors(poses, d, g);
        (sigma < 1.5e-4 ? se1 : se2) = id.standard_errors;
    }
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(se2[i] / se1[i], 2.0, 1e-9);
}

TEST(Identify, FrozenRotaryAxesAreRankDeficient) {
    const MachineGeometry g;
    std::mt19937_64 rng(11);
    auto poses = random_poses(rng, 200);
    for (auto& p : poses) {
        p.a = 0.3;
        p.c = 1.1;
    }
    EXPECT_THROW(identify_link_errors(poses, DeviationMatrix::Zero(200, 3), g), RankDeficientError);
}

TEST(Identify, RejectsBadInput) {
    const MachineGeometry g;
    std::mt19937_64 rng(12);
    const auto poses = random_poses(rng, 20);
    EXPECT_THROW(identify_link_errors(poses, DeviationMatrix::Zero(19, 3), g), DataError);
    const std::vector<JointPose> few(poses.begin(), poses.begin() + 5);
    EXPECT_THROW(identify_link_errors(few, DeviationMatrix::Zero(5, 3), g), DataError);
    DeviationMatrix bad = DeviationMatrix::Zero(20, 3);
    bad(3, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(identify_link_errors(poses, bad, g), DataError);
}
