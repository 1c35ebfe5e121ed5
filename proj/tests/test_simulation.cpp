#include <random>

#include <gtest/gtest.h>

#include "volerr/sim/config.hpp"

using namespace volerr;
using namespace volerr::sim;

namespace {

TrajectoryProgram demo_program(double feed) {
    TrajectoryProgram p;
    p.waypoints = demo_waypoints(MachineGeometry{});
    p.feed_mm_min = feed;
    return p;
}

std::vector<AxisVector> distinct_points(const TrajectoryProgram& p) {
    std::vector<AxisVector> pts;
    for (const auto& w : p.waypoints) {
        const AxisVector v = to_path_units(w);
        if (pts.empty() || (v - pts.back()).norm() > 1e-12) pts.push_back(v);
    }
    return pts;
}

// Random zig-zag programs for the planner properties.
TrajectoryProgram random_program(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> step(-40.0, 40.0), rot(-15.0, 15.0), feed(500.0, 20000.0);
    TrajectoryProgram p;
    JointPose q;
    p.waypoints.push_back(q);
    for (int i = 0; i < 6; ++i) {
        q.x += step(rng);
        q.y += step(rng);
        q.z += 0.25 * step(rng);
        q.a += deg_to_rad(rot(rng));
        q.c += deg_to_rad(rot(rng));
        p.waypoints.push_back(q);
    }
    p.feed_mm_min = feed(rng);
    p.corner_tolerance = std::uniform_real_distribution<double>(0.002, 0.05)(rng);
    return p;
}

}  // namespace

// Property: axis velocities, accelerations and path speed stay within their limits.
TEST(Planner, RespectsLimits) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto prog = trial == 0 ? demo_program(18896.0) : random_program(rng);
        const PathProfile path(prog);
        const auto lim = prog.effective_limits();
        const double h = 1e-5;
        for (double t = h; t < path.duration() - h; t += path.duration() / 3000.0) {
            const AxisVector v = (path.position(t + h) - path.position(t - h)) / (2 * h);
            const AxisVector a = path.acceleration(t);
            EXPECT_LE(v.norm(), prog.feed_mm_min / 60.0 * (1 + 1e-6)) << trial;
            for (int j = 0; j < 5; ++j) {
                EXPECT_LE(std::abs(v(j)), lim.velocity(j) * (1 + 1e-6)) << trial << " axis " << j;
                EXPECT_LE(std::abs(a(j)), lim.acceleration(j) * (1 + 1e-9)) << trial << " axis " << j;
            }
        }
        const auto pts = distinct_points(prog);
        EXPECT_LT((path.position(path.duration()) - pts.back()).norm(), 1e-9);
        EXPECT_LT((path.position(0.0) - pts.front()).norm(), 1e-12);
    }
}

// Property: on every axis the blend centre lies within the corner tolerance of its vertex.
TEST(Planner, CornersWithinTolerance) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto prog = random_program(rng);
        const PathProfile path(prog);
        const auto pts = distinct_points(prog);
        ASSERT_EQ(path.transitions().size(), pts.size() - 2);
        for (std::size_t i = 0; i < path.transitions().size(); ++i) {
            EXPECT_LE((path.position(path.transitions()[i]) - pts[i + 1]).cwiseAbs().maxCoeff(),
                      prog.corner_tolerance * (1 + 1e-9));
        }
    }
}

// Position is continuous and the acceleration integrates back to the position.
TEST(Planner, AccelerationMatchesSecondDifference) {
    const auto prog = demo_program(6000.0);
    const PathProfile path(prog);
    const double h = 2e-5;
    double worst = 0.0;
    for (double t = 0.01; t < path.duration() - 0.01; t += 0.0037) {
        const AxisVector fd = (path.position(t + h) - 2 * path.position(t) + path.position(t - h)) / (h * h);
        // skip samples straddling a straight-piece switch, where acceleration jumps
        const AxisVector a0 = path.acceleration(t - h), a1 = path.acceleration(t + h);
        if ((a0 - a1).norm() > 0.05 * std::max(1.0, a0.norm())) continue;
        worst = std::max(worst, (fd - path.acceleration(t)).norm() / std::max(1.0, path.acceleration(t).norm()));
    }
    EXPECT_LT(worst, 1e-3);
}

// With limits tied to a reference feed, a faster run is the same motion on a compressed clock.
TEST(Planner, RunsAreTimeScaledCopies) {
    auto slow = demo_program(2000.0), fast = demo_program(5000.0);
    slow.limits_feed_mm_min = fast.limits_feed_mm_min = 18896.0;
    const PathProfile ps(slow), pf(fast);
    const double r = 5000.0 / 2000.0;
    EXPECT_NEAR(ps.duration() / pf.duration(), r, 1e-9);
    for (double t = 0.0; t < pf.duration(); t += pf.duration() / 500.0) {
        EXPECT_LT((pf.position(t) - ps.position(t * r)).norm(), 1e-9);
        EXPECT_LT((pf.acceleration(t) - ps.acceleration(t * r) * r * r).norm(), 1e-6 * (1 + pf.acceleration(t).norm()));
    }
}

TEST(Planner, TagAndDwells) {
    auto prog = demo_program(3000.0);
    const auto plan = plan_trajectory(prog, 0.003);
    const auto& x = plan.setpoints.channel("X");
    const auto& y = plan.setpoints.channel("Y");
    const std::size_t tag = 1 + 33;  // home sample plus the dwell before the tag
    EXPECT_NEAR(x[tag] - x[0], 0.1, 1e-12);
    EXPECT_EQ(x[tag - 1], x[0]);
    EXPECT_EQ(x[tag + 1], x[0]);
    EXPECT_EQ(y[tag], y[0]);
    EXPECT_NEAR(plan.program_start_s, (tag + 1 + 33) * 0.003, 1e-12);
    EXPECT_NEAR(plan.setpoints.duration(), plan.program_start_s + std::ceil(plan.program_duration_s / 0.003) * 0.003 + 33 * 0.003,
                1e-9);

    prog.tag.enabled = false;
    EXPECT_DOUBLE_EQ(plan_trajectory(prog).program_start_s, 0.0);
    prog.waypoints.clear();
    EXPECT_THROW(plan_trajectory(prog), ConfigError);
}

TEST(Servo, FirstOrderRampIsExact) {
    const double rate = 1000.0, v = 50.0;
    std::vector<JointPose> p(300);
    for (std::size_t k = 0; k < p.size(); ++k) p[k].x = v * static_cast<double>(k) / rate;
    ServoParams sp;
    const auto y = servo_response(joint_signal_set(p, rate), sp).channel("X");
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double t = static_cast<double>(k) / rate;
        // y' = kv (u - y) from rest under u = v t
        const double exact = v * (t - (1.0 - std::exp(-sp.kv[0] * t)) / sp.kv[0]);
        EXPECT_NEAR(y[k], exact, 1e-12);
    }
    // late in the ramp the lag is v / kv
    EXPECT_NEAR(p.back().x - y.back(), v / sp.kv[0], 1e-12);
}

TEST(Servo, SecondOrderFollowingError) {
    const double rate = 1000.0, v = 20.0;
    std::vector<JointPose> p(2000);
    for (std::size_t k = 0; k < p.size(); ++k) p[k].y = v * static_cast<double>(k) / rate;
    ServoParams sp;
    sp.second_order = ServoParams::SecondOrder{};
    const auto y = servo_response(joint_signal_set(p, rate), sp).channel("Y");
    const double w = 2 * kPi * sp.second_order->natural_frequency_hz;
    EXPECT_NEAR(p.back().y - y.back(), 2 * sp.second_order->damping * v / w, 1e-9);
    const auto hold = servo_response(joint_signal_set(std::vector<JointPose>(50, JointPose{1, 2, 3, 0.1, 0.2}), rate), sp);
    for (double val : hold.channel("Z")) EXPECT_DOUBLE_EQ(val, 3.0);

    sp.kv[2] = 0.0;
    EXPECT_THROW(sp.validate(), ConfigError);
}

TEST(Structure, DeflectionUnits) {
    std::array<Vec3, 5> compliance{};
    compliance[0] = Vec3(2.0, 0.0, 0.0);  // µm per m/s^2
    compliance[3] = Vec3(0.0, 3.0, 0.0);  // µm per rad/s^2
    const Vec3 d = deflection({1000.0, 0, 0, 1.0, 0}, compliance);  // 1 m/s^2 on X, 1 rad/s^2 on A
    EXPECT_NEAR(d.x(), -0.002, 1e-15);
    EXPECT_NEAR(d.y(), -0.003, 1e-15);
    EXPECT_EQ(d.z(), 0.0);
}

TEST(Structure, NullMachineMeasuresEncoderPose) {
    const auto plan = plan_trajectory(demo_program(4000.0));
    const MachineGeometry g;
    StructureParams st;
    st.noise_um = 0.0;
    const auto m = synthesize_measurement(servo_response(plan.setpoints, ServoParams{}), st, g, 10000.0, 3);
    EXPECT_EQ((m.chi - build_encoder_deviation(m.encoder, g)).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(m.parts.noise.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Structure, PartsAddUpToMeasurement) {
    CampaignConfig cfg = campaign_from_json(Json::parse(R"({
        "feeds_mm_min": [3000],
        "structure": {
          "link_errors": { "dgamma_Y_urad": 30, "dy_C_um": 20 },
          "motion_errors": [ { "axis": "C", "component": "y", "amplitude_um": 2, "period": 90 } ],
          "thermal_drift_um": [[1, -2, 3]],
          "compliance": { "X": [0.5, 0, 0], "C": [0, 0.2, 0] },
          "noise_um": 0.3 } })"));
    const auto s = simulate_session(cfg, 0);
    const auto& m = s.measurement;
    const DeviationMatrix sum = build_encoder_deviation(m.encoder, cfg.geometry) + m.parts.link + m.parts.motion +
                                m.parts.drift + m.parts.dynamic + m.parts.noise;
    EXPECT_LT((sum - m.chi).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(m.parts.drift.row(0).isApprox(Vec3(1e-3, -2e-3, 3e-3).transpose()));
    EXPECT_GT(m.parts.dynamic.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_NEAR(std::sqrt(m.parts.noise.array().square().mean()), 0.3e-3, 0.01e-3);
    // sensor channels carry chi in µm
    EXPECT_NEAR(m.sensor.channel("s2")[500], m.chi(500, 1) * 1e3, 1e-9);
}

TEST(Structure, CommandedAccelerationsFollowThePlan) {
    const auto plan = plan_trajectory(demo_program(6000.0));
    const auto clock = resample(plan.setpoints, 10000.0);
    const auto acc = commanded_accelerations(plan, clock);
    const auto k = static_cast<std::size_t>(std::llround((plan.program_start_s + 0.37) * 10000.0));
    const AxisVector a = plan.path.acceleration(clock.time_at(k) - plan.program_start_s);
    EXPECT_DOUBLE_EQ(acc.channel("X")[k], a(0));
    EXPECT_DOUBLE_EQ(acc.channel("C")[k], deg_to_rad(a(4)));
    EXPECT_EQ(acc.channel("Z")[0], 0.0);
    EXPECT_EQ(acc.channel("Z").back(), 0.0);
}

TEST(Campaign, SessionsAreDeterministic) {
    CampaignConfig cfg = campaign_from_json(Json::parse(R"({ "seed": 5, "feeds_mm_min": [2000, 4000] })"));
    const auto a = simulate_session(cfg, 1), b = simulate_session(cfg, 1);
    EXPECT_EQ(a.measurement.chi, b.measurement.chi);
    EXPECT_EQ(a.id, "F04000");
    EXPECT_NE(session_seed(5, 0), session_seed(5, 1));
    EXPECT_NE(session_seed(5, 0), session_seed(6, 0));
    EXPECT_EQ(session_id(18896.0), "F18896");
}

TEST(Campaign, DelayHoldsLeadingValue) {
    SignalSet s;
    s.sample_rate = 10.0;
    s.add_channel("a", {1, 2, 3, 4, 5});
    const auto d = delay_recording(s, 2);
    EXPECT_EQ(d.channel("a"), (std::vector<double>{1, 1, 1, 2, 3}));
    EXPECT_EQ(delay_recording(s, 9).channel("a"), (std::vector<double>(5, 1.0)));
}

TEST(Config, RejectsMistakes) {
    auto bad = [](const char* text) { return campaign_from_json(Json::parse(text)); };
    EXPECT_THROW(bad(R"({ "feeds": [1000] })"), ConfigError);
    EXPECT_THROW(bad(R"({ "structure": { "acceleration_source": "model" } })"), ConfigError);
    EXPECT_THROW(bad(R"({ "structure": { "link_errors": { "dgamma_Q_urad": 1 } } })"), ConfigError);
    EXPECT_THROW(bad(R"({ "structure": { "motion_errors": [ { "axis": "X", "component": "w", "amplitude_um": 1, "period": 1 } ] } })"),
                 ConfigError);
    EXPECT_THROW(bad(R"({ "program": { "waypoints": "spiral" } })"), ConfigError);
    EXPECT_THROW(bad(R"({ "seed": -3 })"), ConfigError);
    EXPECT_THROW(bad(R"({ "analysis": { "sync_method": "psychic" } })"), ConfigError);
    EXPECT_THROW(bad(R"({ "feeds_mm_min": [1000, 0] })"), ConfigError);

    const auto ok = bad(R"({ "structure": { "acceleration_source": "command", "acceleration_window_ms": 4 } })");
    EXPECT_EQ(ok.structure.acceleration_source, StructureParams::AccelerationSource::command);
    EXPECT_DOUBLE_EQ(ok.structure.acceleration_window_s, 0.004);
}

TEST(Config, ShippedConfigsLoad) {
    for (const char* name : {"campaign.json", "minimal.json", "compliance_scaling.json"}) {
        EXPECT_NO_THROW(load_campaign(std::string(VOLERR_CONFIG_DIR) + "/" + name)) << name;
    }
    try {
        load_campaign(std::string(VOLERR_CONFIG_DIR) + "/missing.json");
        FAIL();
    } catch (const std::exception& e) {
        EXPECT_NE(std::string(e.what()).find("missing.json"), std::string::npos) << e.what();
    }
}
