#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include "volerr/deviation.hpp"
#include "volerr/signal_io.hpp"
#include "volerr/sync.hpp"

using namespace volerr;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("volerr_signals_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

SignalSet random_joints(std::mt19937_64& rng, std::size_t n, double rate) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<JointPose> poses(n);
    double x = 0, y = 0, z = 0, a = 0, c = 0;
    for (auto& p : poses) {
        x += u(rng);
        y += u(rng);
        z += u(rng);
        a += 0.01 * u(rng);
        c += 0.01 * u(rng);
        p = {x, y, z, a, c};
    }
    return joint_signal_set(poses, rate, 0.25);
}

// Smooth test signal with a distinct feature so correlation has one peak.
SignalSet chirp(std::size_t n, double rate) {
    std::vector<JointPose> poses(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / rate;
        const double bump = std::exp(-std::pow((t - 0.3) / 0.02, 2));
        poses[k] = {10.0 * std::sin(2 * kPi * (3 + 20 * t) * t) + 5 * bump, 0.5 * t, 0, 0, 0};
    }
    return joint_signal_set(poses, rate);
}

}  // namespace

TEST(SignalIo, JointRoundTripIsBitExact) {
    std::mt19937_64 rng(1);
    const auto s = random_joints(rng, 500, 10000.0);
    const auto path = temp_file("joints.csv");
    write_signals(path, s);
    const auto back = load_signals(path, CsvSchema::joints);
    ASSERT_EQ(back.size(), s.size());
    EXPECT_DOUBLE_EQ(back.sample_rate, 10000.0);
    EXPECT_DOUBLE_EQ(back.start_time, 0.25);
    for (auto name : kJointChannels) {
        const auto& a = s.channel(name);
        const auto& b = back.channel(name);
        for (std::size_t k = 0; k < a.size(); ++k) {
            // degrees on disk: the conversion may cost one ulp
            EXPECT_NEAR(a[k], b[k], 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a[k])));
        }
    }
    // writing what was read reproduces the file byte for byte
    const auto again = temp_file("joints2.csv");
    write_signals(again, back);
    std::ifstream f1(path), f2(again);
    EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f1), {}), std::string(std::istreambuf_iterator<char>(f2), {}));
}

TEST(SignalIo, SensorUnits) {
    const auto p = temp_file("sensor_v.csv");
    write_text(p, "t_s,s1_V,s2_V,s3_V\n0,1,2,3\n0.0001,1.5,2.5,3.5\n");
    const auto s = load_signals(p, CsvSchema::sensor);
    EXPECT_TRUE(s.has("s1_V"));
    EXPECT_NEAR(s.sample_rate, 10000.0, 1e-6);

    SensorCalibration cal;
    cal.gain_um_per_volt = {10.0, 20.0, 30.0};
    const auto chi = project_sensor_readings(s, cal);
    EXPECT_NEAR(chi(1, 2), 3.5 * 30.0 * 1e-3, 1e-12);
}

TEST(SignalIo, ErrorsNameFileRowAndColumn) {
    const auto missing = temp_file("nope.csv");
    fs::remove(missing);
    EXPECT_THROW(load_signals(missing, CsvSchema::joints), DataError);

    const auto ragged = temp_file("ragged.csv");
    write_text(ragged, "t_s,X_mm,Y_mm,Z_mm,A_deg,C_deg\n0,1,2,3,4,5\n0.1,1,2,3,4\n");
    try {
        load_signals(ragged, CsvSchema::joints);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
    }

    const auto no_col = temp_file("nocol.csv");
    write_text(no_col, "t_s,X_mm,Y_mm,Z_mm,A_deg\n0,1,2,3,4\n0.1,1,2,3,4\n");
    try {
        load_signals(no_col, CsvSchema::joints);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("C_deg"), std::string::npos) << e.what();
    }

    const auto bad = temp_file("bad.csv");
    write_text(bad, "t_s,s1_um,s2_um,s3_um\n0,1,2,3\n0.1,1,x2,3\n");
    try {
        load_signals(bad, CsvSchema::sensor);
        FAIL();
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("s2_um"), std::string::npos) << msg;
        EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    }

    const auto uneven = temp_file("uneven.csv");
    write_text(uneven, "t_s,s1_um,s2_um,s3_um\n0,1,2,3\n0.1,1,2,3\n0.25,1,2,3\n");
    EXPECT_THROW(load_signals(uneven, CsvSchema::sensor), DataError);

    const auto nan = temp_file("nan.csv");
    write_text(nan, "t_s,s1_um,s2_um,s3_um\n0,1,2,3\n0.1,nan,2,3\n");
    EXPECT_THROW(load_signals(nan, CsvSchema::sensor), DataError);
}

TEST(Resample, IdentityAtSameRate) {
    std::mt19937_64 rng(2);
    const auto s = random_joints(rng, 50, 1000.0);
    const auto r = resample(s, 1000.0);
    EXPECT_EQ(r.channels, s.channels);
}

// Linear interpolation reproduces linear signals exactly and keeps every source sample.
TEST(Resample, PropertiesOnRandomInputs) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> factor(2, 7);
    for (int trial = 0; trial < 20; ++trial) {
        const int f = factor(rng);
        const auto s = random_joints(rng, 40, 1000.0);
        const auto r = resample(s, 1000.0 * f);
        ASSERT_EQ(r.size(), (s.size() - 1) * static_cast<std::size_t>(f) + 1);
        for (std::size_t k = 0; k < s.size(); ++k) EXPECT_NEAR(r.channel("X")[k * f], s.channel("X")[k], 1e-12);
        for (std::size_t j = 0; j + 1 < r.size(); ++j) {
            const std::size_t i = j / f;
            const double lo = std::min(s.channel("Y")[i], s.channel("Y")[std::min(i + 1, s.size() - 1)]);
            const double hi = std::max(s.channel("Y")[i], s.channel("Y")[std::min(i + 1, s.size() - 1)]);
            EXPECT_GE(r.channel("Y")[j], lo - 1e-12);
            EXPECT_LE(r.channel("Y")[j], hi + 1e-12);
        }
    }
    EXPECT_THROW(resample(random_joints(rng, 10, 1000.0), 500.0), DataError);
}

TEST(Delay, CrossCorrelationRecoversShift) {
    const auto ref = chirp(6000, 10000.0);
    for (int lag : {0, 7, 73, 180, -40}) {
        SignalSet tgt = ref;
        for (auto& ch : tgt.channels) {
            std::vector<double> v(ch.size());
            for (std::size_t k = 0; k < v.size(); ++k) {
                const long long src = static_cast<long long>(k) - lag;
                v[k] = ch[static_cast<std::size_t>(std::clamp<long long>(src, 0, static_cast<long long>(ch.size()) - 1))];
            }
            ch = v;
        }
        EXPECT_NEAR(estimate_delay(ref, tgt, 0.05), lag / 10000.0, 1e-12) << lag;
    }
}

TEST(Delay, TagMethodAndErrors) {
    std::vector<JointPose> p(1000);
    for (std::size_t k = 300; k < 1000; ++k) p[k].x = 0.1;
    const auto ref = joint_signal_set(p, 10000.0);
    std::vector<JointPose> q(1000);
    for (std::size_t k = 480; k < 1000; ++k) q[k].x = 0.1;
    const auto tgt = joint_signal_set(q, 10000.0);
    DelayOptions opt;
    opt.method = SyncMethod::tag;
    EXPECT_NEAR(estimate_delay(ref, tgt, 0.05, opt), 0.018, 1e-12);
    EXPECT_THROW(estimate_delay(ref, tgt, 0.01, opt), DataError);

    const auto flat = joint_signal_set(std::vector<JointPose>(1000), 10000.0);
    EXPECT_THROW(estimate_delay(flat, flat, 0.05), DataError);
    EXPECT_THROW(estimate_delay(flat, flat, 0.05, opt), DataError);
    EXPECT_THROW(parse_sync_method("magic"), ConfigError);
}

TEST(Align, ShiftsOntoReferenceClock) {
    const auto s = chirp(100, 1000.0);
    const auto a = align(s, 0.01);
    EXPECT_EQ(a.size(), 90u);
    EXPECT_DOUBLE_EQ(a.channel("X")[0], s.channel("X")[10]);
    EXPECT_DOUBLE_EQ(a.start_time, s.start_time);
    const auto w = common_window({s, a});
    EXPECT_EQ(w[0].size(), 90u);
    EXPECT_EQ(w[1].size(), 90u);
    EXPECT_THROW(align(s, 0.2), DataError);
}

TEST(MotionWindow, SkipsShortTagAndDwell) {
    std::vector<JointPose> p(200);
    p[20].x = 0.1;  // tag
    for (std::size_t k = 60; k < 150; ++k) p[k].y = static_cast<double>(k - 59);
    for (std::size_t k = 150; k < 200; ++k) p[k].y = p[149].y;
    const auto w = motion_window(joint_signal_set(p, 1000.0));
    EXPECT_EQ(w.first, 59u);
    EXPECT_EQ(w.last, 149u);
}

TEST(Deviation, NominalAndEncoderUseSameKinematics) {
    std::mt19937_64 rng(4);
    const auto s = random_joints(rng, 20, 1000.0);
    const MachineGeometry g;
    EXPECT_EQ(build_nominal_deviation(s, g), build_encoder_deviation(s, g));
}

TEST(Deviation, CalibrationProjection) {
    SensorCalibration cal;
    cal.directions = {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 1).normalized()};
    cal.setup_offset_um = Vec3(1.0, 2.0, 3.0);
    const Vec3 truth(4e-3, -2e-3, 5e-3);  // mm
    SignalSet raw;
    raw.sample_rate = 1000.0;
    const Vec3 reading = cal.direction_matrix() * (truth * 1e3 + cal.setup_offset_um);
    raw.add_channel("s1", {reading(0)});
    raw.add_channel("s2", {reading(1)});
    raw.add_channel("s3", {reading(2)});
    const auto chi = project_sensor_readings(raw, cal);
    EXPECT_TRUE(chi.row(0).transpose().isApprox(truth, 1e-12));

    SensorCalibration degenerate;
    degenerate.directions = {Vec3(1, 0, 0), Vec3(1, 0, 0), Vec3(0, 0, 1)};
    EXPECT_THROW(project_sensor_readings(raw, degenerate), ConfigError);
}
