/**
 * @file campaign.hpp
 * @brief Multi-feed synthetic test campaign: plan, servo, sensor synthesis,
 * recording delay, and ground-truth bookkeeping.
 *
 * Per feed the controller setpoints are written at the NC cycle, while the
 * encoder and sensor streams are written at the sensor rate and recorded late
 * by a fixed delay: recorded sample j holds the value of instant j - D, the
 * first D samples repeating the initial value.
 *
 * Ground truth follows the same conventions as the decomposition. Motion
 * errors are only defined up to their projection on the link-error Jacobian,
 * so that projection (computed on the reference session's analysis window)
 * is moved from the motion to the link term; a non-zero reference drift is
 * likewise carried by the motion term, as the reference thermal offset is zero.
 */
#pragma once

#include <atomic>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "volerr/decomposition.hpp"
#include "volerr/json_io.hpp"
#include "volerr/signal_io.hpp"
#include "volerr/sim/servo.hpp"
#include "volerr/sim/structure.hpp"
#include "volerr/sim/trajectory.hpp"
#include "volerr/sync.hpp"

namespace volerr::sim {

struct CampaignConfig {
    std::uint64_t seed = 1;
    double nc_cycle_s = kDefaultNcCycle;
    double sample_rate = kDefaultSampleRate;
    double recording_delay_s = 0.018;
    std::vector<double> feeds{1000.0};
    std::optional<double> reference_feed;  ///< default: lowest feed
    MachineGeometry geometry;
    TrajectoryProgram program;             ///< feed_mm_min is set per session
    ServoParams servo;
    StructureParams structure;             ///< thermal_drift_um is set per session
    std::vector<Vec3> thermal_drift_um;    ///< one per feed; empty means no drift
    SyncMethod sync_method = SyncMethod::tag;
    double sync_window_s = kDefaultDelayWindow;
    int degree = kDefaultMotionDegree;

    std::size_t reference_index() const {
        if (!reference_feed) return static_cast<std::size_t>(std::min_element(feeds.begin(), feeds.end()) - feeds.begin());
        for (std::size_t i = 0; i < feeds.size(); ++i)
            if (std::abs(feeds[i] - *reference_feed) < 1e-9) return i;
        throw ConfigError("campaign: reference feed is not among the feeds");
    }

    Vec3 drift_for(std::size_t i) const { return thermal_drift_um.empty() ? Vec3::Zero() : thermal_drift_um[i]; }

    void validate() const {
        if (feeds.empty()) throw ConfigError("campaign: at least one feed is required");
        std::set<std::string> ids;
        for (double f : feeds) {
            if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("campaign: feeds must be > 0");
            ids.insert(std::to_string(std::llround(f)));
        }
        if (ids.size() != feeds.size()) throw ConfigError("campaign: feeds must be distinct");
        if (!(nc_cycle_s > 0.0)) throw ConfigError("campaign: NC cycle must be > 0");
        if (!(sample_rate >= 1.0 / nc_cycle_s)) throw ConfigError("campaign: sample rate must not be below the NC rate");
        if (!(recording_delay_s >= 0.0)) throw ConfigError("campaign: recording delay must be >= 0");
        if (program.post_dwell_s < recording_delay_s + 2.0 * nc_cycle_s) {
            throw ConfigError("campaign: post dwell must exceed the recording delay");
        }
        if (!thermal_drift_um.empty() && thermal_drift_um.size() != feeds.size()) {
            throw ConfigError("campaign: thermal_drift_um needs one entry per feed");
        }
        if (degree < 0) throw ConfigError("campaign: degree must be >= 0");
        (void)reference_index();
        geometry.validate();
        program.validate();
        servo.validate();
        structure.validate();
    }
};

inline std::string session_id(double feed) {
    std::string digits = std::to_string(std::llround(feed));
    while (digits.size() < 5) digits.insert(digits.begin(), '0');
    return "F" + digits;
}

/// splitmix64 of the campaign seed and session index; stable across platforms.
inline std::uint64_t session_seed(std::uint64_t seed, std::size_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Same length, each channel shifted late by `samples`, leading values held.
inline SignalSet delay_recording(const SignalSet& s, std::size_t samples) {
    SignalSet out = s;
    for (auto& ch : out.channels) {
        if (ch.empty()) continue;
        const std::size_t d = std::min(samples, ch.size());
        std::vector<double> v(ch.size());
        std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(d), ch.front());
        std::copy(ch.begin(), ch.end() - static_cast<std::ptrdiff_t>(d), v.begin() + static_cast<std::ptrdiff_t>(d));
        ch = std::move(v);
    }
    return out;
}

/// Everything produced for one feed on the true (undelayed) timeline.
struct SimulatedSession {
    std::string id;
    std::size_t index = 0;
    double feed_mm_min = 0.0;
    PlannedTrajectory plan;
    SignalSet encoder_nc;
    SignalSet controller;  ///< setpoints at the sensor rate
    SynthesizedMeasurement measurement;
    Vec3 drift_um = Vec3::Zero();
};

/// Exact interpolator accelerations on the clock of `clock` (mm/s^2, rad/s^2).
inline SignalSet commanded_accelerations(const PlannedTrajectory& plan, const SignalSet& clock) {
    std::array<std::vector<double>, 5> cols;
    for (auto& c : cols) c.resize(clock.size());
    for (std::size_t k = 0; k < clock.size(); ++k) {
        const AxisVector a = plan.path.acceleration(clock.time_at(k) - plan.program_start_s);
        for (int j = 0; j < 5; ++j) cols[static_cast<std::size_t>(j)][k] = j < 3 ? a(j) : deg_to_rad(a(j));
    }
    SignalSet out;
    out.sample_rate = clock.sample_rate;
    out.start_time = clock.start_time;
    for (std::size_t j = 0; j < 5; ++j) out.add_channel(std::string(kJointChannels[j]), std::move(cols[j]));
    return out;
}

inline SimulatedSession simulate_session(const CampaignConfig& cfg, std::size_t index) {
    SimulatedSession s;
    s.index = index;
    s.feed_mm_min = cfg.feeds[index];
    s.id = session_id(s.feed_mm_min);
    TrajectoryProgram prog = cfg.program;
    prog.feed_mm_min = s.feed_mm_min;
    s.plan = with_stage("plan", [&] { return plan_trajectory(prog, cfg.nc_cycle_s); });
    s.encoder_nc = with_stage("servo", [&] { return servo_response(s.plan.setpoints, cfg.servo); });
    s.controller = resample(s.plan.setpoints, cfg.sample_rate);
    StructureParams st = cfg.structure;
    s.drift_um = cfg.drift_for(index);
    st.thermal_drift_um = s.drift_um;
    std::optional<SignalSet> commanded;
    if (st.acceleration_source == StructureParams::AccelerationSource::command) {
        commanded = commanded_accelerations(s.plan, s.controller);
    }
    s.measurement = with_stage("synthesize", [&] {
        return synthesize_measurement(s.encoder_nc, st, cfg.geometry, cfg.sample_rate, session_seed(cfg.seed, index),
                                      commanded ? &*commanded : nullptr);
    });
    return s;
}

/// Part of the reference session's quasi-static terms lying in the link-error
/// Jacobian span over its analysis window; identification cannot tell it from dq.
inline LinkErrorVector motion_link_leak(const SimulatedSession& ref, const CampaignConfig& cfg) {
    const auto window = motion_window(ref.controller);
    const auto& m = ref.measurement;
    const auto poses = joint_poses(m.encoder.slice(window.first, window.count()));
    const auto first = static_cast<Eigen::Index>(window.first);
    const auto count = static_cast<Eigen::Index>(window.count());
    const DeviationMatrix linear = link_contribution(poses, cfg.structure.link_errors, cfg.geometry);
    const DeviationMatrix rest = m.parts.link.middleRows(first, count) - linear +
                                 m.parts.motion.middleRows(first, count) + m.parts.drift.middleRows(first, count);
    return identify_link_errors(poses, rest, cfg.geometry, 1e12).dq;
}

inline constexpr std::array<std::string_view, 6> kTruthComponents = {"c", "l", "m", "td", "d", "noise"};

/// Per-instant contributions matching the decomposition's definitions (mm).
struct GroundTruth {
    std::string id;
    double feed_mm_min = 0.0;
    double delay_s = 0.0;
    std::size_t delay_samples = 0;
    double sample_rate = 0.0;
    LinkErrorVector dq_true;
    LinkErrorVector dq_effective;
    Vec3 drift_um = Vec3::Zero();
    Vec3 td_um = Vec3::Zero();
    std::vector<double> times;
    std::array<DeviationMatrix, 6> parts;  ///< c, l, m, td, d, noise

    const DeviationMatrix& part(std::string_view name) const {
        for (std::size_t i = 0; i < kTruthComponents.size(); ++i)
            if (kTruthComponents[i] == name) return parts[i];
        throw DataError("ground truth: unknown component '" + std::string(name) + "'");
    }
};

inline GroundTruth ground_truth(const SimulatedSession& s, const CampaignConfig& cfg, const LinkErrorVector& leak,
                                const Vec3& reference_drift_um) {
    GroundTruth g;
    g.id = s.id;
    g.feed_mm_min = s.feed_mm_min;
    g.sample_rate = cfg.sample_rate;
    g.delay_samples = static_cast<std::size_t>(std::llround(cfg.recording_delay_s * cfg.sample_rate));
    g.delay_s = static_cast<double>(g.delay_samples) / cfg.sample_rate;
    g.dq_true = cfg.structure.link_errors;
    g.dq_effective = g.dq_true + leak;
    g.drift_um = s.drift_um;
    g.td_um = s.drift_um - reference_drift_um;

    const auto& m = s.measurement;
    const auto enc = joint_poses(m.encoder);
    const auto ctl = joint_poses(s.controller);
    const auto n = static_cast<Eigen::Index>(enc.size());
    g.times.resize(enc.size());
    for (std::size_t k = 0; k < enc.size(); ++k) g.times[k] = m.encoder.time_at(k);

    DeviationMatrix c(n, 3);
    for (Eigen::Index k = 0; k < n; ++k) {
        c.row(k) = (dkt(enc[static_cast<std::size_t>(k)], cfg.geometry) - dkt(ctl[static_cast<std::size_t>(k)], cfg.geometry)).transpose();
    }
    const DeviationMatrix l_true = link_contribution(enc, g.dq_true, cfg.geometry);
    const DeviationMatrix l_leak = link_contribution(enc, leak, cfg.geometry);
    const DeviationMatrix ref_drift = repeat_rows(reference_drift_um * 1e-3, n);
    g.parts[0] = std::move(c);
    g.parts[1] = l_true + l_leak;
    g.parts[2] = m.parts.link - l_true + m.parts.motion + ref_drift - l_leak;
    g.parts[3] = repeat_rows(g.td_um * 1e-3, n);
    g.parts[4] = m.parts.dynamic;
    g.parts[5] = m.parts.noise;
    return g;
}

// 12 significant digits: ample for µm-level comparisons, a third smaller than exact output.
inline void append_short(std::string& out, double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
    out.append(buf, res.ptr);
}

inline void write_ground_truth(const std::filesystem::path& dir, const GroundTruth& g, const SimulatedSession& s) {
    std::string csv = "t_s";
    for (auto name : kTruthComponents)
        for (const char* ax : {"x", "y", "z"}) csv += "," + std::string(name) + "_" + ax + "_um";
    csv += '\n';
    for (std::size_t k = 0; k < g.times.size(); ++k) {
        csv_detail::append_number(csv, g.times[k]);
        for (const auto& p : g.parts) {
            for (int c = 0; c < 3; ++c) {
                csv += ',';
                append_short(csv, p(static_cast<Eigen::Index>(k), c) * 1e3);
            }
        }
        csv += '\n';
    }
    write_text_file(dir / "ground_truth.csv", csv);

    Json j;
    j["session"] = g.id;
    j["feed_mm_min"] = g.feed_mm_min;
    j["recording_delay_s"] = g.delay_s;
    j["recording_delay_samples"] = g.delay_samples;
    j["sample_rate_hz"] = g.sample_rate;
    j["samples"] = g.times.size();
    j["link_errors_true"] = link_errors_to_json(g.dq_true);
    j["link_errors_effective"] = link_errors_to_json(g.dq_effective);
    j["thermal_drift_um"] = json_detail::to_array(g.drift_um);
    j["thermal_offset_um"] = json_detail::to_array(g.td_um);
    j["program_start_s"] = s.plan.program_start_s;
    j["program_duration_s"] = s.plan.program_duration_s;
    j["block_transitions_s"] = s.plan.block_transitions_s;
    j["components_file"] = "ground_truth.csv";
    j["components"] = Json::array();
    for (auto name : kTruthComponents) j["components"].push_back(std::string(name));
    write_json_file(dir / "ground_truth.json", j);
}

/// Loads ground_truth.csv into the six component matrices (mm).
inline GroundTruth load_ground_truth(const std::filesystem::path& dir) {
    const Json meta = parse_json_file(dir / "ground_truth.json");
    GroundTruth g;
    g.id = meta.at("session").get<std::string>();
    g.feed_mm_min = meta.at("feed_mm_min").get<double>();
    g.delay_s = meta.at("recording_delay_s").get<double>();
    g.delay_samples = meta.at("recording_delay_samples").get<std::size_t>();
    g.sample_rate = meta.at("sample_rate_hz").get<double>();
    const auto n = meta.at("samples").get<std::size_t>();

    const std::string path = (dir / "ground_truth.csv").string();
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open file");
    std::string line;
    std::getline(in, line);
    for (auto& p : g.parts) p.resize(static_cast<Eigen::Index>(n), 3);
    g.times.reserve(n);
    std::size_t row = 1, k = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto f = csv_detail::split(line);
        if (f.size() != 19 || k >= n) throw DataError(path + ": row " + std::to_string(row) + " is malformed");
        g.times.push_back(csv_detail::parse_number(f[0], row, "t_s", path));
        for (std::size_t i = 0; i < 18; ++i) {
            g.parts[i / 3](static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i % 3)) =
                csv_detail::parse_number(f[i + 1], row, "component", path) * 1e-3;
        }
        ++k;
    }
    if (k != n) throw DataError(path + ": expected " + std::to_string(n) + " rows");
    return g;
}

struct SessionOutcome {
    std::string id;
    double feed_mm_min = 0.0;
    bool ok = false;
    std::string error;
    double duration_s = 0.0;
    std::size_t samples = 0;
    Vec3 dynamic_rms_um = Vec3::Zero();  ///< true dd over the trajectory
};

struct CampaignResult {
    std::filesystem::path manifest;
    std::vector<SessionOutcome> sessions;
    bool all_ok() const {
        return std::all_of(sessions.begin(), sessions.end(), [](const auto& s) { return s.ok; });
    }
};

using LogFn = std::function<void(const std::string& session, const std::string& message)>;

/// Runs every feed and writes, under `out_dir`:
///   manifest.json, geometry.json, calibration.json,
///   sessions/<id>/{controller,encoder,sensor}.csv, ground_truth.{json,csv}
/// The reference session runs first; the others may run on `jobs` threads.
/// A failing session is reported and the remaining ones still run.
inline CampaignResult run_campaign(const CampaignConfig& cfg, const std::filesystem::path& out_dir,
                                   unsigned jobs = 1, const LogFn& log = {}) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "sessions");

    const std::size_t ref = cfg.reference_index();
    const std::size_t delay = static_cast<std::size_t>(std::llround(cfg.recording_delay_s * cfg.sample_rate));
    CampaignResult result;
    result.sessions.resize(cfg.feeds.size());

    LinkErrorVector leak;
    const Vec3 ref_drift = cfg.drift_for(ref);
    std::mutex log_mutex;
    auto say = [&](const std::string& id, const std::string& msg) {
        if (!log) return;
        std::lock_guard<std::mutex> lock(log_mutex);
        log(id, msg);
    };

    auto finish = [&](const SimulatedSession& s) {
        const GroundTruth g = ground_truth(s, cfg, leak, ref_drift);
        const fs::path dir = out_dir / "sessions" / s.id;
        fs::create_directories(dir);
        write_signals(dir / "controller.csv", s.plan.setpoints);
        write_signals(dir / "encoder.csv", delay_recording(s.measurement.encoder, delay));
        write_signals(dir / "sensor.csv", delay_recording(s.measurement.sensor, delay));
        write_ground_truth(dir, g, s);
        auto& o = result.sessions[s.index];
        o.ok = true;
        o.duration_s = s.measurement.encoder.duration();
        o.samples = s.measurement.encoder.size();
        const auto w = motion_window(s.controller);
        o.dynamic_rms_um = rms_errors(g.parts[4].middleRows(static_cast<Eigen::Index>(w.first),
                                                            static_cast<Eigen::Index>(w.count())));
    };
    auto run_one = [&](std::size_t i, bool reference) {
        auto& o = result.sessions[i];
        o.id = session_id(cfg.feeds[i]);
        o.feed_mm_min = cfg.feeds[i];
        try {
            const SimulatedSession s = simulate_session(cfg, i);
            if (reference) leak = with_stage("reference projection", [&] { return motion_link_leak(s, cfg); });
            finish(s);
            say(o.id, "wrote " + std::to_string(o.samples) + " samples");
        } catch (const std::exception& e) {
            o.ok = false;
            o.error = e.what();
            say(o.id, std::string("failed: ") + e.what());
        }
    };

    run_one(ref, true);
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < cfg.feeds.size(); ++i)
        if (i != ref) rest.push_back(i);
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(rest.size())));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < rest.size();) run_one(rest[k], false);
        });
    }
    for (auto& t : pool) t.join();

    write_json_file(out_dir / "geometry.json", geometry_to_json(cfg.geometry));
    write_json_file(out_dir / "calibration.json", calibration_to_json(SensorCalibration{}));
    Json manifest;
    manifest["geometry"] = "geometry.json";
    manifest["calibration"] = "calibration.json";
    manifest["reference"] = session_id(cfg.feeds[ref]);
    manifest["sync"] = {{"method", to_string(cfg.sync_method)}, {"window_ms", cfg.sync_window_s * 1e3}};
    manifest["degree"] = cfg.degree;
    manifest["sessions"] = Json::array();
    for (const auto& o : result.sessions) {
        if (!o.ok) continue;
        const std::string base = "sessions/" + o.id + "/";
        manifest["sessions"].push_back({{"id", o.id},
                                        {"feed_mm_min", o.feed_mm_min},
                                        {"controller", base + "controller.csv"},
                                        {"encoder", base + "encoder.csv"},
                                        {"sensor", base + "sensor.csv"},
                                        {"ground_truth", base + "ground_truth.json"}});
    }
    result.manifest = out_dir / "manifest.json";
    write_json_file(result.manifest, manifest);
    return result;
}

}  // namespace volerr::sim
