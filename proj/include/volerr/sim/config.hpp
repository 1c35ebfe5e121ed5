/**
 * @file config.hpp
 * @brief Campaign configuration document.
 *
 * Every section is optional; omitted values keep the library defaults
 * (no injected errors apart from 0.4 µm sensor noise, one feed of 1000 mm/min).
 *
 * {
 *   "seed": 7, "nc_cycle_ms": 3, "sample_rate_hz": 10000, "recording_delay_ms": 18,
 *   "feeds_mm_min": [1000, 1800], "reference_feed_mm_min": 1000,
 *   "geometry": { ...see json_io.hpp... },
 *   "program": {
 *     "waypoints": "demo" | [[X_mm, Y_mm, Z_mm, A_deg, C_deg], ...],
 *     "corner_tolerance": 0.01,
 *     "velocity_limits": [5 values, mm/s or deg/s], "acceleration_limits": [5 values],
 *     "limits_feed_mm_min": 18896,
 *     "tag": { "enabled": true, "axis": "X", "amplitude_mm": 0.1, "dwell_before_s": 0.1, "settle_s": 0.1 },
 *     "post_dwell_s": 0.1 },
 *   "servo": { "kv": [5 values, 1/s], "second_order": { "natural_frequency_hz": 100, "damping": 0.7 } },
 *   "structure": {
 *     "link_errors": { "dgamma_Y_urad": 30, ..., "dy_C_um": 20 },
 *     "motion_errors": [ { "axis": "X", "component": "y", "amplitude_um": 1.5, "period": 400, "phase_deg": 0 } ],
 *     "thermal_drift_um": [[x, y, z] per feed],
 *     "compliance": { "X": [gx, gy, gz], ... },   µm per m/s^2 or per rad/s^2
 *     "noise_um": 0.4, "acceleration_window_ms": 9, "acceleration_source": "encoder" | "command" },
 *   "analysis": { "sync_method": "tag", "delay_window_ms": 50, "degree": 20 }
 * }
 */
#pragma once

#include <set>
#include <string>

#include "volerr/json_io.hpp"
#include "volerr/sim/campaign.hpp"

namespace volerr::sim {

namespace config_detail {

using json_detail::number;
using json_detail::number_or;

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!ok.count(key)) throw ConfigError(ctx + ": unknown key '" + key + "'");
    }
}

inline std::size_t axis_index(const Json& j, const std::string& ctx) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        for (std::size_t i = 0; i < kJointChannels.size(); ++i)
            if (kJointChannels[i] == s) return i;
    }
    throw ConfigError(ctx + ": expected one of X, Y, Z, A, C");
}

inline AxisVector axis_vector(const Json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 5) throw ConfigError(ctx + ": expected 5 numbers (X, Y, Z, A, C)");
    AxisVector v;
    for (int i = 0; i < 5; ++i) v(i) = number(j[static_cast<std::size_t>(i)], ctx);
    return v;
}

inline void read_program(const Json& j, TrajectoryProgram& p, const MachineGeometry& geom) {
    const std::string ctx = "program";
    check_keys(j, {"waypoints", "corner_tolerance", "velocity_limits", "acceleration_limits", "limits_feed_mm_min",
                   "tag", "post_dwell_s"},
               ctx);
    if (j.contains("waypoints")) {
        const auto& w = j.at("waypoints");
        if (w.is_string()) {
            if (w.get<std::string>() != "demo") throw ConfigError(ctx + ".waypoints: unknown preset");
            p.waypoints = demo_waypoints(geom);
        } else {
            if (!w.is_array() || w.empty()) throw ConfigError(ctx + ".waypoints: expected a non-empty array");
            p.waypoints.clear();
            for (std::size_t i = 0; i < w.size(); ++i) {
                const AxisVector v = axis_vector(w[i], ctx + ".waypoints[" + std::to_string(i) + "]");
                p.waypoints.push_back(from_path_units(v));
            }
        }
    }
    p.corner_tolerance = number_or(j, "corner_tolerance", p.corner_tolerance, ctx);
    if (j.contains("velocity_limits")) p.limits.velocity = axis_vector(j.at("velocity_limits"), ctx + ".velocity_limits");
    if (j.contains("acceleration_limits")) {
        p.limits.acceleration = axis_vector(j.at("acceleration_limits"), ctx + ".acceleration_limits");
    }
    if (j.contains("limits_feed_mm_min") && !j.at("limits_feed_mm_min").is_null()) {
        p.limits_feed_mm_min = number(j.at("limits_feed_mm_min"), ctx + ".limits_feed_mm_min");
    }
    if (j.contains("tag")) {
        const auto& t = j.at("tag");
        check_keys(t, {"enabled", "axis", "amplitude_mm", "dwell_before_s", "settle_s"}, ctx + ".tag");
        if (t.contains("enabled")) {
            if (!t.at("enabled").is_boolean()) throw ConfigError(ctx + ".tag.enabled: expected true or false");
            p.tag.enabled = t.at("enabled").get<bool>();
        }
        if (t.contains("axis")) p.tag.axis = axis_index(t.at("axis"), ctx + ".tag.axis");
        p.tag.amplitude_mm = number_or(t, "amplitude_mm", p.tag.amplitude_mm, ctx + ".tag");
        p.tag.dwell_before_s = number_or(t, "dwell_before_s", p.tag.dwell_before_s, ctx + ".tag");
        p.tag.settle_s = number_or(t, "settle_s", p.tag.settle_s, ctx + ".tag");
    }
    p.post_dwell_s = number_or(j, "post_dwell_s", p.post_dwell_s, ctx);
}

inline void read_servo(const Json& j, ServoParams& s) {
    check_keys(j, {"kv", "second_order"}, "servo");
    if (j.contains("kv")) {
        const AxisVector kv = axis_vector(j.at("kv"), "servo.kv");
        for (int i = 0; i < 5; ++i) s.kv[static_cast<std::size_t>(i)] = kv(i);
    }
    if (j.contains("second_order") && !j.at("second_order").is_null()) {
        const auto& so = j.at("second_order");
        check_keys(so, {"natural_frequency_hz", "damping", "substeps"}, "servo.second_order");
        ServoParams::SecondOrder p;
        p.natural_frequency_hz = number_or(so, "natural_frequency_hz", p.natural_frequency_hz, "servo.second_order");
        p.damping = number_or(so, "damping", p.damping, "servo.second_order");
        p.substeps = static_cast<int>(number_or(so, "substeps", p.substeps, "servo.second_order"));
        s.second_order = p;
    }
}

inline void read_structure(const Json& j, StructureParams& s, std::vector<Vec3>& drift) {
    const std::string ctx = "structure";
    check_keys(j, {"link_errors", "motion_errors", "thermal_drift_um", "compliance", "noise_um", "acceleration_window_ms",
                   "acceleration_source"},
               ctx);
    if (j.contains("link_errors")) {
        const auto& le = j.at("link_errors");
        if (!le.is_object()) throw ConfigError(ctx + ".link_errors: expected an object");
        std::set<std::string> known;
        for (std::size_t i = 0; i < LinkErrorVector::kSize; ++i) known.insert(link_error_key(i));
        for (const auto& [key, value] : le.items()) {
            (void)value;
            if (!known.count(key)) throw ConfigError(ctx + ".link_errors: unknown key '" + key + "'");
        }
        s.link_errors = link_errors_from_json(le, ctx + ".link_errors");
    }
    if (j.contains("motion_errors")) {
        const auto& me = j.at("motion_errors");
        if (!me.is_array()) throw ConfigError(ctx + ".motion_errors: expected an array");
        s.motion_errors.clear();
        for (std::size_t i = 0; i < me.size(); ++i) {
            const std::string c = ctx + ".motion_errors[" + std::to_string(i) + "]";
            check_keys(me[i], {"axis", "component", "amplitude_um", "period", "phase_deg"}, c);
            MotionErrorTerm t;
            t.axis = axis_index(json_detail::require(me[i], "axis", c), c + ".axis");
            const auto& comp = json_detail::require(me[i], "component", c);
            if (comp == "x") t.component = 0;
            else if (comp == "y") t.component = 1;
            else if (comp == "z") t.component = 2;
            else throw ConfigError(c + ".component: expected x, y or z");
            t.amplitude_um = number(me[i], "amplitude_um", c);
            t.period = number(me[i], "period", c);
            t.phase = deg_to_rad(number_or(me[i], "phase_deg", 0.0, c));
            s.motion_errors.push_back(t);
        }
    }
    if (j.contains("thermal_drift_um")) {
        const auto& d = j.at("thermal_drift_um");
        if (!d.is_array()) throw ConfigError(ctx + ".thermal_drift_um: expected an array of [x, y, z]");
        drift.clear();
        for (std::size_t i = 0; i < d.size(); ++i) {
            drift.push_back(json_detail::vec3(d[i], ctx + ".thermal_drift_um[" + std::to_string(i) + "]"));
        }
    }
    if (j.contains("compliance")) {
        const auto& c = j.at("compliance");
        check_keys(c, {"X", "Y", "Z", "A", "C"}, ctx + ".compliance");
        for (std::size_t a = 0; a < 5; ++a) {
            const std::string name(kJointChannels[a]);
            if (c.contains(name)) s.compliance[a] = json_detail::vec3(c.at(name), ctx + ".compliance." + name);
        }
    }
    if (j.contains("acceleration_source")) {
        const auto& src = j.at("acceleration_source");
        if (src == "encoder") s.acceleration_source = StructureParams::AccelerationSource::encoder;
        else if (src == "command") s.acceleration_source = StructureParams::AccelerationSource::command;
        else throw ConfigError(ctx + ".acceleration_source: expected 'encoder' or 'command'");
    }
    s.noise_um = number_or(j, "noise_um", s.noise_um, ctx);
    s.acceleration_window_s = number_or(j, "acceleration_window_ms", s.acceleration_window_s * 1e3, ctx) * 1e-3;
}

}  // namespace config_detail

inline CampaignConfig campaign_from_json(const Json& j) {
    using namespace config_detail;
    check_keys(j, {"seed", "nc_cycle_ms", "sample_rate_hz", "recording_delay_ms", "feeds_mm_min",
                   "reference_feed_mm_min", "geometry", "program", "servo", "structure", "analysis", "description"},
               "campaign");
    CampaignConfig cfg;
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw ConfigError("campaign.seed: expected a non-negative integer");
        cfg.seed = j.at("seed").get<std::uint64_t>();
    }
    cfg.nc_cycle_s = number_or(j, "nc_cycle_ms", cfg.nc_cycle_s * 1e3, "campaign") * 1e-3;
    cfg.sample_rate = number_or(j, "sample_rate_hz", cfg.sample_rate, "campaign");
    cfg.recording_delay_s = number_or(j, "recording_delay_ms", cfg.recording_delay_s * 1e3, "campaign") * 1e-3;
    if (j.contains("feeds_mm_min")) {
        const auto& f = j.at("feeds_mm_min");
        if (!f.is_array()) throw ConfigError("campaign.feeds_mm_min: expected an array");
        cfg.feeds.clear();
        for (const auto& v : f) cfg.feeds.push_back(number(v, "campaign.feeds_mm_min"));
    }
    if (j.contains("reference_feed_mm_min")) cfg.reference_feed = number(j.at("reference_feed_mm_min"), "campaign.reference_feed_mm_min");
    if (j.contains("geometry")) cfg.geometry = geometry_from_json(j.at("geometry"));
    cfg.program.waypoints = demo_waypoints(cfg.geometry);
    if (j.contains("program")) read_program(j.at("program"), cfg.program, cfg.geometry);
    if (j.contains("servo")) read_servo(j.at("servo"), cfg.servo);
    if (j.contains("structure")) read_structure(j.at("structure"), cfg.structure, cfg.thermal_drift_um);
    if (j.contains("analysis")) {
        const auto& a = j.at("analysis");
        check_keys(a, {"sync_method", "delay_window_ms", "degree"}, "analysis");
        if (a.contains("sync_method")) {
            if (!a.at("sync_method").is_string()) throw ConfigError("analysis.sync_method: expected a string");
            cfg.sync_method = parse_sync_method(a.at("sync_method").get<std::string>());
        }
        cfg.sync_window_s = number_or(a, "delay_window_ms", cfg.sync_window_s * 1e3, "analysis") * 1e-3;
        cfg.degree = static_cast<int>(number_or(a, "degree", cfg.degree, "analysis"));
    }
    cfg.validate();
    return cfg;
}

inline CampaignConfig load_campaign(const std::filesystem::path& path) {
    try {
        return campaign_from_json(parse_json_file(path));
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        if (msg.rfind(path.string(), 0) == 0) throw;
        throw ConfigError(path.string() + ": " + msg);
    }
}

}  // namespace volerr::sim
