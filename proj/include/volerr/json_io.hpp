/**
 * @file json_io.hpp
 * @brief JSON documents for geometry, sensor calibration, link errors and
 * decomposition summaries. Angles are degrees (or µrad for link errors) on disk.
 *
 * Geometry:
 *   { "structure": "WCAYFXZT", "a_tilt_deg": 45, "a_pivot_mm": [x,y,z],
 *     "c_pivot_mm": [..], "ball_offset_mm": [..], "spindle_home_mm": [..],
 *     "tool_length_mm": 200 }
 * Calibration:
 *   { "directions": [[..],[..],[..]], "gain_um_per_V": [..], "offset_um": [..],
 *     "setup_offset_um": [..] }
 * Link errors:
 *   { "dgamma_Y_urad": .., ..., "dbeta_C_urad": .., "dy_C_um": .. }
 */
#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "volerr/decomposition.hpp"
#include "volerr/deviation.hpp"
#include "volerr/errors.hpp"
#include "volerr/kinematics.hpp"

namespace volerr {

using Json = nlohmann::json;

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(path.string() + ": cannot open for writing");
    out << text;
}

/// Parses a configuration document; syntax errors become ConfigError with line context.
inline Json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open file");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

namespace json_detail {

inline const Json& require(const Json& j, const std::string& key, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError(ctx + ": missing key '" + key + "'");
    return *it;
}

inline double number(const Json& j, const std::string& ctx) {
    if (!j.is_number()) throw ConfigError(ctx + ": expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(ctx + ": non-finite number");
    return v;
}

inline double number(const Json& j, const std::string& key, const std::string& ctx) {
    return number(require(j, key, ctx), ctx + "." + key);
}

inline double number_or(const Json& j, const std::string& key, double fallback, const std::string& ctx) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return number(j.at(key), ctx + "." + key);
}

inline Vec3 vec3(const Json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(ctx + ": expected an array of 3 numbers");
    return {number(j[0], ctx + "[0]"), number(j[1], ctx + "[1]"), number(j[2], ctx + "[2]")};
}

inline Vec3 vec3(const Json& j, const std::string& key, const std::string& ctx) {
    return vec3(require(j, key, ctx), ctx + "." + key);
}

inline Json to_array(const Vec3& v) { return Json::array({v(0), v(1), v(2)}); }

}  // namespace json_detail

inline MachineGeometry geometry_from_json(const Json& j, const std::string& ctx = "geometry") {
    using namespace json_detail;
    if (j.contains("structure") && j.at("structure") != std::string(MachineGeometry::kStructure)) {
        throw ConfigError(ctx + ": only the WCAYFXZT structure is supported");
    }
    MachineGeometry g;
    g.a_tilt = deg_to_rad(number(j, "a_tilt_deg", ctx));
    g.a_pivot = vec3(j, "a_pivot_mm", ctx);
    g.c_pivot = vec3(j, "c_pivot_mm", ctx);
    g.ball_offset = vec3(j, "ball_offset_mm", ctx);
    g.spindle_home = vec3(j, "spindle_home_mm", ctx);
    g.tool_length = number(j, "tool_length_mm", ctx);
    g.validate();
    return g;
}

inline Json geometry_to_json(const MachineGeometry& g) {
    using json_detail::to_array;
    Json j;
    j["structure"] = std::string(MachineGeometry::kStructure);
    j["a_tilt_deg"] = rad_to_deg(g.a_tilt);
    j["a_pivot_mm"] = to_array(g.a_pivot);
    j["c_pivot_mm"] = to_array(g.c_pivot);
    j["ball_offset_mm"] = to_array(g.ball_offset);
    j["spindle_home_mm"] = to_array(g.spindle_home);
    j["tool_length_mm"] = g.tool_length;
    return j;
}

inline SensorCalibration calibration_from_json(const Json& j, const std::string& ctx = "calibration") {
    using namespace json_detail;
    SensorCalibration cal;
    const auto& dirs = require(j, "directions", ctx);
    if (!dirs.is_array() || dirs.size() != 3) throw ConfigError(ctx + ".directions: expected three vectors");
    for (std::size_t i = 0; i < 3; ++i) cal.directions[i] = vec3(dirs[i], ctx + ".directions[" + std::to_string(i) + "]");
    const auto gain = vec3(j, "gain_um_per_V", ctx);
    const auto offset = vec3(j, "offset_um", ctx);
    for (int i = 0; i < 3; ++i) {
        cal.gain_um_per_volt[static_cast<std::size_t>(i)] = gain(i);
        cal.offset_um[static_cast<std::size_t>(i)] = offset(i);
    }
    if (j.contains("setup_offset_um")) cal.setup_offset_um = vec3(j, "setup_offset_um", ctx);
    cal.validate();
    return cal;
}

inline Json calibration_to_json(const SensorCalibration& cal) {
    using json_detail::to_array;
    Json j;
    j["directions"] = Json::array();
    for (const auto& d : cal.directions) j["directions"].push_back(to_array(d));
    j["gain_um_per_V"] = Json::array({cal.gain_um_per_volt[0], cal.gain_um_per_volt[1], cal.gain_um_per_volt[2]});
    j["offset_um"] = Json::array({cal.offset_um[0], cal.offset_um[1], cal.offset_um[2]});
    j["setup_offset_um"] = to_array(cal.setup_offset_um);
    return j;
}

/// Key of parameter i on disk: angles in µrad, dy_C in µm.
inline std::string link_error_key(std::size_t i) {
    return std::string(LinkErrorVector::kNames[i]) + (LinkErrorVector::is_angular(i) ? "_urad" : "_um");
}

inline LinkErrorVector link_errors_from_json(const Json& j, const std::string& ctx = "link_errors") {
    LinkErrorVector dq;
    for (std::size_t i = 0; i < LinkErrorVector::kSize; ++i) {
        // µrad -> rad and µm -> mm share the same factor
        dq[i] = json_detail::number_or(j, link_error_key(i), 0.0, ctx) * 1e-6 * (LinkErrorVector::is_angular(i) ? 1.0 : 1e3);
    }
    return dq;
}

inline Json link_errors_to_json(const LinkErrorVector& dq) {
    Json j = Json::object();
    for (std::size_t i = 0; i < LinkErrorVector::kSize; ++i) {
        j[link_error_key(i)] = LinkErrorVector::is_angular(i) ? dq[i] * 1e6 : dq[i] * 1e3;
    }
    return j;
}

/// Identified parameters with units, standard errors and conditioning diagnostics.
inline Json identification_to_json(const LinkIdentification& id) {
    Json params = Json::array();
    for (std::size_t i = 0; i < LinkErrorVector::kSize; ++i) {
        const bool ang = LinkErrorVector::is_angular(i);
        const double scale = ang ? 1e6 : 1e3;
        params.push_back({{"name", std::string(LinkErrorVector::kNames[i])},
                          {"description", std::string(LinkErrorVector::kDescriptions[i])},
                          {"value", id.dq[i] * scale},
                          {"standard_error", id.standard_errors[i] * scale},
                          {"unit", ang ? "urad" : "um"}});
    }
    return {{"parameters", params},
            {"condition_number", id.condition_number},
            {"rank", id.rank},
            {"residual_rms_um", id.residual_rms * 1e3}};
}

inline Json polynomial_to_json(const MotionPolynomialModel& m) {
    Json leg = Json::array(), mono = Json::array();
    const auto mc = m.monomial();
    for (std::size_t a = 0; a < 3; ++a) {
        Json l = Json::array(), c = Json::array();
        for (double v : m.legendre[a]) l.push_back(v * 1e3);
        for (double v : mc[a]) c.push_back(v * 1e3);
        leg.push_back(l);
        mono.push_back(c);
    }
    return {{"degree", m.degree},
            {"variable", "normalized path parameter t in [0, 1]"},
            {"shifted_legendre_um", leg},
            {"monomial_um", mono}};
}

inline MotionPolynomialModel polynomial_from_json(const Json& j, const std::string& ctx = "polynomial") {
    MotionPolynomialModel m;
    m.degree = static_cast<int>(json_detail::number(j, "degree", ctx));
    const auto& leg = json_detail::require(j, "shifted_legendre_um", ctx);
    if (!leg.is_array() || leg.size() != 3) throw DataError(ctx + ": expected three coefficient arrays");
    for (std::size_t a = 0; a < 3; ++a) {
        m.legendre[a].clear();
        for (const auto& v : leg[a]) m.legendre[a].push_back(json_detail::number(v, ctx) * 1e-3);
    }
    m.validate();
    return m;
}

inline Json decomposition_summary(const Decomposition& d) {
    const Vec3 td_um = d.td * 1e3;
    return {{"session", d.session_id},
            {"feed_mm_min", d.feed_mm_min},
            {"reference", d.reference},
            {"delay_s", d.delay_s},
            {"sample_rate_hz", d.sample_rate},
            {"samples", d.times.size()},
            {"start_time_s", d.times.empty() ? 0.0 : d.times.front()},
            {"link_errors", link_errors_to_json(d.dq)},
            {"polynomial", polynomial_to_json(d.model)},
            {"thermal_offset_um", json_detail::to_array(td_um)},
            {"files",
             {{"c", "delta_c.csv"}, {"l", "delta_l.csv"}, {"m", "delta_m.csv"}, {"td", "delta_td.csv"}, {"d", "delta_d.csv"}}}};
}

}  // namespace volerr
