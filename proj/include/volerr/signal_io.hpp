/**
 * @file signal_io.hpp
 * @brief CSV ingestion and emission for joint, sensor, and deviation series.
 *
 * Joint CSV:     t_s,X_mm,Y_mm,Z_mm,A_deg,C_deg
 * Sensor CSV:    t_s,s1_um,s2_um,s3_um   (already converted to µm)
 *            or  t_s,s1_V,s2_V,s3_V      (raw volts, converted with a SensorCalibration)
 * Deviation CSV: t_s,dx_um,dy_um,dz_um
 *
 * Numbers are written with 17 significant digits so a write/load cycle
 * reproduces every double exactly (angles go through a degree conversion).
 */
#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "volerr/errors.hpp"
#include "volerr/signal.hpp"

namespace volerr {

enum class CsvSchema {
    joints,  ///< controller inputs or encoder actual values
    sensor,  ///< capacitive sensor readings, µm or volts
};

namespace csv_detail {

struct ColumnSpec {
    std::string_view header;
    std::string_view channel;
    double scale;  ///< file value * scale = in-memory value
};

inline constexpr std::array<ColumnSpec, 5> kJointColumns = {{{"X_mm", "X", 1.0},
                                                             {"Y_mm", "Y", 1.0},
                                                             {"Z_mm", "Z", 1.0},
                                                             {"A_deg", "A", kPi / 180.0},
                                                             {"C_deg", "C", kPi / 180.0}}};
inline constexpr std::array<ColumnSpec, 3> kSensorMicronColumns = {
    {{"s1_um", "s1", 1.0}, {"s2_um", "s2", 1.0}, {"s3_um", "s3", 1.0}}};
inline constexpr std::array<ColumnSpec, 3> kSensorVoltColumns = {
    {{"s1_V", "s1_V", 1.0}, {"s2_V", "s2_V", 1.0}, {"s3_V", "s3_V", 1.0}}};

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
            field.remove_suffix(1);
        out.push_back(field);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double parse_number(std::string_view field, std::size_t row, std::string_view column,
                           const std::string& path) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (field.empty() || ec != std::errc() || ptr != last) {
        throw DataError(path + ": row " + std::to_string(row) + ", column '" + std::string(column) +
                        "': cannot parse '" + std::string(field) + "'");
    }
    if (!std::isfinite(value)) {
        throw DataError(path + ": row " + std::to_string(row) + ", column '" + std::string(column) +
                        "': non-finite value '" + std::string(field) + "'");
    }
    return value;
}

inline void append_number(std::string& out, double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    out.append(buf, res.ptr);
}

// Snaps the sampling period to a whole number of nanoseconds when the timestamps allow it.
inline double sample_rate_from_times(const std::vector<double>& t, const std::string& path) {
    const double span = t.back() - t.front();
    if (!(span > 0.0)) throw DataError(path + ": timestamps must increase");
    double dt = span / static_cast<double>(t.size() - 1);
    const double dt_ns = std::round(dt * 1e9);
    if (dt_ns > 0.0 && std::abs(dt - dt_ns * 1e-9) <= 1e-9 * dt) dt = dt_ns * 1e-9;
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double expected = t.front() + static_cast<double>(k) * dt;
        if (std::abs(t[k] - expected) > 1e-3 * dt) {
            throw DataError(path + ": row " + std::to_string(k + 2) + ": timestamps are not uniformly sampled");
        }
    }
    return 1.0 / dt;
}

}  // namespace csv_detail

/// Loads and validates a CSV file. Row numbers in errors are 1-based file lines.
inline SignalSet load_signals(const std::filesystem::path& path, CsvSchema schema) {
    using namespace csv_detail;
    const std::string name = path.string();
    std::ifstream in(path);
    if (!in) throw DataError(name + ": cannot open file");

    std::string line;
    if (!std::getline(in, line)) throw DataError(name + ": empty file");
    const auto header = split(line);

    auto find_col = [&](std::string_view h) -> std::ptrdiff_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == h) return static_cast<std::ptrdiff_t>(i);
        return -1;
    };

    std::vector<ColumnSpec> specs;
    if (schema == CsvSchema::joints) {
        specs.assign(kJointColumns.begin(), kJointColumns.end());
    } else if (find_col("s1_V") >= 0 || find_col("s2_V") >= 0 || find_col("s3_V") >= 0) {
        specs.assign(kSensorVoltColumns.begin(), kSensorVoltColumns.end());
    } else {
        specs.assign(kSensorMicronColumns.begin(), kSensorMicronColumns.end());
    }

    const auto time_col = find_col("t_s");
    if (time_col < 0) throw DataError(name + ": missing column 't_s'");
    std::vector<std::size_t> cols;
    for (const auto& spec : specs) {
        const auto c = find_col(spec.header);
        if (c < 0) throw DataError(name + ": missing column '" + std::string(spec.header) + "'");
        cols.push_back(static_cast<std::size_t>(c));
    }

    std::vector<double> times;
    std::vector<std::vector<double>> data(specs.size());
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = split(line);
        if (fields.size() != header.size()) {
            throw DataError(name + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(header.size()));
        }
        times.push_back(parse_number(fields[static_cast<std::size_t>(time_col)], row, "t_s", name));
        for (std::size_t i = 0; i < specs.size(); ++i) {
            data[i].push_back(parse_number(fields[cols[i]], row, specs[i].header, name) * specs[i].scale);
        }
    }
    if (times.size() < 2) throw DataError(name + ": at least two samples are required");

    SignalSet s;
    s.sample_rate = sample_rate_from_times(times, name);
    s.start_time = times.front();
    for (std::size_t i = 0; i < specs.size(); ++i) s.add_channel(std::string(specs[i].channel), std::move(data[i]));
    s.validate();
    return s;
}

/// Writes a joint or sensor set in the schema implied by its channels.
inline void write_signals(const std::filesystem::path& path, const SignalSet& s) {
    using namespace csv_detail;
    s.validate();
    std::vector<ColumnSpec> specs;
    if (has_joint_channels(s)) {
        specs.assign(kJointColumns.begin(), kJointColumns.end());
    } else if (s.has("s1_V")) {
        specs.assign(kSensorVoltColumns.begin(), kSensorVoltColumns.end());
    } else if (s.has("s1") && s.has("s2") && s.has("s3")) {
        specs.assign(kSensorMicronColumns.begin(), kSensorMicronColumns.end());
    } else {
        throw DataError("write_signals: set has neither joint nor sensor channels");
    }

    std::vector<const std::vector<double>*> cols;
    for (const auto& spec : specs) cols.push_back(&s.channel(spec.channel));

    std::string out = "t_s";
    for (const auto& spec : specs) {
        out += ',';
        out += spec.header;
    }
    out += '\n';
    for (std::size_t k = 0; k < s.size(); ++k) {
        append_number(out, s.time_at(k));
        for (std::size_t i = 0; i < specs.size(); ++i) {
            out += ',';
            append_number(out, (*cols[i])[k] / specs[i].scale);
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(path.string() + ": cannot open for writing");
    f << out;
}

/// Writes an n x 3 deviation matrix (mm in memory, µm on disk) with its time column.
inline void write_deviation_csv(const std::filesystem::path& path, const std::vector<double>& times,
                                const DeviationMatrix& m) {
    if (static_cast<Eigen::Index>(times.size()) != m.rows()) {
        throw DataError("write_deviation_csv: time column and matrix row counts differ");
    }
    std::string out = "t_s,dx_um,dy_um,dz_um\n";
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
        csv_detail::append_number(out, times[static_cast<std::size_t>(k)]);
        for (int c = 0; c < 3; ++c) {
            out += ',';
            csv_detail::append_number(out, m(k, c) * 1000.0);
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(path.string() + ": cannot open for writing");
    f << out;
}

struct TimedDeviation {
    std::vector<double> times;
    DeviationMatrix values;  ///< mm
};

inline TimedDeviation load_deviation_csv(const std::filesystem::path& path) {
    const std::string name = path.string();
    std::ifstream in(path);
    if (!in) throw DataError(name + ": cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw DataError(name + ": empty file");
    const auto header = csv_detail::split(line);
    const std::array<std::string_view, 4> expected = {"t_s", "dx_um", "dy_um", "dz_um"};
    if (header.size() != 4 || !std::equal(expected.begin(), expected.end(), header.begin())) {
        throw DataError(name + ": expected header t_s,dx_um,dy_um,dz_um");
    }
    std::vector<double> t, x, y, z;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = csv_detail::split(line);
        if (f.size() != 4) throw DataError(name + ": row " + std::to_string(row) + " is ragged");
        t.push_back(csv_detail::parse_number(f[0], row, "t_s", name));
        x.push_back(csv_detail::parse_number(f[1], row, "dx_um", name) / 1000.0);
        y.push_back(csv_detail::parse_number(f[2], row, "dy_um", name) / 1000.0);
        z.push_back(csv_detail::parse_number(f[3], row, "dz_um", name) / 1000.0);
    }
    TimedDeviation out;
    out.times = std::move(t);
    out.values.resize(static_cast<Eigen::Index>(x.size()), 3);
    for (std::size_t k = 0; k < x.size(); ++k) {
        out.values.row(static_cast<Eigen::Index>(k)) << x[k], y[k], z[k];
    }
    return out;
}

}  // namespace volerr
