#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "volerr/errors.hpp"
#include "volerr/kinematics.hpp"

namespace volerr {

/// Joint channels: X, Y, Z in mm; A, C in radians.
inline constexpr std::array<std::string_view, 5> kJointChannels = {"X", "Y", "Z", "A", "C"};
/// Capacitive sensor channels, in µm once gains are applied.
inline constexpr std::array<std::string_view, 3> kSensorChannels = {"s1", "s2", "s3"};

/// Uniformly sampled multichannel time series on a common clock.
struct SignalSet {
    double sample_rate = 0.0;  ///< Hz
    double start_time = 0.0;   ///< s
    std::vector<std::string> names;
    std::vector<std::vector<double>> channels;

    std::size_t size() const { return channels.empty() ? 0 : channels.front().size(); }
    std::size_t channel_count() const { return channels.size(); }
    double period() const { return 1.0 / sample_rate; }
    double time_at(std::size_t k) const { return start_time + static_cast<double>(k) / sample_rate; }
    double duration() const { return size() > 1 ? static_cast<double>(size() - 1) / sample_rate : 0.0; }

    bool has(std::string_view name) const {
        return std::find(names.begin(), names.end(), name) != names.end();
    }

    std::size_t index_of(std::string_view name) const {
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw DataError("signal set: missing channel '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - names.begin());
    }

    const std::vector<double>& channel(std::string_view name) const { return channels[index_of(name)]; }
    std::vector<double>& channel(std::string_view name) { return channels[index_of(name)]; }

    void add_channel(std::string name, std::vector<double> values) {
        if (!channels.empty() && values.size() != size()) {
            throw DataError("signal set: channel '" + name + "' has " + std::to_string(values.size()) +
                            " samples, expected " + std::to_string(size()));
        }
        names.push_back(std::move(name));
        channels.push_back(std::move(values));
    }

    /// Copy of samples [first, first + count); start time moves with the window.
    SignalSet slice(std::size_t first, std::size_t count) const {
        if (first + count > size()) throw DataError("signal set: slice out of range");
        SignalSet out;
        out.sample_rate = sample_rate;
        out.start_time = time_at(first);
        out.names = names;
        out.channels.reserve(channels.size());
        for (const auto& ch : channels) {
            out.channels.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(first),
                                      ch.begin() + static_cast<std::ptrdiff_t>(first + count));
        }
        return out;
    }

    /// Checks the structural invariants; throws DataError.
    void validate() const {
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate)) {
            throw DataError("signal set: sample rate must be > 0");
        }
        if (names.size() != channels.size()) throw DataError("signal set: name/channel count mismatch");
        for (std::size_t c = 0; c < channels.size(); ++c) {
            if (channels[c].size() != size()) {
                throw DataError("signal set: channel '" + names[c] + "' length differs");
            }
            for (std::size_t k = 0; k < channels[c].size(); ++k) {
                if (!std::isfinite(channels[c][k])) {
                    throw DataError("signal set: non-finite value in channel '" + names[c] +
                                    "' at sample " + std::to_string(k));
                }
            }
        }
    }
};

inline bool has_joint_channels(const SignalSet& s) {
    return std::all_of(kJointChannels.begin(), kJointChannels.end(),
                       [&](std::string_view n) { return s.has(n); });
}

/// Joint poses row by row; requires the five joint channels.
inline std::vector<JointPose> joint_poses(const SignalSet& s) {
    if (!has_joint_channels(s)) throw DataError("signal set: the five joint channels X, Y, Z, A, C are required");
    const auto& x = s.channel("X");
    const auto& y = s.channel("Y");
    const auto& z = s.channel("Z");
    const auto& a = s.channel("A");
    const auto& c = s.channel("C");
    std::vector<JointPose> poses(s.size());
    for (std::size_t k = 0; k < poses.size(); ++k) poses[k] = {x[k], y[k], z[k], a[k], c[k]};
    return poses;
}

inline SignalSet joint_signal_set(const std::vector<JointPose>& poses, double sample_rate,
                                  double start_time = 0.0) {
    SignalSet s;
    s.sample_rate = sample_rate;
    s.start_time = start_time;
    std::array<std::vector<double>, 5> cols;
    for (auto& col : cols) col.reserve(poses.size());
    for (const auto& p : poses) {
        cols[0].push_back(p.x);
        cols[1].push_back(p.y);
        cols[2].push_back(p.z);
        cols[3].push_back(p.a);
        cols[4].push_back(p.c);
    }
    for (std::size_t i = 0; i < 5; ++i) s.add_channel(std::string(kJointChannels[i]), std::move(cols[i]));
    return s;
}

inline void require_same_rows(const DeviationMatrix& a, const DeviationMatrix& b, std::string_view what) {
    if (a.rows() != b.rows()) {
        throw DataError(std::string(what) + ": row count mismatch (" + std::to_string(a.rows()) + " vs " +
                        std::to_string(b.rows()) + ")");
    }
}

}  // namespace volerr
