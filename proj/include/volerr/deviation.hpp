#pragma once

#include <array>
#include <string>

#include "volerr/errors.hpp"
#include "volerr/kinematics.hpp"
#include "volerr/signal.hpp"

namespace volerr {

/// Row k = dkt(pose_k) for the controller-input poses (chi_nom).
inline DeviationMatrix build_nominal_deviation(const SignalSet& joints, const MachineGeometry& geom) {
    const auto poses = joint_poses(joints);
    DeviationMatrix out(static_cast<Eigen::Index>(poses.size()), 3);
    for (std::size_t k = 0; k < poses.size(); ++k) {
        out.row(static_cast<Eigen::Index>(k)) = dkt(poses[k], geom).transpose();
    }
    return out;
}

/// Same map applied to encoder actual values (chi_enc).
inline DeviationMatrix build_encoder_deviation(const SignalSet& joints, const MachineGeometry& geom) {
    return build_nominal_deviation(joints, geom);
}

/// Orientation and conversion of the three capacitive sensors.
///
/// Sensor i reads the projection of tau = P_t - P_w on its unit direction d_i,
/// so the readings r satisfy D * tau = r with D's rows the directions.
struct SensorCalibration {
    std::array<Vec3, 3> directions{Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
    std::array<double, 3> gain_um_per_volt{1.0, 1.0, 1.0};
    std::array<double, 3> offset_um{0.0, 0.0, 0.0};
    Vec3 setup_offset_um = Vec3::Zero();  ///< constant master-ball / head setup offset to subtract

    Mat3 direction_matrix() const {
        Mat3 d;
        for (int i = 0; i < 3; ++i) d.row(i) = directions[static_cast<std::size_t>(i)].transpose();
        return d;
    }

    double condition_number() const {
        const Eigen::JacobiSVD<Mat3> svd(direction_matrix());
        const auto& s = svd.singularValues();
        return s(2) > 0.0 ? s(0) / s(2) : std::numeric_limits<double>::infinity();
    }

    void validate() const {
        for (std::size_t i = 0; i < 3; ++i) {
            if (!directions[i].allFinite() || std::abs(directions[i].norm() - 1.0) > 1e-9) {
                throw ConfigError("sensor calibration: direction " + std::to_string(i + 1) + " is not a unit vector");
            }
            if (!std::isfinite(gain_um_per_volt[i]) || !std::isfinite(offset_um[i])) {
                throw ConfigError("sensor calibration: non-finite gain or offset");
            }
        }
        if (!setup_offset_um.allFinite()) throw ConfigError("sensor calibration: non-finite setup offset");
        if (!(condition_number() < 1e3)) {
            throw ConfigError("sensor calibration: direction matrix is ill-conditioned");
        }
    }
};

/// Measured tool-to-ball vectors chi (mm) from the three sensor channels.
/// Volt channels (s1_V..s3_V) go through gain and offset; µm channels are used as is.
inline DeviationMatrix project_sensor_readings(const SignalSet& raw, const SensorCalibration& cal) {
    cal.validate();
    const bool volts = raw.has("s1_V");
    std::array<const std::vector<double>*, 3> ch{};
    for (std::size_t i = 0; i < 3; ++i) {
        const std::string name = "s" + std::to_string(i + 1) + (volts ? "_V" : "");
        ch[i] = &raw.channel(name);
    }
    const auto lu = cal.direction_matrix().fullPivLu();
    const auto n = static_cast<Eigen::Index>(raw.size());
    DeviationMatrix out(n, 3);
    for (Eigen::Index k = 0; k < n; ++k) {
        Vec3 r;
        for (std::size_t i = 0; i < 3; ++i) {
            const double v = (*ch[i])[static_cast<std::size_t>(k)];
            r(static_cast<Eigen::Index>(i)) = volts ? cal.gain_um_per_volt[i] * v + cal.offset_um[i] : v;
        }
        const Vec3 tau_um = lu.solve(r) - cal.setup_offset_um;
        out.row(k) = (tau_um * 1e-3).transpose();
    }
    return out;
}

}  // namespace volerr
