/**
 * @file structure.hpp
 * @brief Error sources of the virtual machine and the synthetic sensor readings.
 *
 * The sensor sees the actual tool-to-ball vector
 *
 *   chi = dkt_with_errors(enc, dq) + motion(enc) + drift + deflection + noise
 *
 * where enc is the encoder pose at the sensor rate, so chi - chi_enc holds
 * exactly the injected geometric, thermal, dynamic and noise terms.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "volerr/errors.hpp"
#include "volerr/kinematics.hpp"
#include "volerr/metrics.hpp"
#include "volerr/signal.hpp"
#include "volerr/sync.hpp"

namespace volerr::sim {

/// amplitude * sin(2 pi q / period + phase) added to one Cartesian component,
/// q being the axis position in mm (X, Y, Z) or degrees (A, C).
struct MotionErrorTerm {
    std::size_t axis = 0;     ///< 0..4 = X, Y, Z, A, C
    int component = 0;        ///< 0..2 = x, y, z
    double amplitude_um = 0.0;
    double period = 400.0;    ///< mm or deg
    double phase = 0.0;       ///< rad
};

inline double axis_position(const JointPose& p, std::size_t axis) {
    switch (axis) {
        case 0: return p.x;
        case 1: return p.y;
        case 2: return p.z;
        case 3: return rad_to_deg(p.a);
        default: return rad_to_deg(p.c);
    }
}

/// Sum of the motion-error terms at a pose, mm.
inline Vec3 motion_error(const JointPose& p, const std::vector<MotionErrorTerm>& terms) {
    Vec3 e = Vec3::Zero();
    for (const auto& t : terms) {
        e(t.component) += t.amplitude_um * 1e-3 * std::sin(2.0 * kPi * axis_position(p, t.axis) / t.period + t.phase);
    }
    return e;
}

struct StructureParams {
    LinkErrorVector link_errors;
    std::vector<MotionErrorTerm> motion_errors;
    Vec3 thermal_drift_um = Vec3::Zero();
    /// TCP deflection per unit axis acceleration, µm per m/s^2 (X, Y, Z) or
    /// per rad/s^2 (A, C); the deflection is minus gain times acceleration.
    std::array<Vec3, 5> compliance{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
    double noise_um = 0.4;
    double acceleration_window_s = 0.009;  ///< smoothing applied to encoder positions at the NC cycle
    /// Deflection driven by the measured (encoder) acceleration, or by the
    /// interpolator's exact commanded acceleration.
    enum class AccelerationSource { encoder, command } acceleration_source = AccelerationSource::encoder;

    void validate() const {
        if (!link_errors.finite()) throw ConfigError("structure: non-finite link errors");
        for (const auto& t : motion_errors) {
            if (t.axis > 4 || t.component < 0 || t.component > 2) throw ConfigError("structure: bad motion-error axis");
            if (!(t.amplitude_um >= 0.0) || !(t.period > 0.0) || !std::isfinite(t.phase)) {
                throw ConfigError("structure: motion-error amplitude must be >= 0 and period > 0");
            }
        }
        if (!thermal_drift_um.allFinite()) throw ConfigError("structure: non-finite thermal drift");
        for (const auto& c : compliance)
            if (!c.allFinite()) throw ConfigError("structure: non-finite compliance");
        if (!(noise_um >= 0.0)) throw ConfigError("structure: noise must be >= 0");
        if (!(acceleration_window_s >= 0.0)) throw ConfigError("structure: smoothing window must be >= 0");
    }
};

/// Injected terms per sample, mm.
struct MeasurementComponents {
    DeviationMatrix link;      ///< dkt_with_errors - dkt at the encoder pose
    DeviationMatrix motion;
    DeviationMatrix drift;
    DeviationMatrix dynamic;
    DeviationMatrix noise;
};

struct SynthesizedMeasurement {
    SignalSet encoder;        ///< encoder poses at the sensor rate
    SignalSet accelerations;  ///< smoothed axis accelerations at the sensor rate (mm/s^2, rad/s^2)
    SignalSet sensor;         ///< s1, s2, s3 in µm along x, y, z
    DeviationMatrix chi;      ///< mm
    MeasurementComponents parts;
};

/// TCP deflection (mm) for one row of axis accelerations.
inline Vec3 deflection(const std::array<double, 5>& acc, const std::array<Vec3, 5>& compliance) {
    Vec3 d = Vec3::Zero();
    for (std::size_t j = 0; j < 5; ++j) {
        const double a = j < 3 ? acc[j] * 1e-3 : acc[j];  // mm/s^2 -> m/s^2 for linear axes
        d -= compliance[j] * a;
    }
    return d * 1e-3;
}

/// Sensor readings for encoder values sampled at the NC cycle. Encoder poses
/// are linearly interpolated to `sample_rate`; accelerations are taken at the
/// NC cycle and interpolated the same way.
/// `accelerations`, when given, replaces the encoder-derived accelerations
/// (same clock as the resampled encoders).
inline SynthesizedMeasurement synthesize_measurement(const SignalSet& encoders_nc, const StructureParams& st,
                                                     const MachineGeometry& geom, double sample_rate,
                                                     std::uint64_t seed,
                                                     const SignalSet* accelerations = nullptr) {
    st.validate();
    geom.validate();
    SynthesizedMeasurement out;
    out.encoder = resample(encoders_nc, sample_rate);
    if (accelerations) {
        if (accelerations->size() != out.encoder.size()) throw DataError("synthesize: acceleration length mismatch");
        out.accelerations = *accelerations;
    } else {
        out.accelerations = resample(axis_accelerations(encoders_nc, st.acceleration_window_s), sample_rate);
    }

    const auto poses = joint_poses(out.encoder);
    const auto n = static_cast<Eigen::Index>(poses.size());
    auto& p = out.parts;
    p.link.resize(n, 3);
    p.motion.resize(n, 3);
    p.drift.resize(n, 3);
    p.dynamic.resize(n, 3);
    p.noise.resize(n, 3);
    out.chi.resize(n, 3);

    std::array<const std::vector<double>*, 5> acc{};
    for (std::size_t j = 0; j < 5; ++j) acc[j] = &out.accelerations.channel(kJointChannels[j]);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Vec3 drift = st.thermal_drift_um * 1e-3;
    const double sigma = st.noise_um * 1e-3;
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& pose = poses[static_cast<std::size_t>(k)];
        const Vec3 nominal = dkt(pose, geom);
        const Vec3 actual = dkt_with_errors(pose, geom, st.link_errors);
        std::array<double, 5> a{};
        for (std::size_t j = 0; j < 5; ++j) a[j] = (*acc[j])[static_cast<std::size_t>(k)];
        Vec3 noise = Vec3::Zero();
        if (sigma > 0.0) noise = Vec3(gauss(rng), gauss(rng), gauss(rng)) * sigma;

        p.link.row(k) = (actual - nominal).transpose();
        p.motion.row(k) = motion_error(pose, st.motion_errors).transpose();
        p.drift.row(k) = drift.transpose();
        p.dynamic.row(k) = deflection(a, st.compliance).transpose();
        p.noise.row(k) = noise.transpose();
        out.chi.row(k) = actual.transpose() + p.motion.row(k) + p.drift.row(k) + p.dynamic.row(k) + p.noise.row(k);
    }

    out.sensor.sample_rate = out.encoder.sample_rate;
    out.sensor.start_time = out.encoder.start_time;
    for (int c = 0; c < 3; ++c) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (Eigen::Index k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = out.chi(k, c) * 1e3;
        out.sensor.add_channel(std::string(kSensorChannels[static_cast<std::size_t>(c)]), std::move(v));
    }
    return out;
}

}  // namespace volerr::sim
