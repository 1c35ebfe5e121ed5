#pragma once

#include <array>
#include <cmath>
#include <optional>

#include "volerr/errors.hpp"
#include "volerr/signal.hpp"

namespace volerr::sim {

/// Per-axis position loops. The first-order loop is y' = Kv (u - y); the
/// optional second-order loop is y'' = w^2 (u - y) - 2 zeta w y' and replaces it.
struct ServoParams {
    std::array<double, 5> kv{1000.0, 1000.0, 1000.0, 950.0, 1050.0};  ///< 1/s, order X Y Z A C

    struct SecondOrder {
        double natural_frequency_hz = 100.0;
        double damping = 0.7;
        int substeps = 30;  ///< RK4 steps per input sample
    };
    std::optional<SecondOrder> second_order;

    void validate() const {
        for (double k : kv)
            if (!(k > 0.0) || !std::isfinite(k)) throw ConfigError("servo: Kv must be > 0");
        if (second_order) {
            if (!(second_order->natural_frequency_hz > 0.0)) throw ConfigError("servo: natural frequency must be > 0");
            if (!(second_order->damping > 0.0 && second_order->damping <= 2.0)) {
                throw ConfigError("servo: damping must lie in (0, 2]");
            }
            if (second_order->substeps < 1) throw ConfigError("servo: substeps must be >= 1");
        }
    }
};

namespace servo_detail {

// Exact response of y' = kv (u - y) to an input that is linear between samples.
inline std::vector<double> first_order(const std::vector<double>& u, double kv, double dt) {
    std::vector<double> y(u.size());
    if (u.empty()) return y;
    const double e = std::exp(-kv * dt);
    y[0] = u[0];
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
        const double slope = (u[k + 1] - u[k]) / dt;
        y[k + 1] = u[k + 1] - slope / kv + (y[k] - u[k] + slope / kv) * e;
    }
    return y;
}

inline std::vector<double> second_order(const std::vector<double>& u, const ServoParams::SecondOrder& p, double dt) {
    std::vector<double> y(u.size());
    if (u.empty()) return y;
    const double w = 2.0 * kPi * p.natural_frequency_hz;
    const double z = p.damping;
    const double h = dt / p.substeps;
    double pos = u[0], vel = 0.0;
    y[0] = pos;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
        const double u0 = u[k], slope = (u[k + 1] - u[k]) / dt;
        auto acc = [&](double t, double x, double v) { return w * w * (u0 + slope * t - x) - 2.0 * z * w * v; };
        for (int s = 0; s < p.substeps; ++s) {
            const double t = s * h;
            const double k1x = vel, k1v = acc(t, pos, vel);
            const double k2x = vel + 0.5 * h * k1v, k2v = acc(t + 0.5 * h, pos + 0.5 * h * k1x, vel + 0.5 * h * k1v);
            const double k3x = vel + 0.5 * h * k2v, k3v = acc(t + 0.5 * h, pos + 0.5 * h * k2x, vel + 0.5 * h * k2v);
            const double k4x = vel + h * k3v, k4v = acc(t + h, pos + h * k3x, vel + h * k3v);
            pos += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
            vel += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        }
        y[k + 1] = pos;
    }
    return y;
}

}  // namespace servo_detail

/// Encoder actual values produced by the position loops from controller setpoints.
/// Each axis starts at rest on its first setpoint.
inline SignalSet servo_response(const SignalSet& inputs, const ServoParams& servo) {
    inputs.validate();
    servo.validate();
    const double dt = inputs.period();
    SignalSet out;
    out.sample_rate = inputs.sample_rate;
    out.start_time = inputs.start_time;
    for (std::size_t j = 0; j < kJointChannels.size(); ++j) {
        const auto& u = inputs.channel(kJointChannels[j]);
        out.add_channel(std::string(kJointChannels[j]),
                        servo.second_order ? servo_detail::second_order(u, *servo.second_order, dt)
                                           : servo_detail::first_order(u, servo.kv[j], dt));
    }
    return out;
}

}  // namespace volerr::sim
