/**
 * @file trajectory.hpp
 * @brief Joint-space interpolator of the virtual machine.
 *
 * Planning runs in "path units": mm for X, Y, Z and degrees for A, C, so the
 * programmed feed F (mm/min) applies to the combined joint displacement the
 * way an NC feed group treats linear and rotary axes alike. Limits and the
 * corner tolerance are given in the same units.
 *
 * Each corner is replaced by a blend travelled at constant path speed v_c
 * during which every axis velocity moves from v_c*d_i to v_c*d_{i+1} along the
 * quintic smoothstep h(x) = 10x^3 - 15x^4 + 6x^5. With T the blend duration
 * and du = d_{i+1} - d_i, axis j peaks at acceleration 1.875 v_c |du_j| / T
 * and leaves the sharp corner by at most (5/64) v_c T |du_j|. Between blends
 * the path speed follows a trapezoidal profile bounded by the per-segment
 * speed and acceleration limits.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "volerr/errors.hpp"
#include "volerr/kinematics.hpp"
#include "volerr/signal.hpp"

namespace volerr::sim {

inline constexpr double kDefaultNcCycle = 0.003;  // s

using AxisVector = Eigen::Matrix<double, 5, 1>;

/// Joint pose (mm, rad) to path units (mm, deg) and back.
inline AxisVector to_path_units(const JointPose& p) {
    AxisVector v;
    v << p.x, p.y, p.z, rad_to_deg(p.a), rad_to_deg(p.c);
    return v;
}

inline JointPose from_path_units(const AxisVector& v) {
    return {v(0), v(1), v(2), deg_to_rad(v(3)), deg_to_rad(v(4))};
}

struct AxisLimits {
    AxisVector velocity = (AxisVector() << 500.0, 500.0, 500.0, 300.0, 300.0).finished();        ///< mm/s, deg/s
    AxisVector acceleration = (AxisVector() << 5000.0, 5000.0, 5000.0, 3000.0, 3000.0).finished();  ///< mm/s^2, deg/s^2
};

/// Out-and-back step on one linear axis, one NC cycle each way, used to
/// synchronise recordings.
struct SyncTag {
    bool enabled = true;
    std::size_t axis = 0;        ///< 0, 1 or 2 (X, Y, Z)
    double amplitude_mm = 0.1;
    double dwell_before_s = 0.1;
    double settle_s = 0.1;       ///< rest between the tag and the program
};

struct TrajectoryProgram {
    std::vector<JointPose> waypoints;     ///< consecutive segment end points
    double feed_mm_min = 1000.0;
    double corner_tolerance = 0.01;       ///< mm (deg for rotary axes)
    AxisLimits limits;
    /// When set, limits are those valid at this feed and are scaled with
    /// s = F / limits_feed (speeds by s, accelerations by s^2), so runs at
    /// different feeds are exact time-scaled copies of each other.
    std::optional<double> limits_feed_mm_min;
    SyncTag tag;
    double post_dwell_s = 0.1;

    void validate() const {
        if (waypoints.empty()) throw ConfigError("trajectory: at least one waypoint is required");
        for (const auto& w : waypoints)
            if (!w.finite()) throw ConfigError("trajectory: non-finite waypoint");
        if (!(feed_mm_min > 0.0) || !std::isfinite(feed_mm_min)) throw ConfigError("trajectory: feed must be > 0");
        if (!(corner_tolerance > 0.0)) throw ConfigError("trajectory: corner tolerance must be > 0");
        for (int j = 0; j < 5; ++j) {
            if (!(limits.velocity(j) > 0.0) || !(limits.acceleration(j) > 0.0) || !std::isfinite(limits.velocity(j)) ||
                !std::isfinite(limits.acceleration(j))) {
                throw ConfigError("trajectory: axis limits must be finite and > 0");
            }
        }
        if (limits_feed_mm_min && !(*limits_feed_mm_min > 0.0)) throw ConfigError("trajectory: limits feed must be > 0");
        if (tag.axis > 2) throw ConfigError("trajectory: the tag must use X, Y or Z");
        if (tag.dwell_before_s < 0.0 || tag.settle_s < 0.0 || post_dwell_s < 0.0) {
            throw ConfigError("trajectory: dwell times must be >= 0");
        }
    }

    AxisLimits effective_limits() const {
        AxisLimits l = limits;
        if (limits_feed_mm_min) {
            const double s = feed_mm_min / *limits_feed_mm_min;
            l.velocity *= s;
            l.acceleration *= s * s;
        }
        return l;
    }
};

namespace plan_detail {

struct Piece {
    bool blend = false;
    double t0 = 0.0;
    double duration = 0.0;
    // straight: P = origin + dir * (s0 + v0 tau + 0.5 acc tau^2)
    AxisVector origin;
    AxisVector dir;
    double s0 = 0.0;
    double v0 = 0.0;
    double acc = 0.0;
    // blend: P = vertex + vc (dir (tau - T/2) + du T H(tau/T))
    AxisVector du;
    double vc = 0.0;

    AxisVector acceleration(double tau) const {
        if (!blend) return dir * acc;
        const double x = std::clamp(duration > 0.0 ? tau / duration : 0.0, 0.0, 1.0);
        return du * (vc * 30.0 * x * x * (1.0 - x) * (1.0 - x) / duration);
    }

    AxisVector at(double tau) const {
        tau = std::clamp(tau, 0.0, duration);
        if (!blend) return origin + dir * (s0 + v0 * tau + 0.5 * acc * tau * tau);
        const double x = duration > 0.0 ? tau / duration : 0.0;
        const double x4 = x * x * x * x;
        const double hh = 2.5 * x4 - 3.0 * x4 * x + x4 * x * x;
        return origin + vc * (dir * (tau - 0.5 * duration) + du * (duration * hh));
    }
};

}  // namespace plan_detail

/// Continuous-time path; evaluate with position(t) for 0 <= t <= duration.
class PathProfile {
public:
    PathProfile() = default;

    explicit PathProfile(const TrajectoryProgram& prog) {
        prog.validate();
        const AxisLimits lim = prog.effective_limits();
        const double feed = prog.feed_mm_min / 60.0;
        const double eps = prog.corner_tolerance;

        std::vector<AxisVector> pts;
        for (const auto& w : prog.waypoints) {
            const AxisVector p = to_path_units(w);
            if (pts.empty() || (p - pts.back()).norm() > 1e-12) pts.push_back(p);
        }
        start_ = pts.front();
        end_ = pts.back();
        const std::size_t ns = pts.size() - 1;
        if (ns == 0) return;

        std::vector<double> len(ns), vlim(ns), alim(ns);
        std::vector<AxisVector> dir(ns);
        for (std::size_t i = 0; i < ns; ++i) {
            const AxisVector d = pts[i + 1] - pts[i];
            len[i] = d.norm();
            dir[i] = d / len[i];
            vlim[i] = feed;
            alim[i] = std::numeric_limits<double>::infinity();
            for (int j = 0; j < 5; ++j) {
                const double c = std::abs(dir[i](j));
                if (c < 1e-15) continue;
                vlim[i] = std::min(vlim[i], lim.velocity(j) / c);
                alim[i] = std::min(alim[i], lim.acceleration(j) / c);
            }
        }

        // Blend speed bounds and blend constants g (T = 1.875 v g).
        const std::size_t nj = ns - 1;
        std::vector<double> g(nj, 0.0), w(ns + 1, 0.0);
        for (std::size_t i = 0; i < nj; ++i) {
            const AxisVector du = dir[i + 1] - dir[i];
            double vmax = std::min(vlim[i], vlim[i + 1]);
            const double dmax = du.cwiseAbs().maxCoeff();
            if (dmax > 1e-12) {
                for (int j = 0; j < 5; ++j) g[i] = std::max(g[i], std::abs(du(j)) / lim.acceleration(j));
                vmax = std::min(vmax, std::sqrt(64.0 * eps / (5.0 * 1.875 * dmax * g[i])));
                vmax = std::min(vmax, std::sqrt(std::min(len[i], len[i + 1]) / (1.875 * g[i])));
            }
            w[i + 1] = vmax;
        }
        auto half_blend = [&](std::size_t node) {  // node 1..ns-1
            return (node == 0 || node == ns) ? 0.0 : 0.9375 * g[node - 1] * w[node] * w[node];
        };
        std::vector<double> straight(ns);
        auto update_straight = [&] {
            for (std::size_t i = 0; i < ns; ++i) straight[i] = std::max(0.0, len[i] - half_blend(i) - half_blend(i + 1));
        };
        update_straight();
        for (std::size_t i = 0; i < ns; ++i) w[i + 1] = std::min(w[i + 1], std::sqrt(w[i] * w[i] + 2.0 * alim[i] * straight[i]));
        for (std::size_t i = ns; i-- > 0;) w[i] = std::min(w[i], std::sqrt(w[i + 1] * w[i + 1] + 2.0 * alim[i] * straight[i]));
        update_straight();

        double t = 0.0;
        auto push_straight = [&](std::size_t i, double s0, double v0, double acc, double dur) {
            if (!(dur > 0.0)) return;
            plan_detail::Piece p;
            p.t0 = t;
            p.duration = dur;
            p.origin = pts[i];
            p.dir = dir[i];
            p.s0 = s0;
            p.v0 = v0;
            p.acc = acc;
            pieces_.push_back(p);
            t += dur;
        };
        for (std::size_t i = 0; i < ns; ++i) {
            const double v0 = w[i], v1 = w[i + 1], a = alim[i], s = straight[i];
            double vp = std::min(vlim[i], std::sqrt((2.0 * a * s + v0 * v0 + v1 * v1) / 2.0));
            vp = std::max(vp, std::max(v0, v1));
            const double d1 = (vp * vp - v0 * v0) / (2.0 * a);
            const double d3 = (vp * vp - v1 * v1) / (2.0 * a);
            const double d2 = std::max(0.0, s - d1 - d3);
            double s0 = half_blend(i);
            push_straight(i, s0, v0, a, (vp - v0) / a);
            s0 += d1;
            if (vp > 0.0) push_straight(i, s0, vp, 0.0, d2 / vp);
            s0 += d2;
            push_straight(i, s0, vp, -a, (vp - v1) / a);

            if (i + 1 < ns && w[i + 1] > 0.0 && g[i] > 0.0) {
                plan_detail::Piece p;
                p.blend = true;
                p.t0 = t;
                p.duration = 1.875 * w[i + 1] * g[i];
                p.origin = pts[i + 1];
                p.dir = dir[i];
                p.du = dir[i + 1] - dir[i];
                p.vc = w[i + 1];
                pieces_.push_back(p);
                transitions_.push_back(t + 0.5 * p.duration);
                t += p.duration;
            } else if (i + 1 < ns) {
                transitions_.push_back(t);
            }
        }
        duration_ = t;
        if (!std::isfinite(duration_) || !(duration_ > 0.0)) {
            throw ConfigError("trajectory: limits give no feasible motion profile");
        }
    }

    double duration() const { return duration_; }
    const std::vector<double>& transitions() const { return transitions_; }

    /// Position in path units at time t from the start of the program.
    AxisVector position(double t) const {
        if (pieces_.empty() || t <= 0.0) return start_;
        if (t >= duration_) return end_;
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                                   [](double v, const plan_detail::Piece& p) { return v < p.t0; });
        if (it != pieces_.begin()) --it;
        return it->at(t - it->t0);
    }

    /// Commanded acceleration in path units per s^2 (zero outside the program).
    AxisVector acceleration(double t) const {
        if (pieces_.empty() || t <= 0.0 || t >= duration_) return AxisVector::Zero();
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                                   [](double v, const plan_detail::Piece& p) { return v < p.t0; });
        if (it != pieces_.begin()) --it;
        return it->acceleration(t - it->t0);
    }

private:
    AxisVector start_ = AxisVector::Zero();
    AxisVector end_ = AxisVector::Zero();
    std::vector<plan_detail::Piece> pieces_;
    std::vector<double> transitions_;
    double duration_ = 0.0;
};

/// Controller setpoints at the NC cycle plus timing landmarks.
struct PlannedTrajectory {
    SignalSet setpoints;                       ///< X, Y, Z (mm), A, C (rad)
    double program_start_s = 0.0;
    double program_duration_s = 0.0;
    std::vector<double> block_transitions_s;   ///< corner (blend centre) instants
    PathProfile path;
};

/// Controller setpoints at the NC cycle: dwell, tag, settle, program, dwell.
inline PlannedTrajectory plan_trajectory(const TrajectoryProgram& prog, double nc_cycle = kDefaultNcCycle) {
    if (!(nc_cycle > 0.0)) throw ConfigError("trajectory: NC cycle must be > 0");
    const PathProfile path(prog);


    const AxisVector home = to_path_units(prog.waypoints.front());
    std::vector<AxisVector> samples;
    auto dwell = [&](double seconds) {
        const auto k = static_cast<std::size_t>(std::llround(seconds / nc_cycle));
        for (std::size_t i = 0; i < k; ++i) samples.push_back(home);
    };
    samples.push_back(home);
    if (prog.tag.enabled) {
        dwell(prog.tag.dwell_before_s);
        AxisVector out = home;
        out(static_cast<Eigen::Index>(prog.tag.axis)) += prog.tag.amplitude_mm;
        samples.push_back(out);
        samples.push_back(home);
        dwell(prog.tag.settle_s);
    }

    PlannedTrajectory plan;
    plan.path = path;
    const std::size_t k0 = samples.size() - 1;
    plan.program_start_s = static_cast<double>(k0) * nc_cycle;
    plan.program_duration_s = path.duration();
    for (double t : path.transitions()) plan.block_transitions_s.push_back(plan.program_start_s + t);
    if (path.duration() > 0.0) {
        const auto steps = static_cast<std::size_t>(std::ceil(path.duration() / nc_cycle - 1e-9));
        for (std::size_t k = 1; k <= steps; ++k) samples.push_back(path.position(static_cast<double>(k) * nc_cycle));
    }
    const AxisVector last = samples.back();
    const auto post = static_cast<std::size_t>(std::llround(prog.post_dwell_s / nc_cycle));
    for (std::size_t i = 0; i < post; ++i) samples.push_back(last);

    std::vector<JointPose> poses;
    poses.reserve(samples.size());
    for (const auto& s : samples) poses.push_back(from_path_units(s));
    plan.setpoints = joint_signal_set(poses, 1.0 / nc_cycle, 0.0);
    return plan;
}

/// A 17-segment program: the tool follows the master ball (tau_nom = 0 at
/// every waypoint) while A and C sweep, with a near-square corner halfway.
inline std::vector<JointPose> demo_waypoints(const MachineGeometry& geom) {
    static constexpr std::array<std::array<double, 2>, 18> kAC = {{{0, 0},    {2, 4},    {4, 8},    {6, 12},
                                                                   {8, 16},   {10, 20},  {12, 24},  {12, 29},
                                                                   {12, 34},  {17, 34},  {21, 36},  {23, 40},
                                                                   {24, 45},  {25, 50},  {24, 55},  {22, 59},
                                                                   {20, 62},  {18, 65}}};
    std::vector<JointPose> out;
    const Vec3 ez = Vec3::UnitZ();
    for (const auto& ac : kAC) {
        const double a = deg_to_rad(ac[0]), c = deg_to_rad(ac[1]);
        const Vec3 ball = geom.a_pivot + detail::rot_axis(geom.a_axis(), a) *
                                             (geom.c_pivot + detail::rot_axis(ez, c) * geom.ball_offset);
        const Vec3 tool_base = geom.spindle_home - geom.tool_length * ez;
        out.push_back({ball.x() - tool_base.x(), -(ball.y() - tool_base.y()), ball.z() - tool_base.z(), a, c});
    }
    return out;
}

}  // namespace volerr::sim
