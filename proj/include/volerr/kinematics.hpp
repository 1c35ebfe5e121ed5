/**
 * @file kinematics.hpp
 * @brief Direct kinematics of a WCAYFXZT five-axis machine and its link-error model.
 *
 * Two branches hang off the bed frame F (axes x, y, z):
 *
 *   tool branch   F -> X -> Z -> T : P_t = X*ex + Z*z_dir + spindle_home - tool_length*ez
 *   table branch  F -> Y -> A -> C : P_w = Y*y_dir + a_pivot
 *                                          + R(a_axis, A) * (c_pivot + dyC*ey + R(c_axis, C) * ball_offset)
 *
 * and the tool-to-ball vector is tau = P_t - P_w, expressed in F.
 *
 * The nominal A-axis direction lies in the x-z plane, tilted from x towards z
 * by `a_tilt`: a_axis = (cos(a_tilt), 0, sin(a_tilt)). The C axis is along z of
 * the A carrier. Rotations follow the right-hand rule about the axis direction.
 *
 * Link-error conventions (small rotations applied with exact matrices):
 *   dgamma_Y  Y travel direction = Rz(dgamma_Y) * ey       (X/Y squareness)
 *   dalpha_Z  Z travel direction = Rx(dalpha_Z) * Ry(dbeta_Z) * ez (Y/Z squareness)
 *   dbeta_Z                                                  (X/Z squareness)
 *   dbeta_A   A axis direction   = Rz(dgamma_A) * Ry(dbeta_A) * a_axis
 *   dgamma_A
 *   dalpha_C  C axis direction   = Rx(dalpha_C) * Ry(dbeta_C) * ez, in the A carrier
 *   dbeta_C
 *   dy_C      C axis line offset by +dy_C along y of the A carrier
 *
 * These signs are this library's convention; other references may use the
 * opposite sign for some parameters.
 */
#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "volerr/errors.hpp"

namespace volerr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// n x 3 matrix of Cartesian deviations in the bed frame (mm), columns x, y, z.
using DeviationMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double deg_to_rad(double deg) { return deg * (kPi / 180.0); }
inline constexpr double rad_to_deg(double rad) { return rad * (180.0 / kPi); }

/// Joint values: linear axes in mm, rotary axes in radians.
struct JointPose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double a = 0.0;
    double c = 0.0;

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) && std::isfinite(a) &&
               std::isfinite(c);
    }
};

/// Nominal geometry of a WCAYFXZT machine. Lengths in mm, angles in radians.
struct MachineGeometry {
    static constexpr std::string_view kStructure = "WCAYFXZT";

    double a_tilt = deg_to_rad(45.0);         ///< A-axis tilt from x towards z
    Vec3 a_pivot{0.0, 0.0, 100.0};            ///< point on the A axis, bed frame at Y = 0
    Vec3 c_pivot{0.0, 0.0, 80.0};             ///< point on the C axis relative to a_pivot, A carrier frame
    Vec3 ball_offset{60.0, 0.0, 150.0};       ///< master-ball centre relative to c_pivot, C frame
    Vec3 spindle_home{0.0, 0.0, 600.0};       ///< spindle nose at X = Z = 0, bed frame
    double tool_length = 200.0;               ///< spindle nose to virtual TCP along -z

    Vec3 a_axis() const { return {std::cos(a_tilt), 0.0, std::sin(a_tilt)}; }

    void validate() const {
        if (!(a_tilt > 0.0 && a_tilt < kPi / 2.0)) {
            throw ConfigError("machine geometry: A-axis tilt must lie strictly between 0 and 90 degrees");
        }
        if (!a_pivot.allFinite() || !c_pivot.allFinite() || !ball_offset.allFinite() ||
            !spindle_home.allFinite()) {
            throw ConfigError("machine geometry: offset vectors must be finite");
        }
        if (!std::isfinite(tool_length) || tool_length < 0.0) {
            throw ConfigError("machine geometry: tool length must be finite and >= 0");
        }
    }
};

/// The eight link errors, in the order (dgamma_Y, dalpha_Z, dbeta_Z, dbeta_A,
/// dgamma_A, dalpha_C, dbeta_C, dy_C). Angles in radians, dy_C in mm.
struct LinkErrorVector {
    static constexpr std::size_t kSize = 8;
    static constexpr std::array<std::string_view, kSize> kNames = {
        "dgamma_Y", "dalpha_Z", "dbeta_Z", "dbeta_A", "dgamma_A", "dalpha_C", "dbeta_C", "dy_C"};
    static constexpr std::array<std::string_view, kSize> kDescriptions = {
        "out-of-squareness between X and Y",
        "out-of-squareness between Y and Z",
        "out-of-squareness between X and Z",
        "tilt of A around y",
        "tilt of A around z",
        "tilt of C around x",
        "tilt of C around y",
        "offset of A relative to C in y"};
    static constexpr bool is_angular(std::size_t i) { return i != 7; }

    std::array<double, kSize> values{};

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    double dgamma_Y() const { return values[0]; }
    double dalpha_Z() const { return values[1]; }
    double dbeta_Z() const { return values[2]; }
    double dbeta_A() const { return values[3]; }
    double dgamma_A() const { return values[4]; }
    double dalpha_C() const { return values[5]; }
    double dbeta_C() const { return values[6]; }
    double dy_C() const { return values[7]; }

    Eigen::Matrix<double, 8, 1> as_vector() const {
        return Eigen::Map<const Eigen::Matrix<double, 8, 1>>(values.data());
    }
    static LinkErrorVector from_vector(const Eigen::Matrix<double, 8, 1>& v) {
        LinkErrorVector out;
        for (std::size_t i = 0; i < kSize; ++i) out.values[i] = v(static_cast<Eigen::Index>(i));
        return out;
    }

    bool finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend LinkErrorVector operator+(const LinkErrorVector& a, const LinkErrorVector& b) {
        LinkErrorVector out;
        for (std::size_t i = 0; i < kSize; ++i) out.values[i] = a.values[i] + b.values[i];
        return out;
    }
};

/// 3 x 8 sensitivity of tau to the link errors at one pose.
using LinkJacobian = Eigen::Matrix<double, 3, 8>;

namespace detail {

inline Mat3 rot_x(double t) { return Eigen::AngleAxisd(t, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double t) { return Eigen::AngleAxisd(t, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double t) { return Eigen::AngleAxisd(t, Vec3::UnitZ()).toRotationMatrix(); }

inline Mat3 rot_axis(const Vec3& unit_axis, double t) {
    return Eigen::AngleAxisd(t, unit_axis).toRotationMatrix();
}

// d/de [R(u(e), t) q] at e = 0 for u(e) = u + e*du with du orthogonal to u.
inline Vec3 rotation_axis_sensitivity(const Vec3& u, double t, const Vec3& du, const Vec3& q) {
    return std::sin(t) * du.cross(q) + (1.0 - std::cos(t)) * (du.dot(q) * u + u.dot(q) * du);
}

inline void require_pose(const JointPose& pose) {
    if (!pose.finite()) throw DataError("kinematics: joint pose contains non-finite values");
}

}  // namespace detail

/// Tool-to-ball vector P_t - P_w with the eight link errors inserted in the chain.
inline Vec3 dkt_with_errors(const JointPose& pose, const MachineGeometry& geom,
                            const LinkErrorVector& dq) {
    detail::require_pose(pose);
    if (!dq.finite()) throw DataError("kinematics: link-error vector contains non-finite values");
    using namespace detail;

    const Vec3 y_dir = rot_z(dq.dgamma_Y()) * Vec3::UnitY();
    const Vec3 z_dir = rot_x(dq.dalpha_Z()) * (rot_y(dq.dbeta_Z()) * Vec3::UnitZ());
    const Vec3 a_axis = rot_z(dq.dgamma_A()) * (rot_y(dq.dbeta_A()) * geom.a_axis());
    const Vec3 c_axis = rot_x(dq.dalpha_C()) * (rot_y(dq.dbeta_C()) * Vec3::UnitZ());

    const Vec3 tool = pose.x * Vec3::UnitX() + pose.z * z_dir + geom.spindle_home -
                      geom.tool_length * Vec3::UnitZ();
    const Vec3 on_a = geom.c_pivot + dq.dy_C() * Vec3::UnitY() +
                      rot_axis(c_axis, pose.c) * geom.ball_offset;
    const Vec3 ball = pose.y * y_dir + geom.a_pivot + rot_axis(a_axis, pose.a) * on_a;
    return tool - ball;
}

/// Nominal tool-to-ball vector tau_nom (mm) for one joint pose.
inline Vec3 dkt(const JointPose& pose, const MachineGeometry& geom) {
    return dkt_with_errors(pose, geom, LinkErrorVector{});
}

/// Analytic first-order sensitivity of tau to the link errors, linearised at dq = 0.
inline LinkJacobian link_jacobian(const JointPose& pose, const MachineGeometry& geom) {
    detail::require_pose(pose);
    using namespace detail;

    const Vec3 ex = Vec3::UnitX(), ey = Vec3::UnitY(), ez = Vec3::UnitZ();
    const Vec3 u_a = geom.a_axis();
    const Mat3 r_a = rot_axis(u_a, pose.a);
    const Mat3 r_c = rot_axis(ez, pose.c);
    const Vec3 on_a = geom.c_pivot + r_c * geom.ball_offset;

    LinkJacobian j;
    j.col(0) = Vec3(pose.y, 0.0, 0.0);
    j.col(1) = Vec3(0.0, -pose.z, 0.0);
    j.col(2) = Vec3(pose.z, 0.0, 0.0);
    j.col(3) = -rotation_axis_sensitivity(u_a, pose.a, ey.cross(u_a), on_a);
    j.col(4) = -rotation_axis_sensitivity(u_a, pose.a, ez.cross(u_a), on_a);
    j.col(5) = -(r_a * rotation_axis_sensitivity(ez, pose.c, ex.cross(ez), geom.ball_offset));
    j.col(6) = -(r_a * rotation_axis_sensitivity(ez, pose.c, ey.cross(ez), geom.ball_offset));
    j.col(7) = -(r_a * ey);
    return j;
}

/// Result of a link-error least-squares identification.
struct LinkIdentification {
    LinkErrorVector dq;
    DeviationMatrix residuals;                 ///< deviations - J * dq, per pose
    std::array<double, 8> standard_errors{};   ///< from sigma_hat^2 (J^T J)^-1
    double condition_number = 0.0;             ///< of the stacked (3n x 8) Jacobian
    double residual_rms = 0.0;                 ///< per component, mm
    std::size_t rank = 0;
};

inline constexpr double kDefaultConditionThreshold = 1e8;

/// Ordinary least squares for the eight link errors from deviations observed at
/// the given poses. Throws RankDeficientError when the stacked Jacobian's
/// condition number exceeds `max_condition`.
inline LinkIdentification identify_link_errors(std::span<const JointPose> poses,
                                               const DeviationMatrix& deviations,
                                               const MachineGeometry& geom,
                                               double max_condition = kDefaultConditionThreshold) {
    const auto n = static_cast<Eigen::Index>(poses.size());
    if (deviations.rows() != n) {
        throw DataError("identify_link_errors: " + std::to_string(poses.size()) + " poses but " +
                        std::to_string(deviations.rows()) + " deviation rows");
    }
    if (n < 8) throw DataError("identify_link_errors: at least 8 poses are required");
    if (!deviations.allFinite()) throw DataError("identify_link_errors: non-finite deviations");

    Eigen::MatrixXd stacked(3 * n, 8);
    Eigen::VectorXd rhs(3 * n);
    for (Eigen::Index k = 0; k < n; ++k) {
        stacked.middleRows<3>(3 * k) = link_jacobian(poses[static_cast<std::size_t>(k)], geom);
        rhs.segment<3>(3 * k) = deviations.row(k).transpose();
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
    const Eigen::Matrix<double, 8, 8> r =
        qr.matrixR().topLeftCorner<8, 8>().triangularView<Eigen::Upper>();
    const Eigen::JacobiSVD<Eigen::Matrix<double, 8, 8>> svd(r);
    const auto& sv = svd.singularValues();

    LinkIdentification out;
    out.condition_number = sv(7) > 0.0 ? sv(0) / sv(7) : std::numeric_limits<double>::infinity();
    out.rank = static_cast<std::size_t>(qr.rank());
    if (!(out.condition_number <= max_condition)) {
        throw RankDeficientError(
            "identify_link_errors: stacked Jacobian condition number " +
                std::to_string(out.condition_number) + " exceeds " + std::to_string(max_condition) +
                " (poses do not vary A and C enough)",
            out.condition_number);
    }

    const Eigen::Matrix<double, 8, 1> solution = qr.solve(rhs);
    out.dq = LinkErrorVector::from_vector(solution);

    const Eigen::VectorXd resid = rhs - stacked * solution;
    out.residuals.resize(n, 3);
    for (Eigen::Index k = 0; k < n; ++k) out.residuals.row(k) = resid.segment<3>(3 * k).transpose();

    const double dof = static_cast<double>(3 * n - 8);
    const double sigma2 = dof > 0 ? resid.squaredNorm() / dof : 0.0;
    out.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(3 * n));

    // (J^T J)^-1 = P R^-1 R^-T P^T
    const Eigen::Matrix<double, 8, 8> r_inv =
        r.triangularView<Eigen::Upper>().solve(Eigen::Matrix<double, 8, 8>::Identity());
    const Eigen::Matrix<double, 8, 8> cov_perm = r_inv * r_inv.transpose();
    const auto& perm = qr.colsPermutation().indices();
    for (int i = 0; i < 8; ++i) {
        out.standard_errors[static_cast<std::size_t>(perm(i))] = std::sqrt(sigma2 * cov_perm(i, i));
    }
    return out;
}

}  // namespace volerr
