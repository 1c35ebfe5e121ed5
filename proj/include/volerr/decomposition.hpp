/**
 * @file decomposition.hpp
 * @brief Split of the measured deviation chi - chi_nom into contouring (c),
 * link (l), motion (m), thermal (td) and dynamic (d) contributions.
 *
 *   chi - chi_nom = dc + dl + dm + dtd + dd
 *
 * A low-feed reference session is processed first: the link errors are
 * identified from chi - chi_enc, and the motion polynomials are fitted to what
 * remains with the thermal offset held at zero. Every session then reuses the
 * identified link errors (with its own encoder poses) and the polynomials
 * (on its own n-point grid); the thermal offset absorbs the session mean and
 * the dynamic part is what is left.
 */
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volerr/deviation.hpp"
#include "volerr/errors.hpp"
#include "volerr/kinematics.hpp"
#include "volerr/polynomial.hpp"
#include "volerr/signal.hpp"
#include "volerr/sync.hpp"

namespace volerr {

/// chi - chi_nom.
inline DeviationMatrix total_error_split(const DeviationMatrix& chi, const DeviationMatrix& chi_nom) {
    require_same_rows(chi, chi_nom, "total_error_split");
    return chi - chi_nom;
}

/// dc = chi_enc - chi_nom.
inline DeviationMatrix contouring_errors(const DeviationMatrix& chi_enc, const DeviationMatrix& chi_nom) {
    require_same_rows(chi_enc, chi_nom, "contouring_errors");
    return chi_enc - chi_nom;
}

/// Row k = link_jacobian(pose_k) * dq.
inline DeviationMatrix link_contribution(std::span<const JointPose> poses, const LinkErrorVector& dq,
                                         const MachineGeometry& geom) {
    const Eigen::Matrix<double, 8, 1> v = dq.as_vector();
    DeviationMatrix out(static_cast<Eigen::Index>(poses.size()), 3);
    for (std::size_t k = 0; k < poses.size(); ++k) {
        out.row(static_cast<Eigen::Index>(k)) = (link_jacobian(poses[k], geom) * v).transpose();
    }
    return out;
}

struct ThermalOffset {
    Vec3 td = Vec3::Zero();  ///< mm
    DeviationMatrix delta_td;
};

inline DeviationMatrix repeat_rows(const Vec3& v, Eigen::Index n) {
    DeviationMatrix out(n, 3);
    out.rowwise() = v.transpose();
    return out;
}

/// td = column means of chi - chi_enc - dl - dm, repeated on every row.
inline ThermalOffset thermal_offset(const DeviationMatrix& chi, const DeviationMatrix& chi_enc,
                                    const DeviationMatrix& dl, const DeviationMatrix& dm) {
    require_same_rows(chi, chi_enc, "thermal_offset");
    require_same_rows(chi, dl, "thermal_offset");
    require_same_rows(chi, dm, "thermal_offset");
    if (chi.rows() == 0) throw DataError("thermal_offset: empty matrices");
    ThermalOffset out;
    out.td = (chi - chi_enc - dl - dm).colwise().mean().transpose();
    out.delta_td = repeat_rows(out.td, chi.rows());
    return out;
}

/// dd = chi - chi_enc - dl - dm - dtd.
inline DeviationMatrix dynamic_errors(const DeviationMatrix& chi, const DeviationMatrix& chi_enc,
                                      const DeviationMatrix& dl, const DeviationMatrix& dm,
                                      const DeviationMatrix& dtd) {
    require_same_rows(chi, chi_enc, "dynamic_errors");
    require_same_rows(chi, dl, "dynamic_errors");
    require_same_rows(chi, dm, "dynamic_errors");
    require_same_rows(chi, dtd, "dynamic_errors");
    return chi - chi_enc - dl - dm - dtd;
}

inline constexpr double kDefaultSampleRate = 10000.0;   // Hz
inline constexpr double kDefaultDelayWindow = 0.050;    // s

struct DecompositionConfig {
    double sample_rate = kDefaultSampleRate;
    double delay_window_s = kDefaultDelayWindow;
    DelayOptions delay;
    std::optional<double> fixed_delay_s;  ///< skip estimation and use this delay
    PolynomialFitOptions polynomial;
    double max_condition = kDefaultConditionThreshold;
    bool trim_to_motion = true;  ///< restrict the analysis to the trajectory (drops tag and dwells)
};

/// Raw signals of one test.
struct SessionSignals {
    std::string id;
    double feed_mm_min = 0.0;
    SignalSet controller;
    SignalSet encoder;
    SignalSet sensor;
};

/// The three deviation matrices on a common, delay-corrected window.
struct AlignedSession {
    std::string id;
    double feed_mm_min = 0.0;
    double delay_s = 0.0;
    std::vector<double> times;  ///< controller clock, s
    SignalSet controller;
    SignalSet encoder;
    std::vector<JointPose> encoder_poses;
    DeviationMatrix chi_nom;
    DeviationMatrix chi_enc;
    DeviationMatrix chi;

    std::size_t size() const { return times.size(); }
};

inline AlignedSession prepare_session(const SessionSignals& s, const MachineGeometry& geom,
                                      const SensorCalibration& cal, const DecompositionConfig& cfg) {
    AlignedSession out;
    out.id = s.id;
    out.feed_mm_min = s.feed_mm_min;

    const auto ctrl = with_stage("resample controller", [&] { return resample(s.controller, cfg.sample_rate); });
    const auto enc = with_stage("resample encoder", [&] { return resample(s.encoder, cfg.sample_rate); });
    const auto sen = with_stage("resample sensor", [&] { return resample(s.sensor, cfg.sample_rate); });

    out.delay_s = cfg.fixed_delay_s ? *cfg.fixed_delay_s : with_stage("estimate delay", [&] {
        return estimate_delay(ctrl, enc, cfg.delay_window_s, cfg.delay);
    });

    auto window = with_stage("align", [&] {
        return common_window({ctrl, align(enc, out.delay_s), align(sen, out.delay_s)});
    });
    if (cfg.trim_to_motion) {
        const auto r = with_stage("motion window", [&] { return motion_window(window[0]); });
        for (auto& w : window) w = w.slice(r.first, r.count());
    }
    const std::size_t n = window[0].size();
    if (window[1].size() != n || window[2].size() != n) throw DataError("align: streams have unequal lengths");

    out.controller = std::move(window[0]);
    out.encoder = std::move(window[1]);
    out.times.resize(n);
    for (std::size_t k = 0; k < n; ++k) out.times[k] = out.controller.time_at(k);

    with_stage("deviation", [&] {
        out.chi_nom = build_nominal_deviation(out.controller, geom);
        out.encoder_poses = joint_poses(out.encoder);
        out.chi_enc = build_encoder_deviation(out.encoder, geom);
        out.chi = project_sensor_readings(window[2], cal);
        return 0;
    });
    return out;
}

/// Artifacts of the reference session reused by every other session.
struct ReferenceArtifacts {
    std::string session_id;
    LinkIdentification identification;
    MotionPolynomialModel model;
    std::size_t samples = 0;
};

/// Identifies dq from chi - chi_enc, then fits the motion polynomials with td = 0.
inline ReferenceArtifacts process_reference(const AlignedSession& ref, const MachineGeometry& geom,
                                            const DecompositionConfig& cfg) {
    const std::size_t min_samples = 2 * static_cast<std::size_t>(cfg.polynomial.degree + 1);
    if (ref.size() < min_samples) {
        throw DataError("reference session '" + ref.id + "' has " + std::to_string(ref.size()) +
                        " samples; at least " + std::to_string(min_samples) + " are required");
    }
    ReferenceArtifacts out;
    out.session_id = ref.id;
    out.samples = ref.size();
    const DeviationMatrix r = ref.chi - ref.chi_enc;
    out.identification = with_stage("identify link errors", [&] {
        return identify_link_errors(ref.encoder_poses, r, geom, cfg.max_condition);
    });
    out.model = with_stage("fit motion polynomials", [&] {
        return fit_motion_polynomials(out.identification.residuals, cfg.polynomial);
    });
    return out;
}

/// The five contribution matrices of one test plus what produced them.
struct Decomposition {
    std::string session_id;
    double feed_mm_min = 0.0;
    double delay_s = 0.0;
    bool reference = false;
    double sample_rate = kDefaultSampleRate;
    std::vector<double> times;
    DeviationMatrix chi;
    DeviationMatrix chi_nom;
    DeviationMatrix chi_enc;
    DeviationMatrix delta_c;
    DeviationMatrix delta_l;
    DeviationMatrix delta_m;
    DeviationMatrix delta_td;
    DeviationMatrix delta_d;
    LinkErrorVector dq;
    MotionPolynomialModel model;
    Vec3 td = Vec3::Zero();  ///< mm

    std::array<DeviationMatrix, 5> sources() const { return {delta_c, delta_l, delta_m, delta_td, delta_d}; }
    DeviationMatrix reconstruction() const { return delta_c + delta_l + delta_m + delta_td + delta_d; }
};

inline Decomposition decompose_aligned(const AlignedSession& s, const ReferenceArtifacts& ref,
                                       const MachineGeometry& geom, const DecompositionConfig& cfg) {
    Decomposition d;
    d.session_id = s.id;
    d.feed_mm_min = s.feed_mm_min;
    d.delay_s = s.delay_s;
    d.reference = s.id == ref.session_id;
    d.sample_rate = cfg.sample_rate;
    d.times = s.times;
    d.chi = s.chi;
    d.chi_nom = s.chi_nom;
    d.chi_enc = s.chi_enc;
    d.dq = ref.identification.dq;
    d.model = ref.model;

    d.delta_c = with_stage("contouring", [&] { return contouring_errors(s.chi_enc, s.chi_nom); });
    d.delta_l = with_stage("link contribution", [&] { return link_contribution(s.encoder_poses, d.dq, geom); });
    d.delta_m = with_stage("motion contribution", [&] { return motion_contribution(d.model, s.size()); });
    if (d.reference) {
        d.td = Vec3::Zero();
        d.delta_td = repeat_rows(d.td, static_cast<Eigen::Index>(s.size()));
    } else {
        auto th = with_stage("thermal offset", [&] { return thermal_offset(s.chi, s.chi_enc, d.delta_l, d.delta_m); });
        d.td = th.td;
        d.delta_td = std::move(th.delta_td);
    }
    d.delta_d = with_stage("dynamic errors", [&] {
        return dynamic_errors(s.chi, s.chi_enc, d.delta_l, d.delta_m, d.delta_td);
    });
    return d;
}

/// resample -> delay align -> chi_nom, chi_enc, chi -> dc -> dl -> dm -> td -> dd.
inline Decomposition decompose_session(const SessionSignals& s, const ReferenceArtifacts& ref,
                                       const MachineGeometry& geom, const SensorCalibration& cal,
                                       const DecompositionConfig& cfg) {
    return decompose_aligned(prepare_session(s, geom, cal, cfg), ref, geom, cfg);
}

}  // namespace volerr
