/**
 * @file metrics.hpp
 * @brief Summary statistics of a decomposition: share of each error source,
 * per-direction maxima and RMS, and the power-law feed-rate model.
 *
 * Inputs are DeviationMatrix values in mm; every returned length is in µm.
 */
#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "volerr/errors.hpp"
#include "volerr/kinematics.hpp"
#include "volerr/signal.hpp"

namespace volerr {

/// Order of the five sources in share rows and reports.
inline constexpr std::array<std::string_view, 5> kSourceNames = {"c", "l", "m", "td", "d"};

using ShareRow = std::array<double, 5>;

/// Points whose summed norm is below this (mm) carry no share information.
inline constexpr double kShareDenominatorFloor = 1e-12;

/// Mean over points of ||delta_k,i|| / sum_j ||delta_j,i||, in percent.
///
/// The denominator is the sum of all five row norms, so a row always sums to
/// 100 (up to rounding) whatever the directions of the individual sources.
inline ShareRow mean_norm_percentages(const DeviationMatrix& dc, const DeviationMatrix& dl,
                                      const DeviationMatrix& dm, const DeviationMatrix& dtd,
                                      const DeviationMatrix& dd) {
    const std::array<const DeviationMatrix*, 5> src = {&dc, &dl, &dm, &dtd, &dd};
    const Eigen::Index n = dc.rows();
    for (const auto* m : src) require_same_rows(dc, *m, "mean_norm_percentages");

    ShareRow acc{};
    std::size_t used = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        std::array<double, 5> norms{};
        double total = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            norms[k] = src[k]->row(i).norm();
            total += norms[k];
        }
        if (!(total >= kShareDenominatorFloor)) continue;
        for (std::size_t k = 0; k < 5; ++k) acc[k] += norms[k] / total;
        ++used;
    }
    if (used == 0) throw DataError("mean_norm_percentages: every point has a zero total error");
    for (auto& v : acc) v = 100.0 * v / static_cast<double>(used);
    return acc;
}

inline double share_sum(const ShareRow& row) {
    double s = 0.0;
    for (double v : row) s += v;
    return s;
}

/// Per-column maximum absolute value, µm.
inline Vec3 max_errors(const DeviationMatrix& d) {
    if (d.rows() == 0) throw DataError("max_errors: empty matrix");
    return (d.cwiseAbs().colwise().maxCoeff().transpose() * 1000.0).eval();
}

/// Per-column root mean square, µm.
inline Vec3 rms_errors(const DeviationMatrix& d) {
    if (d.rows() == 0) throw DataError("rms_errors: empty matrix");
    Vec3 out;
    for (int c = 0; c < 3; ++c) out(c) = std::sqrt(d.col(c).squaredNorm() / static_cast<double>(d.rows())) * 1000.0;
    return out;
}

/// delta_rms = kappa * F^N for one direction.
struct PowerLaw {
    double kappa = 0.0;     ///< µm per (mm/min)^N
    double exponent = 0.0;  ///< N
    double r_squared = 0.0;

    double operator()(double feed) const { return kappa * std::pow(feed, exponent); }
};

/// Ordinary least squares of log(rms) on log(F).
inline PowerLaw fit_power_law(const std::vector<double>& feeds, const std::vector<double>& rms) {
    if (feeds.size() != rms.size()) throw DataError("fit_power_law: feed and rms counts differ");
    if (feeds.size() < 2) throw DataError("fit_power_law: at least two feed rates are required");
    std::vector<double> lx(feeds.size()), ly(feeds.size());
    for (std::size_t i = 0; i < feeds.size(); ++i) {
        if (!(feeds[i] > 0.0) || !std::isfinite(feeds[i])) throw DataError("fit_power_law: feed rates must be > 0");
        if (!(rms[i] > 0.0) || !std::isfinite(rms[i])) {
            throw DataError("fit_power_law: rms value " + std::to_string(rms[i]) + " is not positive");
        }
        lx[i] = std::log(feeds[i]);
        ly[i] = std::log(rms[i]);
    }
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) throw DataError("fit_power_law: feed rates must not all be identical");

    PowerLaw fit;
    fit.exponent = sxy / sxx;
    const double intercept = my - fit.exponent * mx;
    fit.kappa = std::exp(intercept);
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double r = ly[i] - (intercept + fit.exponent * lx[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return fit;
}

/// Power-law fits of x, y, z RMS values; a direction with any non-positive
/// value is left unfitted and reported in `warnings`.
struct PowerLawFit {
    std::array<std::optional<PowerLaw>, 3> direction;
    std::vector<std::string> warnings;
};

inline PowerLawFit fit_power_law(const std::vector<double>& feeds, const std::vector<Vec3>& rms) {
    if (feeds.size() != rms.size()) throw DataError("fit_power_law: feed and rms counts differ");
    PowerLawFit out;
    static constexpr std::array<const char*, 3> kAxis = {"x", "y", "z"};
    for (int c = 0; c < 3; ++c) {
        std::vector<double> v;
        bool positive = true;
        for (const auto& r : rms) {
            v.push_back(r(c));
            if (!(r(c) > 0.0)) positive = false;
        }
        if (!positive) {
            out.warnings.push_back(std::string("power-law fit: direction ") + kAxis[static_cast<std::size_t>(c)] +
                                   " has a zero rms value and was skipped");
            continue;
        }
        out.direction[static_cast<std::size_t>(c)] = fit_power_law(feeds, v);
    }
    return out;
}

inline constexpr double kDefaultSmoothingWindow = 0.005;  // s

/// Second time derivative of every channel: centred moving average over
/// `window_s` (shrunk symmetrically near the ends), then central second
/// differences. Units are the channel units per s^2.
inline SignalSet axis_accelerations(const SignalSet& joints, double window_s = kDefaultSmoothingWindow) {
    joints.validate();
    const std::size_t n = joints.size();
    if (n < 5) throw DataError("axis_accelerations: at least 5 samples are required");
    if (!(window_s >= 0.0)) throw DataError("axis_accelerations: smoothing window must be >= 0");
    const auto h = static_cast<std::size_t>(std::llround(window_s * joints.sample_rate / 2.0));
    const double rate2 = joints.sample_rate * joints.sample_rate;

    SignalSet out;
    out.sample_rate = joints.sample_rate;
    out.start_time = joints.start_time;
    for (std::size_t c = 0; c < joints.channel_count(); ++c) {
        const auto& x = joints.channels[c];
        std::vector<double> m(n);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t hk = std::min({h, k, n - 1 - k});
            double s = 0.0;
            for (std::size_t j = k - hk; j <= k + hk; ++j) s += x[j];
            m[k] = s / static_cast<double>(2 * hk + 1);
        }
        std::vector<double> a(n);
        for (std::size_t k = 1; k + 1 < n; ++k) a[k] = (m[k + 1] - 2.0 * m[k] + m[k - 1]) * rate2;
        a[0] = a[1];
        a[n - 1] = a[n - 2];
        out.add_channel(joints.names[c], std::move(a));
    }
    return out;
}

/// Per-session figures: shares, maxima and RMS of each source.
struct MetricsReport {
    std::string session_id;
    double feed_mm_min = 0.0;
    ShareRow shares{};
    std::array<Vec3, 5> max_um{};
    std::array<Vec3, 5> rms_um{};
};

inline MetricsReport make_metrics_report(std::string session_id, double feed_mm_min,
                                         const std::array<DeviationMatrix, 5>& sources) {
    MetricsReport r;
    r.session_id = std::move(session_id);
    r.feed_mm_min = feed_mm_min;
    r.shares = mean_norm_percentages(sources[0], sources[1], sources[2], sources[3], sources[4]);
    for (std::size_t k = 0; k < 5; ++k) {
        r.max_um[k] = max_errors(sources[k]);
        r.rms_um[k] = rms_errors(sources[k]);
    }
    return r;
}

}  // namespace volerr
