/**
 * @file sync.hpp
 * @brief Resampling, recording-delay estimation, and alignment of signal sets.
 *
 * A delay d > 0 means the target stream was recorded late: its sample stamped
 * t corresponds to the reference instant t - d. Delays are applied in whole
 * samples of the common clock.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "volerr/errors.hpp"
#include "volerr/signal.hpp"

namespace volerr {

/// Channel-wise linear interpolation onto a uniform clock at `target_rate`.
/// The last output sample equals the last input sample whenever the input
/// duration is a whole number of output periods.
inline SignalSet resample(const SignalSet& s, double target_rate) {
    s.validate();
    if (!(target_rate > 0.0) || !std::isfinite(target_rate)) throw DataError("resample: target rate must be > 0");
    if (target_rate < s.sample_rate * (1.0 - 1e-12)) {
        throw DataError("resample: target rate " + std::to_string(target_rate) + " Hz is below source rate " +
                        std::to_string(s.sample_rate) + " Hz (downsampling is not supported)");
    }
    if (std::abs(target_rate - s.sample_rate) <= 1e-12 * s.sample_rate) {
        SignalSet copy = s;
        copy.sample_rate = target_rate;
        return copy;
    }

    const std::size_t n = s.size();
    const double step = s.sample_rate / target_rate;  // source samples per output sample
    const double ratio = target_rate / s.sample_rate;
    const std::size_t n_out =
        n == 0 ? 0 : static_cast<std::size_t>(std::floor(static_cast<double>(n - 1) * ratio + 1e-6)) + 1;

    std::vector<std::size_t> base(n_out);
    std::vector<double> frac(n_out);
    for (std::size_t j = 0; j < n_out; ++j) {
        const double p = static_cast<double>(j) * step;
        double i = std::floor(p + 1e-9);
        double f = p - i;
        if (f < 1e-9) f = 0.0;
        if (i >= static_cast<double>(n - 1)) {
            i = static_cast<double>(n - 1);
            f = 0.0;
        }
        base[j] = static_cast<std::size_t>(i);
        frac[j] = f;
    }

    SignalSet out;
    out.sample_rate = target_rate;
    out.start_time = s.start_time;
    out.names = s.names;
    out.channels.reserve(s.channels.size());
    for (const auto& ch : s.channels) {
        std::vector<double> v(n_out);
        for (std::size_t j = 0; j < n_out; ++j) {
            const std::size_t i = base[j];
            v[j] = frac[j] == 0.0 ? ch[i] : ch[i] + frac[j] * (ch[i + 1] - ch[i]);
        }
        out.channels.push_back(std::move(v));
    }
    return out;
}

enum class SyncMethod {
    cross_correlation,  ///< maximise normalised cross-correlation of one channel
    tag,                ///< match the first motion onset of the two streams
};

inline SyncMethod parse_sync_method(const std::string& s) {
    if (s == "xcorr" || s == "cross_correlation") return SyncMethod::cross_correlation;
    if (s == "tag") return SyncMethod::tag;
    throw ConfigError("unknown synchronisation method '" + s + "' (expected 'xcorr' or 'tag')");
}

inline std::string to_string(SyncMethod m) { return m == SyncMethod::tag ? "tag" : "xcorr"; }

struct DelayOptions {
    SyncMethod method = SyncMethod::cross_correlation;
    std::optional<std::string> channel;  ///< cross-correlation channel; default: highest-variance common channel
    double onset_threshold_um = 0.5;     ///< tag method: per-sample displacement marking motion onset
};

namespace sync_detail {

inline double variance(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double acc = 0.0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size());
}

inline std::ptrdiff_t best_xcorr_lag(const std::vector<double>& ref, const std::vector<double>& tgt,
                                     std::ptrdiff_t max_lag) {
    const auto n_ref = static_cast<std::ptrdiff_t>(ref.size());
    const auto n_tgt = static_cast<std::ptrdiff_t>(tgt.size());
    double best = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t best_lag = 0;
    bool any = false;
    for (std::ptrdiff_t lag = -max_lag; lag <= max_lag; ++lag) {
        // pairs (ref[k], tgt[k + lag])
        const std::ptrdiff_t k0 = std::max<std::ptrdiff_t>(0, -lag);
        const std::ptrdiff_t k1 = std::min(n_ref, n_tgt - lag);
        if (k1 - k0 < 2) continue;
        double sa = 0.0, sb = 0.0;
        for (std::ptrdiff_t k = k0; k < k1; ++k) {
            sa += ref[static_cast<std::size_t>(k)];
            sb += tgt[static_cast<std::size_t>(k + lag)];
        }
        const double m = static_cast<double>(k1 - k0);
        const double ma = sa / m, mb = sb / m;
        double sab = 0.0, saa = 0.0, sbb = 0.0;
        for (std::ptrdiff_t k = k0; k < k1; ++k) {
            const double a = ref[static_cast<std::size_t>(k)] - ma;
            const double b = tgt[static_cast<std::size_t>(k + lag)] - mb;
            sab += a * b;
            saa += a * a;
            sbb += b * b;
        }
        if (!(saa > 0.0) || !(sbb > 0.0)) continue;
        const double ncc = sab / std::sqrt(saa * sbb);
        if (ncc > best + 1e-15) {
            best = ncc;
            best_lag = lag;
            any = true;
        }
    }
    if (!any) throw DataError("estimate_delay: correlation undefined (flat channel over every lag)");
    return best_lag;
}

inline std::optional<std::size_t> motion_onset(const SignalSet& s, double threshold_um) {
    std::vector<const std::vector<double>*> chans;
    for (const char* name : {"X", "Y", "Z"})
        if (s.has(name)) chans.push_back(&s.channel(name));
    if (chans.empty())
        for (const auto& ch : s.channels) chans.push_back(&ch);
    const double threshold_mm = threshold_um * 1e-3;
    for (std::size_t k = 1; k < s.size(); ++k) {
        for (const auto* ch : chans) {
            if (std::abs((*ch)[k] - (*ch)[k - 1]) > threshold_mm) return k;
        }
    }
    return std::nullopt;
}

}  // namespace sync_detail

/// Recording delay of `target` relative to `reference` (seconds), searched
/// within +/- `window_s`, at one-sample resolution.
inline double estimate_delay(const SignalSet& reference, const SignalSet& target, double window_s,
                             const DelayOptions& opts = {}) {
    if (std::abs(reference.sample_rate - target.sample_rate) > 1e-9 * reference.sample_rate) {
        throw DataError("estimate_delay: reference and target sample rates differ");
    }
    const double rate = reference.sample_rate;
    const double start_offset = target.start_time - reference.start_time;

    if (opts.method == SyncMethod::tag) {
        const auto r = sync_detail::motion_onset(reference, opts.onset_threshold_um);
        const auto t = sync_detail::motion_onset(target, opts.onset_threshold_um);
        if (!r || !t) throw DataError("estimate_delay: no motion onset above the tag threshold");
        const double delay = (static_cast<double>(*t) - static_cast<double>(*r)) / rate + start_offset;
        if (std::abs(delay) > window_s) {
            throw DataError("estimate_delay: tag delay " + std::to_string(delay) + " s exceeds the search window");
        }
        return delay;
    }

    if (!(window_s > 0.0)) throw DataError("estimate_delay: search window must be > 0");
    const double overlap = std::min(reference.duration(), target.duration());
    if (!(overlap > window_s)) throw DataError("estimate_delay: overlapping duration must exceed the search window");

    std::string channel;
    if (opts.channel) {
        channel = *opts.channel;
    } else {
        double best_var = 0.0;
        for (const auto& name : reference.names) {
            if (!target.has(name)) continue;
            const double v = sync_detail::variance(reference.channel(name));
            if (v > best_var) {
                best_var = v;
                channel = name;
            }
        }
        if (channel.empty()) throw DataError("estimate_delay: every shared channel is flat; correlation undefined");
    }
    const auto& ref = reference.channel(channel);
    const auto& tgt = target.channel(channel);
    if (!(sync_detail::variance(ref) > 0.0) || !(sync_detail::variance(tgt) > 0.0)) {
        throw DataError("estimate_delay: channel '" + channel + "' is flat; correlation undefined");
    }
    const auto max_lag = static_cast<std::ptrdiff_t>(std::llround(window_s * rate));
    const auto lag = sync_detail::best_xcorr_lag(ref, tgt, max_lag);
    return static_cast<double>(lag) / rate + start_offset;
}

/// Removes a recording delay: the result's samples are stamped on the reference clock.
/// Positive delays drop round(delay * rate) leading samples.
inline SignalSet align(const SignalSet& s, double delay_s) {
    const long long shift = std::llround(delay_s * s.sample_rate);
    const auto n = static_cast<long long>(s.size());
    if (std::llabs(shift) >= n) throw DataError("align: delay leaves no overlapping samples");
    if (shift >= 0) {
        SignalSet out = s.slice(static_cast<std::size_t>(shift), static_cast<std::size_t>(n - shift));
        out.start_time = s.start_time;
        return out;
    }
    SignalSet out = s;
    out.start_time = s.start_time + static_cast<double>(-shift) / s.sample_rate;
    return out;
}

/// Truncates every set to the common time overlap; all must share one sample rate.
inline std::vector<SignalSet> common_window(const std::vector<SignalSet>& sets) {
    if (sets.empty()) return {};
    const double rate = sets.front().sample_rate;
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    for (const auto& s : sets) {
        if (std::abs(s.sample_rate - rate) > 1e-9 * rate) throw DataError("common_window: sample rates differ");
        if (s.size() == 0) throw DataError("common_window: empty signal set");
        t0 = std::max(t0, s.start_time);
        t1 = std::min(t1, s.time_at(s.size() - 1));
    }
    if (t1 < t0 - 0.5 / rate) throw DataError("common_window: the signal sets do not overlap");
    const auto count = static_cast<std::size_t>(std::llround((t1 - t0) * rate)) + 1;
    std::vector<SignalSet> out;
    out.reserve(sets.size());
    for (const auto& s : sets) {
        const auto first = static_cast<std::size_t>(std::llround((t0 - s.start_time) * rate));
        out.push_back(s.slice(first, std::min(count, s.size() - first)));
    }
    return out;
}

/// Inclusive sample range [first, last] of a trajectory inside a record.
struct SampleRange {
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t count() const { return last - first + 1; }
};

/// Longest contiguous run of motion in a joint set, padded by the rest sample
/// on each side. Isolated short moves (such as a synchronisation tag) are skipped.
inline SampleRange motion_window(const SignalSet& joints, double eps = 1e-9) {
    const std::size_t n = joints.size();
    if (n == 0) throw DataError("motion_window: empty signal set");
    std::vector<const std::vector<double>*> chans;
    for (auto name : kJointChannels)
        if (joints.has(name)) chans.push_back(&joints.channel(name));

    std::size_t best_first = 0, best_len = 0;
    std::size_t run_first = 0, run_len = 0;
    for (std::size_t k = 1; k < n; ++k) {
        bool moving = false;
        for (const auto* ch : chans) {
            if (std::abs((*ch)[k] - (*ch)[k - 1]) > eps) {
                moving = true;
                break;
            }
        }
        if (moving) {
            if (run_len == 0) run_first = k;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_first = run_first;
            }
        } else {
            run_len = 0;
        }
    }
    if (best_len == 0) return {0, n - 1};
    return {best_first - 1, best_first + best_len - 1};
}

}  // namespace volerr
