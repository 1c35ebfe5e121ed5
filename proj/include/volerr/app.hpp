/**
 * @file app.hpp
 * @brief Campaign manifests and the commands behind the volerr tool.
 *
 * A manifest lists the recordings of one campaign. Relative paths are
 * resolved against the manifest's directory; geometry and calibration may be
 * inline objects or file names.
 *
 * {
 *   "geometry": "geometry.json",
 *   "calibration": "calibration.json",          optional, identity by default
 *   "reference": "F01000",
 *   "sync": { "method": "tag" | "xcorr", "window_ms": 50 },   optional
 *   "degree": 20,                                optional
 *   "sessions": [ { "id": "F01000", "feed_mm_min": 1000, "controller": "...csv",
 *                   "encoder": "...csv", "sensor": "...csv" }, ... ]
 * }
 */
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "volerr/decomposition.hpp"
#include "volerr/json_io.hpp"
#include "volerr/metrics.hpp"
#include "volerr/signal_io.hpp"
#include "volerr/svg_plot.hpp"

namespace volerr::app {

namespace fs = std::filesystem;

struct SessionEntry {
    std::string id;
    double feed_mm_min = 0.0;
    fs::path controller;
    fs::path encoder;
    fs::path sensor;
};

struct Manifest {
    fs::path file;
    MachineGeometry geometry;
    SensorCalibration calibration;
    std::string reference;
    std::optional<SyncMethod> sync_method;
    std::optional<double> sync_window_s;
    std::optional<int> degree;
    std::vector<SessionEntry> sessions;

    const SessionEntry& session(const std::string& id) const {
        for (const auto& s : sessions)
            if (s.id == id) return s;
        throw ConfigError("manifest: no session '" + id + "'");
    }
};

inline Manifest load_manifest(const fs::path& path) {
    const Json j = parse_json_file(path);
    const std::string ctx = path.string();
    if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
    const fs::path dir = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : dir / p; };
    auto object_or_file = [&](const Json& v, const std::string& key) {
        if (v.is_string()) return parse_json_file(resolve(v.get<std::string>()));
        if (v.is_object()) return v;
        throw ConfigError(ctx + ": '" + key + "' must be an object or a file name");
    };

    Manifest m;
    m.file = path;
    m.geometry = geometry_from_json(object_or_file(json_detail::require(j, "geometry", ctx), "geometry"));
    if (j.contains("calibration")) m.calibration = calibration_from_json(object_or_file(j.at("calibration"), "calibration"));

    const auto& ref = json_detail::require(j, "reference", ctx);
    if (!ref.is_string()) throw ConfigError(ctx + ": 'reference' must be a session id");
    m.reference = ref.get<std::string>();

    if (j.contains("sync")) {
        const auto& s = j.at("sync");
        if (s.contains("method")) {
            if (!s.at("method").is_string()) throw ConfigError(ctx + ": sync.method must be a string");
            try {
                m.sync_method = parse_sync_method(s.at("method").get<std::string>());
            } catch (const std::exception& e) {
                throw ConfigError(ctx + ": sync.method: " + e.what());
            }
        }
        if (s.contains("window_ms")) m.sync_window_s = json_detail::number(s, "window_ms", ctx + ".sync") * 1e-3;
    }
    if (j.contains("degree")) m.degree = static_cast<int>(json_detail::number(j, "degree", ctx));

    const auto& sessions = json_detail::require(j, "sessions", ctx);
    if (!sessions.is_array() || sessions.empty()) throw ConfigError(ctx + ": 'sessions' must be a non-empty array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        const auto& s = sessions[i];
        const std::string sc = ctx + ": sessions[" + std::to_string(i) + "]";
        SessionEntry e;
        auto text = [&](const char* key) {
            const auto& v = json_detail::require(s, key, sc);
            if (!v.is_string()) throw ConfigError(sc + "." + key + ": expected a string");
            return v.get<std::string>();
        };
        e.id = text("id");
        e.feed_mm_min = json_detail::number(s, "feed_mm_min", sc);
        if (!(e.feed_mm_min > 0.0)) throw ConfigError(sc + ": feed_mm_min must be > 0");
        e.controller = resolve(text("controller"));
        e.encoder = resolve(text("encoder"));
        e.sensor = resolve(text("sensor"));
        if (!seen.insert(e.id).second) throw ConfigError(sc + ": duplicate session id '" + e.id + "'");
        m.sessions.push_back(std::move(e));
    }
    if (!seen.count(m.reference)) throw ConfigError(ctx + ": reference session '" + m.reference + "' is not listed");
    return m;
}

/// Command-line settings that take precedence over the manifest.
struct AnalysisOverrides {
    std::optional<int> degree;
    std::optional<double> delay_window_s;
    std::optional<SyncMethod> sync_method;
    std::optional<double> max_condition;
    bool robust = false;
    unsigned jobs = 1;
};

inline DecompositionConfig analysis_config(const Manifest& m, const AnalysisOverrides& o) {
    DecompositionConfig cfg;
    cfg.polynomial.degree = o.degree ? *o.degree : m.degree.value_or(kDefaultMotionDegree);
    cfg.delay_window_s = o.delay_window_s ? *o.delay_window_s : m.sync_window_s.value_or(kDefaultDelayWindow);
    cfg.delay.method = o.sync_method ? *o.sync_method : m.sync_method.value_or(SyncMethod::cross_correlation);
    if (o.max_condition) cfg.max_condition = *o.max_condition;
    cfg.polynomial.robust = o.robust;
    if (cfg.polynomial.degree < 0 || cfg.polynomial.degree > 40) throw ConfigError("degree must lie in [0, 40]");
    if (!(cfg.delay_window_s > 0.0)) throw ConfigError("delay window must be > 0");
    return cfg;
}

inline SessionSignals load_session(const SessionEntry& e) {
    SessionSignals s;
    s.id = e.id;
    s.feed_mm_min = e.feed_mm_min;
    auto load = [&](const fs::path& p, CsvSchema schema, const char* what) {
        try {
            return load_signals(p, schema);
        } catch (const std::exception& ex) {
            throw DataError("session " + e.id + ": " + what + " file: " + ex.what());
        }
    };
    s.controller = load(e.controller, CsvSchema::joints, "controller");
    s.encoder = load(e.encoder, CsvSchema::joints, "encoder");
    s.sensor = load(e.sensor, CsvSchema::sensor, "sensor");
    return s;
}

/// Line-buffered console output attributed to a session id.
class Console {
public:
    using Sink = std::function<void(const std::string&)>;
    explicit Console(Sink sink = {}) : sink_(std::move(sink)) {}

    void say(const std::string& session, const std::string& msg) {
        if (!sink_) return;
        std::lock_guard<std::mutex> lock(mutex_);
        sink_("[" + session + "] " + msg);
    }

private:
    Sink sink_;
    std::mutex mutex_;
};

inline std::string fixed(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < n;) fn(k);
        });
    }
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------- identify

struct IdentifyResult {
    ReferenceArtifacts reference;
    Json document;
};

inline Json reference_document(const ReferenceArtifacts& ref) {
    return {{"reference", ref.session_id},
            {"samples", ref.samples},
            {"identification", identification_to_json(ref.identification)},
            {"polynomial", polynomial_to_json(ref.model)}};
}

inline ReferenceArtifacts identify_reference(const Manifest& m, const DecompositionConfig& cfg, Console& out) {
    const auto& entry = m.session(m.reference);
    const auto signals = load_session(entry);
    const auto aligned = with_stage("session " + entry.id, [&] { return prepare_session(signals, m.geometry, m.calibration, cfg); });
    out.say(entry.id, "delay " + fixed(aligned.delay_s * 1e3, 2) + " ms, " + std::to_string(aligned.size()) +
                          " samples in the analysis window");
    return with_stage("session " + entry.id, [&] { return process_reference(aligned, m.geometry, cfg); });
}

/// Writes identification.json into `out_dir` and prints the parameters.
inline IdentifyResult cmd_identify(const fs::path& manifest, const AnalysisOverrides& o, const fs::path& out_dir,
                                   Console& out) {
    const Manifest m = load_manifest(manifest);
    const auto cfg = analysis_config(m, o);
    IdentifyResult r;
    r.reference = identify_reference(m, cfg, out);
    r.document = reference_document(r.reference);
    const auto& id = r.reference.identification;
    for (std::size_t i = 0; i < LinkErrorVector::kSize; ++i) {
        const bool ang = LinkErrorVector::is_angular(i);
        const double s = ang ? 1e6 : 1e3;
        out.say(m.reference, std::string(LinkErrorVector::kNames[i]) + " = " + fixed(id.dq[i] * s) + " +/- " +
                                 fixed(id.standard_errors[i] * s) + (ang ? " urad" : " um"));
    }
    out.say(m.reference, "condition " + fixed(id.condition_number, 1) + ", residual rms " +
                             fixed(id.residual_rms * 1e3) + " um");
    fs::create_directories(out_dir);
    write_json_file(out_dir / "identification.json", r.document);
    return r;
}

// ---------------------------------------------------------------- decompose

struct SessionStatus {
    std::string id;
    double feed_mm_min = 0.0;
    bool ok = false;
    std::string error;
};

struct DecomposeResult {
    std::vector<SessionStatus> sessions;
    bool all_ok() const {
        return !sessions.empty() &&
               std::all_of(sessions.begin(), sessions.end(), [](const auto& s) { return s.ok; });
    }
};

inline void write_decomposition(const fs::path& dir, const Decomposition& d) {
    fs::create_directories(dir);
    const auto src = d.sources();
    for (std::size_t k = 0; k < 5; ++k) {
        write_deviation_csv(dir / ("delta_" + std::string(kSourceNames[k]) + ".csv"), d.times, src[k]);
    }
    write_json_file(dir / "summary.json", decomposition_summary(d));
}

/// Decomposes every session of the manifest into `out_dir`:
///   identification.json, decomposition.json (index), <id>/delta_{c,l,m,td,d}.csv, <id>/summary.json
/// The reference runs first; a failing non-reference session is reported and
/// the others still run.
inline DecomposeResult cmd_decompose(const fs::path& manifest, const AnalysisOverrides& o, const fs::path& out_dir,
                                     Console& out) {
    const Manifest m = load_manifest(manifest);
    const auto cfg = analysis_config(m, o);
    fs::create_directories(out_dir);

    const auto ref = identify_reference(m, cfg, out);
    write_json_file(out_dir / "identification.json", reference_document(ref));

    DecomposeResult r;
    r.sessions.resize(m.sessions.size());
    parallel_for(m.sessions.size(), o.jobs, [&](std::size_t i) {
        const auto& e = m.sessions[i];
        auto& st = r.sessions[i];
        st.id = e.id;
        st.feed_mm_min = e.feed_mm_min;
        try {
            const auto signals = load_session(e);
            const auto d = with_stage("session " + e.id, [&] {
                return decompose_session(signals, ref, m.geometry, m.calibration, cfg);
            });
            write_decomposition(out_dir / e.id, d);
            st.ok = true;
            const Vec3 dd = rms_errors(d.delta_d);
            out.say(e.id, "delay " + fixed(d.delay_s * 1e3, 2) + " ms, dd rms [" + fixed(dd(0)) + ", " +
                              fixed(dd(1)) + ", " + fixed(dd(2)) + "] um");
        } catch (const std::exception& ex) {
            st.error = ex.what();
            out.say(e.id, std::string("failed: ") + ex.what());
        }
    });

    Json index;
    index["reference"] = m.reference;
    index["identification"] = "identification.json";
    index["sessions"] = Json::array();
    for (const auto& s : r.sessions) {
        Json e = {{"id", s.id}, {"feed_mm_min", s.feed_mm_min}, {"ok", s.ok}};
        if (s.ok) e["summary"] = s.id + "/summary.json";
        else e["error"] = s.error;
        index["sessions"].push_back(e);
    }
    write_json_file(out_dir / "decomposition.json", index);
    return r;
}

// ---------------------------------------------------------------- sync-check

struct SyncReport {
    std::string id;
    double delay_s = 0.0;
};

inline std::vector<SyncReport> cmd_sync_check(const fs::path& manifest, const AnalysisOverrides& o, Console& out) {
    const Manifest m = load_manifest(manifest);
    const auto cfg = analysis_config(m, o);
    std::vector<SyncReport> r(m.sessions.size());
    std::vector<std::string> errors(m.sessions.size());
    parallel_for(m.sessions.size(), o.jobs, [&](std::size_t i) {
        const auto& e = m.sessions[i];
        r[i].id = e.id;
        try {
            const auto s = load_session(e);
            const auto ctrl = resample(s.controller, cfg.sample_rate);
            const auto enc = resample(s.encoder, cfg.sample_rate);
            r[i].delay_s = with_stage("session " + e.id + ": estimate delay",
                                      [&] { return estimate_delay(ctrl, enc, cfg.delay_window_s, cfg.delay); });
            out.say(e.id, "delay " + fixed(r[i].delay_s * 1e3, 2) + " ms (" + to_string(cfg.delay.method) + ")");
        } catch (const std::exception& ex) {
            errors[i] = ex.what();
            out.say(e.id, std::string("failed: ") + ex.what());
        }
    });
    for (const auto& e : errors)
        if (!e.empty()) throw DataError(e);
    return r;
}

// ---------------------------------------------------------------- report

struct ReportResult {
    std::vector<MetricsReport> sessions;
    PowerLawFit dynamic_fit;
    std::vector<std::string> warnings;
};

inline Json vec_json(const Vec3& v) { return json_detail::to_array(v); }

/// Reads a decompose output directory and writes report.json, shares.csv,
/// max_um.csv, rms_um.csv, rms_vs_feed.csv, power_law.csv and rms_vs_feed.svg.
inline ReportResult cmd_report(const fs::path& artifact_dir, const fs::path& out_dir, Console& out) {
    const fs::path index_path = artifact_dir / "decomposition.json";
    if (!fs::exists(index_path)) throw DataError(artifact_dir.string() + ": no decomposition artifacts found");
    const Json index = parse_json_file(index_path);
    ReportResult r;
    for (const auto& e : json_detail::require(index, "sessions", index_path.string())) {
        if (!e.value("ok", false)) continue;
        const std::string id = e.at("id").get<std::string>();
        std::array<DeviationMatrix, 5> src;
        for (std::size_t k = 0; k < 5; ++k) {
            src[k] = load_deviation_csv(artifact_dir / id / ("delta_" + std::string(kSourceNames[k]) + ".csv")).values;
        }
        r.sessions.push_back(make_metrics_report(id, e.at("feed_mm_min").get<double>(), src));
    }
    if (r.sessions.empty()) throw DataError(artifact_dir.string() + ": no successfully decomposed session");
    std::sort(r.sessions.begin(), r.sessions.end(),
              [](const auto& a, const auto& b) { return a.feed_mm_min < b.feed_mm_min; });

    std::vector<double> feeds;
    std::vector<Vec3> dd_rms;
    for (const auto& s : r.sessions) {
        feeds.push_back(s.feed_mm_min);
        dd_rms.push_back(s.rms_um[4]);
    }
    std::set<double> distinct(feeds.begin(), feeds.end());
    if (distinct.size() < 2) {
        r.warnings.push_back("power-law fit needs at least two distinct feeds; skipped");
    } else {
        r.dynamic_fit = fit_power_law(feeds, dd_rms);
        for (const auto& w : r.dynamic_fit.warnings) r.warnings.push_back(w);
    }
    for (const auto& w : r.warnings) out.say("report", "warning: " + w);

    static constexpr std::array<const char*, 3> kAxis = {"x", "y", "z"};
    Json j;
    j["units"] = {{"shares", "percent"}, {"errors", "um"}, {"feed", "mm/min"}};
    Json sessions = Json::array();
    std::string shares_csv = "session,feed_mm_min,c,l,m,td,d,sum\n";
    std::string max_csv = "session,feed_mm_min,source,x_um,y_um,z_um\n";
    std::string rms_csv = max_csv;
    std::string feed_csv = "feed_mm_min,dd_rms_x_um,dd_rms_y_um,dd_rms_z_um\n";
    for (const auto& s : r.sessions) {
        Json shares, maxima, rms;
        std::string line = s.session_id + "," + fixed(s.feed_mm_min, 1);
        for (std::size_t k = 0; k < 5; ++k) {
            const std::string name(kSourceNames[k]);
            shares[name] = s.shares[k];
            maxima[name] = vec_json(s.max_um[k]);
            rms[name] = vec_json(s.rms_um[k]);
            line += "," + fixed(s.shares[k], 2);
            const std::string head = s.session_id + "," + fixed(s.feed_mm_min, 1) + "," + name;
            max_csv += head + "," + fixed(s.max_um[k](0)) + "," + fixed(s.max_um[k](1)) + "," + fixed(s.max_um[k](2)) + "\n";
            rms_csv += head + "," + fixed(s.rms_um[k](0)) + "," + fixed(s.rms_um[k](1)) + "," + fixed(s.rms_um[k](2)) + "\n";
        }
        shares_csv += line + "," + fixed(share_sum(s.shares), 2) + "\n";
        feed_csv += fixed(s.feed_mm_min, 1) + "," + fixed(s.rms_um[4](0), 4) + "," + fixed(s.rms_um[4](1), 4) + "," +
                    fixed(s.rms_um[4](2), 4) + "\n";
        sessions.push_back({{"session", s.session_id},
                            {"feed_mm_min", s.feed_mm_min},
                            {"shares", shares},
                            {"share_sum", share_sum(s.shares)},
                            {"max_um", maxima},
                            {"rms_um", rms}});
        out.say(s.session_id, "shares c/l/m/td/d = " + fixed(s.shares[0], 1) + "/" + fixed(s.shares[1], 1) + "/" +
                                  fixed(s.shares[2], 1) + "/" + fixed(s.shares[3], 1) + "/" + fixed(s.shares[4], 1));
    }
    j["sessions"] = sessions;

    Json law = Json::object();
    std::string law_csv = "direction,kappa,exponent,r_squared\n";
    for (std::size_t c = 0; c < 3; ++c) {
        const auto& f = r.dynamic_fit.direction[c];
        if (!f) {
            law[kAxis[c]] = nullptr;
            continue;
        }
        law[kAxis[c]] = {{"kappa", f->kappa}, {"exponent", f->exponent}, {"r_squared", f->r_squared}};
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.6f,%.6f\n", kAxis[c], f->kappa, f->exponent, f->r_squared);
        law_csv += buf;
        out.say("report", std::string("dd rms ") + kAxis[c] + " = " + fixed(f->kappa * 1e6, 4) + "e-6 F^" +
                              fixed(f->exponent, 3) + " (R2 " + fixed(f->r_squared, 4) + ")");
    }
    j["power_law"] = {{"source", "d"}, {"model", "rms_um = kappa * F^N"}, {"directions", law}};
    j["warnings"] = r.warnings;

    fs::create_directories(out_dir);
    write_json_file(out_dir / "report.json", j);
    write_text_file(out_dir / "shares.csv", shares_csv);
    write_text_file(out_dir / "max_um.csv", max_csv);
    write_text_file(out_dir / "rms_um.csv", rms_csv);
    write_text_file(out_dir / "rms_vs_feed.csv", feed_csv);
    write_text_file(out_dir / "power_law.csv", law_csv);

    static constexpr std::array<const char*, 3> kColors = {"#1f77b4", "#d62728", "#2ca02c"};
    std::vector<LogLogSeries> series;
    for (std::size_t c = 0; c < 3; ++c) {
        LogLogSeries s;
        s.label = std::string("dd rms ") + kAxis[c];
        s.color = kColors[c];
        s.x = feeds;
        for (const auto& v : dd_rms) s.y.push_back(v(static_cast<Eigen::Index>(c)));
        s.fit = r.dynamic_fit.direction[c];
        series.push_back(std::move(s));
    }
    try {
        write_text_file(out_dir / "rms_vs_feed.svg",
                        render_loglog_svg(series, "Dynamic error RMS vs programmed feed", "feed (mm/min)", "RMS (um)"));
    } catch (const DataError& ex) {
        out.say("report", std::string("warning: plot skipped: ") + ex.what());
    }
    return r;
}

}  // namespace volerr::app
