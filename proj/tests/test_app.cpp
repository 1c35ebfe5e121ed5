#include <filesystem>
#include <fstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "volerr/app.hpp"
#include "volerr/sim/config.hpp"

using namespace volerr;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("volerr_app_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// One simulated error-free session shared by the tests below.
const fs::path& null_campaign() {
    static const fs::path dir = [] {
        const fs::path d = scratch("null_campaign");
        const auto cfg = sim::load_campaign(std::string(VOLERR_CONFIG_DIR) + "/minimal.json");
        const auto res = sim::run_campaign(cfg, d);
        if (!res.all_ok()) throw std::runtime_error("simulation failed");
        return d;
    }();
    return dir;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream(p) << s;
}

}  // namespace

TEST(Manifest, ResolvesPathsAndSettings) {
    const auto m = app::load_manifest(null_campaign() / "manifest.json");
    ASSERT_EQ(m.sessions.size(), 1u);
    EXPECT_EQ(m.reference, "F05000");
    EXPECT_EQ(m.sessions[0].encoder, null_campaign() / "sessions" / "F05000" / "encoder.csv");
    EXPECT_EQ(m.degree, 8);
    EXPECT_EQ(m.sync_method, SyncMethod::tag);

    app::AnalysisOverrides o;
    EXPECT_EQ(app::analysis_config(m, o).polynomial.degree, 8);
    o.degree = 3;
    o.sync_method = SyncMethod::cross_correlation;
    const auto cfg = app::analysis_config(m, o);
    EXPECT_EQ(cfg.polynomial.degree, 3);
    EXPECT_EQ(cfg.delay.method, SyncMethod::cross_correlation);
    o.degree = 41;
    EXPECT_THROW(app::analysis_config(m, o), ConfigError);
}

TEST(Manifest, SchemaErrors) {
    const fs::path d = scratch("manifests");
    const std::string geometry = "\"geometry\": " + geometry_to_json(MachineGeometry{}).dump();
    const std::string session = R"({"id": "a", "feed_mm_min": 1000, "controller": "c.csv", "encoder": "e.csv", "sensor": "s.csv"})";

    write_text(d / "noref.json", "{" + geometry + R"(, "reference": "b", "sessions": [)" + session + "]}");
    EXPECT_THROW(app::load_manifest(d / "noref.json"), ConfigError);

    write_text(d / "dup.json", "{" + geometry + R"(, "reference": "a", "sessions": [)" + session + "," + session + "]}");
    try {
        app::load_manifest(d / "dup.json");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos) << e.what();
    }

    write_text(d / "nosessions.json", "{" + geometry + R"(, "reference": "a", "sessions": []})");
    EXPECT_THROW(app::load_manifest(d / "nosessions.json"), ConfigError);

    write_text(d / "badsync.json",
               "{" + geometry + R"(, "reference": "a", "sync": {"method": "guess"}, "sessions": [)" + session + "]}");
    EXPECT_THROW(app::load_manifest(d / "badsync.json"), ConfigError);

    write_text(d / "broken.json", "{ not json");
    EXPECT_THROW(app::load_manifest(d / "broken.json"), ConfigError);
}

TEST(Session, MissingFileNamesSessionAndFile) {
    auto m = app::load_manifest(null_campaign() / "manifest.json");
    auto e = m.sessions[0];
    e.encoder = e.encoder.parent_path() / "gone.csv";
    try {
        app::load_session(e);
        FAIL();
    } catch (const DataError& ex) {
        const std::string msg = ex.what();
        EXPECT_NE(msg.find("F05000"), std::string::npos) << msg;
        EXPECT_NE(msg.find("encoder"), std::string::npos) << msg;
        EXPECT_NE(msg.find("gone.csv"), std::string::npos) << msg;
    }
}

TEST(NullMachine, OnlyContouringRemains) {
    const auto m = app::load_manifest(null_campaign() / "manifest.json");
    const auto cfg = app::analysis_config(m, {});
    app::Console quiet;
    const auto ref = app::identify_reference(m, cfg, quiet);
    for (std::size_t i = 0; i < LinkErrorVector::kSize; ++i) EXPECT_NEAR(ref.identification.dq[i], 0.0, 1e-9) << i;

    const auto d = decompose_session(app::load_session(m.sessions[0]), ref, m.geometry, m.calibration, cfg);
    EXPECT_NEAR(d.delay_s, 0.018, 1e-12);
    EXPECT_GT(max_errors(d.delta_c).maxCoeff(), 1.0);  // servo lag, µm
    for (const auto* part : {&d.delta_l, &d.delta_m, &d.delta_td, &d.delta_d}) {
        EXPECT_LT(max_errors(*part).maxCoeff(), 0.01);
    }
}

TEST(Commands, IdentifyDecomposeReportSyncCheck) {
    const fs::path manifest = null_campaign() / "manifest.json";
    const fs::path out = scratch("commands");
    std::vector<std::string> lines;
    app::Console console([&](const std::string& s) { lines.push_back(s); });

    const auto id = app::cmd_identify(manifest, {}, out, console);
    EXPECT_TRUE(fs::exists(out / "identification.json"));
    EXPECT_EQ(id.document.at("reference"), "F05000");

    const auto r = app::cmd_decompose(manifest, {}, out, console);
    EXPECT_TRUE(r.all_ok());
    for (const char* f : {"delta_c.csv", "delta_l.csv", "delta_m.csv", "delta_td.csv", "delta_d.csv", "summary.json"}) {
        EXPECT_TRUE(fs::exists(out / "F05000" / f)) << f;
    }

    const auto rep = app::cmd_report(out, out, console);
    ASSERT_EQ(rep.sessions.size(), 1u);
    EXPECT_NEAR(share_sum(rep.sessions[0].shares), 100.0, 1e-6);
    EXPECT_FALSE(rep.warnings.empty());  // one feed is not enough for a power law
    for (const char* f : {"report.json", "shares.csv", "max_um.csv", "rms_um.csv", "rms_vs_feed.csv"}) {
        EXPECT_TRUE(fs::exists(out / f)) << f;
    }

    const auto sync = app::cmd_sync_check(manifest, {}, console);
    ASSERT_EQ(sync.size(), 1u);
    EXPECT_NEAR(sync[0].delay_s, 0.018, 1e-12);
    bool attributed = false;
    for (const auto& l : lines) attributed = attributed || l.rfind("[F05000] ", 0) == 0;
    EXPECT_TRUE(attributed);
}

TEST(Commands, ReportNeedsDecomposition) {
    app::Console quiet;
    EXPECT_THROW(app::cmd_report(scratch("empty"), scratch("empty_out"), quiet), DataError);
}

TEST(Commands, ParallelForVisitsEveryIndexOnce) {
    std::vector<int> hits(37, 0);
    app::parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) EXPECT_EQ(h, 1);
    EXPECT_EQ(app::fixed(1.23456, 2), "1.23");
}
