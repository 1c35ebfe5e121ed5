// volerr: simulate, decompose and report volumetric error campaigns.
//
// Exit codes: 0 success, 1 data or validation error, 2 configuration error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "volerr/app.hpp"
#include "volerr/sim/config.hpp"

namespace {

using namespace volerr;
namespace fs = std::filesystem;

struct Globals {
    std::string config;
    std::string out;
    unsigned jobs = 1;
    std::optional<std::uint64_t> seed;
    std::optional<int> degree;
    std::optional<double> delay_window_ms;
    std::string sync_method;
    std::optional<double> max_condition;
    bool robust = false;
};

std::string input_path(const std::string& positional, const Globals& g, const char* what) {
    if (!positional.empty()) return positional;
    if (!g.config.empty()) return g.config;
    throw ConfigError(std::string("missing ") + what + " (positional argument or --config)");
}

app::AnalysisOverrides overrides(const Globals& g) {
    app::AnalysisOverrides o;
    o.degree = g.degree;
    if (g.delay_window_ms) o.delay_window_s = *g.delay_window_ms * 1e-3;
    if (!g.sync_method.empty()) {
        try {
            o.sync_method = parse_sync_method(g.sync_method);
        } catch (const std::exception& e) {
            throw ConfigError(std::string("--sync-method: ") + e.what());
        }
    }
    o.max_condition = g.max_condition;
    o.robust = g.robust;
    o.jobs = g.jobs;
    return o;
}

void print_line(const std::string& s) {
    std::cout << s << '\n' << std::flush;
}

int run_simulate(const std::string& input, const Globals& g) {
    auto cfg = sim::load_campaign(input_path(input, g, "campaign config"));
    if (g.seed) cfg.seed = *g.seed;
    const fs::path out = g.out.empty() ? fs::path("campaign") : fs::path(g.out);
    app::Console console(print_line);
    const auto res = sim::run_campaign(cfg, out, g.jobs, [&](const std::string& id, const std::string& msg) {
        console.say(id, msg);
    });
    std::printf("%-8s %10s %9s %10s %28s\n", "session", "feed", "samples", "duration", "true dd rms x/y/z (um)");
    for (const auto& s : res.sessions) {
        if (!s.ok) {
            std::printf("%-8s %10.1f  FAILED: %s\n", s.id.c_str(), s.feed_mm_min, s.error.c_str());
            continue;
        }
        std::printf("%-8s %10.1f %9zu %9.3fs %9.3f %8.3f %8.3f\n", s.id.c_str(), s.feed_mm_min, s.samples, s.duration_s,
                    s.dynamic_rms_um(0), s.dynamic_rms_um(1), s.dynamic_rms_um(2));
    }
    std::printf("manifest: %s\n", res.manifest.string().c_str());
    return res.all_ok() ? 0 : 1;
}

int run_decompose(const std::string& input, const Globals& g) {
    app::Console console(print_line);
    const fs::path out = g.out.empty() ? fs::path("decomposition") : fs::path(g.out);
    const auto r = app::cmd_decompose(input_path(input, g, "manifest"), overrides(g), out, console);
    int failed = 0;
    for (const auto& s : r.sessions) failed += s.ok ? 0 : 1;
    std::printf("%zu session(s) decomposed, %d failed; artifacts in %s\n", r.sessions.size() - failed, failed,
                out.string().c_str());
    return r.all_ok() ? 0 : 1;
}

int run_identify(const std::string& input, const Globals& g) {
    app::Console console(print_line);
    const fs::path out = g.out.empty() ? fs::path(".") : fs::path(g.out);
    app::cmd_identify(input_path(input, g, "manifest"), overrides(g), out, console);
    return 0;
}

int run_report(const std::string& input, const Globals& g) {
    app::Console console(print_line);
    const fs::path dir = input_path(input, g, "artifact directory");
    const fs::path out = g.out.empty() ? dir : fs::path(g.out);
    app::cmd_report(dir, out, console);
    std::printf("report written to %s\n", (out / "report.json").string().c_str());
    return 0;
}

int run_sync_check(const std::string& input, const Globals& g) {
    app::Console console(print_line);
    app::cmd_sync_check(input_path(input, g, "manifest"), overrides(g), console);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"Volumetric error decomposition for five-axis machine tools"};
    cli.require_subcommand(1);
    cli.fallthrough();

    Globals g;
    cli.add_option("--config", g.config, "Campaign config (simulate) or manifest (other commands)");
    cli.add_option("--out", g.out, "Output directory");
    cli.add_option("--jobs", g.jobs, "Sessions processed in parallel")->check(CLI::PositiveNumber);
    cli.add_option("--seed", g.seed, "Override the campaign seed");
    cli.add_option("--degree", g.degree, "Motion-error polynomial degree (default 20)");
    cli.add_option("--delay-window-ms", g.delay_window_ms, "Delay search window in ms (default 50)");
    cli.add_option("--sync-method", g.sync_method, "Delay estimation: xcorr or tag");
    cli.add_option("--max-condition", g.max_condition, "Largest accepted condition number for identification");
    cli.add_flag("--robust", g.robust, "Tukey-reweighted polynomial fit");

    std::string input;
    auto* simulate = cli.add_subcommand("simulate", "Run the virtual machine and write a campaign");
    auto* decompose = cli.add_subcommand("decompose", "Split every session into its error sources");
    auto* identify = cli.add_subcommand("identify", "Identify the link errors on the reference session");
    auto* report = cli.add_subcommand("report", "Tables and power-law fit from decomposition artifacts");
    auto* sync = cli.add_subcommand("sync-check", "Print the estimated recording delay of every session");
    simulate->add_option("config", input, "Campaign config JSON");
    decompose->add_option("manifest", input, "Campaign manifest JSON");
    identify->add_option("manifest", input, "Campaign manifest JSON");
    report->add_option("artifacts", input, "Directory written by decompose");
    sync->add_option("manifest", input, "Campaign manifest JSON");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate) return run_simulate(input, g);
        if (*decompose) return run_decompose(input, g);
        if (*identify) return run_identify(input, g);
        if (*report) return run_report(input, g);
        return run_sync_check(input, g);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
