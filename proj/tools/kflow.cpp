// Command-line front end: one subcommand per experiment stage.
//
// Exit codes: 0 ok, 1 configuration or input error, 2 numerical failure, 3 acceptance
// violation under --strict.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include <kflow/harness.hpp>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitStrict = 3;
constexpr const char* kOutputRootEnv = "KFLOW_OUTPUT_ROOT";

/// --out if given, else the config's output.dir; relative paths land under $KFLOW_OUTPUT_ROOT.
std::filesystem::path resolve_out(const std::string& flag, const std::string& from_config) {
    std::filesystem::path p = flag.empty() ? from_config : flag;
    if (const char* root = std::getenv(kOutputRootEnv); root && *root && p.is_relative())
        p = std::filesystem::path(root) / p;
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kahler-Ricci flow from glued conical data: expander, gluing, flow, estimates and limits"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand
    std::string config_path, out_flag;
    bool strict = false;
    int jobs = 1;
    app.add_option("--config", config_path, "run configuration (JSON)");
    app.add_option("--out", out_flag, "output directory (run directory for 'report')");
    app.add_flag("--strict", strict, "exit 3 when any bound is violated");
    app.add_option("--jobs", jobs, "concurrent runs")->check(CLI::PositiveNumber);

    struct Cmd {
        const char* name;
        const char* help;
        kflow::ReportList (*fn)(kflow::Session&);
    };
    const Cmd cmds[] = {
        {"solve-expander", "solve the expanding soliton of the cone", kflow::stage_solve_expander},
        {"glue", "build glued initial data, s0 and annulus closeness", kflow::stage_glue},
        {"flow", "evolve each (s, R, lambda) run and write checkpoints", kflow::stage_flow},
        {"estimates", "run the estimate ledger on each run", kflow::stage_estimates},
        {"tangent", "tangent-flow and Gromov-Hausdorff probes", kflow::stage_tangent},
        {"sweep", "estimates over the s list plus s-refinement", kflow::stage_sweep},
    };
    std::vector<CLI::App*> subs;
    for (const auto& c : cmds) subs.push_back(app.add_subcommand(c.name, c.help));
    CLI::App* report = app.add_subcommand("report", "aggregate a run directory into summary.json and plots");
    std::string report_dir;
    report->add_option("dir", report_dir, "run directory (defaults to --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        if (report->parsed()) {
            std::string dir = report_dir.empty() ? out_flag : report_dir;
            if (dir.empty() && !config_path.empty()) dir = kflow::RunConfig::from_file(config_path).out_dir;
            if (dir.empty()) throw kflow::ConfigError("report needs a run directory");
            const auto path = resolve_out(dir, dir);
            const auto res = kflow::stage_report(path);
            std::cout << "report: " << res.summary["reports"].get<std::size_t>() << " reports, " << res.failures
                      << " failures -> " << (path / "summary.json").string() << "\n";
            return strict && res.failures > 0 ? kExitStrict : 0;
        }
        if (config_path.empty()) throw kflow::ConfigError("--config is required");
        const kflow::RunConfig cfg = kflow::RunConfig::from_file(config_path);
        kflow::Session session(cfg, resolve_out(out_flag, cfg.out_dir), jobs);
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            const auto reports = cmds[i].fn(session);
            session.write_manifest();
            std::size_t bad = 0;
            for (const auto& r : reports)
                if (!r.pass()) {
                    ++bad;
                    std::cerr << "violated: " << r.name << " worst=" << kflow::io::num(r.worst_violation)
                              << " value=" << kflow::io::num(r.value()) << "\n";
                }
            std::cout << cmds[i].name << ": " << reports.size() << " reports, " << bad << " violations -> "
                      << session.out().string() << "\n";
            return strict && bad > 0 ? kExitStrict : 0;
        }
    } catch (const kflow::NonKahler& e) {
        std::cerr << e.what() << "\n";
        return kExitNumeric;
    } catch (const kflow::ShootingFailure& e) {
        std::cerr << e.what() << "\n";
        return kExitNumeric;
    } catch (const kflow::StepRejected& e) {
        std::cerr << e.what() << "\n";
        return kExitNumeric;
    } catch (const kflow::GridUnderflow& e) {
        std::cerr << e.what() << "\n";
        return kExitNumeric;
    } catch (const kflow::FloorViolation& e) {
        std::cerr << e.what() << "\n";
        return kExitNumeric;
    } catch (const kflow::Error& e) {
        // config, parameter, window and missing-artifact errors
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
