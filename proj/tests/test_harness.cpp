#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>

#include <kflow/harness.hpp>

using namespace kflow;

namespace {

const fs::path& scratch() {
    static const fs::path d = [] {
        const auto p = fs::temp_directory_path() / "kflow_test_harness";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const auto p = scratch() / name;
    io::write_file(p, body);
    return p;
}

int cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " KFLOW_CLI " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Baseline cone, two values of s, short drift runs.
const char* kSmall = R"({
  "runs": {"s": [1e-3, 1e-4]},
  "integrator": {"dt": 0.02},
  "output": {"dir": "small"}
})";

}  // namespace

TEST(Config, DefaultsValidateAndRoundTrip) {
    const RunConfig c = RunConfig::from_json(io::json::object());
    EXPECT_EQ(c.runs.size(), 2u);
    const RunConfig d = RunConfig::from_json(c.to_json());
    EXPECT_EQ(c.hash(), d.hash());
    EXPECT_EQ(c.hash().size(), 64u);
    // output location does not enter the hash
    io::json j = c.to_json();
    j["output"]["dir"] = "elsewhere";
    EXPECT_EQ(RunConfig::from_json(j).hash(), c.hash());
    j["grid"]["h"] = 0.02;
    EXPECT_NE(RunConfig::from_json(j).hash(), c.hash());
}

TEST(Config, RejectsBeforeComputing) {
    auto bad = [](const char* text) { return RunConfig::from_json(io::json::parse(text)); };
    EXPECT_THROW(bad(R"({"runz": {}})"), ConfigError);
    EXPECT_THROW(bad(R"({"grid": {"hh": 0.1}})"), ConfigError);
    EXPECT_THROW(bad(R"({"runs": {"s": [1e-2], "R2": 0.3}})"), ConfigError);        // R^2 <= 4 sqrt(s)
    EXPECT_THROW(bad(R"({"runs": {"s": [1e-2], "lambda": 20}})"), ConfigError);     // lambda > 1/sqrt(s)
    EXPECT_THROW(bad(R"({"runs": {"s": [1e-3, 1e-4], "R2": [1, 1, 1]}})"), ConfigError);
    EXPECT_THROW(bad(R"({"monitors": ["c9"]})"), ConfigError);
    EXPECT_THROW(bad(R"({"cone": {"family": "sphere"}})"), ConfigError);
    EXPECT_THROW(bad(R"({"tangent": {"t_sequence": [0.5, 0.25]}})"), ConfigError);  // outside the window
    EXPECT_THROW(bad(R"({"integrator": {"dt": -1}})"), ConfigError);
    EXPECT_THROW(bad(R"({"grid": {"h": "fine"}})"), ConfigError);
    EXPECT_THROW(RunConfig::from_file((scratch() / "absent.json").string()), ConfigError);
    EXPECT_THROW(RunConfig::from_file(write_config("broken.json", "{").string()), ConfigError);
}

TEST(Formats, CsvRoundTripAndVersionCheck) {
    io::CsvTable t("series", {"tau", "value"});
    t.row({0.0, 1.5});
    t.row({0.25, -3e-17});
    EXPECT_THROW(t.row({1.0}), Error);
    const auto back = io::CsvTable::parse(t.str());
    EXPECT_EQ(back.kind(), "series");
    EXPECT_EQ(back.columns(), t.columns());
    EXPECT_EQ(back.rows(), t.rows());
    EXPECT_THROW(io::CsvTable::parse("tau,value\n1,2\n"), ConfigError);
    EXPECT_THROW(io::CsvTable::parse("# kflow-series v9\ntau\n"), ConfigError);
}

TEST(Formats, ReportJsonRoundTrip) {
    EstimateReport r = EstimateReport::lower("barrier", -2e-7, 1e-6);
    r.measured = {{"C", 2.5}, {"D", 0.1}};
    r.x = -1.25;
    r.time = 0.5;
    r.note = "drift gauge";
    const EstimateReport b = io::report_from_json(io::to_json(r));
    EXPECT_EQ(b.name, r.name);
    EXPECT_EQ(b.kind, r.kind);
    EXPECT_EQ(b.measured, r.measured);
    EXPECT_EQ(b.worst_violation, r.worst_violation);
    EXPECT_EQ(b.tolerance, r.tolerance);
    EXPECT_EQ(b.x, r.x);
    EXPECT_EQ(b.pass(), r.pass());
    const auto doc = io::report_document({r}, {{"s", 1e-3}});
    EXPECT_EQ(doc.at("format_version"), io::kFormatVersion);
}

TEST(Formats, SvgIsWellFormed) {
    const std::string svg = io::svg_plot("t", "x", "y", {{"a", {1, 2, 3}, {1, 4, 9}}}, true, true);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Parallel, RunsEveryIndexAndRethrows) {
    std::vector<int> hit(50, 0);
    parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) EXPECT_EQ(h, 1);
    EXPECT_THROW(parallel_for(8, 3, [](std::size_t i) { if (i == 5) throw ParamError("x"); }), ParamError);
}

TEST(Cli, ExitCodes) {
    const auto out = scratch() / "exit";
    EXPECT_EQ(cli("--help"), 0);
    EXPECT_EQ(cli("nonsense"), 1);
    EXPECT_EQ(cli("glue"), 1);  // --config missing
    EXPECT_EQ(cli("glue --config " KFLOW_SOURCE_DIR "/configs/bad_constraint.json --out " + out.string()), 1);
    EXPECT_FALSE(fs::exists(out / "manifest.json"));  // rejected before any output
    const auto nk = write_config("nonkahler.json", R"({"perturbation": {"eps0": -1.0}, "runs": {"s": [1e-3]}})");
    EXPECT_EQ(cli("glue --config " + nk.string() + " --out " + out.string()), 2);
    // the hamiltonian identity is a fourth-order residual calibrated at h = 0.025; h = 0.043
    // leaves it above its tolerance
    const auto coarse = write_config("coarse.json", R"({"runs": {"s": [1e-3]}, "grid": {"h": 0.043},
                                                        "integrator": {"dt": 0.02}})");
    EXPECT_EQ(cli("estimates --config " + coarse.string() + " --out " + out.string()), 0);
    EXPECT_EQ(cli("estimates --strict --config " + coarse.string() + " --out " + out.string()), 3);
    EXPECT_EQ(cli("report --strict " + out.string()), 3);
    EXPECT_EQ(cli("report " + (scratch() / "nowhere").string()), 1);
}

TEST(Cli, ManifestIsDeterministicAcrossJobs) {
    const auto cfg = write_config("small.json", kSmall);
    const auto a = scratch() / "det_a", b = scratch() / "det_b";
    ASSERT_EQ(cli("estimates --config " + cfg.string() + " --out " + a.string()), 0);
    ASSERT_EQ(cli("estimates --jobs 2 --config " + cfg.string() + " --out " + b.string()), 0);
    const std::string ma = io::read_file(a / "manifest.json");
    EXPECT_EQ(ma, io::read_file(b / "manifest.json"));
    const auto man = io::json::parse(ma);
    for (const char* key : {"format_version", "artifact_version", "config_hash", "config", "files", "verdicts"})
        EXPECT_TRUE(man.contains(key)) << key;
    EXPECT_EQ(man["config_hash"], RunConfig::from_file(cfg.string()).hash());
    EXPECT_TRUE(fs::exists(a / "timings.json"));
    // every recorded file exists and hashes as recorded
    ASSERT_FALSE(man["files"].empty());
    for (const auto& [rel, h] : man["files"].items())
        EXPECT_EQ(io::sha256_hex(io::read_file(a / rel)), h.get<std::string>()) << rel;

    ASSERT_EQ(cli("report " + a.string()), 0);
    const auto sum = io::json::parse(io::read_file(a / "summary.json"));
    EXPECT_EQ(sum["kind"], "summary");
    EXPECT_TRUE(sum["all_pass"].get<bool>());
    EXPECT_TRUE(fs::exists(a / "report" / "c2-by-s.csv"));
    EXPECT_TRUE(fs::exists(a / "report" / "c2-by-s.svg"));
}

TEST(Cli, OutputRootFromEnvironment) {
    const auto cfg = write_config("root.json", R"({"runs": {"s": [1e-3]}, "output": {"dir": "rel/run"}})");
    const auto root = scratch() / "root";
    ASSERT_EQ(cli("glue --config " + cfg.string(), "KFLOW_OUTPUT_ROOT=" + root.string()), 0);
    EXPECT_TRUE(fs::exists(root / "rel" / "run" / "manifest.json"));
}

TEST(Report, NeedsManifest) {
    EXPECT_THROW(stage_report(scratch() / "empty"), MissingArtifacts);
}

// Every CSV kind written by the stages is documented in the shipped schema.
TEST(Schema, DocumentsEveryCsvKind) {
    const auto schema = io::json::parse(io::read_file(KFLOW_SOURCE_DIR "/schema/csv_schema.json"));
    const auto cfg = write_config("schema.json", kSmall);
    const auto out = scratch() / "schema_run";
    ASSERT_EQ(cli("glue --config " + cfg.string() + " --out " + out.string()), 0);
    ASSERT_EQ(cli("flow --config " + cfg.string() + " --out " + out.string()), 0);
    ASSERT_EQ(cli("estimates --config " + cfg.string() + " --out " + out.string()), 0);
    ASSERT_EQ(cli("report " + out.string()), 0);
    // the flow stage measures the outer-boundary truncation error
    const auto fr = io::json::parse(io::read_file(out / "flow" / s_tag(1e-3) / "reports.json"));
    bool found = false;
    for (const auto& r : fr["reports"])
        if (r["name"] == "outer_boundary_error") {
            found = true;
            EXPECT_LE(r["measured"]["sup_inside_lambda"].get<double>(), r["measured"]["sup_shared"].get<double>());
        }
    EXPECT_TRUE(found);
    int seen = 0;
    for (const auto& ent : fs::recursive_directory_iterator(out)) {
        if (ent.path().extension() != ".csv") continue;
        const auto t = io::CsvTable::parse(io::read_file(ent.path()));
        ASSERT_TRUE(schema["kinds"].contains(t.kind())) << t.kind();
        std::vector<std::string> cols;
        for (const auto& c : schema["kinds"][t.kind()]["columns"]) cols.push_back(c["name"]);
        EXPECT_EQ(cols, t.columns()) << ent.path();
        ++seen;
    }
    EXPECT_GT(seen, 3);
}
