#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "chiralpair/correlate.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path work_dir() {
    static const fs::path d = [] {
        auto p = fs::temp_directory_path() / "chiralpair_cli";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

Run run(const std::string& args) {
    const fs::path err = work_dir() / "stderr.txt";
    const std::string cmd = std::string(CHIRALPAIR_CLI) + " " + args + " 2>" + err.string();
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream e(err);
    std::stringstream ss;
    ss << e.rdbuf();
    r.err = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path write_config(const std::string& name, const std::string& body) {
    const auto p = work_dir() / name;
    std::ofstream(p) << body;
    return p;
}

// Shared simulated run: 2e6 pulses of the measured preset, +-10 us histograms.
fs::path pipeline_dir() {
    static const fs::path d = [] {
        const auto dir = work_dir() / "run";
        const auto cfg = write_config(
            "run.json", R"({"preset":"qd1","instrument":{"pulses":2000000,"seed":5},"correlate":{"window_ps":10000000}})");
        const std::string common = "--config " + cfg.string() + " --out-dir " + dir.string() + " --reproducible ";
        EXPECT_EQ(run(common + "simulate").code, 0);
        EXPECT_EQ(run(common + "correlate").code, 0);
        return dir;
    }();
    return d;
}

}  // namespace

TEST(Cli, SimulateWritesStreamsAndManifest) {
    const auto dir = pipeline_dir();
    for (const char* f : {"xx_a.ts", "xx_b.ts", "x_a.ts", "x_b.ts", "manifest.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto m = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["preset"], "qd1");
    EXPECT_EQ(m["seed"], 5);
    EXPECT_EQ(m["stats"]["pulses"], 2000000);
    EXPECT_FALSE(m.contains("created_utc"));
    EXPECT_EQ(m["params_hash"].get<std::string>().size(), 16u);
}

TEST(Cli, ReproducibleRunsAreByteIdentical) {
    const auto cfg = write_config("small.json", R"({"preset":"qd1","instrument":{"pulses":100000}})");
    for (const char* d : {"rep1", "rep2"})
        ASSERT_EQ(run("--config " + cfg.string() + " --seed 3 --reproducible --out-dir " + (work_dir() / d).string() +
                      " simulate")
                      .code,
                  0);
    for (const char* f : {"xx_a.ts", "x_b.ts", "manifest.json"})
        EXPECT_EQ(slurp(work_dir() / "rep1" / f), slurp(work_dir() / "rep2" / f)) << f;
    ASSERT_EQ(run("--config " + cfg.string() + " --seed 4 --reproducible --out-dir " + (work_dir() / "rep3").string() +
                  " simulate")
                  .code,
              0);
    EXPECT_NE(slurp(work_dir() / "rep1" / "xx_a.ts"), slurp(work_dir() / "rep3" / "xx_a.ts"));
}

TEST(Cli, CorrelateWritesFourHistograms) {
    const auto dir = pipeline_dir();
    for (const char* c : {"AA", "AB", "BA", "BB"}) {
        const auto h = chiralpair::read_histogram(dir / (std::string("hist_") + c + ".csv"));
        EXPECT_EQ(h.tau_min_ps, -10000000);
        EXPECT_GT(h.sum(), 1e5) << c;
    }
}

TEST(Cli, FitRecoversPresetParameters) {
    const auto dir = pipeline_dir();
    const auto r = run("--preset qd1 --out-dir " + dir.string() + " fit --cross " + (dir / "hist_AB.csv").string() +
                       " --same " + (dir / "hist_AA.csv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j["fss_ghz"].get<double>(), 12.78, 0.05);
    EXPECT_NEAR(j["phi_over_pi"].get<double>(), 0.12, 0.01);
    for (const char* f : {"fit_stage1.json", "fit_stage2.json", "overlay_stage1.csv", "overlay_stage2.csv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
}

TEST(Cli, AlignWritesShiftedHistogram) {
    const auto dir = pipeline_dir();
    const auto out = work_dir() / "align";
    const auto r = run("--out-dir " + out.string() + " align --ref " + (dir / "hist_BA.csv").string() + " --mov " +
                       (dir / "hist_AA.csv").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(slurp(out / "alignment.json"));
    EXPECT_NEAR(j["applied_shift_ps"].get<double>(), 0.0, 4.0);
    EXPECT_TRUE(j.contains("precision_ppb"));
    EXPECT_TRUE(fs::exists(out / "aligned_hist_AA.csv"));
}

TEST(Cli, EntanglementSweep) {
    const auto out = work_dir() / "ent";
    const auto r = run("--preset qd1 --out-dir " + out.string() + " entanglement");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j["peak_concurrence"].get<double>(), 0.11, 0.02);
    std::ifstream csv(out / "entanglement.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "tau_ns,concurrence,entropy,concurrence_pure");
}

TEST(Cli, FieldmapWritesThreeMaps) {
    const auto grid = write_config("grid.csv", "ix,iy,re_ex,im_ex,re_ey,im_ey\n0,0,0,1,1,0\n1,0,1,0,1,0\n0,1,0,0,0,0\n1,1,0.3,0.3,1,0\n");
    const auto out = work_dir() / "field";
    const auto r = run("--preset qd1 --out-dir " + out.string() + " fieldmap --grid " + grid.string());
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"phase_map.csv", "directionality_map.csv", "concurrence_map.csv"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_NE(slurp(out / "phase_map.csv").find("0,1,masked"), std::string::npos);
}

TEST(Cli, ReportBacksOutIdealPhase) {
    const auto dir = work_dir() / "report";
    fs::create_directories(dir);
    const auto cfg = write_config("report.json", R"({"preset":"qd1","report":{"reflectance":0.3}})");
    const auto r = run("--config " + cfg.string() + " report --run-dir " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(slurp(dir / "report.json"));
    EXPECT_NEAR(j["reflection_backout"]["ideal_phi_over_pi"].get<double>(), 0.37, 0.005);
    EXPECT_EQ(j["reflection_backout"]["phi_source"], "config");
}

TEST(Cli, ErrorsAreJsonWithExitCodes) {
    auto r = run("");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["type"], "usage");

    const auto bad = write_config("bad.json", R"({"emitter":{"gama_x":8}})");
    r = run("--config " + bad.string() + " entanglement");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["type"], "validation");

    r = run("--out-dir " + (work_dir() / "x").string() + " correlate --run-dir " + (work_dir() / "missing").string());
    EXPECT_EQ(r.code, 2);

    auto flat = chiralpair::make_histogram("flat", -20000000, 20000000, 4);
    for (double& c : flat.counts) c = 10.0;
    chiralpair::write_histogram(work_dir() / "flat.csv", flat);
    r = run("--out-dir " + (work_dir() / "x").string() + " align --ref " + (work_dir() / "flat.csv").string() +
            " --mov " + (work_dir() / "flat.csv").string());
    EXPECT_EQ(r.code, 3);
    EXPECT_EQ(json::parse(r.err)["error"]["type"], "alignment");
}
