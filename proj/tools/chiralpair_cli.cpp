// Command-line front end: one subcommand per pipeline stage, files as interchange.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chiralpair/chiralfield.hpp"
#include "chiralpair/config.hpp"
#include "chiralpair/correlate.hpp"
#include "chiralpair/entanglement.hpp"
#include "chiralpair/fit.hpp"
#include "chiralpair/simulate.hpp"
#include "chiralpair/timematch.hpp"
#include "chiralpair/timestamp_io.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace chiralpair;

namespace {

constexpr const char* kVersion = "0.1.0";
const std::array<const char*, 4> kChannelFiles = {"xx_a.ts", "xx_b.ts", "x_a.ts", "x_b.ts"};

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string preset;
    std::string out_dir = ".";
    bool reproducible = false;
};

class UsageError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

RunConfig resolve_config(const Globals& g) {
    RunConfig c = g.preset.empty() ? RunConfig{} : preset_config(g.preset);
    if (!g.config_path.empty()) c = load_run_config(g.config_path, c);
    if (g.seed) c.instrument.seed = *g.seed;
    validate(c);
    return c;
}

json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw std::invalid_argument("cannot open " + p.string());
    return json::parse(is);
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot open " + p.string() + " for writing");
    os << j.dump(2) << '\n';
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string histogram_label(PortPair pp) {
    const auto s = to_string(pp);
    return std::string(1, s[0]) + "_XX-" + std::string(1, s[1]) + "_X";
}

std::pair<int, int> channels_for(PortPair pp) {
    switch (pp) {
        case PortPair::AA: return {0, 2};
        case PortPair::AB: return {0, 3};
        case PortPair::BA: return {1, 2};
        default: return {1, 3};
    }
}

int cmd_simulate(const Globals& g, const std::string& g2_transition) {
    const RunConfig c = resolve_config(g);
    const fs::path dir = g.out_dir;
    fs::create_directories(dir);
    const std::string hash = params_hash(c.emitter, c.instrument);
    const TimestampHeader header{c.instrument.seed, hash, c.timestamp_format};

    json files = json::object();
    json stats_json;
    if (g2_transition.empty()) {
        SimulationStats stats;
        const auto streams = simulate_run(c.emitter, c.instrument, &stats);
        for (std::size_t i = 0; i < 4; ++i) {
            write_timestamps(dir / kChannelFiles[i], streams[i], header);
            files[streams[i].channel] = kChannelFiles[i];
        }
        stats_json = {{"pulses", stats.pulses},
                      {"cascades", stats.cascades},
                      {"rejections", stats.rejections},
                      {"pair_config_counts",
                       {{"AA", stats.pair_config_counts[0]},
                        {"AB", stats.pair_config_counts[1]},
                        {"BA", stats.pair_config_counts[2]},
                        {"BB", stats.pair_config_counts[3]}}}};
    } else {
        Transition t;
        if (g2_transition == "X") t = Transition::X;
        else if (g2_transition == "XX") t = Transition::XX;
        else throw UsageError("--g2 expects X or XX");
        const auto streams = simulate_g2_single(t, c.emitter, c.instrument);
        const std::string stem = g2_transition == "X" ? "x" : "xx";
        for (std::size_t i = 0; i < 2; ++i) {
            const std::string name = stem + "_" + std::to_string(i + 1) + ".ts";
            write_timestamps(dir / name, streams[i], header);
            files[streams[i].channel] = name;
        }
        stats_json = {{"pulses", pulse_count(c.emitter, c.instrument)}};
    }

    json manifest = {{"tool", "chiralpair"},
                     {"version", kVersion},
                     {"command", "simulate"},
                     {"preset", c.preset},
                     {"preset_from_measurement", c.preset_from_measurement},
                     {"params_hash", hash},
                     {"seed", c.instrument.seed},
                     {"config", json::parse(run_config_to_json(c))},
                     {"files", files},
                     {"stats", stats_json}};
    if (!g.reproducible) manifest["created_utc"] = utc_now();
    write_json(dir / "manifest.json", manifest);
    return 0;
}

int cmd_correlate(const Globals& g, const std::string& run_dir, const std::string& start_file,
                  const std::string& stop_file, double g2_period_ps) {
    const RunConfig c = resolve_config(g);
    const fs::path out = g.out_dir;
    fs::create_directories(out);
    CorrelateOptions opt;
    opt.bin_width_ps = c.correlate.bin_width_ps;
    opt.tau_min_ps = -c.correlate.window_ps;
    opt.tau_max_ps = c.correlate.window_ps;
    opt.exclude_self_pairs = c.correlate.exclude_self_pairs;
    opt.threads = c.correlate.threads;

    auto load = [](const fs::path& p) {
        if (!fs::exists(p)) throw std::invalid_argument("missing channel file " + p.string());
        return read_timestamps(p);
    };

    json written = json::array();
    if (!start_file.empty() || !stop_file.empty()) {
        if (start_file.empty() || stop_file.empty()) throw UsageError("--start and --stop go together");
        CorrelationHistogram h = correlate_streams(load(start_file), load(stop_file), opt);
        write_histogram(out / "hist_pair.csv", h);
        written.push_back("hist_pair.csv");
        if (g2_period_ps > 0.0) {
            const G2Estimate e = g2_pulsed(h, g2_period_ps);
            write_json(out / "g2.json", {{"g2", e.value},
                                         {"error", e.error},
                                         {"central_area", e.central_area},
                                         {"mean_side_area", e.mean_side_area},
                                         {"side_peaks", e.side_peaks}});
            written.push_back("g2.json");
        }
    } else {
        const fs::path rd = run_dir.empty() ? out : fs::path(run_dir);
        std::array<std::optional<TimestampStream>, 4> cache;
        auto channel = [&](int i) -> const TimestampStream& {
            if (!cache[static_cast<std::size_t>(i)]) cache[static_cast<std::size_t>(i)] = load(rd / kChannelFiles[static_cast<std::size_t>(i)]);
            return *cache[static_cast<std::size_t>(i)];
        };
        for (PortPair pp : c.correlate.configs) {
            const auto [s, t] = channels_for(pp);
            CorrelationHistogram h = correlate_streams(channel(s), channel(t), opt);
            h.config = histogram_label(pp);
            const std::string name = "hist_" + std::string(to_string(pp)) + ".csv";
            write_histogram(out / name, h);
            written.push_back(name);
        }
    }
    std::cout << json{{"written", written}}.dump() << '\n';
    return 0;
}

int cmd_align(const Globals& g, const std::string& ref, const std::string& mov) {
    const fs::path out = g.out_dir;
    fs::create_directories(out);
    const CorrelationHistogram h_ref = read_histogram(fs::path(ref));
    const CorrelationHistogram h_mov = read_histogram(fs::path(mov));
    auto [result, shifted] = align_datasets(h_ref, h_mov);
    write_alignment(out / "alignment.json", result);
    const std::string name = "aligned_" + fs::path(mov).filename().string();
    write_histogram(out / name, shifted);
    std::cout << alignment_json(result) << '\n';
    return 0;
}

int cmd_fit(const Globals& g, const std::string& cross, const std::string& same, std::optional<double> gamma) {
    const RunConfig c = resolve_config(g);
    const fs::path out = g.out_dir;
    fs::create_directories(out);
    const double gx = gamma.value_or(c.emitter.gamma_x);
    const CorrelationHistogram h_cross = read_histogram(fs::path(cross));
    const CorrelationHistogram h_same = read_histogram(fs::path(same));
    Stage1Options s1;
    s1.fss_min_ghz = c.fit.fss_min_ghz;
    s1.fss_max_ghz = c.fit.fss_max_ghz;
    FitResult r1 = fit_stage1(h_cross, gx, s1);
    r1.config = c.fit.cross_config;
    const FitResult r2 = fit_stage2(h_same, r1, gx, c.fit.same_config);
    write_fit_result(out / "fit_stage1.json", r1);
    write_fit_result(out / "fit_stage2.json", r2);
    write_overlay_csv(out / "overlay_stage1.csv", h_cross, r1);
    write_overlay_csv(out / "overlay_stage2.csv", h_same, r2);
    std::cout << json{{"fss_ghz", angular_to_ghz(r1.values.at("fss"))},
                      {"phi_over_pi", r2.values.at("phi") / kPi},
                      {"phi_over_pi_error", r2.errors.at("phi") / kPi}}
                     .dump()
              << '\n';
    return 0;
}

int cmd_entanglement(const Globals& g) {
    const RunConfig c = resolve_config(g);
    const fs::path out = g.out_dir;
    fs::create_directories(out);
    const auto& e = c.entanglement;
    std::vector<double> grid(static_cast<std::size_t>(e.points));
    for (int i = 0; i < e.points; ++i)
        grid[static_cast<std::size_t>(i)] = e.tau_min_ns + (e.tau_max_ns - e.tau_min_ns) * i / (e.points - 1);
    const auto jittered = concurrence_sweep(c.emitter, grid, e.threads);

    std::ofstream os(out / "entanglement.csv");
    os << "tau_ns,concurrence,entropy,concurrence_pure\n" << std::setprecision(12);
    double peak = 0.0, peak_tau = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto amp = amplitudes(c.emitter, grid[i]);
        double ent = 0.0, cp = 0.0;
        try {
            ent = entropy(amp);
            cp = concurrence_pure(c.emitter, grid[i]);
        } catch (const DegenerateStateError&) {
        }
        os << grid[i] << ',' << jittered[i].concurrence << ',' << ent << ',' << cp << '\n';
        if (jittered[i].concurrence > peak) {
            peak = jittered[i].concurrence;
            peak_tau = grid[i];
        }
    }
    const json summary = {{"peak_concurrence", peak},
                          {"tau_at_peak_ns", peak_tau},
                          {"jitter_sigma_ns", c.emitter.jitter_sigma},
                          {"fss_ghz", angular_to_ghz(c.emitter.fss)},
                          {"phi_over_pi", c.emitter.phi / kPi}};
    write_json(out / "entanglement_summary.json", summary);
    std::cout << summary.dump() << '\n';
    return 0;
}

int cmd_fieldmap(const Globals& g, const std::string& grid_csv, double spacing) {
    const RunConfig c = resolve_config(g);
    const fs::path out = g.out_dir;
    fs::create_directories(out);
    std::ifstream is(grid_csv);
    if (!is) throw std::invalid_argument("cannot open field grid " + grid_csv);
    const FieldGrid grid = read_field_grid_csv(is, spacing);
    auto dump = [&](const char* name, const ScalarMap& m) {
        std::ofstream os(out / name);
        write_map_csv(os, m);
    };
    dump("phase_map.csv", local_phase(grid));
    dump("directionality_map.csv", directionality(grid));
    dump("concurrence_map.csv", concurrence_map(grid, c.emitter, c.fieldmap_tau_ns));
    std::cout << json{{"written", {"phase_map.csv", "directionality_map.csv", "concurrence_map.csv"}}}.dump() << '\n';
    return 0;
}

int cmd_report(const Globals& g, const std::string& run_dir) {
    const RunConfig c = resolve_config(g);
    const fs::path rd = run_dir.empty() ? fs::path(g.out_dir) : fs::path(run_dir);
    json report = {{"run_dir", rd.string()}};
    auto maybe = [&](const char* key, const char* file) {
        if (fs::exists(rd / file)) report[key] = read_json(rd / file);
    };
    maybe("manifest", "manifest.json");
    maybe("alignment", "alignment.json");
    maybe("fit_stage1", "fit_stage1.json");
    maybe("fit_stage2", "fit_stage2.json");
    maybe("entanglement", "entanglement_summary.json");

    double phi = c.emitter.phi;
    std::string source = "config";
    if (report.contains("fit_stage2")) {
        phi = report["fit_stage2"]["parameters"]["phi"]["value"].get<double>();
        source = "fit_stage2";
    }
    const double r = std::sqrt(c.reflectance);
    json back = {{"observed_phi_over_pi", phi / kPi}, {"phi_source", source}, {"reflectance", c.reflectance}};
    if (phi > 0.0 && phi < kPi) back["ideal_phi_over_pi"] = ideal_phase_from(phi, r) / kPi;
    else back["ideal_phi_over_pi"] = nullptr;
    report["reflection_backout"] = back;
    write_json(rd / "report.json", report);
    std::cout << back.dump() << '\n';
    return 0;
}

void emit_error(const std::string& type, const std::string& message) {
    std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulation and analysis of chirally coupled biexciton-cascade photon pairs"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config_path, "JSON run configuration");
    app.add_option("--seed", g.seed, "RNG seed (overrides the config)");
    app.add_option("--preset", g.preset, "Parameter preset: qd1, qd2 or qd3");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_flag("--reproducible", g.reproducible, "Omit wall-clock fields so outputs are byte-identical");

    std::string g2_transition;
    auto* sim = app.add_subcommand("simulate", "Generate timestamp files and a manifest");
    sim->add_option("--g2", g2_transition, "Simulate a single transition (X or XX) on a 50:50 splitter instead");

    std::string run_dir, start_file, stop_file;
    double g2_period = 0.0;
    auto* cor = app.add_subcommand("correlate", "Build coincidence histograms");
    cor->add_option("--run-dir", run_dir, "Directory holding xx_a.ts, xx_b.ts, x_a.ts, x_b.ts");
    cor->add_option("--start", start_file, "Start-channel file (generic pair mode)");
    cor->add_option("--stop", stop_file, "Stop-channel file (generic pair mode)");
    cor->add_option("--g2-period", g2_period, "Also estimate pulsed g2(0) with this repetition period [ps]");

    std::string ref, mov;
    auto* ali = app.add_subcommand("align", "Time-match two histograms");
    ali->add_option("--ref", ref, "Reference histogram CSV")->required();
    ali->add_option("--mov", mov, "Histogram CSV to move onto the reference axis")->required();

    std::string cross, same;
    std::optional<double> gamma;
    auto* fit = app.add_subcommand("fit", "Two-stage fit: cross-port then same-port histogram");
    fit->add_option("--cross", cross, "Cross-port (AB or BA) histogram CSV")->required();
    fit->add_option("--same", same, "Same-port (AA or BB) histogram CSV, aligned to --cross")->required();
    fit->add_option("--gamma", gamma, "Exciton decay rate [1/ns] (default from config)");

    auto* ent = app.add_subcommand("entanglement", "Concurrence and entropy versus delay");

    std::string grid_csv;
    double spacing = 1.0;
    auto* fmap = app.add_subcommand("fieldmap", "Phase, directionality and concurrence maps of a field grid");
    fmap->add_option("--grid", grid_csv, "Field grid CSV (ix,iy,re_ex,im_ex,re_ey,im_ey)")->required();
    fmap->add_option("--spacing", spacing, "Grid pitch");

    std::string report_dir;
    auto* rep = app.add_subcommand("report", "Summarise a run directory into report.json");
    rep->add_option("--run-dir", report_dir, "Run directory (default --out-dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return 2;
    }

    try {
        if (*sim) return cmd_simulate(g, g2_transition);
        if (*cor) return cmd_correlate(g, run_dir, start_file, stop_file, g2_period);
        if (*ali) return cmd_align(g, ref, mov);
        if (*fit) return cmd_fit(g, cross, same, gamma);
        if (*ent) return cmd_entanglement(g);
        if (*fmap) return cmd_fieldmap(g, grid_csv, spacing);
        if (*rep) return cmd_report(g, report_dir);
    } catch (const UsageError& e) {
        emit_error("usage", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        emit_error("validation", e.what());
        return 2;
    } catch (const AlignmentError& e) {
        emit_error("alignment", e.what());
        return 3;
    } catch (const FitError& e) {
        emit_error("fit", e.what());
        return 3;
    } catch (const json::exception& e) {
        emit_error("format", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("runtime", e.what());
        return 3;
    }
    return 0;
}
