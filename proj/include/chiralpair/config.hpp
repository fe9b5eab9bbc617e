#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chiralpair/model.hpp"
#include "chiralpair/simulate.hpp"
#include "chiralpair/timestamp_io.hpp"

namespace chiralpair {

struct CorrelateSection {
    std::int64_t bin_width_ps = kTickPs;
    std::int64_t window_ps = 50'000'000;  // half-width of the symmetric lag window
    std::vector<PortPair> configs{PortPair::AA, PortPair::AB, PortPair::BA, PortPair::BB};
    bool exclude_self_pairs = true;
    unsigned threads = 1;
};

struct EntanglementSection {
    double tau_min_ns = 0.0;
    double tau_max_ns = 1.0;
    int points = 201;
    unsigned threads = 1;
};

struct FitSection {
    PortPair cross_config = PortPair::AB;  // stage 1 (phi pinned to 0)
    PortPair same_config = PortPair::AA;   // stage 2
    double fss_min_ghz = 1.0;
    double fss_max_ghz = 40.0;
};

/// Everything a CLI run needs, loaded from one JSON document.
///
/// JSON layout (every key optional, unknown keys rejected):
///   {"preset": "qd1",
///    "emitter": {"gamma_x", "fss" | "fss_ghz", "phi" | "phi_over_pi",
///                "jitter_sigma" | "jitter_sigma_ps", "rep_period"},
///    "instrument": {"efficiency_xx_a", ..., "dark_rate", "pair_probability",
///                   "rep_rate_drift", "duration" | "pulses", "seed",
///                   "channel_delay_ps", "multiphoton_probability"},
///    "correlate": {"bin_width_ps", "window_ps", "configs", "exclude_self_pairs", "threads"},
///    "entanglement": {"tau_min_ns", "tau_max_ns", "points", "threads"},
///    "fit": {"cross_config", "same_config", "fss_min_ghz", "fss_max_ghz"},
///    "fieldmap": {"tau_ns"},
///    "report": {"reflectance"},
///    "timestamp_format": "binary" | "csv"}
struct RunConfig {
    std::string preset;
    bool preset_from_measurement = true;  // false for placeholder presets
    EmitterParams emitter;
    InstrumentParams instrument;
    CorrelateSection correlate;
    EntanglementSection entanglement;
    FitSection fit;
    double fieldmap_tau_ns = 0.0;
    double reflectance = 0.3;  // r^2 used to back out the ideal phase
    TimestampFormat timestamp_format = TimestampFormat::Binary;
};

void validate(const RunConfig& c);

/// "qd1" (measured parameters), "qd2" and "qd3" (placeholders).
RunConfig preset_config(std::string_view name);
std::vector<std::string> preset_names();

/// Overlays a JSON document on base. Throws std::invalid_argument on unknown
/// keys, wrong types, conflicting aliases or failed validation.
RunConfig run_config_from_json(std::string_view text, const RunConfig& base = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base = {});
std::string run_config_to_json(const RunConfig& c);

}  // namespace chiralpair
