#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "chiralpair/model.hpp"

namespace chiralpair {

/// Detector and acquisition model. Channel order for per-channel arrays is
/// XX@A, XX@B, X@A, X@B.
struct InstrumentParams {
    double efficiency_xx_a = 1.0;
    double efficiency_xx_b = 1.0;
    double efficiency_x_a = 1.0;
    double efficiency_x_b = 1.0;
    double dark_rate = 0.0;         // per channel [1/ns]
    double pair_probability = 1.0;  // XX excitation probability per pulse
    double rep_rate_drift = 0.0;    // fractional period change per second
    double duration = 1e-3;         // acquisition time [s]
    std::uint64_t seed = 1;
    /// Fixed per-channel optical/electrical delay [ps].
    std::array<double, 4> channel_delay_ps{0.0, 0.0, 0.0, 0.0};
    /// Probability that an emission event carries a second, independent photon
    /// (single-transition g2 runs only).
    double multiphoton_probability = 0.0;

    std::array<double, 4> efficiencies() const {
        return {efficiency_xx_a, efficiency_xx_b, efficiency_x_a, efficiency_x_b};
    }
};

void validate(const InstrumentParams& inst);

/// Number of laser pulses in the acquisition window.
std::uint64_t pulse_count(const EmitterParams& p, const InstrumentParams& inst);

/// Acquisition duration [s] that contains exactly n pulses.
double duration_for_pulses(const EmitterParams& p, std::uint64_t n);

inline constexpr std::array<const char*, 4> kChannelLabels = {"XX@A", "XX@B", "X@A", "X@B"};

/// Detection times of one channel as integer ticks of tick_ps picoseconds.
struct TimestampStream {
    std::string channel;
    std::int64_t tick_ps = kTickPs;
    double duration = 0.0;  // [s]
    std::vector<std::uint64_t> ticks;

    bool is_sorted() const;
};

struct SimulationStats {
    std::uint64_t pulses = 0;
    std::uint64_t cascades = 0;
    std::uint64_t rejections = 0;
    std::array<std::uint64_t, 4> pair_config_counts{};  // emitted (i, j) before detection
};

/// Pulsed cascade experiment. Returns streams in channel order XX@A, XX@B, X@A, X@B.
///
/// Per pulse: XX emission after Exp(2 gamma_x); delay drawn from the
/// normalised total coincidence density by rejection against 2 gamma e^{-gamma t};
/// port pair drawn from P_ij(tau) / sum P. Each detection is thinned by its
/// efficiency, shifted by its channel delay and receives Gaussian jitter of
/// sigma / sqrt(2) so that coincidences carry jitter_sigma overall.
std::array<TimestampStream, 4> simulate_run(const EmitterParams& p, const InstrumentParams& inst,
                                            SimulationStats* stats = nullptr);

/// n draws from the normalised XX -> X delay density [ns] using the same
/// rejection sampler as simulate_run.
std::vector<double> sample_delays(const EmitterParams& p, std::size_t n, std::uint64_t seed);

enum class Transition { X, XX };

/// Single-transition emission routed through a 50:50 splitter onto two
/// detectors with the transition's A/B efficiencies and delays. Labels are
/// "<T>@1" and "<T>@2".
std::array<TimestampStream, 2> simulate_g2_single(Transition transition, const EmitterParams& p,
                                                  const InstrumentParams& inst);

/// Multiphoton probability that yields the given pulsed g2(0) at pair probability p:
/// g2 = 2c / (p (1 + c)^2).
double multiphoton_for_g2(double g2, double pair_probability);

/// Quantise a time in ps to the nearest tick.
std::uint64_t to_tick(double t_ps, std::int64_t tick_ps = kTickPs);

}  // namespace chiralpair
