#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "chiralpair/simulate.hpp"

namespace chiralpair {

/// Coincidence counts versus stop-minus-start lag. Bin b covers
/// [tau_min_ps + b*bin_width_ps, tau_min_ps + (b+1)*bin_width_ps).
///
/// Counts are stored as doubles: histograms built from timestamps hold exact
/// integers, rebinned histograms hold fractional counts.
struct CorrelationHistogram {
    std::string config;
    std::int64_t bin_width_ps = kTickPs;
    std::int64_t tau_min_ps = 0;
    std::int64_t tau_max_ps = 0;
    std::int64_t tick_ps = kTickPs;  // resolution of the underlying timestamps
    std::vector<double> counts;
    std::uint64_t total_pairs = 0;

    std::size_t size() const { return counts.size(); }
    double span_ps() const { return static_cast<double>(tau_max_ps - tau_min_ps); }
    double bin_lo(std::size_t b) const {
        return static_cast<double>(tau_min_ps) + static_cast<double>(b) * static_cast<double>(bin_width_ps);
    }
    /// Mean lag represented by bin b: tick-quantised lags sit on multiples of
    /// tick_ps, so a bin of width w holds lags lo, lo + tick, ..., lo + w - tick.
    double bin_position(std::size_t b) const {
        return bin_lo(b) + 0.5 * static_cast<double>(bin_width_ps - tick_ps);
    }
    double sum() const;
};

void validate(const CorrelationHistogram& h);

/// Empty histogram over [tau_min, tau_max) with the given bin width; the span
/// must be an exact multiple of the bin width.
CorrelationHistogram make_histogram(std::string config, std::int64_t tau_min_ps, std::int64_t tau_max_ps,
                                    std::int64_t bin_width_ps, std::int64_t tick_ps = kTickPs);

struct CorrelateOptions {
    std::int64_t bin_width_ps = kTickPs;
    std::int64_t tau_min_ps = -50'000'000;  // -50 us
    std::int64_t tau_max_ps = 50'000'000;
    /// When both streams carry the same channel label, skip the pairing of an
    /// event with itself.
    bool exclude_self_pairs = true;
    unsigned threads = 1;
};

/// All-pairs coincidence histogram of stop - start lags by a two-pointer sweep.
CorrelationHistogram correlate_streams(const TimestampStream& start, const TimestampStream& stop,
                                       const CorrelateOptions& opt = {});

struct G2Estimate {
    double value = 0.0;
    double error = 0.0;
    double central_area = 0.0;
    double mean_side_area = 0.0;
    int side_peaks = 0;
};

/// Pulsed g2(0): central-peak area over mean side-peak area, each integrated
/// over one repetition period centred on center_ps + n * rep_period_ps.
/// Requires at least 20 complete side peaks inside the histogram.
G2Estimate g2_pulsed(const CorrelationHistogram& h, double rep_period_ps, double center_ps = 0.0);

/// Copy of the bins overlapping [center - width/2, center + width/2).
CorrelationHistogram extract_window(const CorrelationHistogram& h, double center_ps, double width_ps);

/// CSV `tau_ps,counts` (tau_ps is the bin's lower edge) plus a JSON sidecar
/// `<path>.json` with the remaining fields.
void write_histogram(const std::filesystem::path& csv_path, const CorrelationHistogram& h);
CorrelationHistogram read_histogram(const std::filesystem::path& csv_path);

void write_histogram_csv(std::ostream& os, const CorrelationHistogram& h);
std::string histogram_header_json(const CorrelationHistogram& h);
CorrelationHistogram read_histogram(std::istream& csv, const std::string& header_json);

}  // namespace chiralpair
