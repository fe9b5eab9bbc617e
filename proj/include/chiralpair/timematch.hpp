#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "chiralpair/correlate.hpp"

namespace chiralpair {

struct RepRateEstimate {
    double period_ps = 0.0;
    double uncertainty_ps = 0.0;  // period^2 * resolution
    double frequency_hz = 0.0;
    double resolution_hz = 0.0;   // 1 / span
    double peak_to_floor = 0.0;   // comb line over median spectrum magnitude
};

/// Laser repetition period from the magnitude spectrum of the histogram,
/// decimated to ~1 ns bins and zero-padded x4, with parabolic interpolation
/// of the comb's fundamental line. The span must cover >= 1000 periods.
/// Throws AlignmentError when no line stands above the noise floor.
RepRateEstimate estimate_rep_rate(const CorrelationHistogram& h);

struct RefinedPeriod {
    double period_ps = 0.0;
    double tau_zero_ps = 0.0;  // comb origin: midpoint of the outermost side-peak centroids
    double lag_ps = 0.0;       // outer-window lag relative to the coarse period
    int periods = 0;           // index of the outermost side peaks used
};

/// Cross-correlates one-period windows around side peaks +-n (n growing to
/// the edge of the histogram) to correct the period, then locates time zero.
/// The coarse period must put the first windows (n <= 25) within half a period.
RefinedPeriod refine_rep_rate(const CorrelationHistogram& h, double coarse_period_ps);

struct AlignmentResult {
    double rep_period_a_ps = 0.0;  // reference
    double rep_period_b_ps = 0.0;  // moved dataset
    double rep_uncertainty_a_ps = 0.0;
    double rep_uncertainty_b_ps = 0.0;
    double tau_zero_a_ps = 0.0;
    double tau_zero_b_ps = 0.0;
    double scale = 1.0;            // moved lag -> scale * lag + applied_shift
    double applied_shift_ps = 0.0;
    double fine_lag_ps = 0.0;      // side-peak cross-correlation correction
    int residual_lag_bins = 0;     // integer lag after alignment; 0 when aligned
    double quality = 0.0;          // normalised peak cross-correlation
    int periods = 0;
    double edge_disagreement_ps = 0.0;  // worst side-peak lag at +-edge after alignment
    double span_ps = 0.0;
};

/// Aligns h_mov onto h_ref's axis: each dataset's period and time zero are
/// refined independently, h_mov is resampled with the period ratio, and the
/// outermost negative side peaks fix the remaining sub-bin shift. Throws
/// AlignmentError when the cross-correlation has competing maxima.
std::pair<AlignmentResult, CorrelationHistogram> align_datasets(const CorrelationHistogram& h_ref,
                                                                const CorrelationHistogram& h_mov);

/// Count-conserving linear resampling: the content of each source bin
/// [lo, lo + w) is spread uniformly over [scale*lo + shift, scale*(lo + w) + shift)
/// and split among the target bins by overlap. Counts mapped outside the
/// target span are dropped.
CorrelationHistogram resample_affine(const CorrelationHistogram& h, double scale, double shift_ps,
                                     const CorrelationHistogram& axis);

std::string alignment_json(const AlignmentResult& r);
void write_alignment(const std::filesystem::path& path, const AlignmentResult& r);

/// Comb of identical exponentially-modified-Gaussian peaks at tau_zero + n * period.
struct CombSpec {
    double period_ps = 13132.3;
    double tau_zero_ps = 0.0;
    std::int64_t tau_min_ps = -50'000'000;
    std::int64_t tau_max_ps = 50'000'000;
    std::int64_t bin_width_ps = kTickPs;
    double peak_counts = 2000.0;   // expected counts per side peak
    double central_factor = 1.0;   // central peak relative to side peaks
    double peak_sigma_ps = 60.0;
    double peak_decay_ps = 120.0;
    double background = 0.0;       // expected counts per bin
    bool poisson = true;
    std::uint64_t seed = 1;
};

CorrelationHistogram synthetic_comb(const CombSpec& spec);

}  // namespace chiralpair
