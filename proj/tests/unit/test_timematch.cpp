#include <gtest/gtest.h>

#include <cmath>

#include "chiralpair/timematch.hpp"

using namespace chiralpair;

namespace {

constexpr double kPeriod = 13132.3;  // 76.148 MHz
// Side-peak counts comparable to a simulated 1e7-pulse run at 50% efficiency.
constexpr double kSidePeakCounts = 1e5;

CombSpec comb(double period = kPeriod, double tau_zero = 0.0, std::uint64_t seed = 1) {
    CombSpec s;
    s.period_ps = period;
    s.tau_zero_ps = tau_zero;
    s.seed = seed;
    s.peak_counts = kSidePeakCounts;
    return s;
}

double peak_position(const CorrelationHistogram& h, double centre, double width) {
    double s = 0, m = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double x = h.bin_position(i);
        if (std::abs(x - centre) > 0.5 * width) continue;
        s += h.counts[i];
        m += h.counts[i] * x;
    }
    return m / s;
}

}  // namespace

TEST(TimeMatch, RepRateFromSpectrum) {
    const auto h = synthetic_comb(comb());
    const auto e = estimate_rep_rate(h);
    EXPECT_NEAR(e.period_ps, kPeriod, 1.3);
    EXPECT_NEAR(e.resolution_hz, 1e4, 1.0);
    EXPECT_GT(e.resolution_hz, 7e3);
    EXPECT_NEAR(e.uncertainty_ps, e.period_ps * e.period_ps / h.span_ps(), 1e-9);
    EXPECT_NEAR(e.uncertainty_ps, 1.72, 0.01);
    EXPECT_NEAR(e.frequency_hz, 76.148e6, 1e4);
    EXPECT_GT(e.peak_to_floor, 8.0);
}

TEST(TimeMatch, DoubledSpanHalvesUncertainty) {
    auto s = comb();
    const auto e1 = estimate_rep_rate(synthetic_comb(s));
    s.tau_min_ps *= 2;
    s.tau_max_ps *= 2;
    const auto e2 = estimate_rep_rate(synthetic_comb(s));
    EXPECT_NEAR(e2.uncertainty_ps, 0.5 * e1.uncertainty_ps, 1e-6 * e1.uncertainty_ps);
    EXPECT_NEAR(e2.period_ps, kPeriod, e2.uncertainty_ps);
}

TEST(TimeMatch, FlatHistogramHasNoRepRate) {
    auto s = comb();
    s.peak_counts = 0.0;
    s.background = 50.0;
    EXPECT_THROW(estimate_rep_rate(synthetic_comb(s)), AlignmentError);
}

TEST(TimeMatch, ShortHistogramRejected) {
    auto s = comb();
    s.tau_min_ps = -5'000'000;
    s.tau_max_ps = 5'000'000;
    EXPECT_THROW(estimate_rep_rate(synthetic_comb(s)), std::invalid_argument);
}

TEST(TimeMatch, RefineCorrectsInjectedPeriodError) {
    const auto h = synthetic_comb(comb());
    for (double err : {1.0, -1.0, 1.3}) {
        const auto r = refine_rep_rate(h, kPeriod + err);
        EXPECT_NEAR(r.period_ps, kPeriod, 0.02) << err;
        EXPECT_GT(r.periods, 3000);
    }
}

TEST(TimeMatch, RefineWithExactPeriodHasZeroLag) {
    const auto h = synthetic_comb(comb());
    const auto r = refine_rep_rate(h, kPeriod);
    EXPECT_LT(std::abs(r.lag_ps), 4.0);
    EXPECT_LT(std::abs(r.period_ps - kPeriod) * 2 * r.periods, 4.0);
}

TEST(TimeMatch, TimeZeroTracksCombOrigin) {
    const auto a = refine_rep_rate(synthetic_comb(comb(kPeriod, 0.0)), kPeriod);
    const auto b = refine_rep_rate(synthetic_comb(comb(kPeriod, 250.0, 2)), kPeriod);
    EXPECT_NEAR(b.tau_zero_ps - a.tau_zero_ps, 250.0, 2.0);
}

TEST(TimeMatch, IdenticalDatasetsNeedNoShift) {
    const auto h = synthetic_comb(comb());
    const auto [r, out] = align_datasets(h, h);
    EXPECT_NEAR(r.applied_shift_ps, 0.0, 1e-6);
    EXPECT_NEAR(r.scale, 1.0, 1e-15);
    EXPECT_EQ(r.residual_lag_bins, 0);
    EXPECT_NEAR(r.quality, 1.0, 1e-12);
    for (std::size_t i = 0; i < h.size(); ++i) ASSERT_NEAR(out.counts[i], h.counts[i], 1e-9);
}

TEST(TimeMatch, RecoversOffsetAndPeriodMismatch) {
    const auto ref = synthetic_comb(comb(kPeriod, 0.0, 1));
    const auto mov = synthetic_comb(comb(kPeriod * (1 + 0.5e-6), 37.0, 2));
    const auto [r, out] = align_datasets(ref, mov);
    EXPECT_NEAR(r.applied_shift_ps, -37.0, 4.0);
    EXPECT_NEAR(r.scale, 1.0 / (1 + 0.5e-6), 2e-8);
    EXPECT_EQ(r.residual_lag_bins, 0);
    EXPECT_LT(r.edge_disagreement_ps, 4.0);
    EXPECT_LT(r.edge_disagreement_ps / r.span_ps * 1e9, 40.0);
    const double edge = (r.periods - 1) * r.rep_period_a_ps;
    for (double c : {-edge, 0.0, edge}) EXPECT_NEAR(peak_position(out, c, kPeriod), peak_position(ref, c, kPeriod), 4.0) << c;
}

TEST(TimeMatch, AlignmentIsIdempotent) {
    const auto ref = synthetic_comb(comb(kPeriod, 0.0, 1));
    const auto mov = synthetic_comb(comb(kPeriod * (1 - 2e-6), -120.0, 3));
    const auto [r1, out1] = align_datasets(ref, mov);
    const auto [r2, out2] = align_datasets(ref, out1);
    EXPECT_NEAR(r2.applied_shift_ps, 0.0, 1.0);
    EXPECT_NEAR(r2.scale, 1.0, 1e-9);
    EXPECT_EQ(r2.residual_lag_bins, 0);
}

TEST(TimeMatch, AlignmentIsAntisymmetric) {
    const auto a = synthetic_comb(comb(kPeriod, 0.0, 1));
    const auto b = synthetic_comb(comb(kPeriod * (1 + 1e-6), 37.0, 4));
    const auto ab = align_datasets(a, b).first;
    const auto ba = align_datasets(b, a).first;
    EXPECT_NEAR(ab.applied_shift_ps, -ba.applied_shift_ps, 4.0);
}

TEST(TimeMatch, EndToEndOffsetsAndDrifts) {
    const auto ref = synthetic_comb(comb(kPeriod, 0.0, 1));
    int seed = 10;
    for (double offset : {-5000.0, 37.0, 5900.0}) {
        for (double drift : {-5e-6, 1e-6, 5e-6}) {
            const auto mov = synthetic_comb(comb(kPeriod * (1 + drift), offset, ++seed));
            const auto [r, out] = align_datasets(ref, mov);
            EXPECT_LT(r.edge_disagreement_ps, 4.0) << offset << " " << drift;
            EXPECT_NEAR(r.applied_shift_ps, -offset, 4.0) << offset << " " << drift;
            EXPECT_EQ(r.residual_lag_bins, 0);
        }
    }
}

TEST(TimeMatch, AmbiguousCorrelationRejected) {
    const auto ref = synthetic_comb(comb(kPeriod, 0.0, 1));
    auto mov = synthetic_comb(comb(kPeriod, -1500.0, 2));
    const auto twin = synthetic_comb(comb(kPeriod, 1500.0, 3));
    for (std::size_t i = 0; i < mov.size(); ++i) mov.counts[i] += twin.counts[i];
    EXPECT_THROW(align_datasets(ref, mov), AlignmentError);
}

TEST(TimeMatch, ResamplingConservesCounts) {
    const auto h = synthetic_comb(comb());
    for (double scale : {1.0, 1 + 3e-6, 1 - 5e-6}) {
        for (double shift : {0.0, 1.7, -37.3}) {
            // Target axis wide enough to hold every mapped bin.
            const auto axis = make_histogram("axis", h.tau_min_ps - 4000, h.tau_max_ps + 4000, h.bin_width_ps);
            const auto out = resample_affine(h, scale, shift, axis);
            EXPECT_NEAR(out.sum(), h.sum(), 1e-9 * h.sum());
            for (double c : out.counts) ASSERT_GE(c, 0.0);
        }
    }
    EXPECT_THROW(resample_affine(h, 0.0, 0.0, h), std::invalid_argument);
}

TEST(TimeMatch, IntegerShiftMovesBinsExactly) {
    const auto h = synthetic_comb(comb());
    const auto out = resample_affine(h, 1.0, 8.0, h);
    for (std::size_t i = 2; i < h.size(); ++i) ASSERT_NEAR(out.counts[i], h.counts[i - 2], 1e-9);
}

TEST(TimeMatch, AlignmentJsonCarriesPrecision) {
    AlignmentResult r;
    r.edge_disagreement_ps = 2.0;
    r.span_ps = 1e8;
    const auto j = alignment_json(r);
    EXPECT_NE(j.find("\"precision_ppb\": 20.0"), std::string::npos);
    EXPECT_NE(j.find("residual_lag_bins"), std::string::npos);
}
