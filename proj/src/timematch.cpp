#include "chiralpair/timematch.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "chiralpair/faddeeva.hpp"
#include "json.hpp"

namespace chiralpair {

using nlohmann::json;

namespace {

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

double parabolic_offset(double y0, double y1, double y2) {
    const double den = y0 - 2.0 * y1 + y2;
    if (den == 0.0) return 0.0;
    return std::clamp(0.5 * (y0 - y2) / den, -0.5, 0.5);
}

// r[k + max_lag] = sum_i a[i] * b[i + k] for |k| <= max_lag.
std::vector<double> cross_correlate(const std::vector<double>& a, const std::vector<double>& b, int max_lag) {
    std::vector<double> r(static_cast<std::size_t>(2 * max_lag + 1), 0.0);
    const auto n = static_cast<int>(a.size());
    const auto nb = static_cast<int>(b.size());
    for (int k = -max_lag; k <= max_lag; ++k) {
        double s = 0.0;
        const int i0 = std::max(0, -k), i1 = std::min(n, nb - k);
        for (int i = i0; i < i1; ++i) s += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i + k)];
        r[static_cast<std::size_t>(k + max_lag)] = s;
    }
    return r;
}

struct Peak {
    std::size_t index;
    double lag;  // sub-bin, relative to zero lag
};

Peak correlation_peak(const std::vector<double>& r, int max_lag) {
    const auto k = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
    double frac = 0.0;
    if (k > 0 && k + 1 < r.size()) frac = parabolic_offset(r[k - 1], r[k], r[k + 1]);
    return {k, static_cast<double>(k) - max_lag + frac};
}

// Local maxima outside the main lobe that reach 90% of the peak.
std::vector<int> competing_maxima(const std::vector<double>& r, std::size_t k, int max_lag) {
    const double top = r[k];
    std::size_t lo = k, hi = k;
    while (lo > 0 && r[lo - 1] > 0.5 * top) --lo;
    while (hi + 1 < r.size() && r[hi + 1] > 0.5 * top) ++hi;
    std::vector<int> out;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (i >= lo && i <= hi) continue;
        const bool left = i == 0 || r[i] >= r[i - 1];
        const bool right = i + 1 == r.size() || r[i] >= r[i + 1];
        if (left && right && r[i] >= 0.9 * top) out.push_back(static_cast<int>(i) - max_lag);
    }
    return out;
}

std::vector<double> window(const CorrelationHistogram& h, std::int64_t start, std::int64_t m) {
    if (start < 0 || start + m > static_cast<std::int64_t>(h.size()))
        throw AlignmentError("side-peak window falls outside the histogram");
    return {h.counts.begin() + start, h.counts.begin() + start + m};
}

std::int64_t window_start(const CorrelationHistogram& h, double center_ps, double width_ps) {
    return static_cast<std::int64_t>(
        std::floor((center_ps - 0.5 * width_ps - h.bin_position(0)) / static_cast<double>(h.bin_width_ps)));
}

double centroid(const CorrelationHistogram& h, std::int64_t start, std::int64_t m) {
    double s = 0.0, sx = 0.0;
    for (std::int64_t i = start; i < start + m; ++i) {
        const double c = h.counts[static_cast<std::size_t>(i)];
        s += c;
        sx += c * h.bin_position(static_cast<std::size_t>(i));
    }
    if (!(s > 0.0)) throw AlignmentError("side-peak window is empty");
    return sx / s;
}

// Resampled content of target bins [t0, t1).
std::vector<double> resample_range(const CorrelationHistogram& h, double scale, double shift,
                                   const CorrelationHistogram& axis, std::size_t t0, std::size_t t1) {
    std::vector<double> out(t1 - t0, 0.0);
    const double ws = static_cast<double>(h.bin_width_ps), wt = static_cast<double>(axis.bin_width_ps);
    const double src0 = static_cast<double>(h.tau_min_ps), dst0 = static_cast<double>(axis.tau_min_ps);
    const double lo_edge = dst0 + static_cast<double>(t0) * wt, hi_edge = dst0 + static_cast<double>(t1) * wt;
    const auto j_lo = static_cast<std::int64_t>(std::floor(((lo_edge - shift) / scale - src0) / ws)) - 1;
    const auto j_hi = static_cast<std::int64_t>(std::ceil(((hi_edge - shift) / scale - src0) / ws)) + 1;
    const auto jb = std::max<std::int64_t>(0, j_lo);
    const auto je = std::min<std::int64_t>(static_cast<std::int64_t>(h.size()), j_hi);
    for (std::int64_t j = jb; j < je; ++j) {
        const double c = h.counts[static_cast<std::size_t>(j)];
        if (c == 0.0) continue;
        const double u0 = scale * (src0 + static_cast<double>(j) * ws) + shift;
        const double u1 = u0 + scale * ws;
        auto k = static_cast<std::int64_t>(std::floor((u0 - dst0) / wt));
        for (; k < static_cast<std::int64_t>(t1); ++k) {
            const double e0 = dst0 + static_cast<double>(k) * wt, e1 = e0 + wt;
            if (e0 >= u1) break;
            const double overlap = std::min(u1, e1) - std::max(u0, e0);
            if (overlap <= 0.0 || k < static_cast<std::int64_t>(t0)) continue;
            out[static_cast<std::size_t>(k) - t0] += c * overlap / (u1 - u0);
        }
    }
    return out;
}

}  // namespace

RepRateEstimate estimate_rep_rate(const CorrelationHistogram& h) {
    validate(h);
    const auto k = static_cast<std::size_t>(std::max<std::int64_t>(1, std::llround(1000.0 / static_cast<double>(h.bin_width_ps))));
    const std::size_t nd = h.size() / k;
    if (nd < 64) throw std::invalid_argument("histogram too short for a repetition-rate estimate");
    const double dt = static_cast<double>(k * static_cast<std::size_t>(h.bin_width_ps));
    const double span = dt * static_cast<double>(nd);

    const std::size_t n = 4 * nd;
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(n));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(n / 2 + 1));
    std::fill(in.get(), in.get() + n, 0.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < nd; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += h.counts[i * k + j];
        in.get()[i] = s;
        mean += s;
    }
    mean /= static_cast<double>(nd);
    for (std::size_t i = 0; i < nd; ++i) in.get()[i] -= mean;

    fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    std::vector<double> mag(n / 2 + 1);
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::hypot(out.get()[i][0], out.get()[i][1]);

    const std::size_t jmin = 8;  // two cycles across the span
    if (mag.size() < jmin + 4) throw std::invalid_argument("histogram too short for a repetition-rate estimate");
    std::vector<double> rest(mag.begin() + static_cast<std::ptrdiff_t>(jmin), mag.end() - 1);
    std::nth_element(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(rest.size() / 2), rest.end());
    const double median = rest[rest.size() / 2];

    auto local_max = [&](std::size_t a, std::size_t b) {
        a = std::max(a, jmin);
        b = std::min(b, mag.size() - 2);
        std::size_t best = a;
        for (std::size_t j = a; j <= b; ++j)
            if (mag[j] > mag[best]) best = j;
        return best;
    };
    std::size_t peak = local_max(jmin, mag.size() - 2);
    const double top = mag[peak];
    if (!(top > 8.0 * median))
        throw AlignmentError("no repetition-rate line above the spectral noise floor");
    // The strongest line may be a harmonic; prefer the lowest strong subharmonic.
    for (std::size_t m = 6; m >= 2; --m) {
        const std::size_t j = peak / m;
        if (j < jmin + 3) continue;
        const std::size_t cand = local_max(j - 3, j + 3);
        if (mag[cand] >= 0.3 * top) {
            peak = cand;
            break;
        }
    }

    const double frac = parabolic_offset(mag[peak - 1], mag[peak], mag[peak + 1]);
    const double f_per_ps = (static_cast<double>(peak) + frac) / (static_cast<double>(n) * dt);
    RepRateEstimate e;
    e.period_ps = 1.0 / f_per_ps;
    e.frequency_hz = f_per_ps * 1e12;
    e.resolution_hz = 1e12 / span;
    e.uncertainty_ps = e.period_ps * e.period_ps / span;
    e.peak_to_floor = top / median;
    if (span < 1000.0 * e.period_ps)
        throw std::invalid_argument("histogram spans fewer than 1000 repetition periods");
    return e;
}

RefinedPeriod refine_rep_rate(const CorrelationHistogram& h, double coarse_period_ps) {
    validate(h);
    if (!(coarse_period_ps > 2.0 * static_cast<double>(h.bin_width_ps)))
        throw std::invalid_argument("coarse period must span several bins");
    double T = coarse_period_ps;
    const double w = static_cast<double>(h.bin_width_ps);

    // Comb phase from side peaks 1..20 on both sides.
    std::complex<double> z = 0.0;
    const double reach = 20.5 * T;
    const auto bz0 = static_cast<std::size_t>(std::clamp((-reach - h.bin_position(0)) / w, 0.0, static_cast<double>(h.size())));
    const auto bz1 = static_cast<std::size_t>(std::clamp((reach - h.bin_position(0)) / w + 1.0, 0.0, static_cast<double>(h.size())));
    for (std::size_t b = bz0; b < bz1; ++b) {
        const double x = h.bin_position(b);
        if (std::abs(x) < 0.5 * T || std::abs(x) >= reach || h.counts[b] == 0.0) continue;
        z += h.counts[b] * std::polar(1.0, kTwoPi * x / T);
    }
    if (std::abs(z) == 0.0) throw AlignmentError("no side peaks found near zero lag");
    const double delta = T * std::arg(z) / kTwoPi;

    const double first = h.bin_position(0), last = h.bin_position(h.size() - 1);
    auto outermost = [&](double period) {
        return static_cast<int>(std::floor((std::min(delta - first, last - delta) - 0.5 * period - 2.0 * w) / period)) - 1;
    };
    int n_total = outermost(T);
    if (n_total < 1) throw std::invalid_argument("histogram too short to hold side peaks on both sides");

    int n = std::min(25, n_total);
    for (;;) {
        const auto m = static_cast<std::int64_t>(std::llround(T / w));
        const auto ip = window_start(h, delta + n * T, T), im = window_start(h, delta - n * T, T);
        const auto wp = window(h, ip, m), wm = window(h, im, m);
        if (std::accumulate(wp.begin(), wp.end(), 0.0) <= 0.0 || std::accumulate(wm.begin(), wm.end(), 0.0) <= 0.0)
            throw AlignmentError("side-peak windows are empty");
        const int max_lag = static_cast<int>(m) - 1;
        const Peak pk = correlation_peak(cross_correlate(wm, wp, max_lag), max_lag);
        T = (static_cast<double>(ip - im) + pk.lag) * w / (2.0 * n);
        if (n >= n_total) break;
        n_total = std::max(1, std::min(n_total, outermost(T)));
        n = std::min(n_total, 8 * n);
    }

    RefinedPeriod r;
    r.period_ps = T;
    r.periods = n;
    r.lag_ps = 2.0 * n * (T - coarse_period_ps);
    const auto m = static_cast<std::int64_t>(std::llround(T / w));
    const double cp = centroid(h, window_start(h, delta + n * T, T), m);
    const double cm = centroid(h, window_start(h, delta - n * T, T), m);
    r.tau_zero_ps = 0.5 * (cp + cm);
    return r;
}

CorrelationHistogram resample_affine(const CorrelationHistogram& h, double scale, double shift_ps,
                                     const CorrelationHistogram& axis) {
    validate(h);
    validate(axis);
    if (!(scale > 0.0) || !std::isfinite(shift_ps)) throw std::invalid_argument("resampling map must be increasing");
    CorrelationHistogram out;
    out.config = h.config;
    out.bin_width_ps = axis.bin_width_ps;
    out.tau_min_ps = axis.tau_min_ps;
    out.tau_max_ps = axis.tau_max_ps;
    out.tick_ps = axis.tick_ps;
    out.counts = resample_range(h, scale, shift_ps, axis, 0, axis.size());
    out.total_pairs = static_cast<std::uint64_t>(std::llround(out.sum()));
    return out;
}

std::pair<AlignmentResult, CorrelationHistogram> align_datasets(const CorrelationHistogram& h_ref,
                                                                const CorrelationHistogram& h_mov) {
    const RepRateEstimate est_r = estimate_rep_rate(h_ref), est_m = estimate_rep_rate(h_mov);
    const RefinedPeriod ref = refine_rep_rate(h_ref, est_r.period_ps);
    const RefinedPeriod mov = refine_rep_rate(h_mov, est_m.period_ps);

    AlignmentResult a;
    a.rep_period_a_ps = ref.period_ps;
    a.rep_period_b_ps = mov.period_ps;
    a.rep_uncertainty_a_ps = est_r.uncertainty_ps;
    a.rep_uncertainty_b_ps = est_m.uncertainty_ps;
    a.tau_zero_a_ps = ref.tau_zero_ps;
    a.tau_zero_b_ps = mov.tau_zero_ps;
    a.scale = ref.period_ps / mov.period_ps;
    a.span_ps = h_ref.span_ps();
    double shift = ref.tau_zero_ps - a.scale * mov.tau_zero_ps;

    const int n = std::min(ref.periods, mov.periods);
    a.periods = n;
    const double T = ref.period_ps;
    const double w = static_cast<double>(h_ref.bin_width_ps);
    const auto m = static_cast<std::int64_t>(std::llround(T / w));
    const int max_lag = static_cast<int>(m) - 1;
    auto lag_at = [&](const CorrelationHistogram* moved, double s, double center, double* quality,
                      std::vector<int>* competing, int* integer_lag) {
        const auto start = window_start(h_ref, center, T);
        const auto wr = window(h_ref, start, m);
        const auto t0 = static_cast<std::size_t>(start);
        const auto wm = moved ? window(*moved, start, m)
                              : resample_range(h_mov, a.scale, s, h_ref, t0, t0 + static_cast<std::size_t>(m));
        const auto r = cross_correlate(wr, wm, max_lag);
        const Peak pk = correlation_peak(r, max_lag);
        if (competing) *competing = competing_maxima(r, pk.index, max_lag);
        if (integer_lag) *integer_lag = static_cast<int>(pk.index) - max_lag;
        if (quality) {
            const double nr = std::inner_product(wr.begin(), wr.end(), wr.begin(), 0.0);
            const double nm = std::inner_product(wm.begin(), wm.end(), wm.begin(), 0.0);
            *quality = nr > 0.0 && nm > 0.0 ? r[pk.index] / std::sqrt(nr * nm) : 0.0;
        }
        return pk.lag * w;
    };

    const double edge_minus = ref.tau_zero_ps - n * T;
    std::vector<int> competing;
    const double fine = lag_at(nullptr, shift, edge_minus, nullptr, &competing, nullptr);
    if (!competing.empty()) {
        std::ostringstream msg;
        msg << "ambiguous cross-correlation: competing lags [bins]";
        for (int c : competing) msg << ' ' << c;
        throw AlignmentError(msg.str());
    }
    shift -= fine;
    a.fine_lag_ps = fine;
    a.applied_shift_ps = shift;

    CorrelationHistogram out = resample_affine(h_mov, a.scale, shift, h_ref);
    lag_at(&out, shift, edge_minus, &a.quality, nullptr, &a.residual_lag_bins);
    const double d_minus = lag_at(&out, shift, edge_minus, nullptr, nullptr, nullptr);
    const double d_plus = lag_at(&out, shift, ref.tau_zero_ps + n * T, nullptr, nullptr, nullptr);
    a.edge_disagreement_ps = std::max(std::abs(d_minus), std::abs(d_plus));
    return {a, std::move(out)};
}

std::string alignment_json(const AlignmentResult& r) {
    json j = {{"rep_period_a_ps", r.rep_period_a_ps},
              {"rep_period_b_ps", r.rep_period_b_ps},
              {"rep_uncertainty_a_ps", r.rep_uncertainty_a_ps},
              {"rep_uncertainty_b_ps", r.rep_uncertainty_b_ps},
              {"tau_zero_a_ps", r.tau_zero_a_ps},
              {"tau_zero_b_ps", r.tau_zero_b_ps},
              {"scale", r.scale},
              {"applied_shift_ps", r.applied_shift_ps},
              {"fine_lag_ps", r.fine_lag_ps},
              {"residual_lag_bins", r.residual_lag_bins},
              {"quality", r.quality},
              {"periods", r.periods},
              {"edge_disagreement_ps", r.edge_disagreement_ps},
              {"span_ps", r.span_ps},
              {"precision_ppb", r.span_ps > 0.0 ? r.edge_disagreement_ps / r.span_ps * 1e9 : 0.0}};
    return j.dump(2);
}

void write_alignment(const std::filesystem::path& path, const AlignmentResult& r) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << alignment_json(r) << '\n';
}

CorrelationHistogram synthetic_comb(const CombSpec& s) {
    if (!(s.period_ps > 0.0) || !(s.peak_sigma_ps > 0.0) || !(s.peak_decay_ps > 0.0) || s.peak_counts < 0.0 ||
        s.background < 0.0 || s.central_factor < 0.0)
        throw std::invalid_argument("invalid comb parameters");
    CorrelationHistogram h = make_histogram("synthetic", s.tau_min_ps, s.tau_max_ps, s.bin_width_ps, s.bin_width_ps);
    std::vector<double>& mu = h.counts;
    std::fill(mu.begin(), mu.end(), s.background);

    const double sg = s.peak_sigma_ps, td = s.peak_decay_ps, w = static_cast<double>(s.bin_width_ps);
    // Gaussian convolved with a one-sided exponential, unit area.
    auto density = [&](double t) {
        const double z = (sg / td - t / sg) / std::numbers::sqrt2;
        const double g = std::exp(-0.5 * t * t / (sg * sg));
        const double v = z >= 0.0 ? 0.5 * g * special::erfcx(std::complex<double>(z, 0.0)).real()
                                  : std::exp(0.5 * sg * sg / (td * td) - t / td) -
                                        0.5 * g * special::erfcx(std::complex<double>(-z, 0.0)).real();
        return v / td;
    };
    const double reach_lo = 10.0 * sg, reach_hi = 10.0 * sg + 25.0 * td;
    const double x0 = h.bin_position(0);
    const auto n_lo = static_cast<long long>(std::ceil((static_cast<double>(s.tau_min_ps) - s.tau_zero_ps - reach_hi) / s.period_ps));
    const auto n_hi = static_cast<long long>(std::floor((static_cast<double>(s.tau_max_ps) - s.tau_zero_ps + reach_lo) / s.period_ps));
    for (long long k = n_lo; k <= n_hi; ++k) {
        const double c = s.tau_zero_ps + static_cast<double>(k) * s.period_ps;
        const double area = s.peak_counts * (k == 0 ? s.central_factor : 1.0);
        const auto b0 = std::max<long long>(0, static_cast<long long>(std::floor((c - reach_lo - x0) / w)));
        const auto b1 = std::min<long long>(static_cast<long long>(mu.size()),
                                            static_cast<long long>(std::ceil((c + reach_hi - x0) / w)) + 1);
        for (long long b = b0; b < b1; ++b)
            mu[static_cast<std::size_t>(b)] += area * w * density(h.bin_position(static_cast<std::size_t>(b)) - c);
    }
    if (s.poisson) {
        std::mt19937_64 rng(s.seed);
        for (double& v : mu) {
            if (v <= 0.0) continue;
            std::poisson_distribution<long long> pois(v);
            v = static_cast<double>(pois(rng));
        }
    }
    h.total_pairs = static_cast<std::uint64_t>(std::llround(h.sum()));
    return h;
}

}  // namespace chiralpair
