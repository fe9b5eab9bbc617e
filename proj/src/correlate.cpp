#include "chiralpair/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace chiralpair {

using nlohmann::json;

double CorrelationHistogram::sum() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

void validate(const CorrelationHistogram& h) {
    if (h.bin_width_ps <= 0) throw std::invalid_argument("histogram bin width must be positive");
    if (h.tau_max_ps <= h.tau_min_ps) throw std::invalid_argument("histogram span must be positive");
    if ((h.tau_max_ps - h.tau_min_ps) % h.bin_width_ps != 0)
        throw std::invalid_argument("histogram span is not a multiple of the bin width");
    if (static_cast<std::int64_t>(h.counts.size()) != (h.tau_max_ps - h.tau_min_ps) / h.bin_width_ps)
        throw std::invalid_argument("histogram bin count does not match its span");
    for (double c : h.counts)
        if (!(c >= 0.0)) throw std::invalid_argument("histogram has negative or NaN counts");
}

CorrelationHistogram make_histogram(std::string config, std::int64_t tau_min_ps, std::int64_t tau_max_ps,
                                    std::int64_t bin_width_ps, std::int64_t tick_ps) {
    CorrelationHistogram h;
    h.config = std::move(config);
    h.bin_width_ps = bin_width_ps;
    h.tau_min_ps = tau_min_ps;
    h.tau_max_ps = tau_max_ps;
    h.tick_ps = tick_ps;
    if (bin_width_ps <= 0) throw std::invalid_argument("histogram bin width must be positive");
    if (tau_max_ps <= tau_min_ps) throw std::invalid_argument("histogram span must be positive");
    if ((tau_max_ps - tau_min_ps) % bin_width_ps != 0)
        throw std::invalid_argument("histogram span is not a multiple of the bin width");
    h.counts.assign(static_cast<std::size_t>((tau_max_ps - tau_min_ps) / bin_width_ps), 0.0);
    return h;
}

namespace {

void sweep(const TimestampStream& start, const TimestampStream& stop, std::size_t i0, std::size_t i1,
           const CorrelationHistogram& shape, bool skip_self, std::vector<double>& counts,
           std::uint64_t& pairs) {
    const std::int64_t tick = start.tick_ps;
    const std::int64_t w = shape.bin_width_ps;
    const auto& a = start.ticks;
    const auto& b = stop.ticks;
    // Lags are compared in ticks; the window edges are rounded outward and the
    // exact ps test below decides membership.
    const std::int64_t lo_ticks = shape.tau_min_ps >= 0 ? shape.tau_min_ps / tick
                                                        : -((-shape.tau_min_ps + tick - 1) / tick);
    auto first = std::lower_bound(b.begin(), b.end(),
                                  a.empty() || i0 >= a.size()
                                      ? std::uint64_t{0}
                                      : static_cast<std::uint64_t>(std::max<std::int64_t>(
                                            0, static_cast<std::int64_t>(a[i0]) + lo_ticks)));
    std::size_t lo = static_cast<std::size_t>(first - b.begin());
    for (std::size_t i = i0; i < i1; ++i) {
        const auto s = static_cast<std::int64_t>(a[i]);
        while (lo < b.size() && (static_cast<std::int64_t>(b[lo]) - s) * tick < shape.tau_min_ps) ++lo;
        for (std::size_t j = lo; j < b.size(); ++j) {
            const std::int64_t lag = (static_cast<std::int64_t>(b[j]) - s) * tick;
            if (lag >= shape.tau_max_ps) break;
            if (skip_self && j == i) continue;
            counts[static_cast<std::size_t>((lag - shape.tau_min_ps) / w)] += 1.0;
            ++pairs;
        }
    }
}

}  // namespace

CorrelationHistogram correlate_streams(const TimestampStream& start, const TimestampStream& stop,
                                       const CorrelateOptions& opt) {
    if (!start.is_sorted() || !stop.is_sorted()) throw std::invalid_argument("timestamp streams must be sorted");
    if (start.tick_ps != stop.tick_ps) throw std::invalid_argument("streams use different tick resolutions");
    if (opt.bin_width_ps % start.tick_ps != 0)
        throw std::invalid_argument("bin width must be a multiple of the timestamp tick");

    CorrelationHistogram h =
        make_histogram(start.channel + ">" + stop.channel, opt.tau_min_ps, opt.tau_max_ps, opt.bin_width_ps,
                       start.tick_ps);
    const bool skip_self = opt.exclude_self_pairs && start.channel == stop.channel;

    unsigned threads = opt.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt.threads;
    // Per-thread partial histograms; keep their memory bounded.
    while (threads > 1 && h.size() * threads > 50'000'000) --threads;
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, start.ticks.size())));

    if (threads <= 1) {
        sweep(start, stop, 0, start.ticks.size(), h, skip_self, h.counts, h.total_pairs);
        return h;
    }

    std::vector<std::vector<double>> partial(threads, std::vector<double>(h.size(), 0.0));
    std::vector<std::uint64_t> pairs(threads, 0);
    const std::size_t n = start.ticks.size();
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t i0 = n * t / threads, i1 = n * (t + 1) / threads;
            pool.emplace_back([&, t, i0, i1] { sweep(start, stop, i0, i1, h, skip_self, partial[t], pairs[t]); });
        }
    }
    for (unsigned t = 0; t < threads; ++t) {
        for (std::size_t b = 0; b < h.size(); ++b) h.counts[b] += partial[t][b];
        h.total_pairs += pairs[t];
    }
    return h;
}

G2Estimate g2_pulsed(const CorrelationHistogram& h, double rep_period_ps, double center_ps) {
    validate(h);
    if (!(rep_period_ps > 0.0)) throw std::invalid_argument("repetition period must be positive");

    // Prefix sums over bin positions for O(1) window areas.
    std::vector<double> prefix(h.size() + 1, 0.0);
    for (std::size_t b = 0; b < h.size(); ++b) prefix[b + 1] = prefix[b] + h.counts[b];
    auto area = [&](double lo, double hi) {
        // Bins whose representative lag falls inside [lo, hi).
        const double w = static_cast<double>(h.bin_width_ps);
        const double off = h.bin_position(0);
        auto first = static_cast<std::int64_t>(std::ceil((lo - off) / w));
        auto last = static_cast<std::int64_t>(std::ceil((hi - off) / w));
        first = std::clamp<std::int64_t>(first, 0, static_cast<std::int64_t>(h.size()));
        last = std::clamp<std::int64_t>(last, 0, static_cast<std::int64_t>(h.size()));
        return prefix[static_cast<std::size_t>(last)] - prefix[static_cast<std::size_t>(first)];
    };

    const double half = 0.5 * rep_period_ps;
    const double lo_span = static_cast<double>(h.tau_min_ps), hi_span = static_cast<double>(h.tau_max_ps);
    if (center_ps - half < lo_span || center_ps + half > hi_span)
        throw std::invalid_argument("central peak window lies outside the histogram");

    G2Estimate g;
    g.central_area = area(center_ps - half, center_ps + half);
    double side_sum = 0.0;
    for (int sign : {-1, 1}) {
        for (int n = 1;; ++n) {
            const double c = center_ps + sign * n * rep_period_ps;
            if (c - half < lo_span || c + half > hi_span) break;
            side_sum += area(c - half, c + half);
            ++g.side_peaks;
        }
    }
    if (g.side_peaks < 20)
        throw std::invalid_argument("g2 estimate needs at least 20 side peaks, histogram holds " +
                                    std::to_string(g.side_peaks));
    g.mean_side_area = side_sum / g.side_peaks;
    if (!(g.mean_side_area > 0.0)) throw std::invalid_argument("side peaks are empty");

    g.value = g.central_area / g.mean_side_area;
    // Poisson errors; an empty central peak still carries one count of uncertainty.
    const double var_c = std::max(g.central_area, 1.0);
    const double var_mean = side_sum / (static_cast<double>(g.side_peaks) * g.side_peaks);
    g.error = std::sqrt(var_c / (g.mean_side_area * g.mean_side_area) +
                        g.central_area * g.central_area * var_mean / std::pow(g.mean_side_area, 4));
    return g;
}

CorrelationHistogram extract_window(const CorrelationHistogram& h, double center_ps, double width_ps) {
    validate(h);
    if (!(width_ps > 0.0)) throw std::invalid_argument("window width must be positive");
    const double lo = center_ps - 0.5 * width_ps, hi = center_ps + 0.5 * width_ps;
    if (lo < static_cast<double>(h.tau_min_ps) || hi > static_cast<double>(h.tau_max_ps))
        throw std::invalid_argument("window lies outside the histogram span");
    const double w = static_cast<double>(h.bin_width_ps);
    const auto b0 = static_cast<std::size_t>(std::floor((lo - static_cast<double>(h.tau_min_ps)) / w));
    const auto b1 = std::min(h.size(), static_cast<std::size_t>(std::ceil((hi - static_cast<double>(h.tau_min_ps)) / w)));

    CorrelationHistogram out;
    out.config = h.config;
    out.bin_width_ps = h.bin_width_ps;
    out.tick_ps = h.tick_ps;
    out.tau_min_ps = h.tau_min_ps + static_cast<std::int64_t>(b0) * h.bin_width_ps;
    out.tau_max_ps = h.tau_min_ps + static_cast<std::int64_t>(b1) * h.bin_width_ps;
    out.counts.assign(h.counts.begin() + static_cast<std::ptrdiff_t>(b0), h.counts.begin() + static_cast<std::ptrdiff_t>(b1));
    out.total_pairs = static_cast<std::uint64_t>(std::llround(out.sum()));
    return out;
}

std::string histogram_header_json(const CorrelationHistogram& h) {
    json j = {{"config", h.config},
              {"bin_width_ps", h.bin_width_ps},
              {"tau_min_ps", h.tau_min_ps},
              {"tau_max_ps", h.tau_max_ps},
              {"tick_ps", h.tick_ps},
              {"bins", h.size()},
              {"total_pairs", h.total_pairs}};
    return j.dump(2);
}

void write_histogram_csv(std::ostream& os, const CorrelationHistogram& h) {
    os << "tau_ps,counts\n" << std::setprecision(17);
    for (std::size_t b = 0; b < h.size(); ++b)
        os << h.tau_min_ps + static_cast<std::int64_t>(b) * h.bin_width_ps << ',' << h.counts[b] << '\n';
}

void write_histogram(const std::filesystem::path& csv_path, const CorrelationHistogram& h) {
    validate(h);
    std::ofstream os(csv_path);
    if (!os) throw std::runtime_error("cannot open " + csv_path.string() + " for writing");
    write_histogram_csv(os, h);
    std::ofstream js(csv_path.string() + ".json");
    js << histogram_header_json(h) << '\n';
}

CorrelationHistogram read_histogram(std::istream& csv, const std::string& header_json) {
    json j;
    try {
        j = json::parse(header_json);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("histogram header is not valid JSON: ") + e.what());
    }
    CorrelationHistogram h = make_histogram(j.at("config").get<std::string>(), j.at("tau_min_ps").get<std::int64_t>(),
                                            j.at("tau_max_ps").get<std::int64_t>(),
                                            j.at("bin_width_ps").get<std::int64_t>(),
                                            j.value("tick_ps", std::int64_t{kTickPs}));
    h.total_pairs = j.value("total_pairs", std::uint64_t{0});
    std::string line;
    std::getline(csv, line);  // header
    std::size_t b = 0;
    while (std::getline(csv, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw std::invalid_argument("malformed histogram row: " + line);
        const std::int64_t tau = std::stoll(line.substr(0, comma));
        const double c = std::stod(line.substr(comma + 1));
        if (b >= h.size() || tau != h.tau_min_ps + static_cast<std::int64_t>(b) * h.bin_width_ps)
            throw std::invalid_argument("histogram row does not match the header axis at tau_ps=" + std::to_string(tau));
        h.counts[b++] = c;
    }
    if (b != h.size()) throw std::invalid_argument("histogram CSV has fewer rows than the header declares");
    validate(h);
    return h;
}

CorrelationHistogram read_histogram(const std::filesystem::path& csv_path) {
    std::ifstream csv(csv_path);
    if (!csv) throw std::invalid_argument("cannot open histogram " + csv_path.string());
    std::ifstream js(csv_path.string() + ".json");
    if (!js) throw std::invalid_argument("missing histogram sidecar " + csv_path.string() + ".json");
    std::stringstream ss;
    ss << js.rdbuf();
    return read_histogram(csv, ss.str());
}

}  // namespace chiralpair
