#include "chiralpair/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace chiralpair {

namespace {

constexpr std::uint64_t kBlockPulses = 1u << 16;
constexpr std::uint64_t kMaxConsecutiveRejections = 1'000'000;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent generator for one pulse block (or one auxiliary purpose).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t block, std::uint64_t purpose) {
    return std::mt19937_64(splitmix64(splitmix64(seed ^ (purpose * 0xd1b54a32d192ed03ULL)) + block));
}

void check_probability(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

/// Pulse time [ns] including linear period drift (drift is per second).
double pulse_time(const EmitterParams& p, const InstrumentParams& inst, std::uint64_t k) {
    const double kd = static_cast<double>(k);
    return kd * p.rep_period + inst.rep_rate_drift * p.rep_period * p.rep_period * 1e-9 * 0.5 * kd * (kd - 1.0);
}

/// Samples the XX -> X delay from the normalised total coincidence density.
class DelaySampler {
  public:
    explicit DelaySampler(const EmitterParams& p) : p_(p) {
        const double g = p.gamma_x;
        norm_ = total_coincidence_integral(p);
        c2_ = std::cos(p.phi) * std::cos(p.phi);
        // sup_t q(t) / (2 g e^{-g t}) = 16 g / norm <= 1 must hold for the envelope.
        bound_ = 16.0 * g / norm_;
        if (bound_ > 1.0 + 1e-12) throw std::logic_error("rejection envelope violated");
    }

    template <class Rng>
    double operator()(Rng& rng, std::uint64_t& rejections) {
        std::exponential_distribution<double> prop(p_.gamma_x);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double g = p_.gamma_x;
        for (std::uint64_t n = 0; n < kMaxConsecutiveRejections; ++n) {
            const double tau = prop(rng);
            // q(tau) / (2 g e^{-g tau}) with q = 16 g^2 e^{-g tau}(1 + cos(S tau) c^2) / norm.
            const double ratio = 8.0 * g * (1.0 + std::cos(p_.fss * tau) * c2_) / norm_;
            if (ratio > 1.0 + 1e-12) throw std::logic_error("rejection envelope violated");
            if (uni(rng) < ratio) return tau;
            ++rejections;
        }
        throw SamplerStallError("delay sampler stalled after " + std::to_string(kMaxConsecutiveRejections) +
                                " consecutive rejections (gamma_x=" + std::to_string(p_.gamma_x) +
                                ", fss=" + std::to_string(p_.fss) + ")");
    }

  private:
    EmitterParams p_;
    double norm_ = 1.0;
    double c2_ = 0.0;
    double bound_ = 0.0;
};

template <class Rng>
PortPair draw_port_pair(const EmitterParams& p, double tau, Rng& rng) {
    std::array<double, 4> w;
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
        w[i] = coincidence_probability(p, tau, kAllPortPairs[i]);
        sum += w[i];
    }
    std::uniform_real_distribution<double> uni(0.0, sum);
    double u = uni(rng);
    for (int i = 0; i < 3; ++i) {
        if (u < w[i]) return kAllPortPairs[i];
        u -= w[i];
    }
    return PortPair::BB;
}

struct Detector {
    double efficiency;
    double delay_ps;
    double jitter_ps;
};

void add_dark_counts(TimestampStream& s, const InstrumentParams& inst, std::uint64_t purpose) {
    if (inst.dark_rate <= 0.0) return;
    const double span_ns = inst.duration * 1e9;
    auto rng = substream(inst.seed, 0, purpose);
    std::poisson_distribution<std::uint64_t> count(inst.dark_rate * span_ns);
    std::uniform_real_distribution<double> when(0.0, span_ns * 1e3);
    const std::uint64_t n = count(rng);
    s.ticks.reserve(s.ticks.size() + n);
    for (std::uint64_t i = 0; i < n; ++i) s.ticks.push_back(to_tick(when(rng), s.tick_ps));
}

}  // namespace

void validate(const InstrumentParams& inst) {
    check_probability(inst.efficiency_xx_a, "efficiency_xx_a");
    check_probability(inst.efficiency_xx_b, "efficiency_xx_b");
    check_probability(inst.efficiency_x_a, "efficiency_x_a");
    check_probability(inst.efficiency_x_b, "efficiency_x_b");
    check_probability(inst.pair_probability, "pair_probability");
    check_probability(inst.multiphoton_probability, "multiphoton_probability");
    if (!(inst.dark_rate >= 0.0)) throw std::invalid_argument("dark_rate must be >= 0");
    if (!(inst.duration > 0.0) || !std::isfinite(inst.duration)) throw std::invalid_argument("duration must be > 0");
    if (!std::isfinite(inst.rep_rate_drift)) throw std::invalid_argument("rep_rate_drift must be finite");
    for (double d : inst.channel_delay_ps)
        if (!std::isfinite(d)) throw std::invalid_argument("channel delays must be finite");
}

std::uint64_t pulse_count(const EmitterParams& p, const InstrumentParams& inst) {
    return static_cast<std::uint64_t>(std::floor(inst.duration * 1e9 / p.rep_period));
}

double duration_for_pulses(const EmitterParams& p, std::uint64_t n) {
    return (static_cast<double>(n) + 0.5) * p.rep_period * 1e-9;
}

bool TimestampStream::is_sorted() const { return std::is_sorted(ticks.begin(), ticks.end()); }

std::uint64_t to_tick(double t_ps, std::int64_t tick_ps) {
    return static_cast<std::uint64_t>(std::llround(t_ps / static_cast<double>(tick_ps)));
}

std::array<TimestampStream, 4> simulate_run(const EmitterParams& p, const InstrumentParams& inst,
                                            SimulationStats* stats) {
    validate(p);
    validate(inst);

    std::array<TimestampStream, 4> out;
    for (int c = 0; c < 4; ++c) {
        out[c].channel = kChannelLabels[c];
        out[c].duration = inst.duration;
    }

    const auto eff = inst.efficiencies();
    const double jitter_ps = p.jitter_sigma * 1e3 / std::sqrt(2.0);
    const double span_ps = inst.duration * 1e12;
    const std::uint64_t pulses = pulse_count(p, inst);
    DelaySampler sample_delay(p);

    SimulationStats st;
    st.pulses = pulses;

    for (std::uint64_t block = 0; block * kBlockPulses < pulses; ++block) {
        auto rng = substream(inst.seed, block, 1);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::exponential_distribution<double> xx_delay(p.gamma_xx());
        std::normal_distribution<double> jitter(0.0, 1.0);

        auto detect = [&](int ch, double t_ns) {
            if (uni(rng) >= eff[ch]) return;
            const double t_ps = t_ns * 1e3 + inst.channel_delay_ps[ch] + jitter_ps * jitter(rng);
            if (t_ps < 0.0 || t_ps > span_ps) return;
            out[ch].ticks.push_back(to_tick(t_ps, out[ch].tick_ps));
        };

        const std::uint64_t end = std::min(pulses, (block + 1) * kBlockPulses);
        for (std::uint64_t k = block * kBlockPulses; k < end; ++k) {
            if (uni(rng) >= inst.pair_probability) continue;
            ++st.cascades;
            const double t_xx = pulse_time(p, inst, k) + xx_delay(rng);
            const double tau = sample_delay(rng, st.rejections);
            const PortPair cfg = draw_port_pair(p, tau, rng);
            ++st.pair_config_counts[static_cast<int>(cfg)];
            const int xx_port = (cfg == PortPair::AA || cfg == PortPair::AB) ? 0 : 1;
            const int x_port = (cfg == PortPair::AA || cfg == PortPair::BA) ? 0 : 1;
            detect(xx_port, t_xx);
            detect(2 + x_port, t_xx + tau);
        }
    }

    for (int c = 0; c < 4; ++c) {
        add_dark_counts(out[c], inst, 100 + c);
        std::sort(out[c].ticks.begin(), out[c].ticks.end());
    }
    if (stats) *stats = st;
    return out;
}

std::vector<double> sample_delays(const EmitterParams& p, std::size_t n, std::uint64_t seed) {
    validate(p);
    DelaySampler sample_delay(p);
    auto rng = substream(seed, 0, 3);
    std::uint64_t rejections = 0;
    std::vector<double> out(n);
    for (auto& t : out) t = sample_delay(rng, rejections);
    return out;
}

std::array<TimestampStream, 2> simulate_g2_single(Transition transition, const EmitterParams& p,
                                                  const InstrumentParams& inst) {
    validate(p);
    validate(inst);

    const bool is_x = transition == Transition::X;
    const std::string name = is_x ? "X" : "XX";
    std::array<TimestampStream, 2> out;
    for (int c = 0; c < 2; ++c) {
        out[c].channel = name + "@" + std::to_string(c + 1);
        out[c].duration = inst.duration;
    }
    const auto all_eff = inst.efficiencies();
    const std::array<double, 2> eff = is_x ? std::array{all_eff[2], all_eff[3]} : std::array{all_eff[0], all_eff[1]};
    const std::array<double, 2> delay = is_x ? std::array{inst.channel_delay_ps[2], inst.channel_delay_ps[3]}
                                             : std::array{inst.channel_delay_ps[0], inst.channel_delay_ps[1]};
    const double jitter_ps = p.jitter_sigma * 1e3 / std::sqrt(2.0);
    const double span_ps = inst.duration * 1e12;
    const std::uint64_t pulses = pulse_count(p, inst);
    DelaySampler sample_delay(p);
    std::uint64_t rejections = 0;

    for (std::uint64_t block = 0; block * kBlockPulses < pulses; ++block) {
        auto rng = substream(inst.seed, block, 2);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        std::exponential_distribution<double> xx_delay(p.gamma_xx());
        std::normal_distribution<double> jitter(0.0, 1.0);

        auto emission_time = [&](double t_pulse) {
            const double t_xx = t_pulse + xx_delay(rng);
            return is_x ? t_xx + sample_delay(rng, rejections) : t_xx;
        };
        auto route = [&](double t_ns) {
            const int port = uni(rng) < 0.5 ? 0 : 1;
            if (uni(rng) >= eff[port]) return;
            const double t_ps = t_ns * 1e3 + delay[port] + jitter_ps * jitter(rng);
            if (t_ps < 0.0 || t_ps > span_ps) return;
            out[port].ticks.push_back(to_tick(t_ps, out[port].tick_ps));
        };

        const std::uint64_t end = std::min(pulses, (block + 1) * kBlockPulses);
        for (std::uint64_t k = block * kBlockPulses; k < end; ++k) {
            if (uni(rng) >= inst.pair_probability) continue;
            const double t_pulse = pulse_time(p, inst, k);
            route(emission_time(t_pulse));
            if (uni(rng) < inst.multiphoton_probability) route(emission_time(t_pulse));
        }
    }

    for (int c = 0; c < 2; ++c) {
        add_dark_counts(out[c], inst, 200 + c);
        std::sort(out[c].ticks.begin(), out[c].ticks.end());
    }
    return out;
}

double multiphoton_for_g2(double g2, double pair_probability) {
    if (!(g2 >= 0.0)) throw std::invalid_argument("g2 must be >= 0");
    if (!(pair_probability > 0.0 && pair_probability <= 1.0))
        throw std::invalid_argument("pair_probability must lie in (0, 1]");
    if (g2 == 0.0) return 0.0;
    // p g c^2 + (2 p g - 2) c + p g = 0, smaller root.
    const double a = pair_probability * g2;
    const double b = 2.0 * a - 2.0;
    const double disc = b * b - 4.0 * a * a;
    if (disc < 0.0) throw std::invalid_argument("g2 not reachable at this pair probability");
    const double c = (-b - std::sqrt(disc)) / (2.0 * a);
    if (c > 1.0) throw std::invalid_argument("g2 requires multiphoton probability above 1");
    return c;
}

}  // namespace chiralpair
