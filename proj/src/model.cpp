#include "chiralpair/model.hpp"

#include <cmath>
#include <string>

namespace chiralpair {

double wrap_phase(double phi) {
    double w = std::remainder(phi, kTwoPi);  // [-pi, pi]
    if (w <= -kPi) w += kTwoPi;
    return w;
}

std::string_view to_string(PortPair c) {
    switch (c) {
        case PortPair::AA: return "AA";
        case PortPair::AB: return "AB";
        case PortPair::BA: return "BA";
        case PortPair::BB: return "BB";
    }
    return "??";
}

PortPair port_pair_from_string(std::string_view s) {
    if (s == "AA") return PortPair::AA;
    if (s == "AB") return PortPair::AB;
    if (s == "BA") return PortPair::BA;
    if (s == "BB") return PortPair::BB;
    throw std::invalid_argument("unknown port pair '" + std::string(s) + "' (expected AA, AB, BA or BB)");
}

EmitterParams EmitterParams::make(double gamma_x, double fss, double phi, double jitter_sigma,
                                  double rep_period) {
    EmitterParams p{gamma_x, fss, wrap_phase(phi), jitter_sigma, rep_period};
    validate(p);
    return p;
}

EmitterParams EmitterParams::with_phi(double new_phi) const {
    EmitterParams p = *this;
    p.phi = wrap_phase(new_phi);
    return p;
}

EmitterParams EmitterParams::with_jitter(double sigma) const {
    EmitterParams p = *this;
    p.jitter_sigma = sigma;
    validate(p);
    return p;
}

void validate(const EmitterParams& p) {
    if (!(p.gamma_x > 0.0) || !std::isfinite(p.gamma_x))
        throw std::invalid_argument("gamma_x must be positive and finite");
    if (!std::isfinite(p.fss)) throw std::invalid_argument("fss must be finite");
    if (!std::isfinite(p.phi)) throw std::invalid_argument("phi must be finite");
    if (!(p.jitter_sigma >= 0.0) || !std::isfinite(p.jitter_sigma))
        throw std::invalid_argument("jitter_sigma must be >= 0");
    if (!(p.rep_period > 0.0) || !std::isfinite(p.rep_period))
        throw std::invalid_argument("rep_period must be positive");
}

cplx TwoPhotonAmplitudes::operator[](PortPair c) const {
    switch (c) {
        case PortPair::AA: return psi_aa;
        case PortPair::AB: return psi_ab;
        case PortPair::BA: return psi_ba;
        case PortPair::BB: return psi_bb;
    }
    return {};
}

namespace {

void check_delay(double tau) {
    if (!(tau >= 0.0) || !std::isfinite(tau))
        throw std::invalid_argument("delay tau must be >= 0 (biexciton photon precedes exciton photon)");
}

}  // namespace

TwoPhotonAmplitudes amplitudes(const EmitterParams& p, double tau) {
    validate(p);
    check_delay(tau);
    const double g = p.gamma_x;
    const double half = 0.5 * p.fss * tau;
    const double env = std::sqrt(2.0) * g * std::exp(-0.5 * g * tau);
    const cplx late = std::polar(1.0, half);

    TwoPhotonAmplitudes a;
    a.tau = tau;
    a.scale = 2.0 * env;
    a.psi_aa = -env * (std::polar(1.0, -(half + 2.0 * p.phi)) + late);
    a.psi_bb = -env * (std::polar(1.0, -(half - 2.0 * p.phi)) + late);
    a.psi_ab = cplx(-2.0 * env * std::cos(half), 0.0);
    a.psi_ba = a.psi_ab;
    return a;
}

double coincidence_probability(const EmitterParams& p, double tau, PortPair config) {
    validate(p);
    check_delay(tau);
    const double g = p.gamma_x;
    const double pre = 4.0 * g * g * std::exp(-g * tau);
    const double st = p.fss * tau;
    switch (config) {
        case PortPair::AA: return pre * (1.0 + std::cos(st + 2.0 * p.phi));
        case PortPair::BB: return pre * (1.0 + std::cos(st - 2.0 * p.phi));
        case PortPair::AB:
        case PortPair::BA: return pre * (1.0 + std::cos(st));
    }
    return 0.0;
}

double total_coincidence_probability(const EmitterParams& p, double tau) {
    validate(p);
    check_delay(tau);
    const double g = p.gamma_x;
    const double c2 = std::cos(p.phi) * std::cos(p.phi);
    return 16.0 * g * g * std::exp(-g * tau) * (1.0 + std::cos(p.fss * tau) * c2);
}

double total_coincidence_integral(const EmitterParams& p) {
    validate(p);
    const double g = p.gamma_x;
    const double c2 = std::cos(p.phi) * std::cos(p.phi);
    return 16.0 * g * g * (1.0 / g + c2 * g / (g * g + p.fss * p.fss));
}

double amplitude_norm(const TwoPhotonAmplitudes& a) {
    const double n = std::norm(a.psi_aa) + std::norm(a.psi_ab) + std::norm(a.psi_ba) + std::norm(a.psi_bb);
    const double ref = a.scale > 0.0 ? a.scale * a.scale : 1.0;
    if (!(n >= 1e-30 * ref)) throw DegenerateStateError("two-photon state has vanishing norm");
    return n;
}

std::array<cplx, 4> normalized_state(const TwoPhotonAmplitudes& a) {
    const double inv = 1.0 / std::sqrt(amplitude_norm(a));
    auto v = a.as_array();
    for (auto& x : v) x *= inv;
    return v;
}

}  // namespace chiralpair
