#pragma once

#include <array>
#include <complex>

#include "chiralpair/types.hpp"

namespace chiralpair {

using cplx = std::complex<double>;

/// Physical constants of one quantum dot in a chiral waveguide.
///
/// The biexciton decay rate is not a free parameter: it is always 2 * gamma_x.
/// Construct through make() so that the invariants are checked and phi is
/// wrapped to (-pi, pi].
struct EmitterParams {
    double gamma_x = 8.35;       // exciton radiative decay rate [1/ns]
    double fss = 0.0;            // fine-structure splitting S [rad/ns]
    double phi = 0.0;            // chiral phase [rad]
    double jitter_sigma = 0.0;   // coincidence timing jitter [ns]
    double rep_period = 13.1323; // laser repetition period [ns]

    static EmitterParams make(double gamma_x, double fss, double phi, double jitter_sigma = 0.0,
                              double rep_period = 13.1323);

    double gamma_xx() const { return 2.0 * gamma_x; }
    EmitterParams with_phi(double new_phi) const;
    EmitterParams with_jitter(double sigma) const;
};

void validate(const EmitterParams& p);

/// The four (unnormalised) amplitudes of the cascade state at XX->X delay tau.
struct TwoPhotonAmplitudes {
    cplx psi_aa;
    cplx psi_ab;
    cplx psi_ba;
    cplx psi_bb;
    double tau = 0.0;
    /// Prefactor bound 2*sqrt(2)*gamma_x*exp(-gamma_x*tau/2); every |psi| is <= scale.
    double scale = 0.0;

    cplx operator[](PortPair c) const;
    std::array<cplx, 4> as_array() const { return {psi_aa, psi_ab, psi_ba, psi_bb}; }
};

TwoPhotonAmplitudes amplitudes(const EmitterParams& p, double tau);

/// |psi_config(tau)|^2 in closed form (unnormalised, units of gamma_x^2).
double coincidence_probability(const EmitterParams& p, double tau, PortPair config);

/// Sum over the four configurations, 16 g^2 e^{-g tau} (1 + cos(S tau) cos^2(phi)).
double total_coincidence_probability(const EmitterParams& p, double tau);

/// Integral of total_coincidence_probability over tau in [0, inf).
double total_coincidence_integral(const EmitterParams& p);

/// N = sum of |psi|^2. Throws DegenerateStateError when N is below 1e-30 of
/// scale^2, i.e. all four amplitudes vanish together (phi = 0 or pi with S tau = pi).
double amplitude_norm(const TwoPhotonAmplitudes& a);

/// Amplitudes divided by sqrt(N).
std::array<cplx, 4> normalized_state(const TwoPhotonAmplitudes& a);

}  // namespace chiralpair
