#pragma once

#include <array>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chiralpair {

// Time is in ns and rates in 1/ns throughout the physics core. Timestamps and
// histograms use integer picoseconds.
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr long long kTickPs = 4;

inline constexpr double ghz_to_angular(double ghz) { return kTwoPi * ghz; }
inline constexpr double angular_to_ghz(double rad_per_ns) { return rad_per_ns / kTwoPi; }

/// Wraps an angle to (-pi, pi].
double wrap_phase(double phi);

/// (XX-port, X-port) detection configuration; the biexciton photon comes first.
enum class PortPair { AA = 0, AB = 1, BA = 2, BB = 3 };

inline constexpr std::array<PortPair, 4> kAllPortPairs = {PortPair::AA, PortPair::AB, PortPair::BA,
                                                          PortPair::BB};

std::string_view to_string(PortPair c);
PortPair port_pair_from_string(std::string_view s);

// Error types. Precondition violations use std::invalid_argument.

/// All amplitudes of a two-photon state vanish simultaneously.
class DegenerateStateError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

class QuadratureError : public std::runtime_error {
  public:
    QuadratureError(const std::string& what, int worst_element)
        : std::runtime_error(what), worst_element_(worst_element) {}
    int worst_element() const noexcept { return worst_element_; }

  private:
    int worst_element_;
};

class SamplerStallError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class AlignmentError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace chiralpair
