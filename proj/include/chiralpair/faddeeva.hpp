#pragma once

#include <complex>

namespace chiralpair::special {

/// Faddeeva function w(z) = exp(-z^2) erfc(-iz), via Weideman's 40-term
/// rational series. Relative error ~1e-14 in the closed upper half plane; the
/// lower half plane uses the reflection w(z) = 2 exp(-z^2) - w(-z).
std::complex<double> faddeeva_w(std::complex<double> z);

/// Scaled complementary error function erfcx(z) = exp(z^2) erfc(z) = w(iz).
std::complex<double> erfcx(std::complex<double> z);

}  // namespace chiralpair::special
