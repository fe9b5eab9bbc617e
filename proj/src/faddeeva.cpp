#include "chiralpair/faddeeva.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace chiralpair::special {

namespace {

constexpr int kTerms = 40;

struct Weideman {
    double L;
    std::array<double, kTerms> coeff;  // coeff[m-1] multiplies Z^(m-1)

    Weideman() {
        constexpr int M = 2 * kTerms;
        constexpr int M2 = 2 * M;
        L = std::sqrt(kTerms / std::numbers::sqrt2);
        // Samples f(k), k = -M+1..M-1, with a leading zero; fftshift then a
        // length-2M DFT whose real parts 1..N are the series coefficients.
        std::array<double, M2> f{};
        f[0] = 0.0;
        for (int k = -M + 1; k <= M - 1; ++k) {
            const double t = L * std::tan(0.5 * k * std::numbers::pi / M);
            f[static_cast<std::size_t>(k + M)] = std::exp(-t * t) * (L * L + t * t);
        }
        std::array<double, M2> shifted{};
        for (int i = 0; i < M2; ++i) shifted[static_cast<std::size_t>(i)] = f[static_cast<std::size_t>((i + M) % M2)];
        for (int m = 1; m <= kTerms; ++m) {
            double re = 0.0;
            for (int j = 0; j < M2; ++j)
                re += shifted[static_cast<std::size_t>(j)] * std::cos(2.0 * std::numbers::pi * j * m / M2);
            coeff[static_cast<std::size_t>(m - 1)] = re / M2;
        }
    }
};

const Weideman& table() {
    static const Weideman w;
    return w;
}

std::complex<double> w_upper(std::complex<double> z) {
    const auto& t = table();
    const std::complex<double> iz(-z.imag(), z.real());
    const std::complex<double> den = t.L - iz;
    const std::complex<double> Z = (t.L + iz) / den;
    std::complex<double> p = 0.0;
    for (int m = kTerms - 1; m >= 0; --m) p = p * Z + t.coeff[static_cast<std::size_t>(m)];
    return 2.0 * p / (den * den) + (1.0 / std::sqrt(std::numbers::pi)) / den;
}

}  // namespace

std::complex<double> faddeeva_w(std::complex<double> z) {
    if (z.imag() >= 0.0) return w_upper(z);
    return 2.0 * std::exp(-z * z) - w_upper(-z);
}

std::complex<double> erfcx(std::complex<double> z) { return faddeeva_w(std::complex<double>(-z.imag(), z.real())); }

}  // namespace chiralpair::special
