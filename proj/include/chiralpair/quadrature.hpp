#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "chiralpair/types.hpp"

namespace chiralpair::quad {

// 7-point Gauss / 15-point Kronrod nodes on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
using CVec = std::array<std::complex<double>, N>;

struct QuadStats {
    int intervals = 0;
    double max_rel_error = 0.0;
    int worst_element = -1;
};

/// Adaptive Gauss-Kronrod integration of a vector-valued complex integrand.
///
/// Subdivides the interval with the largest error until every component meets
/// |err_i| <= max(rel_tol * |I_i|, abs_floor) where abs_floor = rel_tol * 1e-6 *
/// max_i |I_i| (so exactly-vanishing components do not stall refinement).
/// Throws QuadratureError naming the worst component when max_intervals is hit.
template <std::size_t N, class F>
CVec<N> integrate(F&& f, double a, double b, double rel_tol, QuadStats* stats = nullptr,
                  int max_intervals = 4000) {
    struct Piece {
        double a, b;
        CVec<N> value;
        std::array<double, N> err;
        double score;
    };

    auto eval = [&](double lo, double hi) {
        Piece pc{lo, hi, {}, {}, 0.0};
        const double c = 0.5 * (lo + hi);
        const double h = 0.5 * (hi - lo);
        CVec<N> gauss{};
        const CVec<N> fc = f(c);
        for (std::size_t i = 0; i < N; ++i) {
            pc.value[i] = kKronrodWeights[7] * fc[i];
            gauss[i] = kGaussWeights[3] * fc[i];
        }
        for (int j = 0; j < 7; ++j) {
            const double dx = h * kKronrodNodes[j];
            const CVec<N> f1 = f(c - dx);
            const CVec<N> f2 = f(c + dx);
            for (std::size_t i = 0; i < N; ++i) {
                pc.value[i] += kKronrodWeights[j] * (f1[i] + f2[i]);
                if (j % 2 == 1) gauss[i] += kGaussWeights[j / 2] * (f1[i] + f2[i]);
            }
        }
        for (std::size_t i = 0; i < N; ++i) {
            pc.value[i] *= h;
            pc.err[i] = std::abs(pc.value[i] - gauss[i] * h);
            pc.score = std::max(pc.score, pc.err[i]);
        }
        return pc;
    };

    std::vector<Piece> pieces{eval(a, b)};
    CVec<N> total = pieces[0].value;
    std::array<double, N> total_err = pieces[0].err;

    while (true) {
        double biggest = 0.0;
        for (std::size_t i = 0; i < N; ++i) biggest = std::max(biggest, std::abs(total[i]));
        const double floor = rel_tol * 1e-6 * biggest;
        bool ok = true;
        double worst = 0.0;
        int worst_i = -1;
        for (std::size_t i = 0; i < N; ++i) {
            const double tol = std::max(rel_tol * std::abs(total[i]), floor);
            const double ratio = tol > 0.0 ? total_err[i] / tol : 0.0;
            if (ratio > 1.0) ok = false;
            if (ratio > worst) {
                worst = ratio;
                worst_i = static_cast<int>(i);
            }
        }
        if (stats) {
            stats->intervals = static_cast<int>(pieces.size());
            stats->max_rel_error = worst * rel_tol;
            stats->worst_element = worst_i;
        }
        if (ok || biggest == 0.0) return total;
        if (static_cast<int>(pieces.size()) >= max_intervals)
            throw QuadratureError("adaptive quadrature did not converge (worst element " +
                                      std::to_string(worst_i) + ")",
                                  worst_i);

        auto it = std::max_element(pieces.begin(), pieces.end(),
                                   [](const Piece& x, const Piece& y) { return x.score < y.score; });
        const Piece old = *it;
        const double mid = 0.5 * (old.a + old.b);
        Piece left = eval(old.a, mid);
        Piece right = eval(mid, old.b);
        for (std::size_t i = 0; i < N; ++i) {
            total[i] += left.value[i] + right.value[i] - old.value[i];
            total_err[i] += left.err[i] + right.err[i] - old.err[i];
        }
        *it = left;
        pieces.push_back(right);
    }
}

}  // namespace chiralpair::quad
