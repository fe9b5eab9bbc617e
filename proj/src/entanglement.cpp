#include "chiralpair/entanglement.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <thread>

#include "chiralpair/quadrature.hpp"

namespace chiralpair {

ReducedDensityMatrix reduced_density(const TwoPhotonAmplitudes& a) {
    const double n = amplitude_norm(a);
    ReducedDensityMatrix r;
    r.elements(0, 0) = (std::norm(a.psi_aa) + std::norm(a.psi_ab)) / n;
    r.elements(1, 1) = (std::norm(a.psi_ba) + std::norm(a.psi_bb)) / n;
    r.elements(0, 1) = (a.psi_aa * std::conj(a.psi_ba) + a.psi_ab * std::conj(a.psi_bb)) / n;
    r.elements(1, 0) = std::conj(r.elements(0, 1));
    return r;
}

std::pair<double, double> eigenvalues(const ReducedDensityMatrix& rho) {
    const auto& m = rho.elements;
    const double tr = (m(0, 0) + m(1, 1)).real();
    const double det = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)).real();
    const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
    return {0.5 * (tr + disc), 0.5 * (tr - disc)};
}

std::pair<double, double> eigenvalues(const TwoPhotonAmplitudes& a) {
    const double n = amplitude_norm(a);
    const double d = std::abs(a.psi_aa * a.psi_bb - a.psi_ab * a.psi_ba);
    const double root = std::sqrt(std::max(0.0, 1.0 - 4.0 * d * d / (n * n)));
    return {0.5 * (1.0 + root), 0.5 * (1.0 - root)};
}

double binary_entropy(double p) {
    auto term = [](double x) { return x > 0.0 ? -x * std::log2(x) : 0.0; };
    return term(p) + term(1.0 - p);
}

double entropy(const ReducedDensityMatrix& rho) {
    const auto [p1, p2] = eigenvalues(rho);
    const double tr = p1 + p2;
    if (!(tr > 0.0)) throw std::invalid_argument("density matrix has non-positive trace");
    return binary_entropy(std::clamp(p1 / tr, 0.0, 1.0));
}

double entropy(const TwoPhotonAmplitudes& a) {
    return binary_entropy(eigenvalues(a).first);
}

double concurrence_pure(const EmitterParams& p, double tau) {
    validate(p);
    if (!(tau >= 0.0)) throw std::invalid_argument("delay tau must be >= 0");
    const double s2 = std::sin(p.phi) * std::sin(p.phi);
    const double c2 = std::cos(p.phi) * std::cos(p.phi);
    const double den = 1.0 + std::cos(p.fss * tau) * c2;
    if (den <= 1e-300) return 0.0;
    return std::clamp(s2 / den, 0.0, 1.0);
}

double concurrence_from_amplitudes(const TwoPhotonAmplitudes& a) {
    const double n = amplitude_norm(a);
    return std::min(1.0, 2.0 * std::abs(a.psi_aa * a.psi_bb - a.psi_ab * a.psi_ba) / n);
}

Eigen::Matrix4cd pure_density(const TwoPhotonAmplitudes& a) {
    const auto v = normalized_state(a);
    Eigen::Vector4cd psi(v[0], v[1], v[2], v[3]);
    return psi * psi.adjoint();
}

JitterAveragedDensityMatrix jitter_averaged_density(const EmitterParams& p, double tau, double rel_tol) {
    validate(p);
    if (!(tau >= 0.0)) throw std::invalid_argument("delay tau must be >= 0");

    JitterAveragedDensityMatrix out;
    out.center_tau = tau;
    if (p.jitter_sigma == 0.0) {
        out.elements = pure_density(amplitudes(p, tau));
        out.norm = 1.0;
        return out;
    }

    const double s = p.jitter_sigma;
    const double lo = std::max(0.0, tau - 8.0 * s);
    const double hi = tau + 8.0 * s;
    const double inv2s2 = 1.0 / (2.0 * s * s);

    auto integrand = [&](double t) {
        const double w = std::exp(-(t - tau) * (t - tau) * inv2s2);
        const auto a = amplitudes(p, t).as_array();
        quad::CVec<16> v;
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < 4; ++k) v[4 * i + k] = w * a[i] * std::conj(a[k]);
        return v;
    };

    const auto vals = quad::integrate<16>(integrand, lo, hi, rel_tol);
    for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k) out.elements(i, k) = vals[4 * i + k];
    out.norm = out.elements.trace().real();
    if (!(out.norm > 0.0)) throw DegenerateStateError("jitter-averaged state has vanishing norm");
    return out;
}

double wootters_concurrence(const Eigen::Matrix4cd& rho_in) {
    const double tr = rho_in.trace().real();
    if (!(tr > 0.0)) throw std::invalid_argument("density matrix has non-positive trace");
    Eigen::Matrix4cd rho = rho_in / tr;
    if ((rho - rho.adjoint()).norm() > 1e-10) throw std::invalid_argument("density matrix is not Hermitian");
    rho = 0.5 * (rho + rho.adjoint());

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(rho);
    Eigen::Vector4d ev = es.eigenvalues();
    if (ev.minCoeff() < -1e-10) throw std::invalid_argument("density matrix is not positive semidefinite");
    ev = ev.cwiseMax(0.0);
    // W = sqrt(rho) factor; the lambdas are the singular values of W^T (Y x Y) W.
    const Eigen::Matrix4cd w = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
    Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
    yy(0, 3) = -1.0;
    yy(1, 2) = 1.0;
    yy(2, 1) = 1.0;
    yy(3, 0) = -1.0;
    const Eigen::Matrix4cd t = w.transpose() * yy * w;
    const Eigen::Vector4d sv = Eigen::JacobiSVD<Eigen::Matrix4cd>(t).singularValues();
    std::array<double, 4> lam{sv(0), sv(1), sv(2), sv(3)};
    std::sort(lam.begin(), lam.end(), std::greater<>());
    return std::clamp(lam[0] - lam[1] - lam[2] - lam[3], 0.0, 1.0);
}

double concurrence_jittered(const JitterAveragedDensityMatrix& rho) {
    return wootters_concurrence(rho.elements);
}

std::vector<ConcurrencePoint> concurrence_sweep(const EmitterParams& p, std::span<const double> tau_grid,
                                                unsigned threads) {
    validate(p);
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
        if (!(tau_grid[i] >= 0.0)) throw std::invalid_argument("tau grid must be non-negative");
        if (i > 0 && tau_grid[i] < tau_grid[i - 1]) throw std::invalid_argument("tau grid must be ascending");
    }

    std::vector<ConcurrencePoint> out(tau_grid.size());
    auto eval = [&](std::size_t i) {
        const double t = tau_grid[i];
        const double c = p.jitter_sigma > 0.0 ? concurrence_jittered(jitter_averaged_density(p, t))
                                              : concurrence_pure(p, t);
        out[i] = {t, c};
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, tau_grid.size())));
    if (threads <= 1) {
        for (std::size_t i = 0; i < tau_grid.size(); ++i) eval(i);
        return out;
    }

    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < tau_grid.size(); i += threads) eval(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

void write_sweep_csv(std::ostream& os, std::span<const ConcurrencePoint> sweep) {
    os << "tau_ns,concurrence\n";
    os << std::setprecision(12);
    for (const auto& pt : sweep) os << pt.tau << ',' << pt.concurrence << '\n';
}

}  // namespace chiralpair
