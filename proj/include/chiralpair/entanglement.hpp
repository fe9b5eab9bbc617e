#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "chiralpair/model.hpp"

namespace chiralpair {

/// 2x2 density matrix over the path basis {A, B} of one photon.
struct ReducedDensityMatrix {
    Eigen::Matrix2cd elements;
};

/// Gaussian-weighted two-photon density matrix. Rows/columns are indexed by
/// PortPair (AA, AB, BA, BB). `elements` is unnormalised; `norm` is its trace.
struct JitterAveragedDensityMatrix {
    Eigen::Matrix4cd elements;
    double center_tau = 0.0;
    double norm = 1.0;

    Eigen::Matrix4cd normalized() const { return elements / norm; }
};

struct ConcurrencePoint {
    double tau;
    double concurrence;
};

/// Single-photon reduced state, trace taken over the exciton path index.
/// Off-diagonal is (psi_aa psi_ba* + psi_ab psi_bb*) / N.
ReducedDensityMatrix reduced_density(const TwoPhotonAmplitudes& a);

/// Eigenvalues (P1 >= P2) of a 2x2 density matrix by direct diagonalisation.
std::pair<double, double> eigenvalues(const ReducedDensityMatrix& rho);

/// Eigenvalues from the amplitude closed form 1/2 (1 +- sqrt(1 - 4/N^2 |aa bb - ab ba|^2)).
std::pair<double, double> eigenvalues(const TwoPhotonAmplitudes& a);

double binary_entropy(double p);

/// Von Neumann entropy in bits (0 log 0 := 0).
double entropy(const ReducedDensityMatrix& rho);
double entropy(const TwoPhotonAmplitudes& a);

/// sin^2(phi) / (1 + cos(S tau) cos^2(phi)). Where numerator and denominator
/// both vanish (phi = 0 or pi with S tau = pi) the separable value 0 is returned.
double concurrence_pure(const EmitterParams& p, double tau);

/// 2/N |psi_aa psi_bb - psi_ab psi_ba|.
double concurrence_from_amplitudes(const TwoPhotonAmplitudes& a);

/// |psi><psi| / N as a 4x4 matrix in the PortPair basis.
Eigen::Matrix4cd pure_density(const TwoPhotonAmplitudes& a);

/// Gaussian average of psi_ij(t) psi_kl(t)* over t >= 0, centred on tau with
/// width p.jitter_sigma. Falls back to the pure state when jitter_sigma == 0.
JitterAveragedDensityMatrix jitter_averaged_density(const EmitterParams& p, double tau,
                                                    double rel_tol = 1e-8);

/// Wootters concurrence max(0, l1 - l2 - l3 - l4) of any two-qubit density
/// matrix (normalised internally). Rejects non-Hermitian input and negative
/// eigenvalues below -1e-10.
double wootters_concurrence(const Eigen::Matrix4cd& rho);

double concurrence_jittered(const JitterAveragedDensityMatrix& rho);

/// Concurrence at each delay of an ascending non-negative grid. Uses the
/// jitter-averaged state when jitter_sigma > 0. Output order follows the grid
/// regardless of `threads`.
std::vector<ConcurrencePoint> concurrence_sweep(const EmitterParams& p, std::span<const double> tau_grid,
                                                unsigned threads = 0);

/// CSV with header `tau_ns,concurrence`.
void write_sweep_csv(std::ostream& os, std::span<const ConcurrencePoint> sweep);

}  // namespace chiralpair
