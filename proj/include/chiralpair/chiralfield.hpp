#pragma once

#include <complex>
#include <iosfwd>
#include <optional>
#include <vector>

#include "chiralpair/model.hpp"

namespace chiralpair {

/// In-plane Bloch-mode field components sampled on a regular grid. Cells are
/// stored row-major (index = iy * nx + ix). A cell where both components
/// vanish is masked.
struct FieldGrid {
    int nx = 0;
    int ny = 0;
    double spacing = 1.0;  // grid pitch in lattice constants
    std::vector<std::complex<double>> ex;
    std::vector<std::complex<double>> ey;

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx + ix; }
    bool masked(std::size_t i) const { return ex[i] == 0.0 && ey[i] == 0.0; }
};

void validate(const FieldGrid& g);

/// Per-cell scalar map; std::nullopt marks a masked cell.
struct ScalarMap {
    int nx = 0;
    int ny = 0;
    std::vector<std::optional<double>> values;
};

/// Reads `ix,iy,re_ex,im_ex,re_ey,im_ey` rows (header line required). Grid size
/// is inferred from the largest indices; every cell must appear exactly once.
FieldGrid read_field_grid_csv(std::istream& is, double spacing = 1.0);

/// Writes `ix,iy,value` with `masked` in place of missing values.
void write_map_csv(std::ostream& os, const ScalarMap& map);

/// arg(ex) - arg(ey) wrapped to (-pi, pi].
double local_phase(std::complex<double> ex, std::complex<double> ey);
ScalarMap local_phase(const FieldGrid& grid);

/// 2 sin(phi) |ex||ey| / (|ex|^2 + |ey|^2).
double directionality(std::complex<double> ex, std::complex<double> ey);

/// Same quantity from the sigma+ projections of the forward mode e and the
/// backward mode e*: (|e . s+|^2 - |e* . s+|^2) / |e|^2.
double directionality_projection(std::complex<double> ex, std::complex<double> ey);

ScalarMap directionality(const FieldGrid& grid);

/// Concurrence at delay tau with the cell's local phase substituted for p.phi
/// (jitter-averaged when p.jitter_sigma > 0).
ScalarMap concurrence_map(const FieldGrid& grid, const EmitterParams& p, double tau);

/// Observed phase after cavity back-reflection of amplitude r: the inverse of
/// r = sin((phi0 - phi)/2) / sin((phi0 + phi)/2).
double phase_reduction(double ideal_phi, double r);

/// Ideal (reflection-free) phase from the observed phase and reflection amplitude.
double ideal_phase_from(double observed_phi, double r);

/// r = sin((phi0 - phi)/2) / sin((phi0 + phi)/2).
double reflection_amplitude(double ideal_phi, double observed_phi);

/// Power reflectance r^2 = (1 - A) / (1 + A) from the fringe amplitude A in (0, 1].
double fringe_reflectance(double fringe_amplitude);

/// Back-reflection model: two of {r, observed_phi, ideal_phi} determine the third.
struct ReflectionModel {
    double r = 0.0;
    double observed_phi = 0.0;
    double ideal_phi = 0.0;

    static ReflectionModel from_ideal(double ideal_phi, double r);
    static ReflectionModel from_observed(double observed_phi, double r);
    static ReflectionModel from_phases(double ideal_phi, double observed_phi);
};

}  // namespace chiralpair
