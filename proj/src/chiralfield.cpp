#include "chiralpair/chiralfield.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "chiralpair/entanglement.hpp"

namespace chiralpair {

void validate(const FieldGrid& g) {
    if (g.nx <= 0 || g.ny <= 0) throw std::invalid_argument("field grid must have positive dimensions");
    if (g.ex.size() != g.size() || g.ey.size() != g.size())
        throw std::invalid_argument("field grid component arrays do not match nx*ny");
    if (!(g.spacing > 0.0)) throw std::invalid_argument("field grid spacing must be positive");
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!std::isfinite(std::norm(g.ex[i]) + std::norm(g.ey[i])))
            throw std::invalid_argument("field grid has a non-finite cell at index " + std::to_string(i));
    }
}

FieldGrid read_field_grid_csv(std::istream& is, double spacing) {
    struct Row {
        int ix, iy;
        std::complex<double> ex, ey;
    };
    std::vector<Row> rows;
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("field grid CSV is empty");
    if (line.find("ix") == std::string::npos) throw std::invalid_argument("field grid CSV is missing its header");

    int max_x = -1, max_y = -1;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        for (auto& ch : line)
            if (ch == ',') ch = ' ';
        std::istringstream ss(line);
        Row r{};
        double a, b, c, d;
        if (!(ss >> r.ix >> r.iy >> a >> b >> c >> d))
            throw std::invalid_argument("malformed field grid row at line " + std::to_string(lineno));
        if (r.ix < 0 || r.iy < 0) throw std::invalid_argument("negative cell index at line " + std::to_string(lineno));
        r.ex = {a, b};
        r.ey = {c, d};
        max_x = std::max(max_x, r.ix);
        max_y = std::max(max_y, r.iy);
        rows.push_back(r);
    }
    if (rows.empty()) throw std::invalid_argument("field grid CSV has no cells");

    FieldGrid g;
    g.nx = max_x + 1;
    g.ny = max_y + 1;
    g.spacing = spacing;
    g.ex.assign(g.size(), {});
    g.ey.assign(g.size(), {});
    std::vector<char> seen(g.size(), 0);
    for (const auto& r : rows) {
        const auto i = g.index(r.ix, r.iy);
        if (seen[i]) throw std::invalid_argument("duplicate cell (" + std::to_string(r.ix) + "," + std::to_string(r.iy) + ")");
        seen[i] = 1;
        g.ex[i] = r.ex;
        g.ey[i] = r.ey;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i]) throw std::invalid_argument("field grid is missing cell index " + std::to_string(i));
    validate(g);
    return g;
}

void write_map_csv(std::ostream& os, const ScalarMap& map) {
    os << "ix,iy,value\n" << std::setprecision(12);
    for (int iy = 0; iy < map.ny; ++iy) {
        for (int ix = 0; ix < map.nx; ++ix) {
            const auto& v = map.values[static_cast<std::size_t>(iy) * map.nx + ix];
            os << ix << ',' << iy << ',';
            if (v) os << *v;
            else os << "masked";
            os << '\n';
        }
    }
}

double local_phase(std::complex<double> ex, std::complex<double> ey) {
    return wrap_phase(std::arg(ex * std::conj(ey)));
}

double directionality(std::complex<double> ex, std::complex<double> ey) {
    const double ax = std::abs(ex), ay = std::abs(ey);
    const double den = ax * ax + ay * ay;
    if (den == 0.0) throw std::invalid_argument("directionality undefined for a vanishing field");
    return 2.0 * std::sin(local_phase(ex, ey)) * ax * ay / den;
}

double directionality_projection(std::complex<double> ex, std::complex<double> ey) {
    const std::complex<double> i(0.0, 1.0);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const double den = std::norm(ex) + std::norm(ey);
    if (den == 0.0) throw std::invalid_argument("directionality undefined for a vanishing field");
    const double fwd = std::norm((ex + i * ey) * inv_sqrt2);
    const double bwd = std::norm((std::conj(ex) + i * std::conj(ey)) * inv_sqrt2);
    return (fwd - bwd) / den;
}

namespace {

template <class F>
ScalarMap map_cells(const FieldGrid& grid, F&& f) {
    validate(grid);
    ScalarMap m{grid.nx, grid.ny, std::vector<std::optional<double>>(grid.size())};
    for (std::size_t i = 0; i < grid.size(); ++i)
        if (!grid.masked(i)) m.values[i] = f(grid.ex[i], grid.ey[i]);
    return m;
}

}  // namespace

ScalarMap local_phase(const FieldGrid& grid) {
    return map_cells(grid, [](auto ex, auto ey) { return local_phase(ex, ey); });
}

ScalarMap directionality(const FieldGrid& grid) {
    return map_cells(grid, [](auto ex, auto ey) { return directionality(ex, ey); });
}

ScalarMap concurrence_map(const FieldGrid& grid, const EmitterParams& p, double tau) {
    validate(p);
    return map_cells(grid, [&](auto ex, auto ey) {
        const EmitterParams cell = p.with_phi(local_phase(ex, ey));
        if (cell.jitter_sigma > 0.0) return concurrence_jittered(jitter_averaged_density(cell, tau));
        return concurrence_pure(cell, tau);
    });
}

namespace {

void check_reflection(double r) {
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("reflection amplitude must lie in [0, 1)");
}

void check_open_phase(double phi, const char* name) {
    if (!(phi > 0.0 && phi < kPi)) throw std::invalid_argument(std::string(name) + " must lie in (0, pi)");
}

}  // namespace

double phase_reduction(double ideal_phi, double r) {
    check_reflection(r);
    check_open_phase(ideal_phi, "ideal phase");
    return 2.0 * std::atan((1.0 - r) / (1.0 + r) * std::tan(0.5 * ideal_phi));
}

double ideal_phase_from(double observed_phi, double r) {
    check_reflection(r);
    check_open_phase(observed_phi, "observed phase");
    return 2.0 * std::atan((1.0 + r) / (1.0 - r) * std::tan(0.5 * observed_phi));
}

double reflection_amplitude(double ideal_phi, double observed_phi) {
    const double den = std::sin(0.5 * (ideal_phi + observed_phi));
    if (den == 0.0) throw std::invalid_argument("reflection amplitude undefined for phi0 + phi = 0");
    return std::sin(0.5 * (ideal_phi - observed_phi)) / den;
}

double fringe_reflectance(double fringe_amplitude) {
    if (!(fringe_amplitude > 0.0 && fringe_amplitude <= 1.0))
        throw std::invalid_argument("fringe amplitude must lie in (0, 1]");
    return (1.0 - fringe_amplitude) / (1.0 + fringe_amplitude);
}

ReflectionModel ReflectionModel::from_ideal(double ideal_phi, double r) {
    return {r, phase_reduction(ideal_phi, r), ideal_phi};
}

ReflectionModel ReflectionModel::from_observed(double observed_phi, double r) {
    return {r, observed_phi, ideal_phase_from(observed_phi, r)};
}

ReflectionModel ReflectionModel::from_phases(double ideal_phi, double observed_phi) {
    check_open_phase(ideal_phi, "ideal phase");
    check_open_phase(observed_phi, "observed phase");
    const double r = reflection_amplitude(ideal_phi, observed_phi);
    check_reflection(r);
    return {r, observed_phi, ideal_phi};
}

}  // namespace chiralpair
