#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "chiralpair/correlate.hpp"
#include "chiralpair/types.hpp"

namespace chiralpair {

/// Parameters of the jitter-convolved correlation curve. Times in ps, the
/// splitting in rad/ns and the decay rate in 1/ns.
struct CurveParams {
    double amplitude = 1.0;
    double fss = 0.0;
    double tau0_ps = 0.0;
    double sigma_ps = 0.0;
    double phi = 0.0;
    double gamma_x = 8.35;
};

/// Phase offset of the oscillating term for a configuration: +2 phi, -2 phi, or 0.
double config_phase(PortPair config, double phi);

/// amplitude * (Gaussian(sigma) convolved with P_config)(tau - tau0) at each
/// tau in tau_ps, where P_config(t) = 4 g^2 e^{-g t}(1 + cos(S t + phase)) for
/// t >= 0 and 0 before. Closed form via erfcx; when |kappa| sigma / sqrt(2)
/// exceeds 25 the affected term is integrated numerically and *used_numeric
/// is set.
std::vector<double> model_curve(const CurveParams& p, PortPair config, std::span<const double> tau_ps,
                                bool* used_numeric = nullptr);
double model_point(const CurveParams& p, PortPair config, double tau_ps, bool* used_numeric = nullptr);

/// Expected counts of histogram bins [b0, b1): each bin sums the curve over
/// the tick-quantised lags it holds.
std::vector<double> model_binned(const CurveParams& p, PortPair config, const CorrelationHistogram& axis,
                                 std::size_t b0, std::size_t b1, bool* used_numeric = nullptr);

inline constexpr std::array<std::string_view, 5> kFitParameterNames = {"amplitude", "fss", "tau0", "sigma",
                                                                       "phi"};

struct ParamBound {
    double initial = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct FitModelConfig {
    PortPair config = PortPair::AB;
    double gamma_x = 8.35;
    std::map<std::string, double> fixed;
    std::map<std::string, ParamBound> free;
    double window_lo_ps = 0.0;
    double window_hi_ps = 0.0;
};

void validate(const FitModelConfig& cfg);

struct FitOptions {
    int max_iterations = 300;
    double rel_tolerance = 1e-10;
};

struct FitResult {
    std::string stage;
    PortPair config = PortPair::AB;
    double gamma_x = 0.0;
    std::map<std::string, double> values;  // every parameter, fixed ones included
    std::map<std::string, double> errors;  // 1 sigma, free parameters only
    std::vector<std::string> free_names;
    Eigen::MatrixXd covariance;            // ordered as free_names
    std::vector<std::string> at_bound;
    double chi_square = 0.0;
    double reduced_chi_square = 0.0;
    int dof = 0;
    int iterations = 0;
    bool converged = false;
    bool numeric_convolution = false;
    double window_lo_ps = 0.0;
    double window_hi_ps = 0.0;
    std::vector<double> chi_square_history;  // after each accepted step

    CurveParams curve() const;
};

/// Weighted least squares of the binned model against h inside the window,
/// weights 1 / max(counts, 1). Throws FitError on non-convergence or a
/// singular normal matrix.
FitResult fit_model(const CorrelationHistogram& h, const FitModelConfig& cfg, const FitOptions& opt = {});

struct Stage1Options {
    double search_lo_ps = -2000.0;  // where to look for the central peak
    double search_hi_ps = 2000.0;
    double fss_min_ghz = 1.0;       // grid used for the starting point
    double fss_max_ghz = 40.0;
    double fss_step_ghz = 0.1;
    FitOptions fit;
};

/// Cross-port fit with phi pinned to 0: free {amplitude, fss, tau0, sigma}.
FitResult fit_stage1(const CorrelationHistogram& h_ab, double gamma_x, const Stage1Options& opt = {});

/// Same-port fit with fss, tau0, sigma pinned from stage 1: free {phi, amplitude}.
/// phi is bounded to [0, pi/2]; the curve for -phi is the opposite same-port
/// configuration, so the sign is fixed by which configuration h_aa holds.
FitResult fit_stage2(const CorrelationHistogram& h_aa, const FitResult& stage1, double gamma_x,
                     PortPair config = PortPair::AA, const FitOptions& opt = {});

std::string fit_result_json(const FitResult& r);
void write_fit_result(const std::filesystem::path& path, const FitResult& r);
/// tau_ps, data, model over the fit window.
void write_overlay_csv(const std::filesystem::path& path, const CorrelationHistogram& h, const FitResult& r);

}  // namespace chiralpair
