#include "chiralpair/fit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "chiralpair/faddeeva.hpp"
#include "chiralpair/quadrature.hpp"
#include "json.hpp"

namespace chiralpair {

using nlohmann::json;

namespace {

constexpr double kErfcxLimit = 25.0;

// Integral over u >= 0 of exp(-kappa u) * Gaussian(t - u; sigma), t and sigma in ns.
cplx emg(cplx kappa, double t, double sigma, bool* used_numeric) {
    if (sigma == 0.0) return t >= 0.0 ? std::exp(-kappa * t) : cplx(0.0);
    if (std::abs(kappa) * sigma / std::numbers::sqrt2 > kErfcxLimit) {
        if (used_numeric) *used_numeric = true;
        const double lo = std::max(0.0, t - 12.0 * sigma), hi = std::max(lo, t + 12.0 * sigma);
        if (hi <= lo) return 0.0;
        const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * sigma);
        auto r = quad::integrate<1>(
            [&](double u) {
                const double d = (t - u) / sigma;
                return quad::CVec<1>{norm * std::exp(-0.5 * d * d) * std::exp(-kappa * u)};
            },
            lo, hi, 1e-10);
        return r[0];
    }
    const cplx z = (kappa * sigma * sigma - t) / (std::numbers::sqrt2 * sigma);
    const double g = std::exp(-0.5 * t * t / (sigma * sigma));
    if (z.real() >= 0.0) return 0.5 * g * special::erfcx(z);
    return std::exp(0.5 * kappa * kappa * sigma * sigma - kappa * t) - 0.5 * g * special::erfcx(-z);
}

void check_curve(const CurveParams& p) {
    if (!(p.gamma_x > 0.0) || !std::isfinite(p.gamma_x)) throw std::invalid_argument("gamma_x must be positive");
    if (!(p.sigma_ps >= 0.0) || !std::isfinite(p.sigma_ps)) throw std::invalid_argument("sigma must be >= 0");
    if (!std::isfinite(p.fss) || !std::isfinite(p.phi) || !std::isfinite(p.tau0_ps) || !std::isfinite(p.amplitude))
        throw std::invalid_argument("curve parameters must be finite");
}

}  // namespace

double config_phase(PortPair config, double phi) {
    switch (config) {
        case PortPair::AA: return 2.0 * phi;
        case PortPair::BB: return -2.0 * phi;
        default: return 0.0;
    }
}

double model_point(const CurveParams& p, PortPair config, double tau_ps, bool* used_numeric) {
    const double t = (tau_ps - p.tau0_ps) * 1e-3;
    const double sigma = p.sigma_ps * 1e-3;
    const double g = p.gamma_x;
    const cplx osc = std::polar(1.0, config_phase(config, p.phi));
    const cplx sum = emg(g, t, sigma, used_numeric) + osc * emg(cplx(g, -p.fss), t, sigma, used_numeric);
    return p.amplitude * 4.0 * g * g * sum.real();
}

std::vector<double> model_curve(const CurveParams& p, PortPair config, std::span<const double> tau_ps,
                                bool* used_numeric) {
    check_curve(p);
    std::vector<double> out(tau_ps.size());
    for (std::size_t i = 0; i < tau_ps.size(); ++i) out[i] = model_point(p, config, tau_ps[i], used_numeric);
    return out;
}

std::vector<double> model_binned(const CurveParams& p, PortPair config, const CorrelationHistogram& axis,
                                 std::size_t b0, std::size_t b1, bool* used_numeric) {
    check_curve(p);
    if (b1 > axis.size() || b0 > b1) throw std::invalid_argument("bin range outside histogram");
    const std::int64_t per_bin = std::max<std::int64_t>(1, axis.bin_width_ps / axis.tick_ps);
    std::vector<double> out(b1 - b0, 0.0);
    for (std::size_t b = b0; b < b1; ++b) {
        double s = 0.0;
        for (std::int64_t k = 0; k < per_bin; ++k)
            s += model_point(p, config, axis.bin_lo(b) + static_cast<double>(k * axis.tick_ps), used_numeric);
        out[b - b0] = s;
    }
    return out;
}

void validate(const FitModelConfig& cfg) {
    if (!(cfg.gamma_x > 0.0)) throw std::invalid_argument("gamma_x must be positive");
    if (!(cfg.window_hi_ps > cfg.window_lo_ps)) throw std::invalid_argument("fit window is empty");
    std::set<std::string> known(kFitParameterNames.begin(), kFitParameterNames.end());
    for (const auto& [k, v] : cfg.fixed) {
        if (!known.count(k)) throw std::invalid_argument("unknown fit parameter '" + k + "'");
        if (cfg.free.count(k)) throw std::invalid_argument("parameter '" + k + "' is both fixed and free");
        if (!std::isfinite(v)) throw std::invalid_argument("fixed parameter '" + k + "' is not finite");
    }
    for (const auto& [k, b] : cfg.free) {
        if (!known.count(k)) throw std::invalid_argument("unknown fit parameter '" + k + "'");
        if (!(b.lower <= b.initial && b.initial <= b.upper))
            throw std::invalid_argument("initial value of '" + k + "' lies outside its bounds");
    }
    for (auto name : kFitParameterNames)
        if (!cfg.fixed.count(std::string(name)) && !cfg.free.count(std::string(name)))
            throw std::invalid_argument("parameter '" + std::string(name) + "' is neither fixed nor free");
    if (cfg.free.empty()) throw std::invalid_argument("no free parameters");
}

CurveParams FitResult::curve() const {
    CurveParams p;
    p.amplitude = values.at("amplitude");
    p.fss = values.at("fss");
    p.tau0_ps = values.at("tau0");
    p.sigma_ps = values.at("sigma");
    p.phi = values.at("phi");
    p.gamma_x = gamma_x;
    return p;
}

namespace {

CurveParams assemble(const std::map<std::string, double>& v, double gamma) {
    CurveParams p;
    p.amplitude = v.at("amplitude");
    p.fss = v.at("fss");
    p.tau0_ps = v.at("tau0");
    p.sigma_ps = v.at("sigma");
    p.phi = v.at("phi");
    p.gamma_x = gamma;
    return p;
}

double typical_scale(const std::string& name) {
    if (name == "tau0" || name == "sigma") return 1.0;  // ps
    if (name == "phi") return 0.1;
    if (name == "fss") return 1.0;
    return 0.0;
}

struct Window {
    std::size_t b0, b1;
};

Window window_bins(const CorrelationHistogram& h, double lo, double hi) {
    // Bins whose representative lag lies in [lo, hi).
    const double w = static_cast<double>(h.bin_width_ps);
    const double x0 = h.bin_position(0);
    const auto n = static_cast<double>(h.size());
    const double b0 = std::clamp(std::ceil((lo - x0) / w), 0.0, n);
    const double b1 = std::clamp(std::ceil((hi - x0) / w), 0.0, n);
    if (b0 >= b1) throw std::invalid_argument("fit window holds no histogram bins");
    return {static_cast<std::size_t>(b0), static_cast<std::size_t>(b1)};
}

}  // namespace

FitResult fit_model(const CorrelationHistogram& h, const FitModelConfig& cfg, const FitOptions& opt) {
    validate(h);
    validate(cfg);
    const Window win = window_bins(h, cfg.window_lo_ps, cfg.window_hi_ps);
    const std::size_t n = win.b1 - win.b0;

    std::vector<std::string> names;
    std::vector<ParamBound> bounds;
    for (auto name : kFitParameterNames) {
        auto it = cfg.free.find(std::string(name));
        if (it != cfg.free.end()) {
            names.emplace_back(name);
            bounds.push_back(it->second);
        }
    }
    const int m = static_cast<int>(names.size());
    if (static_cast<int>(n) <= m) throw std::invalid_argument("fit window has too few bins for the free parameters");

    Eigen::VectorXd data(static_cast<Eigen::Index>(n)), inv_sd(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        data(static_cast<Eigen::Index>(i)) = h.counts[win.b0 + i];
        inv_sd(static_cast<Eigen::Index>(i)) = 1.0 / std::sqrt(std::max(h.counts[win.b0 + i], 1.0));
    }

    std::map<std::string, double> values = cfg.fixed;
    bool numeric = false;
    auto residuals = [&](const Eigen::VectorXd& x) {
        for (int j = 0; j < m; ++j) values[names[static_cast<std::size_t>(j)]] = x(j);
        const auto model = model_binned(assemble(values, cfg.gamma_x), cfg.config, h, win.b0, win.b1, &numeric);
        Eigen::VectorXd r(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<Eigen::Index>(i);
            r(k) = (data(k) - model[i]) * inv_sd(k);
        }
        return r;
    };
    auto clamp = [&](Eigen::VectorXd x) {
        for (int j = 0; j < m; ++j) x(j) = std::clamp(x(j), bounds[static_cast<std::size_t>(j)].lower,
                                                      bounds[static_cast<std::size_t>(j)].upper);
        return x;
    };
    auto jacobian = [&](const Eigen::VectorXd& x) {
        Eigen::MatrixXd J(static_cast<Eigen::Index>(n), m);
        for (int j = 0; j < m; ++j) {
            const auto& b = bounds[static_cast<std::size_t>(j)];
            const double step =
                1e-6 * std::max(std::abs(x(j)), std::max(typical_scale(names[static_cast<std::size_t>(j)]), 1e-30));
            Eigen::VectorXd xp = x, xm = x;
            xp(j) = std::min(x(j) + step, b.upper);
            xm(j) = std::max(x(j) - step, b.lower);
            const double span = xp(j) - xm(j);
            if (span <= 0.0) {
                J.col(j).setZero();
                continue;
            }
            J.col(j) = (residuals(xp) - residuals(xm)) / span;
        }
        return J;
    };

    Eigen::VectorXd x(m);
    for (int j = 0; j < m; ++j) x(j) = bounds[static_cast<std::size_t>(j)].initial;
    Eigen::VectorXd r = residuals(x);
    double cost = r.squaredNorm();
    if (!std::isfinite(cost)) throw FitError("initial model evaluation is not finite");

    FitResult res;
    res.chi_square_history.push_back(cost);
    double lambda = 1e-3;
    bool converged = false;
    int it = 0;
    for (; it < opt.max_iterations && !converged; ++it) {
        const Eigen::MatrixXd J = jacobian(x);
        const Eigen::MatrixXd A = J.transpose() * J;
        const Eigen::VectorXd g = J.transpose() * r;
        const double diag_floor = 1e-12 * std::max(A.diagonal().maxCoeff(), 1e-300);
        bool accepted = false;
        while (!accepted) {
            Eigen::MatrixXd Aug = A;
            for (int j = 0; j < m; ++j) Aug(j, j) += lambda * std::max(A(j, j), diag_floor);
            const Eigen::VectorXd delta = Aug.ldlt().solve(-g);
            const Eigen::VectorXd xn = clamp(x + delta);
            const Eigen::VectorXd rn = residuals(xn);
            const double cn = rn.squaredNorm();
            if (std::isfinite(cn) && cn < cost) {
                const double rel = (cost - cn) / std::max(cost, 1e-300);
                x = xn;
                r = rn;
                cost = cn;
                res.chi_square_history.push_back(cost);
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < opt.rel_tolerance) converged = true;
            } else {
                lambda *= 4.0;
                // No downhill step at any damping: a (bounded) minimum.
                if (lambda > 1e14 || (xn - x).norm() <= 1e-15 * (1.0 + x.norm())) {
                    converged = true;
                    break;
                }
            }
        }
    }
    if (!converged) throw FitError("fit did not converge within " + std::to_string(opt.max_iterations) + " iterations");

    const Eigen::MatrixXd J = jacobian(x);
    const Eigen::MatrixXd A = J.transpose() * J;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw FitError("normal matrix is singular; parameters are not identifiable");

    res.config = cfg.config;
    res.gamma_x = cfg.gamma_x;
    for (int j = 0; j < m; ++j) values[names[static_cast<std::size_t>(j)]] = x(j);
    res.values = values;
    res.free_names = names;
    res.covariance = lu.inverse();
    for (int j = 0; j < m; ++j) {
        const auto& nm = names[static_cast<std::size_t>(j)];
        res.errors[nm] = std::sqrt(std::max(res.covariance(j, j), 0.0));
        const auto& b = bounds[static_cast<std::size_t>(j)];
        const double tol = 1e-9 * std::max({std::abs(b.lower), std::abs(b.upper), 1.0});
        if (x(j) - b.lower <= tol || b.upper - x(j) <= tol) res.at_bound.push_back(nm);
    }
    res.chi_square = cost;
    res.dof = static_cast<int>(n) - m;
    res.reduced_chi_square = cost / res.dof;
    res.iterations = it;
    res.converged = true;
    res.numeric_convolution = numeric;
    res.window_lo_ps = cfg.window_lo_ps;
    res.window_hi_ps = cfg.window_hi_ps;
    if (!std::isfinite(res.chi_square)) throw FitError("chi-square is not finite");
    return res;
}

namespace {

// Best linear amplitude and weighted cost for a unit-amplitude model.
std::pair<double, double> linear_amplitude(const std::vector<double>& data, const std::vector<double>& model) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double w = 1.0 / std::max(data[i], 1.0);
        num += w * data[i] * model[i];
        den += w * model[i] * model[i];
    }
    const double a = den > 0.0 ? std::max(num / den, 0.0) : 0.0;
    double cost = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double d = data[i] - a * model[i];
        cost += d * d / std::max(data[i], 1.0);
    }
    return {a, cost};
}

}  // namespace

FitResult fit_stage1(const CorrelationHistogram& h_ab, double gamma_x, const Stage1Options& opt) {
    validate(h_ab);
    if (!(gamma_x > 0.0)) throw std::invalid_argument("gamma_x must be positive");

    // Central peak: half-maximum point on the rising edge of the smoothed data.
    const double lo = std::max(opt.search_lo_ps, static_cast<double>(h_ab.tau_min_ps));
    const double hi = std::min(opt.search_hi_ps, static_cast<double>(h_ab.tau_max_ps));
    const Window sw = window_bins(h_ab, lo, hi);
    std::vector<double> smooth(sw.b1 - sw.b0, 0.0);
    const int half = std::max<int>(1, static_cast<int>(8 / h_ab.bin_width_ps));
    for (std::size_t i = 0; i < smooth.size(); ++i) {
        double s = 0.0;
        int c = 0;
        for (int k = -half; k <= half; ++k) {
            const auto j = static_cast<std::ptrdiff_t>(i) + k;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(smooth.size())) continue;
            s += h_ab.counts[sw.b0 + static_cast<std::size_t>(j)];
            ++c;
        }
        smooth[i] = s / c;
    }
    const auto peak = static_cast<std::size_t>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
    if (!(smooth[peak] > 0.0)) throw FitError("no coincidences in the central-peak search range");
    std::size_t edge = peak;
    while (edge > 0 && smooth[edge] > 0.5 * smooth[peak]) --edge;
    const double tau0_guess = h_ab.bin_position(sw.b0 + edge);

    // Grid scan over (S, tau0, sigma) with the amplitude solved linearly.
    double best_cost = std::numeric_limits<double>::infinity();
    CurveParams best;
    best.gamma_x = gamma_x;
    const double tail = 6.0 / gamma_x * 1e3;
    for (double sigma : {8.0, 15.0, 25.0}) {
        for (int dt = -4; dt <= 4; ++dt) {
            const double t0 = tau0_guess + 4.0 * dt;
            const Window w = window_bins(h_ab, t0 - 3.0 * sigma, t0 + tail);
            std::vector<double> data(h_ab.counts.begin() + static_cast<std::ptrdiff_t>(w.b0),
                                     h_ab.counts.begin() + static_cast<std::ptrdiff_t>(w.b1));
            for (double f = opt.fss_min_ghz; f <= opt.fss_max_ghz + 1e-9; f += opt.fss_step_ghz) {
                CurveParams c{1.0, ghz_to_angular(f), t0, sigma, 0.0, gamma_x};
                const auto model = model_binned(c, PortPair::AB, h_ab, w.b0, w.b1);
                auto [a, cost] = linear_amplitude(data, model);
                // Compare per bin, the window length varies with sigma.
                cost /= static_cast<double>(data.size());
                if (cost < best_cost) {
                    best_cost = cost;
                    best = c;
                    best.amplitude = a;
                }
            }
        }
    }
    if (!(best.amplitude > 0.0)) throw FitError("stage 1 starting point has zero amplitude");

    FitModelConfig cfg;
    cfg.config = PortPair::AB;
    cfg.gamma_x = gamma_x;
    cfg.fixed = {{"phi", 0.0}};
    cfg.free = {{"amplitude", {best.amplitude, 0.0, 1e3 * best.amplitude}},
                {"fss", {best.fss, 0.0, ghz_to_angular(2.0 * opt.fss_max_ghz)}},
                {"tau0", {best.tau0_ps, best.tau0_ps - 200.0, best.tau0_ps + 200.0}},
                {"sigma", {best.sigma_ps, 0.0, 500.0}}};
    cfg.window_lo_ps = best.tau0_ps - 3.0 * best.sigma_ps;
    cfg.window_hi_ps = best.tau0_ps + tail;
    FitResult first = fit_model(h_ab, cfg, opt.fit);

    // Refit with the window placed by the converged tau0 and sigma.
    const auto v = first.values;
    cfg.free["amplitude"].initial = v.at("amplitude");
    cfg.free["fss"].initial = v.at("fss");
    cfg.free["tau0"].initial = v.at("tau0");
    cfg.free["sigma"].initial = v.at("sigma");
    cfg.window_lo_ps = v.at("tau0") - 3.0 * v.at("sigma");
    cfg.window_hi_ps = v.at("tau0") + tail;
    FitResult r = fit_model(h_ab, cfg, opt.fit);
    r.stage = "stage1";
    return r;
}

FitResult fit_stage2(const CorrelationHistogram& h_aa, const FitResult& stage1, double gamma_x, PortPair config,
                     const FitOptions& opt) {
    validate(h_aa);
    if (!stage1.converged) throw std::invalid_argument("stage 1 did not converge");
    if (config != PortPair::AA && config != PortPair::BB)
        throw std::invalid_argument("stage 2 needs a same-port configuration (AA or BB)");
    const double fss = stage1.values.at("fss");
    const double tau0 = stage1.values.at("tau0");
    const double sigma = stage1.values.at("sigma");
    const double lo = tau0 - 3.0 * sigma, hi = tau0 + 6.0 / gamma_x * 1e3;
    const Window w = window_bins(h_aa, lo, hi);
    std::vector<double> data(h_aa.counts.begin() + static_cast<std::ptrdiff_t>(w.b0),
                             h_aa.counts.begin() + static_cast<std::ptrdiff_t>(w.b1));

    double best_cost = std::numeric_limits<double>::infinity(), best_phi = 0.0, best_amp = 0.0;
    constexpr int kSteps = 100;
    for (int i = 0; i <= kSteps; ++i) {
        const double phi = 0.5 * kPi * i / kSteps;
        const auto model = model_binned({1.0, fss, tau0, sigma, phi, gamma_x}, config, h_aa, w.b0, w.b1);
        auto [a, cost] = linear_amplitude(data, model);
        if (cost < best_cost) {
            best_cost = cost;
            best_phi = phi;
            best_amp = a;
        }
    }
    if (!(best_amp > 0.0)) throw FitError("stage 2 starting point has zero amplitude");

    FitModelConfig cfg;
    cfg.config = config;
    cfg.gamma_x = gamma_x;
    cfg.fixed = {{"fss", fss}, {"tau0", tau0}, {"sigma", sigma}};
    cfg.free = {{"amplitude", {best_amp, 0.0, 1e3 * best_amp}}, {"phi", {best_phi, 0.0, 0.5 * kPi}}};
    cfg.window_lo_ps = lo;
    cfg.window_hi_ps = hi;
    FitResult r = fit_model(h_aa, cfg, opt);
    r.stage = "stage2";
    return r;
}

std::string fit_result_json(const FitResult& r) {
    json params = json::object();
    for (const auto& [k, v] : r.values) {
        json e = {{"value", v}, {"free", r.errors.count(k) > 0}};
        if (r.errors.count(k)) e["error"] = r.errors.at(k);
        e["at_bound"] = std::find(r.at_bound.begin(), r.at_bound.end(), k) != r.at_bound.end();
        params[k] = e;
    }
    json cov = json::array();
    for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < r.covariance.cols(); ++j) row.push_back(r.covariance(i, j));
        cov.push_back(row);
    }
    json derived = {{"fss_ghz", angular_to_ghz(r.values.at("fss"))}, {"phi_over_pi", r.values.at("phi") / kPi}};
    if (r.errors.count("fss")) derived["fss_ghz_error"] = angular_to_ghz(r.errors.at("fss"));
    if (r.errors.count("phi")) derived["phi_over_pi_error"] = r.errors.at("phi") / kPi;
    json j = {{"stage", r.stage},
              {"config", std::string(to_string(r.config))},
              {"gamma_x", r.gamma_x},
              {"parameters", params},
              {"derived", derived},
              {"covariance", {{"names", r.free_names}, {"matrix", cov}}},
              {"chi_square", r.chi_square},
              {"dof", r.dof},
              {"reduced_chi_square", r.reduced_chi_square},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"numeric_convolution", r.numeric_convolution},
              {"window_ps", {r.window_lo_ps, r.window_hi_ps}}};
    return j.dump(2);
}

void write_fit_result(const std::filesystem::path& path, const FitResult& r) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << fit_result_json(r) << '\n';
}

void write_overlay_csv(const std::filesystem::path& path, const CorrelationHistogram& h, const FitResult& r) {
    const Window w = window_bins(h, r.window_lo_ps, r.window_hi_ps);
    const auto model = model_binned(r.curve(), r.config, h, w.b0, w.b1);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << "tau_ps,data,model\n" << std::setprecision(12);
    for (std::size_t b = w.b0; b < w.b1; ++b)
        os << h.bin_position(b) << ',' << h.counts[b] << ',' << model[b - w.b0] << '\n';
}

}  // namespace chiralpair
