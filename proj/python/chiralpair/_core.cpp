#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "chiralpair/chiralfield.hpp"
#include "chiralpair/correlate.hpp"
#include "chiralpair/entanglement.hpp"
#include "chiralpair/fit.hpp"
#include "chiralpair/model.hpp"
#include "chiralpair/simulate.hpp"
#include "chiralpair/timematch.hpp"

namespace py = pybind11;
using namespace chiralpair;

namespace {

py::dict fit_dict(const FitResult& r) {
    py::dict d;
    d["stage"] = r.stage;
    d["values"] = r.values;
    d["errors"] = r.errors;
    d["at_bound"] = r.at_bound;
    d["chi_square"] = r.chi_square;
    d["reduced_chi_square"] = r.reduced_chi_square;
    d["dof"] = r.dof;
    d["converged"] = r.converged;
    return d;
}

py::array_t<std::uint64_t> ticks_array(const TimestampStream& s) {
    return py::array_t<std::uint64_t>(static_cast<py::ssize_t>(s.ticks.size()), s.ticks.data());
}

TimestampStream stream_from(const std::string& label, py::array_t<std::uint64_t, py::array::c_style> ticks,
                            double duration) {
    TimestampStream s;
    s.channel = label;
    s.duration = duration;
    s.ticks.assign(ticks.data(), ticks.data() + ticks.size());
    return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Biexciton cascade in a chiral waveguide: model, simulation and analysis";

    py::register_exception<AlignmentError>(m, "AlignmentError", PyExc_RuntimeError);
    py::register_exception<FitError>(m, "FitError", PyExc_RuntimeError);
    py::register_exception<DegenerateStateError>(m, "DegenerateStateError", PyExc_ValueError);

    py::enum_<PortPair>(m, "PortPair")
        .value("AA", PortPair::AA)
        .value("AB", PortPair::AB)
        .value("BA", PortPair::BA)
        .value("BB", PortPair::BB);

    py::class_<EmitterParams>(m, "EmitterParams")
        .def(py::init(&EmitterParams::make), py::arg("gamma_x"), py::arg("fss"), py::arg("phi"),
             py::arg("jitter_sigma") = 0.0, py::arg("rep_period") = 13.1323)
        .def_readonly("gamma_x", &EmitterParams::gamma_x)
        .def_readonly("fss", &EmitterParams::fss)
        .def_readonly("phi", &EmitterParams::phi)
        .def_readonly("jitter_sigma", &EmitterParams::jitter_sigma)
        .def_readonly("rep_period", &EmitterParams::rep_period)
        .def("with_phi", &EmitterParams::with_phi)
        .def("with_jitter", &EmitterParams::with_jitter);

    m.def("ghz_to_angular", &ghz_to_angular);
    m.def("angular_to_ghz", &angular_to_ghz);
    m.def("coincidence_probability", &coincidence_probability, py::arg("params"), py::arg("tau"), py::arg("config"));
    m.def("amplitudes", [](const EmitterParams& p, double tau) {
        const auto a = amplitudes(p, tau);
        return std::array<std::complex<double>, 4>{a.psi_aa, a.psi_ab, a.psi_ba, a.psi_bb};
    });
    m.def("concurrence_pure", &concurrence_pure, py::arg("params"), py::arg("tau"));
    m.def("concurrence_jittered", [](const EmitterParams& p, double tau) {
        return concurrence_jittered(jitter_averaged_density(p, tau));
    });
    m.def(
        "concurrence_sweep",
        [](const EmitterParams& p, const std::vector<double>& taus, unsigned threads) {
            std::vector<double> out;
            for (const auto& pt : concurrence_sweep(p, taus, threads)) out.push_back(pt.concurrence);
            return out;
        },
        py::arg("params"), py::arg("taus"), py::arg("threads") = 1);
    m.def("phase_reduction", &phase_reduction, py::arg("ideal_phi"), py::arg("r"));
    m.def("ideal_phase_from", &ideal_phase_from, py::arg("observed_phi"), py::arg("r"));
    m.def("directionality", py::overload_cast<std::complex<double>, std::complex<double>>(&directionality));

    py::class_<InstrumentParams>(m, "InstrumentParams")
        .def(py::init<>())
        .def_readwrite("efficiency_xx_a", &InstrumentParams::efficiency_xx_a)
        .def_readwrite("efficiency_xx_b", &InstrumentParams::efficiency_xx_b)
        .def_readwrite("efficiency_x_a", &InstrumentParams::efficiency_x_a)
        .def_readwrite("efficiency_x_b", &InstrumentParams::efficiency_x_b)
        .def_readwrite("dark_rate", &InstrumentParams::dark_rate)
        .def_readwrite("pair_probability", &InstrumentParams::pair_probability)
        .def_readwrite("rep_rate_drift", &InstrumentParams::rep_rate_drift)
        .def_readwrite("duration", &InstrumentParams::duration)
        .def_readwrite("seed", &InstrumentParams::seed)
        .def_readwrite("channel_delay_ps", &InstrumentParams::channel_delay_ps)
        .def_readwrite("multiphoton_probability", &InstrumentParams::multiphoton_probability);

    m.def("duration_for_pulses", &duration_for_pulses);
    m.def("simulate_run", [](const EmitterParams& p, const InstrumentParams& inst) {
        py::dict d;
        for (const auto& s : simulate_run(p, inst)) d[py::str(s.channel)] = ticks_array(s);
        return d;
    });

    py::class_<CorrelationHistogram>(m, "Histogram")
        .def_readonly("config", &CorrelationHistogram::config)
        .def_readonly("bin_width_ps", &CorrelationHistogram::bin_width_ps)
        .def_readonly("tau_min_ps", &CorrelationHistogram::tau_min_ps)
        .def_readonly("tau_max_ps", &CorrelationHistogram::tau_max_ps)
        .def_readonly("total_pairs", &CorrelationHistogram::total_pairs)
        .def_property_readonly("counts",
                               [](const CorrelationHistogram& h) {
                                   return py::array_t<double>(static_cast<py::ssize_t>(h.size()), h.counts.data());
                               })
        .def_property_readonly("lags", [](const CorrelationHistogram& h) {
            py::array_t<double> out(static_cast<py::ssize_t>(h.size()));
            auto v = out.mutable_unchecked<1>();
            for (std::size_t i = 0; i < h.size(); ++i) v(static_cast<py::ssize_t>(i)) = h.bin_position(i);
            return out;
        });
    m.def("read_histogram", [](const std::string& path) { return read_histogram(std::filesystem::path(path)); });
    m.def("write_histogram",
          [](const std::string& path, const CorrelationHistogram& h) { write_histogram(std::filesystem::path(path), h); });

    m.def(
        "correlate",
        [](py::array_t<std::uint64_t, py::array::c_style> start, py::array_t<std::uint64_t, py::array::c_style> stop,
           std::int64_t tau_min_ps, std::int64_t tau_max_ps, std::int64_t bin_width_ps, double duration) {
            CorrelateOptions o;
            o.tau_min_ps = tau_min_ps;
            o.tau_max_ps = tau_max_ps;
            o.bin_width_ps = bin_width_ps;
            py::gil_scoped_release release;
            return correlate_streams(stream_from("start", start, duration), stream_from("stop", stop, duration), o);
        },
        py::arg("start"), py::arg("stop"), py::arg("tau_min_ps"), py::arg("tau_max_ps"), py::arg("bin_width_ps") = 4,
        py::arg("duration") = 0.0);
    m.def(
        "g2_pulsed",
        [](const CorrelationHistogram& h, double rep_period_ps) {
            const auto g = g2_pulsed(h, rep_period_ps);
            return py::make_tuple(g.value, g.error);
        },
        py::arg("hist"), py::arg("rep_period_ps"));

    m.def("estimate_rep_rate", [](const CorrelationHistogram& h) {
        const auto e = estimate_rep_rate(h);
        return py::make_tuple(e.period_ps, e.uncertainty_ps);
    });
    m.def("align", [](const CorrelationHistogram& ref, const CorrelationHistogram& mov) {
        auto [r, out] = align_datasets(ref, mov);
        py::dict d;
        d["applied_shift_ps"] = r.applied_shift_ps;
        d["scale"] = r.scale;
        d["residual_lag_bins"] = r.residual_lag_bins;
        d["edge_disagreement_ps"] = r.edge_disagreement_ps;
        d["quality"] = r.quality;
        return py::make_tuple(d, out);
    });
    m.def(
        "synthetic_comb",
        [](double period_ps, double tau_zero_ps, std::int64_t half_span_ps, double peak_counts, std::uint64_t seed) {
            CombSpec s;
            s.period_ps = period_ps;
            s.tau_zero_ps = tau_zero_ps;
            s.tau_min_ps = -half_span_ps;
            s.tau_max_ps = half_span_ps;
            s.peak_counts = peak_counts;
            s.seed = seed;
            return synthetic_comb(s);
        },
        py::arg("period_ps") = 13132.3, py::arg("tau_zero_ps") = 0.0, py::arg("half_span_ps") = 50'000'000,
        py::arg("peak_counts") = 2000.0, py::arg("seed") = 1);

    m.def(
        "model_curve",
        [](const std::vector<double>& tau_ps, PortPair config, double amplitude, double fss, double tau0_ps,
           double sigma_ps, double phi, double gamma_x) {
            return model_curve({amplitude, fss, tau0_ps, sigma_ps, phi, gamma_x}, config, tau_ps);
        },
        py::arg("tau_ps"), py::arg("config"), py::arg("amplitude"), py::arg("fss"), py::arg("tau0_ps"),
        py::arg("sigma_ps"), py::arg("phi"), py::arg("gamma_x") = 8.35);
    m.def(
        "fit_two_stage",
        [](const CorrelationHistogram& cross, const CorrelationHistogram& same, double gamma_x, PortPair same_config) {
            const auto s1 = fit_stage1(cross, gamma_x);
            const auto s2 = fit_stage2(same, s1, gamma_x, same_config);
            return py::make_tuple(fit_dict(s1), fit_dict(s2));
        },
        py::arg("cross"), py::arg("same"), py::arg("gamma_x") = 8.35, py::arg("same_config") = PortPair::AA);
}
