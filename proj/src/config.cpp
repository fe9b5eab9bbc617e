#include "chiralpair/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace chiralpair {

using nlohmann::json;

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw std::invalid_argument("'" + where + "' must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw std::invalid_argument("unknown key '" + k + "' in " + where);
}

void exclusive(const json& j, const std::string& where, const char* a, const char* b) {
    if (j.contains(a) && j.contains(b))
        throw std::invalid_argument(where + ": give either '" + a + "' or '" + b + "', not both");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument(where + "." + key + " has the wrong type");
    }
}

double read_number(const json& j, const char* key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_number()) throw std::invalid_argument(where + "." + key + " must be a number");
    return v.get<double>();
}

}  // namespace

void validate(const RunConfig& c) {
    validate(c.emitter);
    validate(c.instrument);
    if (c.correlate.bin_width_ps <= 0 || c.correlate.bin_width_ps % kTickPs != 0)
        throw std::invalid_argument("correlate.bin_width_ps must be a positive multiple of 4");
    if (c.correlate.window_ps <= 0 || c.correlate.window_ps % c.correlate.bin_width_ps != 0)
        throw std::invalid_argument("correlate.window_ps must be a positive multiple of the bin width");
    if (c.correlate.configs.empty()) throw std::invalid_argument("correlate.configs is empty");
    if (!(c.entanglement.tau_min_ns >= 0.0) || !(c.entanglement.tau_max_ns > c.entanglement.tau_min_ns))
        throw std::invalid_argument("entanglement tau range must satisfy 0 <= tau_min < tau_max");
    if (c.entanglement.points < 2) throw std::invalid_argument("entanglement.points must be >= 2");
    if (c.fit.cross_config != PortPair::AB && c.fit.cross_config != PortPair::BA)
        throw std::invalid_argument("fit.cross_config must be AB or BA");
    if (c.fit.same_config != PortPair::AA && c.fit.same_config != PortPair::BB)
        throw std::invalid_argument("fit.same_config must be AA or BB");
    if (!(c.fit.fss_min_ghz > 0.0) || !(c.fit.fss_max_ghz > c.fit.fss_min_ghz))
        throw std::invalid_argument("fit fss range must satisfy 0 < min < max");
    if (!(c.fieldmap_tau_ns >= 0.0)) throw std::invalid_argument("fieldmap.tau_ns must be >= 0");
    if (!(c.reflectance >= 0.0 && c.reflectance < 1.0)) throw std::invalid_argument("report.reflectance must be in [0, 1)");
}

std::vector<std::string> preset_names() { return {"qd1", "qd2", "qd3"}; }

RunConfig preset_config(std::string_view name) {
    RunConfig c;
    c.preset = std::string(name);
    if (name == "qd1") {
        c.emitter = EmitterParams::make(8.35, ghz_to_angular(12.78), 0.12 * kPi, 0.015, 13.1323);
    } else if (name == "qd2") {
        // Placeholder values: only "smaller splitting" is known for this dot.
        c.emitter = EmitterParams::make(8.35, ghz_to_angular(5.0), 0.12 * kPi, 0.015, 13.1323);
        c.preset_from_measurement = false;
    } else if (name == "qd3") {
        // Placeholder values: only "larger splitting" is known for this dot.
        c.emitter = EmitterParams::make(8.35, ghz_to_angular(25.0), 0.12 * kPi, 0.015, 13.1323);
        c.preset_from_measurement = false;
    } else {
        throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected qd1, qd2 or qd3)");
    }
    return c;
}

RunConfig run_config_from_json(std::string_view text, const RunConfig& base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    only_keys(j, "config",
              {"preset", "emitter", "instrument", "correlate", "entanglement", "fit", "fieldmap", "report",
               "timestamp_format"});
    RunConfig c = base;
    if (j.contains("preset")) {
        const RunConfig p = preset_config(j.at("preset").get<std::string>());
        c.preset = p.preset;
        c.preset_from_measurement = p.preset_from_measurement;
        c.emitter = p.emitter;
    }

    if (j.contains("emitter")) {
        const auto& e = j.at("emitter");
        only_keys(e, "emitter",
                  {"gamma_x", "fss", "fss_ghz", "phi", "phi_over_pi", "jitter_sigma", "jitter_sigma_ps", "rep_period"});
        exclusive(e, "emitter", "fss", "fss_ghz");
        exclusive(e, "emitter", "phi", "phi_over_pi");
        exclusive(e, "emitter", "jitter_sigma", "jitter_sigma_ps");
        EmitterParams p = c.emitter;
        if (e.contains("gamma_x")) p.gamma_x = read_number(e, "gamma_x", "emitter");
        if (e.contains("fss")) p.fss = read_number(e, "fss", "emitter");
        if (e.contains("fss_ghz")) p.fss = ghz_to_angular(read_number(e, "fss_ghz", "emitter"));
        if (e.contains("phi")) p.phi = read_number(e, "phi", "emitter");
        if (e.contains("phi_over_pi")) p.phi = kPi * read_number(e, "phi_over_pi", "emitter");
        if (e.contains("jitter_sigma")) p.jitter_sigma = read_number(e, "jitter_sigma", "emitter");
        if (e.contains("jitter_sigma_ps")) p.jitter_sigma = 1e-3 * read_number(e, "jitter_sigma_ps", "emitter");
        if (e.contains("rep_period")) p.rep_period = read_number(e, "rep_period", "emitter");
        c.emitter = EmitterParams::make(p.gamma_x, p.fss, p.phi, p.jitter_sigma, p.rep_period);
    }

    std::optional<std::uint64_t> pulses;
    if (j.contains("instrument")) {
        const auto& i = j.at("instrument");
        only_keys(i, "instrument",
                  {"efficiency_xx_a", "efficiency_xx_b", "efficiency_x_a", "efficiency_x_b", "dark_rate",
                   "pair_probability", "rep_rate_drift", "duration", "pulses", "seed", "channel_delay_ps",
                   "multiphoton_probability"});
        exclusive(i, "instrument", "duration", "pulses");
        auto& in = c.instrument;
        for (auto [key, field] : {std::pair{"efficiency_xx_a", &in.efficiency_xx_a},
                                  std::pair{"efficiency_xx_b", &in.efficiency_xx_b},
                                  std::pair{"efficiency_x_a", &in.efficiency_x_a},
                                  std::pair{"efficiency_x_b", &in.efficiency_x_b}, std::pair{"dark_rate", &in.dark_rate},
                                  std::pair{"pair_probability", &in.pair_probability},
                                  std::pair{"rep_rate_drift", &in.rep_rate_drift}, std::pair{"duration", &in.duration},
                                  std::pair{"multiphoton_probability", &in.multiphoton_probability}})
            if (i.contains(key)) *field = read_number(i, key, "instrument");
        read(i, "seed", in.seed, "instrument");
        read(i, "channel_delay_ps", in.channel_delay_ps, "instrument");
        if (i.contains("pulses")) {
            std::uint64_t n = 0;
            read(i, "pulses", n, "instrument");
            pulses = n;
        }
    }
    if (pulses) {
        if (*pulses == 0) throw std::invalid_argument("instrument.pulses must be positive");
        c.instrument.duration = duration_for_pulses(c.emitter, *pulses);
    }

    if (j.contains("correlate")) {
        const auto& k = j.at("correlate");
        only_keys(k, "correlate", {"bin_width_ps", "window_ps", "configs", "exclude_self_pairs", "threads"});
        read(k, "bin_width_ps", c.correlate.bin_width_ps, "correlate");
        read(k, "window_ps", c.correlate.window_ps, "correlate");
        read(k, "exclude_self_pairs", c.correlate.exclude_self_pairs, "correlate");
        read(k, "threads", c.correlate.threads, "correlate");
        if (k.contains("configs")) {
            std::vector<std::string> names;
            read(k, "configs", names, "correlate");
            c.correlate.configs.clear();
            for (const auto& n : names) c.correlate.configs.push_back(port_pair_from_string(n));
        }
    }
    if (j.contains("entanglement")) {
        const auto& e = j.at("entanglement");
        only_keys(e, "entanglement", {"tau_min_ns", "tau_max_ns", "points", "threads"});
        read(e, "tau_min_ns", c.entanglement.tau_min_ns, "entanglement");
        read(e, "tau_max_ns", c.entanglement.tau_max_ns, "entanglement");
        read(e, "points", c.entanglement.points, "entanglement");
        read(e, "threads", c.entanglement.threads, "entanglement");
    }
    if (j.contains("fit")) {
        const auto& f = j.at("fit");
        only_keys(f, "fit", {"cross_config", "same_config", "fss_min_ghz", "fss_max_ghz"});
        std::string s;
        if (f.contains("cross_config")) {
            read(f, "cross_config", s, "fit");
            c.fit.cross_config = port_pair_from_string(s);
        }
        if (f.contains("same_config")) {
            read(f, "same_config", s, "fit");
            c.fit.same_config = port_pair_from_string(s);
        }
        read(f, "fss_min_ghz", c.fit.fss_min_ghz, "fit");
        read(f, "fss_max_ghz", c.fit.fss_max_ghz, "fit");
    }
    if (j.contains("fieldmap")) {
        only_keys(j.at("fieldmap"), "fieldmap", {"tau_ns"});
        read(j.at("fieldmap"), "tau_ns", c.fieldmap_tau_ns, "fieldmap");
    }
    if (j.contains("report")) {
        only_keys(j.at("report"), "report", {"reflectance"});
        read(j.at("report"), "reflectance", c.reflectance, "report");
    }
    if (j.contains("timestamp_format")) {
        const auto f = j.at("timestamp_format").get<std::string>();
        if (f == "binary") c.timestamp_format = TimestampFormat::Binary;
        else if (f == "csv") c.timestamp_format = TimestampFormat::Csv;
        else throw std::invalid_argument("timestamp_format must be 'binary' or 'csv'");
    }
    validate(c);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
    std::ifstream is(path);
    if (!is) throw std::invalid_argument("cannot open config " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return run_config_from_json(ss.str(), base);
}

std::string run_config_to_json(const RunConfig& c) {
    const auto& e = c.emitter;
    const auto& i = c.instrument;
    json configs = json::array();
    for (auto p : c.correlate.configs) configs.push_back(std::string(to_string(p)));
    json j = {
        {"emitter",
         {{"gamma_x", e.gamma_x}, {"fss", e.fss}, {"phi", e.phi}, {"jitter_sigma", e.jitter_sigma},
          {"rep_period", e.rep_period}}},
        {"instrument",
         {{"efficiency_xx_a", i.efficiency_xx_a},
          {"efficiency_xx_b", i.efficiency_xx_b},
          {"efficiency_x_a", i.efficiency_x_a},
          {"efficiency_x_b", i.efficiency_x_b},
          {"dark_rate", i.dark_rate},
          {"pair_probability", i.pair_probability},
          {"rep_rate_drift", i.rep_rate_drift},
          {"duration", i.duration},
          {"seed", i.seed},
          {"channel_delay_ps", i.channel_delay_ps},
          {"multiphoton_probability", i.multiphoton_probability}}},
        {"correlate",
         {{"bin_width_ps", c.correlate.bin_width_ps},
          {"window_ps", c.correlate.window_ps},
          {"configs", configs},
          {"exclude_self_pairs", c.correlate.exclude_self_pairs},
          {"threads", c.correlate.threads}}},
        {"entanglement",
         {{"tau_min_ns", c.entanglement.tau_min_ns},
          {"tau_max_ns", c.entanglement.tau_max_ns},
          {"points", c.entanglement.points},
          {"threads", c.entanglement.threads}}},
        {"fit",
         {{"cross_config", std::string(to_string(c.fit.cross_config))},
          {"same_config", std::string(to_string(c.fit.same_config))},
          {"fss_min_ghz", c.fit.fss_min_ghz},
          {"fss_max_ghz", c.fit.fss_max_ghz}}},
        {"fieldmap", {{"tau_ns", c.fieldmap_tau_ns}}},
        {"report", {{"reflectance", c.reflectance}}},
        {"timestamp_format", c.timestamp_format == TimestampFormat::Binary ? "binary" : "csv"}};
    if (!c.preset.empty()) j["preset"] = c.preset;
    return j.dump(2);
}

}  // namespace chiralpair
