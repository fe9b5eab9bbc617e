#include "chiralpair/timestamp_io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace chiralpair {

using nlohmann::json;

namespace {

std::array<char, 8> to_le(std::uint64_t v) {
    std::array<char, 8> b;
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    return b;
}

std::uint64_t from_le(const std::array<unsigned char, 8>& b) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void write_timestamps(std::ostream& os, const TimestampStream& s, const TimestampHeader& h) {
    if (!s.is_sorted()) throw std::invalid_argument("timestamp stream is not sorted");
    json head = {{"channel", s.channel},
                 {"tick_ps", s.tick_ps},
                 {"duration", s.duration},
                 {"seed", h.seed},
                 {"params_hash", h.params_hash},
                 {"format", h.format == TimestampFormat::Binary ? "binary" : "csv"},
                 {"count", s.ticks.size()}};
    os << head.dump() << '\n';
    if (h.format == TimestampFormat::Binary) {
        for (auto t : s.ticks) {
            const auto b = to_le(t);
            os.write(b.data(), 8);
        }
    } else {
        for (auto t : s.ticks) os << t << '\n';
    }
    if (!os) throw std::runtime_error("failed writing timestamp stream");
}

TimestampStream read_timestamps(std::istream& is, TimestampHeader* h) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("timestamp file is empty");
    json head;
    try {
        head = json::parse(line);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("timestamp header is not valid JSON: ") + e.what());
    }
    for (const char* key : {"channel", "tick_ps", "duration", "format", "count"})
        if (!head.contains(key)) throw std::invalid_argument(std::string("timestamp header lacks '") + key + "'");

    TimestampStream s;
    s.channel = head.at("channel").get<std::string>();
    s.tick_ps = head.at("tick_ps").get<std::int64_t>();
    s.duration = head.at("duration").get<double>();
    const auto count = head.at("count").get<std::uint64_t>();
    const auto fmt = head.at("format").get<std::string>();
    if (fmt != "binary" && fmt != "csv") throw std::invalid_argument("unknown timestamp format '" + fmt + "'");

    s.ticks.reserve(count);
    if (fmt == "binary") {
        std::array<unsigned char, 8> b;
        for (std::uint64_t i = 0; i < count; ++i) {
            if (!is.read(reinterpret_cast<char*>(b.data()), 8))
                throw std::invalid_argument("timestamp file truncated");
            s.ticks.push_back(from_le(b));
        }
    } else {
        for (std::uint64_t i = 0; i < count; ++i) {
            std::uint64_t v;
            if (!(is >> v)) throw std::invalid_argument("timestamp file truncated");
            s.ticks.push_back(v);
        }
    }
    if (!s.is_sorted()) throw std::invalid_argument("timestamp file is not sorted");
    if (h) {
        h->seed = head.value("seed", std::uint64_t{0});
        h->params_hash = head.value("params_hash", std::string{});
        h->format = fmt == "binary" ? TimestampFormat::Binary : TimestampFormat::Csv;
    }
    return s;
}

void write_timestamps(const std::filesystem::path& path, const TimestampStream& s, const TimestampHeader& h) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_timestamps(os, s, h);
}

TimestampStream read_timestamps(const std::filesystem::path& path, TimestampHeader* h) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::invalid_argument("cannot open timestamp file " + path.string());
    return read_timestamps(is, h);
}

std::string fnv1a_hex(const std::string& data) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string params_hash(const EmitterParams& p, const InstrumentParams& inst) {
    json j = {{"gamma_x", p.gamma_x},
              {"fss", p.fss},
              {"phi", p.phi},
              {"jitter_sigma", p.jitter_sigma},
              {"rep_period", p.rep_period},
              {"efficiency_xx_a", inst.efficiency_xx_a},
              {"efficiency_xx_b", inst.efficiency_xx_b},
              {"efficiency_x_a", inst.efficiency_x_a},
              {"efficiency_x_b", inst.efficiency_x_b},
              {"dark_rate", inst.dark_rate},
              {"pair_probability", inst.pair_probability},
              {"rep_rate_drift", inst.rep_rate_drift},
              {"duration", inst.duration},
              {"seed", inst.seed},
              {"channel_delay_ps", inst.channel_delay_ps},
              {"multiphoton_probability", inst.multiphoton_probability}};
    return fnv1a_hex(j.dump());
}

}  // namespace chiralpair
