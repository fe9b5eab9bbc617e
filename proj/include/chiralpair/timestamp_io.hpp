#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "chiralpair/simulate.hpp"

namespace chiralpair {

enum class TimestampFormat { Binary, Csv };

/// Header metadata carried by a timestamp file in addition to the stream itself.
struct TimestampHeader {
    std::uint64_t seed = 0;
    std::string params_hash;
    TimestampFormat format = TimestampFormat::Binary;
};

// File layout: one JSON object on the first line
//   {"channel":..., "count":N, "duration":..., "format":"binary"|"csv",
//    "params_hash":..., "seed":..., "tick_ps":4}
// followed by either N little-endian uint64 tick counts or N decimal lines.
void write_timestamps(std::ostream& os, const TimestampStream& s, const TimestampHeader& h);
TimestampStream read_timestamps(std::istream& is, TimestampHeader* h = nullptr);

void write_timestamps(const std::filesystem::path& path, const TimestampStream& s, const TimestampHeader& h);
TimestampStream read_timestamps(const std::filesystem::path& path, TimestampHeader* h = nullptr);

/// FNV-1a 64-bit hash as 16 hex digits.
std::string fnv1a_hex(const std::string& data);

/// Stable hash of the emitter + instrument parameters (canonical JSON).
std::string params_hash(const EmitterParams& p, const InstrumentParams& inst);

}  // namespace chiralpair
