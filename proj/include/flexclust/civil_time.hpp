#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace flexclust {

// Timestamps are naive local wall-clock times. They are carried on the
// system clock's epoch purely as a counting device; no zone or DST rules
// are ever applied.
using Timestamp = std::chrono::sys_seconds;
using Date = std::chrono::sys_days;

/// Parses `YYYY-MM-DDTHH:MM:SS` exactly. Returns nullopt for anything else,
/// including out-of-range fields (Feb 30, hour 24, ...).
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Parses `YYYY-MM-DD` exactly.
std::optional<Date> parse_date(std::string_view text);

std::string format_timestamp(Timestamp t);
std::string format_date(Date d);

inline Date date_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }

inline Timestamp make_timestamp(Date d, int hour, int minute, int second = 0)
{
    return Timestamp{d} + std::chrono::hours{hour} + std::chrono::minutes{minute}
           + std::chrono::seconds{second};
}

inline Date make_date(int y, unsigned m, unsigned d)
{
    return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

} // namespace flexclust
