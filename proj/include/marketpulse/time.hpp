#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace marketpulse {

/// UTC epoch seconds.
using Timestamp = std::chrono::sys_seconds;
/// UTC calendar day.
using Date = std::chrono::sys_days;

inline constexpr std::int64_t kSecondsPerDay = 86400;
inline constexpr std::int64_t kSecondsPerHour = 3600;

inline Timestamp timestamp_from_epoch(std::int64_t seconds) {
  return Timestamp{std::chrono::seconds{seconds}};
}
inline std::int64_t epoch_seconds(Timestamp t) { return t.time_since_epoch().count(); }

inline Date date_from_days(std::int64_t days) { return Date{std::chrono::days{days}}; }
inline std::int64_t epoch_days(Date d) { return d.time_since_epoch().count(); }

/// The UTC day containing t (floor, also for pre-1970 instants).
inline Date day_of(Timestamp t) { return std::chrono::floor<std::chrono::days>(t); }
inline Timestamp start_of(Date d) { return Timestamp{d}; }

/// Whole days from `from` to `to` (negative if `to` is earlier).
inline std::int64_t days_between(Date from, Date to) { return (to - from).count(); }

/// Parses "YYYY-MM-DD"; throws Error(ParseError) on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);

}  // namespace marketpulse
