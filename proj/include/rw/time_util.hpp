#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace rw {

// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

// Sensor cadence: one reading per lane every 2 minutes.
constexpr int kSlotSeconds = 120;

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int year, unsigned month, unsigned day);

// Inverse of days_from_civil.
void civil_from_days(std::int64_t days, int& year, unsigned& month, unsigned& day);

// 0 = Monday ... 6 = Sunday.
int weekday_index(std::int64_t days);

// Strict "YYYY-MM-DDTHH:MM:SSZ". Returns false on malformed input.
bool parse_iso8601(std::string_view text, Timestamp& out);

// "YYYY-MM-DD" -> midnight UTC.
bool parse_date(std::string_view text, Timestamp& out);

std::string format_iso8601(Timestamp ts);

// Writes exactly 20 bytes ("YYYY-MM-DDTHH:MM:SSZ"), no terminator.
void format_iso8601(Timestamp ts, char* out20);

std::string format_date(Timestamp ts);

}  // namespace rw
