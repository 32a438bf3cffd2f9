#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace sigkit {

// Calendar datetime at minute resolution, stored as minutes since
// 1970-01-01 00:00. No timezone: timestamps are opaque ordering keys.
struct Timestamp {
  std::int64_t minutes = 0;

  auto operator<=>(const Timestamp&) const = default;
};

// Builds a timestamp from civil fields; throws ValidationError on an invalid
// calendar date or time of day.
Timestamp make_timestamp(int year, int month, int day, int hour, int minute);

// "2017-12-01T16:31" (seconds omitted; they are always zero).
std::string to_iso(Timestamp ts);

// Accepts "M/D/YYYY H:MM" (bar-export format) or ISO-8601
// "YYYY-MM-DDTHH:MM[:SS]". Throws ValidationError on anything else.
Timestamp parse_timestamp(std::string_view text);

}  // namespace sigkit
