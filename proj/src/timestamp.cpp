#include "sigkit/timestamp.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "sigkit/errors.hpp"
#include "sigkit/text.hpp"

namespace sigkit {

namespace {

constexpr std::int64_t kMinutesPerDay = 24 * 60;

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && is_leap(y)) return 29;
  return kDays[static_cast<std::size_t>(m - 1)];
}

// Days since 1970-01-01 for a civil date (Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

int parse_number(std::string_view s, std::string_view what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ValidationError("invalid " + std::string(what) + " in timestamp: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

Timestamp make_timestamp(int year, int month, int day, int hour, int minute) {
  if (month < 1 || month > 12) throw ValidationError("month out of range: " + std::to_string(month));
  if (day < 1 || day > days_in_month(year, month)) {
    throw ValidationError("day out of range: " + std::to_string(day));
  }
  if (hour < 0 || hour > 23) throw ValidationError("hour out of range: " + std::to_string(hour));
  if (minute < 0 || minute > 59) throw ValidationError("minute out of range: " + std::to_string(minute));
  return Timestamp{days_from_civil(year, month, day) * kMinutesPerDay + hour * 60 + minute};
}

std::string to_iso(Timestamp ts) {
  std::int64_t days = ts.minutes / kMinutesPerDay;
  std::int64_t rem = ts.minutes % kMinutesPerDay;
  if (rem < 0) {
    rem += kMinutesPerDay;
    days -= 1;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d", y, m, d, static_cast<int>(rem / 60),
                static_cast<int>(rem % 60));
  return buf;
}

Timestamp parse_timestamp(std::string_view text) {
  const std::string_view s = trim(text);
  if (s.empty()) throw ValidationError("empty timestamp");

  // ISO-8601: YYYY-MM-DD[T ]HH:MM[:SS]
  if (s.find('-') != std::string_view::npos) {
    const std::size_t sep = s.find_first_of("T ");
    if (sep == std::string_view::npos) throw ValidationError("timestamp missing time of day: '" + std::string(s) + "'");
    const std::string_view date = s.substr(0, sep);
    std::string_view time = trim(s.substr(sep + 1));
    const auto dparts = split_fields(date, '-');
    if (dparts.size() != 3) throw ValidationError("bad ISO date: '" + std::string(date) + "'");
    auto tparts = split_fields(time, ':');
    if (tparts.size() == 3) {
      if (parse_number(tparts[2], "seconds") != 0) {
        throw ValidationError("sub-minute timestamp not representable: '" + std::string(s) + "'");
      }
      tparts.pop_back();
    }
    if (tparts.size() != 2) throw ValidationError("bad ISO time: '" + std::string(time) + "'");
    return make_timestamp(parse_number(dparts[0], "year"), parse_number(dparts[1], "month"),
                          parse_number(dparts[2], "day"), parse_number(tparts[0], "hour"),
                          parse_number(tparts[1], "minute"));
  }

  // M/D/YYYY H:MM
  const std::size_t sp = s.find(' ');
  if (sp == std::string_view::npos) throw ValidationError("timestamp missing time of day: '" + std::string(s) + "'");
  const auto dparts = split_fields(s.substr(0, sp), '/');
  const auto tparts = split_fields(trim(s.substr(sp + 1)), ':');
  if (dparts.size() != 3) throw ValidationError("bad date: '" + std::string(s) + "'");
  if (tparts.size() != 2) throw ValidationError("bad time: '" + std::string(s) + "'");
  return make_timestamp(parse_number(dparts[2], "year"), parse_number(dparts[0], "month"),
                        parse_number(dparts[1], "day"), parse_number(tparts[0], "hour"),
                        parse_number(tparts[1], "minute"));
}

}  // namespace sigkit
