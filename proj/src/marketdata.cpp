#include "sigkit/marketdata.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sigkit/text.hpp"

namespace sigkit::marketdata {

namespace {

struct ColumnIndex {
  std::size_t date, open, close, low, high, value, volume, num_ticks;
  std::size_t count;
};

std::string canonical_name(std::string_view raw) {
  std::string n = lower(trim(raw));
  if (n == "timestamp" || n == "datetime") return "date";
  if (n == "number_ticks" || n == "numticks" || n == "ticks") return "num_ticks";
  return n;
}

ColumnIndex resolve_header(const std::vector<std::string_view>& fields) {
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const std::string name = canonical_name(fields[i]);
    if (name.empty()) throw ParseError(1, "empty header field");
    if (!pos.emplace(name, i).second) throw ParseError(1, "duplicate header column '" + name + "'");
  }
  auto need = [&](const char* name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw ParseError(1, std::string("missing required column '") + name + "'");
    return it->second;
  };
  return ColumnIndex{need("date"),  need("open"),   need("close"),
                     need("low"),   need("high"),   need("value"),
                     need("volume"), need("num_ticks"), fields.size()};
}

}  // namespace

void validate_bar(const MinuteBar& bar, std::size_t row) {
  auto fail = [&](const std::string& msg) {
    throw ValidationError(row, msg + " at " + to_iso(bar.timestamp));
  };
  for (double p : {bar.open, bar.close, bar.low, bar.high}) {
    if (!(p > 0.0) || !std::isfinite(p)) fail("non-positive price");
  }
  if (!std::isfinite(bar.value)) fail("non-finite traded value");
  if (bar.low > bar.high) fail("low above high");
  if (bar.low > std::min(bar.open, bar.close)) fail("low above open/close");
  if (bar.high < std::max(bar.open, bar.close)) fail("high below open/close");
  if (bar.volume < 0) fail("negative volume");
  if (bar.num_ticks < 0) fail("negative tick count");
}

std::vector<MinuteBar> parse_bars(std::string_view text, std::vector<std::string>* violations) {
  const auto lines = split_lines(text);
  std::size_t header_idx = 0;
  while (header_idx < lines.size() && trim(lines[header_idx]).empty()) ++header_idx;
  if (header_idx == lines.size()) throw ParseError(1, "no header row");

  const std::string_view header = lines[header_idx];
  const bool comma = header.find(',') != std::string_view::npos;
  const auto header_fields = comma ? split_fields(header, ',') : split_whitespace(header);
  const ColumnIndex cols = resolve_header(header_fields);

  std::vector<MinuteBar> bars;
  for (std::size_t i = header_idx + 1; i < lines.size(); ++i) {
    const std::size_t row = i + 1;  // 1-based, counting from the top of the file
    if (trim(lines[i]).empty()) continue;

    try {
      std::vector<std::string_view> fields =
          comma ? split_fields(lines[i], ',') : split_whitespace(lines[i]);
      std::string joined_date;  // backing storage when date+time arrive as two tokens
      if (!comma && fields.size() == cols.count + 1) {
        // Whitespace-delimited rows split "M/D/YYYY H:MM" into two tokens;
        // rejoin them at the date column and close the gap.
        joined_date = std::string(fields[cols.date]) + " " + std::string(fields[cols.date + 1]);
        fields[cols.date] = joined_date;
        fields.erase(fields.begin() + static_cast<std::ptrdiff_t>(cols.date) + 1);
      }
      if (fields.size() != cols.count) {
        throw ParseError(row, "expected " + std::to_string(cols.count) + " fields, got " +
                                  std::to_string(fields.size()));
      }

      MinuteBar bar;
      try {
        bar.timestamp = parse_timestamp(fields[cols.date]);
        bar.open = parse_double(fields[cols.open]);
        bar.close = parse_double(fields[cols.close]);
        bar.low = parse_double(fields[cols.low]);
        bar.high = parse_double(fields[cols.high]);
        bar.value = parse_double(fields[cols.value]);
        bar.volume = parse_int(fields[cols.volume]);
        bar.num_ticks = parse_int(fields[cols.num_ticks]);
      } catch (const ValidationError& e) {
        throw ParseError(row, e.what());
      } catch (const DomainError& e) {
        throw ParseError(row, e.what());
      }

      validate_bar(bar, row);
      if (!bars.empty()) {
        if (bar.timestamp == bars.back().timestamp) {
          throw ValidationError(row, "duplicate timestamp " + to_iso(bar.timestamp));
        }
        if (bar.timestamp < bars.back().timestamp) {
          throw ValidationError(row, "timestamp " + to_iso(bar.timestamp) + " not after " +
                                         to_iso(bars.back().timestamp));
        }
      }
      bars.push_back(bar);
    } catch (const Error& e) {
      // In collecting mode the offending row is recorded and skipped so one
      // pass can report every problem; otherwise fail fast.
      if (violations == nullptr) throw;
      violations->push_back(e.what());
    }
  }
  return bars;
}

std::vector<MinuteBar> parse_bars(std::string_view text) { return parse_bars(text, nullptr); }

std::string to_csv(const std::vector<MinuteBar>& bars) {
  std::string out = "timestamp,open,close,low,high,value,volume,num_ticks\n";
  for (const MinuteBar& b : bars) {
    out += to_iso(b.timestamp);
    out += ',';
    out += format_double(b.open);
    out += ',';
    out += format_double(b.close);
    out += ',';
    out += format_double(b.low);
    out += ',';
    out += format_double(b.high);
    out += ',';
    out += format_double(b.value);
    out += ',';
    out += std::to_string(b.volume);
    out += ',';
    out += std::to_string(b.num_ticks);
    out += '\n';
  }
  return out;
}

PriceSeries close_series(const std::vector<MinuteBar>& bars) {
  PriceSeries s;
  s.timestamps.reserve(bars.size());
  s.values.reserve(bars.size());
  for (const MinuteBar& b : bars) {
    s.timestamps.push_back(b.timestamp);
    s.values.push_back(b.close);
  }
  return s;
}

ReturnSeries log_returns(const PriceSeries& prices) {
  if (prices.size() < 2) {
    throw InsufficientDataError("log returns need at least 2 prices, got " +
                                std::to_string(prices.size()));
  }
  ReturnSeries r;
  r.values.reserve(prices.size() - 1);
  r.base_timestamps.reserve(prices.size() - 1);
  for (std::size_t t = 0; t + 1 < prices.size(); ++t) {
    const double a = prices.values[t];
    const double b = prices.values[t + 1];
    if (!(a > 0.0) || !(b > 0.0)) {
      throw DomainError("non-positive price at index " + std::to_string(a > 0.0 ? t + 1 : t));
    }
    r.values.push_back(std::log(b / a));
    r.base_timestamps.push_back(prices.timestamps[t + 1]);
  }
  return r;
}

SplitLengths split_lengths(std::size_t n, const SplitSpec& spec) {
  if (spec.test_len == 0) throw ValidationError("test_len must be positive");
  if (spec.test_len + spec.cv_len >= n) {
    throw ValidationError("split (test " + std::to_string(spec.test_len) + " + cv " +
                          std::to_string(spec.cv_len) + ") too large for series of length " +
                          std::to_string(n));
  }
  return SplitLengths{n - spec.test_len - spec.cv_len, spec.cv_len, spec.test_len};
}

std::array<PriceSeries, 3> split(const PriceSeries& series, const SplitSpec& spec) {
  auto ts = split(series.timestamps, spec);
  auto vs = split(series.values, spec);
  return {PriceSeries{std::move(ts[0]), std::move(vs[0])},
          PriceSeries{std::move(ts[1]), std::move(vs[1])},
          PriceSeries{std::move(ts[2]), std::move(vs[2])}};
}

}  // namespace sigkit::marketdata
