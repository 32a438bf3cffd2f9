#include "sigkit/forecast.hpp"

#include "sigkit/errors.hpp"
#include "sigkit/text.hpp"

namespace sigkit {

std::string forecast_csv(const std::vector<ForecastPair>& pairs) {
  std::string out = "timestamp,today,forecast,tmw\n";
  for (const ForecastPair& p : pairs) {
    out += to_iso(p.timestamp);
    out += ',';
    out += format_double(p.today);
    out += ',';
    out += format_double(p.forecast);
    out += ',';
    out += format_double(p.tmw);
    out += '\n';
  }
  return out;
}

std::vector<ForecastPair> parse_forecast_csv(const std::string& text) {
  std::vector<ForecastPair> pairs;
  std::size_t start = 0;
  std::size_t row = 0;
  bool header_seen = false;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    ++row;
    if (trim(line).empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (lower(trim(line)) != "timestamp,today,forecast,tmw") {
        throw ParseError(row, "expected header 'timestamp,today,forecast,tmw'");
      }
      continue;
    }
    const auto fields = split_fields(line, ',');
    if (fields.size() != 4) {
      throw ParseError(row, "expected 4 fields, got " + std::to_string(fields.size()));
    }
    ForecastPair p;
    try {
      p.timestamp = parse_timestamp(fields[0]);
      p.today = parse_double(fields[1]);
      p.forecast = parse_double(fields[2]);
      p.tmw = parse_double(fields[3]);
    } catch (const Error& e) {
      throw ParseError(row, e.what());
    }
    pairs.push_back(p);
  }
  if (!header_seen) throw ParseError(1, "empty forecast file");
  return pairs;
}

}  // namespace sigkit
