#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "sigkit/errors.hpp"
#include "sigkit/timestamp.hpp"

namespace sigkit::marketdata {

// One OHLCV observation at a timestamped minute. Immutable after parsing.
struct MinuteBar {
  Timestamp timestamp;
  double open = 0;
  double close = 0;
  double low = 0;
  double high = 0;
  double value = 0;         // traded value, currency units
  long long volume = 0;     // shares
  long long num_ticks = 0;  // trade count

  bool operator==(const MinuteBar&) const = default;
};

struct PriceSeries {
  std::vector<Timestamp> timestamps;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

// Log returns; values[t] = ln(prices[t+1] / prices[t]). base_timestamps hold
// the endpoint minute of each return.
struct ReturnSeries {
  std::vector<double> values;
  std::vector<Timestamp> base_timestamps;

  std::size_t size() const { return values.size(); }
};

// Trailing holdout layout: [train | cv | test].
struct SplitSpec {
  std::size_t test_len = 120;
  std::size_t cv_len = 120;
};

// Checks the per-bar price invariants; throws ValidationError naming the row.
void validate_bar(const MinuteBar& bar, std::size_t row);

// Parses comma- or whitespace-delimited bar text. The header row must name
// Date (or Timestamp), Open, Close, Low, High, Value, Volume, Number_Ticks in
// any order. Bars are returned in file order and fully validated: OHLC
// invariants per bar, timestamps strictly increasing.
std::vector<MinuteBar> parse_bars(std::string_view text);

// Same, but with a non-null collector every per-row problem is appended to
// `violations` (messages carry row numbers) and the row is skipped instead of
// aborting the parse. Header problems still throw.
std::vector<MinuteBar> parse_bars(std::string_view text, std::vector<std::string>* violations);

// Canonical normalized form: ISO-8601 timestamp, fixed column order, shortest
// round-trippable numbers. parse_bars() accepts this format back.
std::string to_csv(const std::vector<MinuteBar>& bars);

PriceSeries close_series(const std::vector<MinuteBar>& bars);

ReturnSeries log_returns(const PriceSeries& prices);

struct SplitLengths {
  std::size_t train = 0;
  std::size_t cv = 0;
  std::size_t test = 0;
};

// Validates the spec against n and resolves the three segment lengths.
SplitLengths split_lengths(std::size_t n, const SplitSpec& spec);

// Splits any vector-like series into (train, cv, test); concatenation in that
// order reproduces the input.
template <class T>
std::array<std::vector<T>, 3> split(const std::vector<T>& v, const SplitSpec& spec) {
  const SplitLengths len = split_lengths(v.size(), spec);
  std::array<std::vector<T>, 3> out;
  out[0].assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(len.train));
  out[1].assign(v.begin() + static_cast<std::ptrdiff_t>(len.train),
                v.begin() + static_cast<std::ptrdiff_t>(len.train + len.cv));
  out[2].assign(v.begin() + static_cast<std::ptrdiff_t>(len.train + len.cv), v.end());
  return out;
}

std::array<PriceSeries, 3> split(const PriceSeries& series, const SplitSpec& spec);

}  // namespace sigkit::marketdata
