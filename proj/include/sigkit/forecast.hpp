#pragma once

#include <string>
#include <vector>

#include "sigkit/timestamp.hpp"

namespace sigkit {

// One online forecasting step, anchored at the minute the decision is made:
// the next minute's price is predicted before it is observed, and `tmw`
// records what that price turned out to be.
struct ForecastPair {
  Timestamp timestamp;    // decision minute (when `today` is the latest price)
  double today = 0.0;     // last observed price
  double forecast = 0.0;  // one-step-ahead prediction for the next minute
  double tmw = 0.0;       // realized next-minute price
};

// Round-trips through "timestamp,today,forecast,tmw" CSV.
std::string forecast_csv(const std::vector<ForecastPair>& pairs);
std::vector<ForecastPair> parse_forecast_csv(const std::string& text);

}  // namespace sigkit
