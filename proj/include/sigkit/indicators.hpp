#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sigkit/errors.hpp"
#include "sigkit/marketdata.hpp"

namespace sigkit::indicators {

using marketdata::MinuteBar;

// A derived series aligned to its input: values[i] corresponds to input index
// offset + i, so offset is the number of warm-up points the indicator needs.
struct Aligned {
  std::size_t offset = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  // First input index at which the indicator is defined.
  std::size_t first_defined() const { return offset; }
};

struct IndicatorConfig {
  std::vector<int> sma_windows{10, 16, 22};
  std::vector<double> ema_lambdas{0.9, 0.84, 0.78};
  std::vector<int> momentum_windows{12, 18, 24};
  std::vector<int> rsi_windows{8, 14, 20};
  double bollinger_s = 2.0;
  std::vector<int> bollinger_windows{20, 26, 32};
  int macd_fast = 12;
  int macd_slow = 26;
  int macd_signal = 9;
  int cci_window = 20;
  int stoch_k = 14;
  int stoch_d = 3;
  int chaikin_fast = 3;
  int chaikin_slow = 10;

  void validate() const;  // throws ConfigError on any bad parameter
};

// out[t] = mean(prices[t-n+1 .. t]); rolling compensated sum.
Aligned sma(const std::vector<double>& prices, int n);

// out[0] = prices[0]; out[t] = lambda*out[t-1] + (1-lambda)*prices[t].
Aligned ema(const std::vector<double>& prices, double lambda);

// Window-parameterized EMA with lambda = 1 - 2/(w+1).
Aligned ema_window(const std::vector<double>& prices, int w);

// out[t] = prices[t] - prices[t-n].
Aligned momentum(const std::vector<double>& prices, int n);

// Wilder-smoothed relative strength index; flat market -> 50.
Aligned rsi(const std::vector<double>& prices, int n);

struct BollingerBands {
  Aligned upper, middle, lower;
};
// middle = sma(prices, n); upper/lower = middle +/- s * rolling population std.
BollingerBands bollinger(const std::vector<double>& prices, int n, double s);

struct MacdResult {
  Aligned line, signal, histogram;
};
// line = ema_window(fast) - ema_window(slow); signal = ema_window(line, signal_w).
MacdResult macd(const std::vector<double>& prices, int fast, int slow, int signal_w);

// (TP - sma(TP, n)) / (0.015 * mean absolute deviation of TP); zero MAD -> 0.
Aligned cci(const std::vector<double>& high, const std::vector<double>& low,
            const std::vector<double>& close, int n);

struct StochasticResult {
  Aligned percent_k, percent_d;
};
// %K = 100*(close - lowest low)/(highest high - lowest low); zero range -> 50.
// %D = sma(%K, d_window).
StochasticResult stochastic(const std::vector<double>& high, const std::vector<double>& low,
                            const std::vector<double>& close, int k_window, int d_window);

// Accumulation/distribution line smoothed by a fast-minus-slow window EMA pair.
Aligned chaikin(const std::vector<double>& high, const std::vector<double>& low,
                const std::vector<double>& close, const std::vector<long long>& volume,
                int fast, int slow);

enum class TargetKind { NextClose, NextLogReturn };

struct FeatureMatrix {
  std::vector<Timestamp> timestamps;         // one per retained row
  std::vector<std::string> names;            // column names
  std::vector<std::vector<double>> columns;  // column-major, all equal length
  std::vector<double> target;                // aligned so row t predicts t+1
  TargetKind target_kind = TargetKind::NextClose;

  std::size_t rows() const { return timestamps.size(); }
  std::size_t cols() const { return columns.size(); }
};

// Assembles raw OHLCV, lagged log returns, and every configured indicator into
// one matrix; drops warm-up rows and the final row (which has no target).
// Columns are independent, so they may be filled by n_threads workers; the
// result is identical for any thread count.
FeatureMatrix build_feature_matrix(const std::vector<MinuteBar>& bars,
                                   const IndicatorConfig& config,
                                   TargetKind target = TargetKind::NextClose, int n_threads = 1);

std::string to_csv(const FeatureMatrix& m);

}  // namespace sigkit::indicators
