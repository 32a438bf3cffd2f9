#include "sigkit/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>

#include "sigkit/parallel.hpp"
#include "sigkit/text.hpp"

namespace sigkit::indicators {

namespace {

// Neumaier-compensated accumulator; keeps rolling add/subtract sums accurate
// enough that streaming indicators match per-window recomputation to ~ulp.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

void require_window(int n, std::size_t len, const char* what) {
  if (n < 1) throw DomainError(std::string(what) + " window must be >= 1");
  if (static_cast<std::size_t>(n) > len) {
    throw InsufficientDataError(std::string(what) + " window " + std::to_string(n) +
                                " exceeds series length " + std::to_string(len));
  }
}

void require_aligned(std::initializer_list<std::size_t> lens, const char* what) {
  const std::size_t first = *lens.begin();
  for (std::size_t l : lens) {
    if (l != first) throw ValidationError(std::string(what) + ": input sequences differ in length");
  }
}

std::vector<double> typical_price(const std::vector<double>& high, const std::vector<double>& low,
                                  const std::vector<double>& close) {
  std::vector<double> tp(close.size());
  for (std::size_t t = 0; t < close.size(); ++t) tp[t] = (high[t] + low[t] + close[t]) / 3.0;
  return tp;
}

}  // namespace

void IndicatorConfig::validate() const {
  auto check_windows = [](const std::vector<int>& ws, const char* what) {
    if (ws.empty()) throw ConfigError(std::string(what) + ": at least one window required");
    for (int w : ws) {
      if (w < 2) throw ConfigError(std::string(what) + ": window " + std::to_string(w) + " < 2");
    }
  };
  check_windows(sma_windows, "sma_windows");
  check_windows(momentum_windows, "momentum_windows");
  check_windows(rsi_windows, "rsi_windows");
  check_windows(bollinger_windows, "bollinger_windows");
  if (ema_lambdas.empty()) throw ConfigError("ema_lambdas: at least one decay required");
  for (double l : ema_lambdas) {
    if (!(l > 0.0 && l < 1.0)) {
      throw ConfigError("ema_lambdas: decay " + format_double(l) + " outside (0,1)");
    }
  }
  if (!(bollinger_s > 0.0)) throw ConfigError("bollinger_s must be positive");
  if (macd_fast < 2 || macd_slow < 2 || macd_signal < 2) throw ConfigError("macd windows must be >= 2");
  if (macd_fast >= macd_slow) throw ConfigError("macd_fast must be < macd_slow");
  if (cci_window < 2) throw ConfigError("cci_window must be >= 2");
  if (stoch_k < 2 || stoch_d < 2) throw ConfigError("stochastic windows must be >= 2");
  if (chaikin_fast < 2 || chaikin_slow < 2) throw ConfigError("chaikin windows must be >= 2");
  if (chaikin_fast >= chaikin_slow) throw ConfigError("chaikin_fast must be < chaikin_slow");
}

namespace {

// Rolling extrema over the last w entries, O(1) amortized per step. Used to
// detect exactly-constant windows: fl(w*c)/w generally rounds away from c, so
// degenerate windows are handled by value, not by the accumulated sums.
class RollingMinMax {
 public:
  explicit RollingMinMax(std::size_t w) : w_(w) {}

  void push(const std::vector<double>& xs, std::size_t t) {
    while (!max_q_.empty() && xs[max_q_.back()] <= xs[t]) max_q_.pop_back();
    max_q_.push_back(t);
    while (!min_q_.empty() && xs[min_q_.back()] >= xs[t]) min_q_.pop_back();
    min_q_.push_back(t);
    if (max_q_.front() + w_ <= t) max_q_.pop_front();
    if (min_q_.front() + w_ <= t) min_q_.pop_front();
  }
  double max(const std::vector<double>& xs) const { return xs[max_q_.front()]; }
  double min(const std::vector<double>& xs) const { return xs[min_q_.front()]; }
  bool constant(const std::vector<double>& xs) const { return min(xs) == max(xs); }

 private:
  std::size_t w_;
  std::deque<std::size_t> max_q_;
  std::deque<std::size_t> min_q_;
};

}  // namespace

Aligned sma(const std::vector<double>& prices, int n) {
  require_window(n, prices.size(), "sma");
  const std::size_t w = static_cast<std::size_t>(n);
  Aligned out;
  out.offset = w - 1;
  out.values.reserve(prices.size() - w + 1);
  CompensatedSum sum;
  RollingMinMax extrema(w);
  for (std::size_t t = 0; t < prices.size(); ++t) {
    sum.add(prices[t]);
    if (t >= w) sum.add(-prices[t - w]);
    extrema.push(prices, t);
    if (t + 1 >= w) {
      // A constant window's mean is that constant exactly.
      out.values.push_back(extrema.constant(prices) ? extrema.min(prices)
                                                    : sum.value() / static_cast<double>(n));
    }
  }
  return out;
}

Aligned ema(const std::vector<double>& prices, double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw DomainError("ema decay " + format_double(lambda) + " outside (0,1)");
  }
  if (prices.empty()) throw InsufficientDataError("ema needs at least one price");
  Aligned out;
  out.offset = 0;
  out.values.resize(prices.size());
  out.values[0] = prices[0];
  // out[t] = out[t-1] + (1-lambda)*(p[t] - out[t-1]): the increment form keeps
  // constant inputs bit-exactly constant, so MACD on a flat series is exactly 0.
  const double step = 1.0 - lambda;
  for (std::size_t t = 1; t < prices.size(); ++t) {
    out.values[t] = out.values[t - 1] + step * (prices[t] - out.values[t - 1]);
  }
  return out;
}

Aligned ema_window(const std::vector<double>& prices, int w) {
  if (w < 1) throw DomainError("ema window must be >= 1");
  return ema(prices, 1.0 - 2.0 / (static_cast<double>(w) + 1.0));
}

Aligned momentum(const std::vector<double>& prices, int n) {
  if (n < 1) throw DomainError("momentum window must be >= 1");
  if (static_cast<std::size_t>(n) >= prices.size()) {
    throw InsufficientDataError("momentum window " + std::to_string(n) +
                                " needs more than " + std::to_string(prices.size()) + " prices");
  }
  const std::size_t w = static_cast<std::size_t>(n);
  Aligned out;
  out.offset = w;
  out.values.reserve(prices.size() - w);
  for (std::size_t t = w; t < prices.size(); ++t) out.values.push_back(prices[t] - prices[t - w]);
  return out;
}

Aligned rsi(const std::vector<double>& prices, int n) {
  if (n < 1) throw DomainError("rsi window must be >= 1");
  if (static_cast<std::size_t>(n) >= prices.size()) {
    throw InsufficientDataError("rsi window " + std::to_string(n) + " needs more than " +
                                std::to_string(prices.size()) + " prices");
  }
  const std::size_t w = static_cast<std::size_t>(n);
  Aligned out;
  out.offset = w;
  out.values.reserve(prices.size() - w);
  double avg_gain = 0.0;
  double avg_loss = 0.0;
  for (std::size_t t = 1; t <= w; ++t) {
    const double d = prices[t] - prices[t - 1];
    avg_gain += std::max(d, 0.0);
    avg_loss += std::max(-d, 0.0);
  }
  avg_gain /= static_cast<double>(n);
  avg_loss /= static_cast<double>(n);
  auto emit = [&] {
    const double total = avg_gain + avg_loss;
    // 100*g/(g+l) == 100 - 100/(1+RS); a dead-flat window has no direction.
    // One-sided windows saturate exactly (100*g/g can land one ulp off 100),
    // and the clamp keeps rounding from ever escaping [0, 100].
    double v;
    if (total == 0.0) {
      v = 50.0;
    } else if (avg_loss == 0.0) {
      v = 100.0;
    } else if (avg_gain == 0.0) {
      v = 0.0;
    } else {
      v = std::clamp(100.0 * avg_gain / total, 0.0, 100.0);
    }
    out.values.push_back(v);
  };
  emit();
  for (std::size_t t = w + 1; t < prices.size(); ++t) {
    const double d = prices[t] - prices[t - 1];
    avg_gain = (avg_gain * static_cast<double>(n - 1) + std::max(d, 0.0)) / static_cast<double>(n);
    avg_loss = (avg_loss * static_cast<double>(n - 1) + std::max(-d, 0.0)) / static_cast<double>(n);
    emit();
  }
  return out;
}

BollingerBands bollinger(const std::vector<double>& prices, int n, double s) {
  if (n < 2) throw DomainError("bollinger window must be >= 2");
  if (!(s > 0.0)) throw DomainError("bollinger width multiplier must be positive");
  require_window(n, prices.size(), "bollinger");
  const std::size_t w = static_cast<std::size_t>(n);
  BollingerBands bb;
  bb.middle = sma(prices, n);
  bb.upper.offset = bb.lower.offset = bb.middle.offset;
  bb.upper.values.resize(bb.middle.size());
  bb.lower.values.resize(bb.middle.size());
  CompensatedSum sum_sq;
  CompensatedSum sum;
  RollingMinMax extrema(w);
  for (std::size_t t = 0; t < prices.size(); ++t) {
    sum.add(prices[t]);
    sum_sq.add(prices[t] * prices[t]);
    if (t >= w) {
      sum.add(-prices[t - w]);
      sum_sq.add(-prices[t - w] * prices[t - w]);
    }
    extrema.push(prices, t);
    if (t + 1 >= w) {
      const std::size_t i = t + 1 - w;
      const double mean = bb.middle.values[i];
      double band = 0.0;
      // A constant window has zero deviation exactly; the E[x^2] - mean^2
      // residue would otherwise leave a ~sqrt(eps)-wide phantom band.
      if (!extrema.constant(prices)) {
        const double var = std::max(0.0, sum_sq.value() / static_cast<double>(n) - mean * mean);
        band = s * std::sqrt(var);
      }
      // Derive the lower band from the rounded half-width (upper - mean is
      // exact when band << mean), so upper - mid == mid - lower bitwise.
      const double upper = mean + band;
      bb.upper.values[i] = upper;
      bb.lower.values[i] = mean - (upper - mean);
    }
  }
  return bb;
}

MacdResult macd(const std::vector<double>& prices, int fast, int slow, int signal_w) {
  if (fast < 1 || slow < 1 || signal_w < 1) throw ConfigError("macd windows must be >= 1");
  if (fast >= slow) throw ConfigError("macd fast window must be < slow window");
  if (prices.empty()) throw InsufficientDataError("macd needs at least one price");
  const Aligned ema_fast = ema_window(prices, fast);
  const Aligned ema_slow = ema_window(prices, slow);
  MacdResult r;
  r.line.offset = 0;
  r.line.values.resize(prices.size());
  for (std::size_t t = 0; t < prices.size(); ++t) {
    r.line.values[t] = ema_fast.values[t] - ema_slow.values[t];
  }
  r.signal = ema_window(r.line.values, signal_w);
  r.histogram.offset = 0;
  r.histogram.values.resize(prices.size());
  for (std::size_t t = 0; t < prices.size(); ++t) {
    r.histogram.values[t] = r.line.values[t] - r.signal.values[t];
  }
  return r;
}

Aligned cci(const std::vector<double>& high, const std::vector<double>& low,
            const std::vector<double>& close, int n) {
  require_aligned({high.size(), low.size(), close.size()}, "cci");
  if (n < 2) throw DomainError("cci window must be >= 2");
  require_window(n, close.size(), "cci");
  const std::vector<double> tp = typical_price(high, low, close);
  const Aligned mid = sma(tp, n);
  const std::size_t w = static_cast<std::size_t>(n);
  Aligned out;
  out.offset = mid.offset;
  out.values.resize(mid.size());
  for (std::size_t i = 0; i < mid.size(); ++i) {
    const std::size_t t = i + out.offset;
    double mad = 0.0;
    double lo = tp[t];
    double hi = tp[t];
    for (std::size_t j = t + 1 - w; j <= t; ++j) {
      mad += std::abs(tp[j] - mid.values[i]);
      lo = std::min(lo, tp[j]);
      hi = std::max(hi, tp[j]);
    }
    mad /= static_cast<double>(n);
    // A constant window is a true zero-deviation case even when the rounded
    // mean sits an ulp off the common value; anything else with zero MAD is
    // likewise neutral by definition.
    out.values[i] = (lo == hi || mad == 0.0) ? 0.0 : (tp[t] - mid.values[i]) / (0.015 * mad);
  }
  return out;
}

StochasticResult stochastic(const std::vector<double>& high, const std::vector<double>& low,
                            const std::vector<double>& close, int k_window, int d_window) {
  require_aligned({high.size(), low.size(), close.size()}, "stochastic");
  if (k_window < 1 || d_window < 1) throw DomainError("stochastic windows must be >= 1");
  require_window(k_window, close.size(), "stochastic %K");
  const std::size_t w = static_cast<std::size_t>(k_window);
  StochasticResult r;
  r.percent_k.offset = w - 1;
  r.percent_k.values.reserve(close.size() - w + 1);
  // Monotonic deques give exact O(1) rolling extrema (indices into high/low).
  std::deque<std::size_t> max_q;
  std::deque<std::size_t> min_q;
  for (std::size_t t = 0; t < close.size(); ++t) {
    while (!max_q.empty() && high[max_q.back()] <= high[t]) max_q.pop_back();
    max_q.push_back(t);
    while (!min_q.empty() && low[min_q.back()] >= low[t]) min_q.pop_back();
    min_q.push_back(t);
    if (max_q.front() + w <= t) max_q.pop_front();
    if (min_q.front() + w <= t) min_q.pop_front();
    if (t + 1 >= w) {
      const double hh = high[max_q.front()];
      const double ll = low[min_q.front()];
      const double range = hh - ll;
      r.percent_k.values.push_back(range == 0.0 ? 50.0 : 100.0 * (close[t] - ll) / range);
    }
  }
  if (r.percent_k.size() < static_cast<std::size_t>(d_window)) {
    throw InsufficientDataError("stochastic %D window exceeds %K length");
  }
  const Aligned d = sma(r.percent_k.values, d_window);
  r.percent_d.offset = r.percent_k.offset + d.offset;
  r.percent_d.values = d.values;
  return r;
}

Aligned chaikin(const std::vector<double>& high, const std::vector<double>& low,
                const std::vector<double>& close, const std::vector<long long>& volume,
                int fast, int slow) {
  require_aligned({high.size(), low.size(), close.size(), volume.size()}, "chaikin");
  if (fast < 1 || slow < 1) throw ConfigError("chaikin windows must be >= 1");
  if (fast >= slow) throw ConfigError("chaikin fast window must be < slow window");
  if (close.empty()) throw InsufficientDataError("chaikin needs at least one bar");
  std::vector<double> ad(close.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < close.size(); ++t) {
    const double range = high[t] - low[t];
    const double m = range == 0.0 ? 0.0 : ((close[t] - low[t]) - (high[t] - close[t])) / range;
    acc += m * static_cast<double>(volume[t]);
    ad[t] = acc;
  }
  const Aligned f = ema_window(ad, fast);
  const Aligned s = ema_window(ad, slow);
  Aligned out;
  out.offset = 0;
  out.values.resize(ad.size());
  for (std::size_t t = 0; t < ad.size(); ++t) out.values[t] = f.values[t] - s.values[t];
  return out;
}

namespace {

constexpr int kReturnLags = 5;  // log_ret_0 .. log_ret_4

}  // namespace

FeatureMatrix build_feature_matrix(const std::vector<MinuteBar>& bars,
                                   const IndicatorConfig& config, TargetKind target,
                                   int n_threads) {
  config.validate();
  const std::size_t len = bars.size();

  std::vector<double> open(len), high(len), low(len), close(len), volume(len);
  std::vector<long long> volume_ll(len);
  for (std::size_t t = 0; t < len; ++t) {
    open[t] = bars[t].open;
    high[t] = bars[t].high;
    low[t] = bars[t].low;
    close[t] = bars[t].close;
    volume[t] = static_cast<double>(bars[t].volume);
    volume_ll[t] = bars[t].volume;
  }

  std::vector<std::string> names;
  std::vector<std::function<void()>> jobs;
  std::vector<Aligned> staging;

  auto reserve_column = [&](std::string name) {
    names.push_back(std::move(name));
    staging.emplace_back();
    return staging.size() - 1;
  };

  // Raw bar fields pass through unchanged.
  {
    const std::size_t base = reserve_column("open");
    reserve_column("high");
    reserve_column("low");
    reserve_column("close");
    reserve_column("volume");
    jobs.push_back([&, base] {
      staging[base] = Aligned{0, open};
      staging[base + 1] = Aligned{0, high};
      staging[base + 2] = Aligned{0, low};
      staging[base + 3] = Aligned{0, close};
      staging[base + 4] = Aligned{0, volume};
    });
  }
  // Current and lagged one-minute log returns.
  {
    std::size_t base = staging.size();
    for (int lag = 0; lag < kReturnLags; ++lag) reserve_column("log_ret_" + std::to_string(lag));
    jobs.push_back([&, base] {
      std::vector<double> r(len > 0 ? len - 1 : 0);
      for (std::size_t t = 1; t < len; ++t) r[t - 1] = std::log(close[t] / close[t - 1]);
      for (int lag = 0; lag < kReturnLags; ++lag) {
        // r[i] is the return realized at input index i+1, so the lag-k column
        // at input t is r[t-1-k]: drop the last k returns and shift by k+1.
        Aligned a;
        a.offset = static_cast<std::size_t>(lag) + 1;
        a.values.assign(r.begin(), r.end() - static_cast<std::ptrdiff_t>(lag));
        staging[base + static_cast<std::size_t>(lag)] = std::move(a);
      }
    });
  }
  for (int w : config.sma_windows) {
    const std::size_t c = reserve_column("sma_" + std::to_string(w));
    jobs.push_back([&, c, w] { staging[c] = sma(close, w); });
  }
  for (double l : config.ema_lambdas) {
    const std::size_t c = reserve_column("ema_" + format_double(l));
    jobs.push_back([&, c, l] { staging[c] = ema(close, l); });
  }
  for (int w : config.momentum_windows) {
    const std::size_t c = reserve_column("mom_" + std::to_string(w));
    jobs.push_back([&, c, w] { staging[c] = momentum(close, w); });
  }
  for (int w : config.rsi_windows) {
    const std::size_t c = reserve_column("rsi_" + std::to_string(w));
    jobs.push_back([&, c, w] { staging[c] = rsi(close, w); });
  }
  for (int w : config.bollinger_windows) {
    const std::size_t c = reserve_column("bb_upper_" + std::to_string(w));
    reserve_column("bb_mid_" + std::to_string(w));
    reserve_column("bb_lower_" + std::to_string(w));
    const double s = config.bollinger_s;
    jobs.push_back([&, c, w, s] {
      BollingerBands bb = bollinger(close, w, s);
      staging[c] = std::move(bb.upper);
      staging[c + 1] = std::move(bb.middle);
      staging[c + 2] = std::move(bb.lower);
    });
  }
  {
    const std::size_t c = reserve_column("macd_line");
    reserve_column("macd_signal");
    reserve_column("macd_hist");
    jobs.push_back([&, c] {
      MacdResult m = macd(close, config.macd_fast, config.macd_slow, config.macd_signal);
      staging[c] = std::move(m.line);
      staging[c + 1] = std::move(m.signal);
      staging[c + 2] = std::move(m.histogram);
    });
  }
  {
    const std::size_t c = reserve_column("cci_" + std::to_string(config.cci_window));
    jobs.push_back([&, c] { staging[c] = cci(high, low, close, config.cci_window); });
  }
  {
    const std::size_t c = reserve_column("stoch_k");
    reserve_column("stoch_d");
    jobs.push_back([&, c] {
      StochasticResult s = stochastic(high, low, close, config.stoch_k, config.stoch_d);
      staging[c] = std::move(s.percent_k);
      staging[c + 1] = std::move(s.percent_d);
    });
  }
  {
    const std::size_t c = reserve_column("chaikin_osc");
    jobs.push_back([&, c] {
      staging[c] = chaikin(high, low, close, volume_ll, config.chaikin_fast, config.chaikin_slow);
    });
  }

  // Minimum length so every column has at least one defined value and at least
  // one row survives target alignment; the per-indicator calls below throw
  // their own insufficient-data errors with specifics when this is violated.
  std::size_t max_lookback_cfg = 0;
  for (int w : config.sma_windows) max_lookback_cfg = std::max<std::size_t>(max_lookback_cfg, w - 1);
  for (int w : config.momentum_windows) max_lookback_cfg = std::max<std::size_t>(max_lookback_cfg, w);
  for (int w : config.rsi_windows) max_lookback_cfg = std::max<std::size_t>(max_lookback_cfg, w);
  for (int w : config.bollinger_windows) max_lookback_cfg = std::max<std::size_t>(max_lookback_cfg, w - 1);
  max_lookback_cfg = std::max<std::size_t>(
      max_lookback_cfg, static_cast<std::size_t>(config.stoch_k - 1 + config.stoch_d - 1));
  max_lookback_cfg = std::max<std::size_t>(max_lookback_cfg, config.cci_window - 1);
  max_lookback_cfg = std::max<std::size_t>(max_lookback_cfg, kReturnLags);
  if (len < max_lookback_cfg + 2) {
    throw InsufficientDataError("feature matrix needs at least " +
                                std::to_string(max_lookback_cfg + 2) + " bars, got " +
                                std::to_string(len));
  }

  parallel_for(static_cast<std::int64_t>(jobs.size()), n_threads,
               [&](std::int64_t i) { jobs[static_cast<std::size_t>(i)](); });

  std::size_t warmup = 0;
  for (const Aligned& a : staging) warmup = std::max(warmup, a.first_defined());

  FeatureMatrix m;
  m.target_kind = target;
  m.names = std::move(names);
  const std::size_t first = warmup;
  const std::size_t last = len - 2;  // row t needs bar t+1 for the target
  if (first > last) {
    throw InsufficientDataError("no rows survive warm-up of " + std::to_string(warmup));
  }
  const std::size_t rows = last - first + 1;
  m.timestamps.reserve(rows);
  for (std::size_t t = first; t <= last; ++t) m.timestamps.push_back(bars[t].timestamp);
  m.columns.resize(staging.size());
  for (std::size_t c = 0; c < staging.size(); ++c) {
    const Aligned& a = staging[c];
    m.columns[c].reserve(rows);
    for (std::size_t t = first; t <= last; ++t) m.columns[c].push_back(a.values[t - a.offset]);
  }
  m.target.reserve(rows);
  for (std::size_t t = first; t <= last; ++t) {
    m.target.push_back(target == TargetKind::NextClose ? close[t + 1]
                                                       : std::log(close[t + 1] / close[t]));
  }

  for (const auto& col : m.columns) {
    for (double v : col) {
      if (!std::isfinite(v)) throw NumericalError("non-finite feature value");
    }
  }
  for (double v : m.target) {
    if (!std::isfinite(v)) throw NumericalError("non-finite target value");
  }
  return m;
}

std::string to_csv(const FeatureMatrix& m) {
  std::string out = "timestamp";
  for (const std::string& n : m.names) {
    out += ',';
    out += n;
  }
  out += ",target\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += to_iso(m.timestamps[r]);
    for (const auto& col : m.columns) {
      out += ',';
      out += format_double(col[r]);
    }
    out += ',';
    out += format_double(m.target[r]);
    out += '\n';
  }
  return out;
}

}  // namespace sigkit::indicators
