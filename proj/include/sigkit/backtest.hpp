#pragma once

// Turns one-minute-ahead price forecasts into friction-aware positions,
// settles them a minute later, and aggregates auditable reports. The trading
// rule is deliberately tiny: go long when the predicted move clears the
// friction threshold, short when it clears it downward, stay flat otherwise,
// and always close the position at the next minute's price.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sigkit/forecast.hpp"
#include "sigkit/timestamp.hpp"

namespace sigkit::backtest {

enum class Position { Long, Short, Flat };

std::string to_string(Position position);

// Accepts long/short/flat in any case, plus "do nothing" / "nothing" as
// aliases for Flat. Anything else throws DomainError.
Position parse_position(std::string_view text);

// d = forecast - today. d > tax -> Long, d < -tax -> Short, otherwise Flat;
// the boundary |d| = tax does not trade. Expects prices > 0 and tax >= 0.
Position decide(double today, double forecast, double tax);

// Long positions earn tmw - today, shorts earn today - tmw, flat earns 0.
double settle(Position position, double today, double tmw);

struct TradeRecord {
  Timestamp timestamp;
  double today = 0.0;
  double forecast = 0.0;
  Position position = Position::Flat;
  double tmw = 0.0;
  double pnl = 0.0;
};

struct BacktestReport {
  std::vector<TradeRecord> trades;
  double total_pnl = 0.0;
  double return_pct = 0.0;  // total_pnl / first today price * 100
  std::size_t n_long = 0;
  std::size_t n_short = 0;
  std::size_t n_flat = 0;
  // fraction of executed (non-flat) trades with pnl > 0; 0 when none executed
  double hit_rate = 0.0;
};

// Applies decide + settle to each pair in order. Pairs must carry strictly
// increasing timestamps and positive finite prices.
BacktestReport run_backtest(const std::vector<ForecastPair>& pairs, double tax);

// One line of the side-by-side comparison, in rank order.
struct RankedExpert {
  std::string name;
  double total_pnl = 0.0;
  double return_pct = 0.0;
  double hit_rate = 0.0;
  std::size_t n_long = 0;
  std::size_t n_short = 0;
  std::size_t n_flat = 0;
};

// Ranks experts by total_pnl, best first; exact ties fall back to the
// expert name. All reports must cover identical timestamp sequences.
std::vector<RankedExpert> compare_experts(const std::map<std::string, BacktestReport>& reports);

// Trade ledger with columns today,forecast,position,tmw,profit_loss.
std::string ledger_csv(const BacktestReport& report);

struct LedgerRow {
  double today = 0.0;
  double forecast = 0.0;
  Position position = Position::Flat;
  double tmw = 0.0;
  double pnl = 0.0;
};

std::vector<LedgerRow> parse_ledger_csv(const std::string& text);

// JSON object with the aggregate metrics (not the per-trade ledger).
std::string summary_json(const BacktestReport& report, const std::string& expert_name, double tax);

// CSV of the ranking produced by compare_experts.
std::string comparison_csv(const std::vector<RankedExpert>& ranking);

}  // namespace sigkit::backtest
