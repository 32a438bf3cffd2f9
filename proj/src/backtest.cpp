#include "sigkit/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "json.hpp"
#include "sigkit/errors.hpp"
#include "sigkit/text.hpp"

namespace sigkit::backtest {

std::string to_string(Position position) {
  switch (position) {
    case Position::Long:
      return "Long";
    case Position::Short:
      return "Short";
    case Position::Flat:
      return "Flat";
  }
  return "Flat";
}

Position parse_position(std::string_view text) {
  const std::string key = lower(trim(text));
  if (key == "long") return Position::Long;
  if (key == "short") return Position::Short;
  if (key == "flat" || key == "nothing" || key == "do nothing") return Position::Flat;
  throw DomainError("unknown position '" + std::string(text) + "'");
}

Position decide(double today, double forecast, double tax) {
  const double d = forecast - today;
  if (d > tax) return Position::Long;
  if (d < -tax) return Position::Short;
  return Position::Flat;
}

double settle(Position position, double today, double tmw) {
  switch (position) {
    case Position::Long:
      return tmw - today;
    case Position::Short:
      return today - tmw;
    case Position::Flat:
      return 0.0;
  }
  return 0.0;
}

BacktestReport run_backtest(const std::vector<ForecastPair>& pairs, double tax) {
  if (!(tax >= 0.0)) throw ConfigError("tax must be >= 0");
  BacktestReport report;
  report.trades.reserve(pairs.size());

  std::size_t hits = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const ForecastPair& pair = pairs[i];
    if (i > 0 && !(pairs[i - 1].timestamp < pair.timestamp)) {
      throw ValidationError(i + 1, "forecast timestamps must be strictly increasing");
    }
    const bool prices_ok = std::isfinite(pair.today) && std::isfinite(pair.forecast) &&
                           std::isfinite(pair.tmw) && pair.today > 0.0 && pair.forecast > 0.0 &&
                           pair.tmw > 0.0;
    if (!prices_ok) {
      throw ValidationError(i + 1, "prices must be positive and finite");
    }

    TradeRecord trade;
    trade.timestamp = pair.timestamp;
    trade.today = pair.today;
    trade.forecast = pair.forecast;
    trade.tmw = pair.tmw;
    trade.position = decide(pair.today, pair.forecast, tax);
    trade.pnl = settle(trade.position, pair.today, pair.tmw);

    report.total_pnl += trade.pnl;
    switch (trade.position) {
      case Position::Long:
        ++report.n_long;
        break;
      case Position::Short:
        ++report.n_short;
        break;
      case Position::Flat:
        ++report.n_flat;
        break;
    }
    if (trade.position != Position::Flat && trade.pnl > 0.0) ++hits;
    report.trades.push_back(trade);
  }

  const std::size_t executed = report.n_long + report.n_short;
  report.hit_rate = executed == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(executed);
  report.return_pct =
      report.trades.empty() ? 0.0 : report.total_pnl / report.trades.front().today * 100.0;
  return report;
}

std::vector<RankedExpert> compare_experts(const std::map<std::string, BacktestReport>& reports) {
  if (reports.empty()) throw ValidationError("no expert reports to compare");

  const BacktestReport& first = reports.begin()->second;
  for (const auto& [name, report] : reports) {
    if (report.trades.size() != first.trades.size()) {
      throw ValidationError("expert '" + name + "' covers " +
                            std::to_string(report.trades.size()) + " minutes; expected " +
                            std::to_string(first.trades.size()));
    }
    for (std::size_t i = 0; i < report.trades.size(); ++i) {
      if (report.trades[i].timestamp != first.trades[i].timestamp) {
        throw ValidationError(i + 1, "expert '" + name + "' is misaligned with the others");
      }
    }
  }

  std::vector<RankedExpert> ranking;
  ranking.reserve(reports.size());
  for (const auto& [name, report] : reports) {
    RankedExpert row;
    row.name = name;
    row.total_pnl = report.total_pnl;
    row.return_pct = report.return_pct;
    row.hit_rate = report.hit_rate;
    row.n_long = report.n_long;
    row.n_short = report.n_short;
    row.n_flat = report.n_flat;
    ranking.push_back(std::move(row));
  }
  std::sort(ranking.begin(), ranking.end(), [](const RankedExpert& a, const RankedExpert& b) {
    if (a.total_pnl != b.total_pnl) return a.total_pnl > b.total_pnl;
    return a.name < b.name;
  });
  return ranking;
}

std::string ledger_csv(const BacktestReport& report) {
  std::string out = "today,forecast,position,tmw,profit_loss\n";
  for (const TradeRecord& trade : report.trades) {
    out += format_double(trade.today);
    out += ',';
    out += format_double(trade.forecast);
    out += ',';
    out += to_string(trade.position);
    out += ',';
    out += format_double(trade.tmw);
    out += ',';
    out += format_double(trade.pnl);
    out += '\n';
  }
  return out;
}

std::vector<LedgerRow> parse_ledger_csv(const std::string& text) {
  const auto lines = split_lines(text);
  std::size_t header_idx = 0;
  while (header_idx < lines.size() && trim(lines[header_idx]).empty()) ++header_idx;
  if (header_idx == lines.size()) throw ParseError(1, "empty ledger");
  const auto header = split_fields(lines[header_idx], ',');
  const std::vector<std::string> expected = {"today", "forecast", "position", "tmw",
                                             "profit_loss"};
  if (header.size() != expected.size()) {
    throw ParseError(header_idx + 1,
                     "ledger header must be today,forecast,position,tmw,profit_loss");
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (lower(header[i]) != expected[i]) {
      throw ParseError(header_idx + 1, "unexpected ledger column '" + std::string(header[i]) + "'");
    }
  }

  std::vector<LedgerRow> rows;
  for (std::size_t i = header_idx + 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto fields = split_fields(lines[i], ',');
    if (fields.size() != expected.size()) {
      throw ParseError(i + 1, "expected 5 fields, got " + std::to_string(fields.size()));
    }
    LedgerRow row;
    try {
      row.today = parse_double(fields[0]);
      row.forecast = parse_double(fields[1]);
      row.position = parse_position(fields[2]);
      row.tmw = parse_double(fields[3]);
      row.pnl = parse_double(fields[4]);
    } catch (const Error& e) {
      throw ParseError(i + 1, e.what());
    }
    rows.push_back(row);
  }
  return rows;
}

std::string summary_json(const BacktestReport& report, const std::string& expert_name,
                         double tax) {
  nlohmann::ordered_json j;
  j["expert"] = expert_name;
  j["tax"] = tax;
  j["trades"] = report.trades.size();
  j["n_long"] = report.n_long;
  j["n_short"] = report.n_short;
  j["n_flat"] = report.n_flat;
  j["total_pnl"] = report.total_pnl;
  j["return_pct"] = report.return_pct;
  j["hit_rate"] = report.hit_rate;
  if (!report.trades.empty()) {
    j["first_minute"] = to_iso(report.trades.front().timestamp);
    j["last_minute"] = to_iso(report.trades.back().timestamp);
  }
  return j.dump(2) + "\n";
}

std::string comparison_csv(const std::vector<RankedExpert>& ranking) {
  std::string out = "rank,expert,total_pnl,return_pct,hit_rate,n_long,n_short,n_flat\n";
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const RankedExpert& row = ranking[i];
    out += std::to_string(i + 1);
    out += ',';
    out += row.name;
    out += ',';
    out += format_double(row.total_pnl);
    out += ',';
    out += format_double(row.return_pct);
    out += ',';
    out += format_double(row.hit_rate);
    out += ',';
    out += std::to_string(row.n_long);
    out += ',';
    out += std::to_string(row.n_short);
    out += ',';
    out += std::to_string(row.n_flat);
    out += '\n';
  }
  return out;
}

}  // namespace sigkit::backtest
