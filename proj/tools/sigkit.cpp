// sigkit: command-line front end for the minute-bar signal engine.
//
// Subcommands wire the library end to end: ingest normalizes raw bar files,
// diagnose runs the stationarity battery on log returns, features dumps the
// indicator matrix, backtest walks the experts through the test window and
// settles their trades, replay re-derives positions from a published trade
// ledger, and compare ranks forecast files against each other.
//
// Every run writes its artifacts atomically and finishes with a MANIFEST of
// SHA-256 content hashes, so reruns can be diffed byte for byte. Exit codes:
// 0 success, 1 usage/config problems, 2 malformed or invalid data, 3
// numerical failures.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sigkit/arima.hpp"
#include "sigkit/backtest.hpp"
#include "sigkit/errors.hpp"
#include "sigkit/forecast.hpp"
#include "sigkit/forest.hpp"
#include "sigkit/indicators.hpp"
#include "sigkit/marketdata.hpp"
#include "sigkit/parallel.hpp"
#include "sigkit/runio.hpp"
#include "sigkit/statespace.hpp"
#include "sigkit/stattests.hpp"
#include "sigkit/text.hpp"

namespace {

using namespace sigkit;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

// Collects everything a command writes and finishes with a MANIFEST line per
// file ("<sha256>  <name>"). If a stage fails, the manifest still appears,
// with a trailer naming what went wrong, so partial artifacts are auditable.
class ArtifactSink {
 public:
  explicit ArtifactSink(std::string dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void write(const std::string& name, std::string_view content) {
    write_file_atomic(dir_ + "/" + name, content);
    entries_.emplace_back(name, sha256_hex(content));
  }

  void finish() { write_manifest(""); }

  void abort(const std::string& why) { write_manifest(why); }

  const std::string& dir() const { return dir_; }

 private:
  void write_manifest(const std::string& incomplete_reason) {
    std::vector<std::pair<std::string, std::string>> sorted = entries_;
    std::sort(sorted.begin(), sorted.end());
    std::string manifest;
    for (const auto& [name, sha] : sorted) manifest += sha + "  " + name + "\n";
    if (!incomplete_reason.empty()) manifest += "# INCOMPLETE: " + incomplete_reason + "\n";
    write_file_atomic(dir_ + "/MANIFEST", manifest);
  }

  std::string dir_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

int resolve_threads(int threads) { return threads > 0 ? threads : hardware_threads(); }

// ---------------------------------------------------------------- ingest --

struct IngestOpts {
  std::string data;
  std::string out = "out";
};

int run_ingest(const IngestOpts& opt) {
  const std::string text = read_file(opt.data);
  std::vector<std::string> violations;
  const std::vector<marketdata::MinuteBar> bars = marketdata::parse_bars(text, &violations);

  if (!violations.empty()) {
    std::fprintf(stderr, "%zu invariant violation(s) in %s:\n", violations.size(),
                 opt.data.c_str());
    const std::size_t shown = std::min<std::size_t>(violations.size(), 50);
    for (std::size_t i = 0; i < shown; ++i) std::fprintf(stderr, "  %s\n", violations[i].c_str());
    if (shown < violations.size()) {
      std::fprintf(stderr, "  ... and %zu more\n", violations.size() - shown);
    }
    return kExitData;
  }
  if (bars.empty()) {
    std::fprintf(stderr, "no bars in %s\n", opt.data.c_str());
    return kExitData;
  }

  ArtifactSink sink(opt.out);
  sink.write("bars.csv", marketdata::to_csv(bars));
  sink.finish();
  std::printf("%zu bars, %s .. %s, 0 invariant violations -> %s/bars.csv\n", bars.size(),
              to_iso(bars.front().timestamp).c_str(), to_iso(bars.back().timestamp).c_str(),
              sink.dir().c_str());
  return 0;
}

// -------------------------------------------------------------- diagnose --

struct DiagnoseOpts {
  std::string data;
  std::string out = "out";
  int max_lags = -1;  // -1 = Schwert rule
};

nlohmann::ordered_json adf_json(const stattests::AdfResult& r) {
  nlohmann::ordered_json j;
  j["statistic"] = r.statistic;
  j["lags_used"] = r.lags_used;
  j["reject_5pct"] = r.reject_5pct;
  nlohmann::ordered_json crit;
  for (const auto& [name, value] : r.critical_values) crit[name] = value;
  j["critical_values"] = crit;
  return j;
}

int run_diagnose(const DiagnoseOpts& opt) {
  const std::vector<marketdata::MinuteBar> bars = marketdata::parse_bars(read_file(opt.data));
  const marketdata::PriceSeries closes = marketdata::close_series(bars);
  const marketdata::ReturnSeries returns = marketdata::log_returns(closes);

  const stattests::AdfResult adf_levels = stattests::adf_test(closes.values, opt.max_lags);
  const stattests::AdfResult adf_returns = stattests::adf_test(returns.values, opt.max_lags);
  const stattests::SkewLaplaceParams fit = stattests::fit_skew_laplace(returns.values);
  const stattests::KsResult ks = stattests::ks_statistic(
      returns.values, [&](double x) { return stattests::skew_laplace_cdf(x, fit); });

  nlohmann::ordered_json j;
  j["bars"] = bars.size();
  j["returns"] = returns.values.size();
  j["adf_levels"] = adf_json(adf_levels);
  j["adf_returns"] = adf_json(adf_returns);
  nlohmann::ordered_json lap;
  lap["location"] = fit.location;
  lap["scale"] = fit.scale;
  lap["asymmetry"] = fit.asymmetry;
  lap["loglik"] = stattests::skew_laplace_loglik(returns.values, fit);
  j["skew_laplace"] = lap;
  nlohmann::ordered_json ksj;
  ksj["statistic"] = ks.statistic;
  ksj["n"] = ks.n;
  j["ks"] = ksj;

  // Empirical histogram density next to the fitted curve, for plotting.
  const auto [lo_it, hi_it] = std::minmax_element(returns.values.begin(), returns.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const int bins = 200;
  const double width = (hi - lo) / bins;
  std::string density = "x,empirical,fitted\n";
  if (width > 0.0) {
    std::vector<std::size_t> counts(bins, 0);
    for (const double r : returns.values) {
      int b = static_cast<int>((r - lo) / width);
      b = std::clamp(b, 0, bins - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
    const double n = static_cast<double>(returns.values.size());
    for (int b = 0; b < bins; ++b) {
      const double x = lo + (b + 0.5) * width;
      const double empirical = static_cast<double>(counts[static_cast<std::size_t>(b)]) /
                               (n * width);
      density += format_double(x);
      density += ',';
      density += format_double(empirical);
      density += ',';
      density += format_double(stattests::skew_laplace_pdf(x, fit));
      density += '\n';
    }
  }

  ArtifactSink sink(opt.out);
  sink.write("stationarity.json", j.dump(2) + "\n");
  sink.write("density.csv", density);
  sink.finish();

  std::printf("ADF levels %.3f (reject@5%%: %s), returns %.3f (reject@5%%: %s), KS %.5f -> %s\n",
              adf_levels.statistic, adf_levels.reject_5pct ? "yes" : "no", adf_returns.statistic,
              adf_returns.reject_5pct ? "yes" : "no", ks.statistic, sink.dir().c_str());
  return 0;
}

// -------------------------------------------------------------- features --

struct FeaturesOpts {
  std::string data;
  std::string out = "out";
  int threads = 0;
};

int run_features(const FeaturesOpts& opt) {
  const std::vector<marketdata::MinuteBar> bars = marketdata::parse_bars(read_file(opt.data));
  const indicators::FeatureMatrix m = indicators::build_feature_matrix(
      bars, indicators::IndicatorConfig{}, indicators::TargetKind::NextClose,
      resolve_threads(opt.threads));
  ArtifactSink sink(opt.out);
  sink.write("features.csv", indicators::to_csv(m));
  sink.finish();
  std::printf("%zu rows x %zu features -> %s/features.csv\n", m.rows(), m.cols(),
              sink.dir().c_str());
  return 0;
}

// -------------------------------------------------------------- backtest --

struct BacktestOpts {
  std::string data;
  std::string out = "out";
  std::string expert = "all";
  double tax = 0.001;
  std::size_t test_len = 120;
  std::size_t cv_len = 120;
  std::uint64_t seed = 42;
  int refit_every = -1;  // -1 = per-expert default (kalman: never, arima: 30)
  int threads = 0;
  // arima sub-config
  int p_max = 5;
  int q_max = 5;
  // kalman sub-config
  int em_max_iter = 100;
  double em_tol = 1e-6;
  // forest sub-config
  int n_experts = 5;
  int n_trees = 100;
  std::size_t window_len = 0;  // 0 = tile with 50% overlap
  int min_leaf = 5;
  int mtry = 0;  // 0 = ceil(sqrt(features))
};

std::vector<ForecastPair> run_kalman_expert(const marketdata::PriceSeries& closes,
                                            const marketdata::SplitSpec& split,
                                            const BacktestOpts& opt) {
  statespace::KalmanWalkOptions walk;
  walk.em.max_iter = opt.em_max_iter;
  walk.em.tol = opt.em_tol;
  walk.refit_every = opt.refit_every < 0 ? 0 : opt.refit_every;
  return statespace::online_forecast_prices(closes, split, walk);
}

std::vector<ForecastPair> run_arima_expert(const marketdata::PriceSeries& closes,
                                           const marketdata::SplitSpec& split,
                                           const BacktestOpts& opt) {
  arima::ArimaWalkOptions walk;
  walk.refit_every = opt.refit_every < 0 ? 30 : opt.refit_every;
  walk.p_max = opt.p_max;
  walk.q_max = opt.q_max;
  walk.n_threads = resolve_threads(opt.threads);
  return arima::online_forecast_prices(closes, split, walk);
}

// Trains the interval ensemble on every feature row whose target is still
// inside the train+cv history, then walks the remaining rows online. Also
// emits the weight trajectory through `sink`.
std::vector<ForecastPair> run_forest_expert(const std::vector<marketdata::MinuteBar>& bars,
                                            const marketdata::SplitLengths& lens,
                                            const BacktestOpts& opt, ArtifactSink& sink) {
  const int threads = resolve_threads(opt.threads);
  const indicators::FeatureMatrix m = indicators::build_feature_matrix(
      bars, indicators::IndicatorConfig{}, indicators::TargetKind::NextClose, threads);

  const std::size_t n_history = lens.train + lens.cv;
  const std::size_t warmup = bars.size() - 1 - m.rows();  // rows cover [warmup, n-2]
  if (n_history < warmup + 2) {
    throw InsufficientDataError("history of " + std::to_string(n_history) +
                                " bars is consumed by the " + std::to_string(warmup) +
                                "-bar indicator warm-up");
  }
  // Rows whose target (the next close) is still inside the history window.
  const std::size_t train_rows = n_history - 1 - warmup;

  indicators::FeatureMatrix train = m;
  train.timestamps.resize(train_rows);
  train.target.resize(train_rows);
  for (auto& column : train.columns) column.resize(train_rows);

  forest::TreeConfig tree;
  tree.min_leaf = opt.min_leaf;
  tree.mtry = opt.mtry;
  tree.seed = opt.seed;
  forest::Ensemble ensemble =
      forest::train_ensemble(train, opt.n_experts, opt.window_len, opt.n_trees, tree, threads);

  forest::WalkResult walk = forest::online_walk(std::move(ensemble), m, train_rows, m.rows());

  std::string weights = "step";
  for (std::size_t i = 0; i < walk.ensemble.experts.size(); ++i) {
    weights += ",expert_" + std::to_string(i);
  }
  weights += '\n';
  for (std::size_t s = 0; s < walk.weight_trajectory.size(); ++s) {
    weights += std::to_string(s + 1);
    for (const double w : walk.weight_trajectory[s]) {
      weights += ',';
      weights += format_double(w);
    }
    weights += '\n';
  }
  sink.write("forest_weights.csv", weights);
  return walk.pairs;
}

void print_ranking(const std::vector<backtest::RankedExpert>& ranking) {
  std::printf("%-4s %-8s %12s %12s %10s %7s %7s %7s\n", "rank", "expert", "total_pnl",
              "return_pct", "hit_rate", "long", "short", "flat");
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    const backtest::RankedExpert& r = ranking[i];
    std::printf("%-4zu %-8s %12.5f %12.5f %10.4f %7zu %7zu %7zu\n", i + 1, r.name.c_str(),
                r.total_pnl, r.return_pct, r.hit_rate, r.n_long, r.n_short, r.n_flat);
  }
}

int run_backtest_cmd(const BacktestOpts& opt) {
  const std::vector<std::string> known = {"arima", "forest", "kalman"};
  std::vector<std::string> selected;
  if (opt.expert == "all") {
    selected = known;
  } else if (std::find(known.begin(), known.end(), opt.expert) != known.end()) {
    selected = {opt.expert};
  } else {
    throw ConfigError("unknown expert '" + opt.expert + "' (arima, kalman, forest, all)");
  }

  const std::vector<marketdata::MinuteBar> bars = marketdata::parse_bars(read_file(opt.data));
  const marketdata::PriceSeries closes = marketdata::close_series(bars);
  const marketdata::SplitSpec split{opt.test_len, opt.cv_len};
  const marketdata::SplitLengths lens = marketdata::split_lengths(closes.size(), split);

  ArtifactSink sink(opt.out);
  std::map<std::string, backtest::BacktestReport> reports;
  try {
    for (const std::string& name : selected) {
      std::vector<ForecastPair> pairs;
      if (name == "kalman") {
        pairs = run_kalman_expert(closes, split, opt);
      } else if (name == "arima") {
        pairs = run_arima_expert(closes, split, opt);
      } else {
        pairs = run_forest_expert(bars, lens, opt, sink);
      }
      const backtest::BacktestReport report = backtest::run_backtest(pairs, opt.tax);
      sink.write(name + "_forecast.csv", forecast_csv(pairs));
      sink.write(name + "_ledger.csv", backtest::ledger_csv(report));
      sink.write(name + "_summary.json", backtest::summary_json(report, name, opt.tax));
      reports.emplace(name, report);
    }

    const std::vector<backtest::RankedExpert> ranking = backtest::compare_experts(reports);
    if (selected.size() > 1) sink.write("comparison.csv", backtest::comparison_csv(ranking));
    sink.finish();
    print_ranking(ranking);
  } catch (const Error& e) {
    sink.abort(e.what());
    throw;
  }
  std::printf("artifacts -> %s (train %zu / cv %zu / test %zu)\n", sink.dir().c_str(), lens.train,
              lens.cv, lens.test);
  return 0;
}

// ---------------------------------------------------------------- replay --

struct ReplayOpts {
  std::string ledger;
  double tax = 0.001;
  double pnl_tol = 1e-4;
};

int run_replay(const ReplayOpts& opt) {
  const std::vector<backtest::LedgerRow> rows = backtest::parse_ledger_csv(read_file(opt.ledger));
  if (rows.empty()) {
    std::fprintf(stderr, "no rows in %s\n", opt.ledger.c_str());
    return kExitData;
  }

  std::size_t position_mismatches = 0;
  double max_pnl_dev = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const backtest::LedgerRow& row = rows[i];
    const backtest::Position derived = backtest::decide(row.today, row.forecast, opt.tax);
    if (derived != row.position) {
      ++position_mismatches;
      std::fprintf(stderr, "row %zu: derived %s, ledger says %s\n", i + 2,
                   backtest::to_string(derived).c_str(), backtest::to_string(row.position).c_str());
    }
    max_pnl_dev =
        std::max(max_pnl_dev, std::abs(backtest::settle(derived, row.today, row.tmw) - row.pnl));
  }

  std::printf("replayed %zu rows at tax %s: %zu position mismatches, max pnl deviation %.6g\n",
              rows.size(), format_double(opt.tax).c_str(), position_mismatches, max_pnl_dev);
  return (position_mismatches == 0 && max_pnl_dev <= opt.pnl_tol) ? 0 : kExitData;
}

// --------------------------------------------------------------- compare --

struct CompareOpts {
  std::vector<std::string> forecasts;
  std::string out;
  double tax = 0.001;
};

int run_compare(const CompareOpts& opt) {
  std::map<std::string, backtest::BacktestReport> reports;
  for (const std::string& path : opt.forecasts) {
    const std::string name = std::filesystem::path(path).stem().string();
    reports.emplace(name, backtest::run_backtest(parse_forecast_csv(read_file(path)), opt.tax));
  }
  const std::vector<backtest::RankedExpert> ranking = backtest::compare_experts(reports);
  print_ranking(ranking);
  if (!opt.out.empty()) {
    ArtifactSink sink(opt.out);
    sink.write("comparison.csv", backtest::comparison_csv(ranking));
    sink.finish();
  }
  return 0;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitUsage;
  if (dynamic_cast<const NumericalError*>(&e) != nullptr ||
      dynamic_cast<const ConvergenceError*>(&e) != nullptr ||
      dynamic_cast<const DomainError*>(&e) != nullptr) {
    return kExitNumerical;
  }
  return kExitData;  // parse, validation, insufficient data, I/O
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deterministic minute-bar trading signal engine"};
  app.require_subcommand(1);
  // One key-value config file per run, applied beneath command-line flags.
  // Subcommand options live in a section named after the subcommand (either
  // "[backtest]" headers or dotted "backtest.tax=..." keys).
  app.fallthrough();
  app.set_config("--config", "", "run configuration file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  IngestOpts ingest;
  CLI::App* cmd_ingest = app.add_subcommand("ingest", "normalize and validate a raw bar file");
  cmd_ingest->add_option("--data", ingest.data, "input bar CSV")->required();
  cmd_ingest->add_option("--out", ingest.out, "output directory");

  DiagnoseOpts diagnose;
  CLI::App* cmd_diagnose =
      app.add_subcommand("diagnose", "stationarity tests and return-density fit");
  cmd_diagnose->add_option("--data", diagnose.data, "input bar CSV")->required();
  cmd_diagnose->add_option("--out", diagnose.out, "output directory");
  cmd_diagnose->add_option("--max-lags", diagnose.max_lags,
                           "ADF augmentation cap (-1 = Schwert rule)");

  FeaturesOpts features;
  CLI::App* cmd_features = app.add_subcommand("features", "emit the indicator feature matrix");
  cmd_features->add_option("--data", features.data, "input bar CSV")->required();
  cmd_features->add_option("--out", features.out, "output directory");
  cmd_features->add_option("--threads", features.threads, "worker threads (0 = hardware)");

  BacktestOpts bt;
  CLI::App* cmd_backtest =
      app.add_subcommand("backtest", "walk expert(s) through the test window and settle trades");
  cmd_backtest->add_option("--data", bt.data, "input bar CSV")->required();
  cmd_backtest->add_option("--expert", bt.expert, "arima | kalman | forest | all");
  cmd_backtest->add_option("--tax", bt.tax, "friction threshold per share");
  cmd_backtest->add_option("--test-len", bt.test_len, "test window length (minutes)");
  cmd_backtest->add_option("--cv-len", bt.cv_len, "cross-validation window length");
  cmd_backtest->add_option("--seed", bt.seed, "random seed for the forest expert");
  cmd_backtest->add_option("--refit-every", bt.refit_every,
                           "refit cadence in test minutes (-1 = expert default)");
  cmd_backtest->add_option("--out", bt.out, "output directory");
  cmd_backtest->add_option("--threads", bt.threads, "worker threads (0 = hardware)");
  cmd_backtest->add_option("--p-max", bt.p_max, "AR order grid bound");
  cmd_backtest->add_option("--q-max", bt.q_max, "MA order grid bound");
  cmd_backtest->add_option("--em-max-iter", bt.em_max_iter, "EM iteration cap");
  cmd_backtest->add_option("--em-tol", bt.em_tol, "EM relative log-likelihood tolerance");
  cmd_backtest->add_option("--n-experts", bt.n_experts, "forests in the ensemble");
  cmd_backtest->add_option("--n-trees", bt.n_trees, "trees per forest");
  cmd_backtest->add_option("--window-len", bt.window_len,
                           "expert training window in rows (0 = tile with 50% overlap)");
  cmd_backtest->add_option("--min-leaf", bt.min_leaf, "minimum rows per leaf");
  cmd_backtest->add_option("--mtry", bt.mtry, "features sampled per split (0 = sqrt)");

  ReplayOpts replay;
  CLI::App* cmd_replay =
      app.add_subcommand("replay", "re-derive positions and pnl from a trade ledger");
  cmd_replay->add_option("--replay", replay.ledger, "ledger CSV to replay")->required();
  cmd_replay->add_option("--tax", replay.tax, "friction threshold per share");
  cmd_replay->add_option("--pnl-tol", replay.pnl_tol, "max tolerated pnl deviation");

  CompareOpts compare;
  CLI::App* cmd_compare = app.add_subcommand("compare", "rank forecast CSVs by backtest pnl");
  cmd_compare->add_option("forecasts", compare.forecasts, "forecast CSV files")
      ->required()
      ->expected(-1);
  cmd_compare->add_option("--tax", compare.tax, "friction threshold per share");
  cmd_compare->add_option("--out", compare.out, "optional output directory for the ranking");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (cmd_ingest->parsed()) return run_ingest(ingest);
    if (cmd_diagnose->parsed()) return run_diagnose(diagnose);
    if (cmd_features->parsed()) return run_features(features);
    if (cmd_backtest->parsed()) return run_backtest_cmd(bt);
    if (cmd_replay->parsed()) return run_replay(replay);
    if (cmd_compare->parsed()) return run_compare(compare);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  }
  return kExitUsage;
}
