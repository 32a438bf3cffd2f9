// Times the serial reference path (n_threads = 1) against the OpenMP path
// (n_threads = 0, all cores) for the three kernels that fan out: feature
// matrix construction, forest fitting, and the ARIMA order grid. The two
// paths must agree bit for bit before a row is reported — a speedup that
// changes the answer is a bug, not a win.
//
// Usage: sigkit_bench [bars] [trees] [repeats]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "sigkit/arima.hpp"
#include "sigkit/forest.hpp"
#include "sigkit/indicators.hpp"
#include "sigkit/marketdata.hpp"
#include "sigkit/parallel.hpp"
#include "sigkit/rng.hpp"
#include "sigkit/timestamp.hpp"

namespace {

std::vector<sigkit::marketdata::MinuteBar> make_bars(std::size_t n, std::uint64_t seed) {
  sigkit::Rng rng(seed);
  std::vector<sigkit::marketdata::MinuteBar> bars;
  bars.reserve(n);
  double close = 60.0;
  for (std::size_t i = 0; i < n; ++i) {
    sigkit::marketdata::MinuteBar bar;
    bar.timestamp = sigkit::Timestamp{static_cast<std::int64_t>(60 * i)};
    bar.open = close;
    close *= std::exp(rng.normal(0.0, 5e-4));
    bar.close = close;
    bar.high = std::max(bar.open, bar.close) * (1.0 + std::abs(rng.normal(0.0, 1e-4)));
    bar.low = std::min(bar.open, bar.close) * (1.0 - std::abs(rng.normal(0.0, 1e-4)));
    bar.value = 0.5 * (bar.open + bar.close);
    bar.volume = 1000 + static_cast<long long>(std::abs(rng.normal(0.0, 200.0)));
    bar.num_ticks = 10;
    bars.push_back(bar);
  }
  return bars;
}

template <class F>
double best_of(int repeats, F&& work) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    work();
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    best = std::min(best, elapsed);
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool agree) {
  std::printf("%-36s %10.1f ms %10.1f ms %7.2fx   %s\n", name, serial * 1e3, parallel * 1e3,
              serial / parallel, agree ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n_bars = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 6000;
  const int n_trees = argc > 2 ? std::atoi(argv[2]) : 60;
  const int repeats = argc > 3 ? std::atoi(argv[3]) : 3;

  std::printf("threads available: %d\n", sigkit::hardware_threads());
  std::printf("%-36s %13s %13s %8s   %s\n", "kernel", "serial", "openmp", "speedup", "agree");

  const auto bars = make_bars(n_bars, 42);

  // Feature matrix: one worker per indicator column.
  sigkit::indicators::FeatureMatrix m_serial, m_parallel;
  const double fm_serial = best_of(repeats, [&] {
    m_serial = sigkit::indicators::build_feature_matrix(
        bars, sigkit::indicators::IndicatorConfig{}, sigkit::indicators::TargetKind::NextClose, 1);
  });
  const double fm_parallel = best_of(repeats, [&] {
    m_parallel = sigkit::indicators::build_feature_matrix(
        bars, sigkit::indicators::IndicatorConfig{}, sigkit::indicators::TargetKind::NextClose, 0);
  });
  bool fm_agree = m_serial.columns == m_parallel.columns &&
                  m_serial.target == m_parallel.target && m_serial.names == m_parallel.names;
  {
    const std::string label =
        "feature-matrix (" + std::to_string(n_bars) + " bars)";
    report(label.c_str(), fm_serial, fm_parallel, fm_agree);
  }

  // Forest: one worker per tree.
  sigkit::forest::TreeConfig cfg;
  cfg.seed = 1;
  sigkit::forest::Forest f_serial, f_parallel;
  const double ff_serial = best_of(repeats, [&] {
    f_serial = sigkit::forest::fit_forest(m_serial.columns, m_serial.target, n_trees, cfg, 1);
  });
  const double ff_parallel = best_of(repeats, [&] {
    f_parallel = sigkit::forest::fit_forest(m_parallel.columns, m_parallel.target, n_trees, cfg, 0);
  });
  bool ff_agree = f_serial.oob_error == f_parallel.oob_error;
  std::vector<double> probe(m_serial.cols());
  for (std::size_t j = 0; j < probe.size(); ++j) probe[j] = m_serial.columns[j].back();
  ff_agree = ff_agree && f_serial.predict(probe) == f_parallel.predict(probe);
  {
    const std::string label = "forest-fit (" + std::to_string(m_serial.rows()) + "x" +
                              std::to_string(m_serial.cols()) + ", " + std::to_string(n_trees) +
                              " trees)";
    report(label.c_str(), ff_serial, ff_parallel, ff_agree);
  }

  // ARIMA order grid: one worker per (p, q) candidate.
  std::vector<double> returns;
  returns.reserve(bars.size() - 1);
  for (std::size_t i = 1; i < bars.size(); ++i) {
    returns.push_back(std::log(bars[i].close / bars[i - 1].close));
  }
  if (returns.size() > 2000) returns.resize(2000);
  sigkit::arima::ArmaModel a_serial, a_parallel;
  const double ar_serial = best_of(repeats, [&] {
    a_serial = sigkit::arima::select_order(returns, 4, 2, true, 1);
  });
  const double ar_parallel = best_of(repeats, [&] {
    a_parallel = sigkit::arima::select_order(returns, 4, 2, true, 0);
  });
  const bool ar_agree = a_serial.p == a_parallel.p && a_serial.q == a_parallel.q &&
                        a_serial.loglik == a_parallel.loglik &&
                        a_serial.sigma2 == a_parallel.sigma2;
  {
    const std::string label =
        "arima-grid (n=" + std::to_string(returns.size()) + ", 5x3 orders)";
    report(label.c_str(), ar_serial, ar_parallel, ar_agree);
  }

  if (!(fm_agree && ff_agree && ar_agree)) {
    std::printf("parallel path diverged from the serial reference\n");
    return 1;
  }
  return 0;
}
