#pragma once

#include <string>
#include <vector>

#include "sigkit/errors.hpp"
#include "sigkit/forecast.hpp"
#include "sigkit/marketdata.hpp"
#include "sigkit/statespace.hpp"

namespace sigkit::arima {

// ARMA(p,q) on (log-return) series x_t:
//   x_t - mean = sum_i ar[i-1] (x_{t-i} - mean) + e_t + sum_j ma[j-1] e_{t-j}
// Differencing is handled upstream by working on log returns, so d = 0 always.
struct ArmaModel {
  int p = 0;
  int q = 0;
  std::vector<double> ar;  // alpha_1..alpha_p, stationary by construction
  std::vector<double> ma;  // theta_1..theta_q, invertible by construction
  double mean = 0.0;
  bool include_mean = true;
  double sigma2 = 1.0;   // innovation variance
  double loglik = 0.0;   // exact Gaussian log-likelihood at the fit
  std::size_t n_obs = 0;
};

// Raised when the quasi-Newton iteration budget runs out; carries the best
// parameters reached so the caller can still inspect them.
class ArmaConvergenceError : public ConvergenceError {
 public:
  ArmaConvergenceError(const std::string& msg, ArmaModel best)
      : ConvergenceError(msg), best_model(std::move(best)) {}
  ArmaModel best_model;
};

// Exact maximum likelihood via the innovations (state-space) form, with AR/MA
// parameters optimized through a partial-autocorrelation transform so every
// iterate is stationary and invertible (an explosive estimate cannot occur;
// the transform is the projection). BFGS with central-difference gradients.
ArmaModel fit_arma(const std::vector<double>& series, int p, int q, bool include_mean = true);

// Exact Gaussian log-likelihood of `series` under `model` (at model.sigma2),
// computed by the same innovations filter used for fitting.
double innovations_loglik(const ArmaModel& model, const std::vector<double>& series);

// The model's state-space representation on demeaned data: filtering
// (series - mean) through this DLM reproduces innovations_loglik exactly.
statespace::DlmParams to_dlm(const ArmaModel& model);

struct AicValue {
  double value = 0.0;
};

// -loglik + 2(p + q + k + 1) with k = 1 when the mean is estimated.
AicValue aic(const ArmaModel& model);

// Fits every (p,q) with p <= p_max, q <= q_max (grid cells are independent and
// may run on n_threads workers) and returns the minimum-AIC model; ties break
// toward smaller p+q, then smaller q. Throws ConvergenceError when every cell
// fails.
ArmaModel select_order(const std::vector<double>& series, int p_max, int q_max,
                       bool include_mean = true, int n_threads = 1);

// One-step-ahead conditional expectation, with residuals reconstructed by the
// zero-initialized recursion over the full history.
double forecast_one(const ArmaModel& model, const std::vector<double>& history);

struct ArimaWalkOptions {
  int refit_every = 30;  // refit on all observed data every k minutes; 0 = never
  int p_max = 5;
  int q_max = 5;
  int n_threads = 1;  // used by the initial order-selection grid
};

// Online expert: order selected once on everything before the test window,
// then a one-step-ahead walk that forecasts the next return, converts it to a
// price via today*exp(r), and refits coefficients on the configured cadence.
std::vector<ForecastPair> online_forecast_prices(const marketdata::PriceSeries& series,
                                                 const marketdata::SplitSpec& split,
                                                 const ArimaWalkOptions& opts = {});

}  // namespace sigkit::arima
