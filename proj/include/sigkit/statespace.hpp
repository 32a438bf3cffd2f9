#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sigkit/errors.hpp"
#include "sigkit/forecast.hpp"
#include "sigkit/marketdata.hpp"

namespace sigkit::statespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Linear-Gaussian state-space model
//   x_t = Phi x_{t-1} + w_t,  w_t ~ N(0, Q)
//   y_t = A x_t + v_t,        v_t ~ N(0, R)
// with x_0 ~ N(mu0, sigma0). Observations run t = 1..n.
struct DlmParams {
  Matrix phi;     // p x p state transition
  Matrix q_cov;   // p x p state-noise covariance, symmetric PSD
  Matrix a_obs;   // q x p observation matrix
  Matrix r_cov;   // q x q observation-noise covariance, symmetric PSD
  Vector mu0;     // p initial state mean
  Matrix sigma0;  // p x p initial covariance, symmetric PSD

  int state_dim() const { return static_cast<int>(phi.rows()); }
  int obs_dim() const { return static_cast<int>(a_obs.rows()); }

  // Dimensional consistency and symmetry/PSD checks. R is allowed to be
  // singular (an exact ARMA representation has R = 0); a singular innovation
  // covariance is caught at filter time instead.
  void validate() const;
};

struct FilterResult {
  std::vector<Vector> x_pred;          // x_t^{t-1},  t = 1..n
  std::vector<Matrix> p_pred;          // P_t^{t-1}
  std::vector<Vector> x_filt;          // x_t^t
  std::vector<Matrix> p_filt;          // P_t^t
  std::vector<Matrix> gains;           // K_t
  std::vector<Vector> innovations;     // eps_t = y_t - A x_t^{t-1}
  std::vector<Matrix> innovation_covs; // Sigma_t = A P_t^{t-1} A' + R
  double loglik = 0.0;                 // sum of Gaussian innovation densities
};

FilterResult kf_filter(const DlmParams& params, const std::vector<Vector>& ys);

struct SmoothResult {
  // Indexed by t = 0..n (entry 0 is the smoothed initial state).
  std::vector<Vector> x_smooth;  // x_t^n
  std::vector<Matrix> p_smooth;  // P_t^n
  // p_lag[t] = P_{t,t-1}^n for t = 1..n; entry 0 is unused (zero matrix).
  std::vector<Matrix> p_lag;
};

// RTS smoother with the lag-one covariance recursion; `filt` must come from
// kf_filter(params, ys) on the same data.
SmoothResult kf_smooth(const DlmParams& params, const FilterResult& filt);

struct EmStats {
  Matrix f11, f10, f00;  // accumulated smoothed second moments
};

EmStats accumulate_em_stats(const std::vector<Vector>& ys, const SmoothResult& sm);

struct EmStepResult {
  DlmParams params;                   // updated parameters
  double loglik = 0.0;                // likelihood of the INPUT parameters
  std::vector<std::string> warnings;  // e.g. regularized F00 inverse
};

// One EM iteration: filter + smooth under `params`, accumulate sufficient
// statistics, apply the M-step. A is held fixed; Q, R, sigma0 are symmetrized.
EmStepResult em_step(const DlmParams& params, const std::vector<Vector>& ys);

struct EmOptions {
  int max_iter = 100;
  double tol = 1e-6;  // relative log-likelihood improvement
};

struct EmFitResult {
  DlmParams params;
  std::vector<double> trace;  // loglik per iteration input, plus the final fit
  std::vector<std::string> warnings;
};

EmFitResult em_fit(const DlmParams& params0, const std::vector<Vector>& ys,
                   const EmOptions& opts = {});

struct ObsForecast {
  Vector mean;  // A Phi x
  Matrix cov;   // A (Phi P Phi' + Q) A' + R
};

ObsForecast forecast_one(const DlmParams& params, const Vector& x_filt_last,
                         const Matrix& p_filt_last);

struct KalmanWalkOptions {
  EmOptions em;
  int refit_every = 0;  // re-run EM every k test minutes; 0 = fit once
};

// Local-level price expert: EM once on everything before the test window,
// then a one-step-ahead filtered walk through the test window. Each forecast
// is emitted before its price is observed.
std::vector<ForecastPair> online_forecast_prices(const marketdata::PriceSeries& series,
                                                 const marketdata::SplitSpec& split,
                                                 const KalmanWalkOptions& opts = {});

}  // namespace sigkit::statespace
