#include "sigkit/statespace.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sigkit::statespace {

namespace {

constexpr double kSymTol = 1e-10;
constexpr double kJosephCondLimit = 1e8;

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void require_symmetric_psd(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw ConfigError(std::string(what) + " must be square");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymTol * scale) {
    throw ValidationError(std::string(what) + " is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -kSymTol * scale) {
    throw ValidationError(std::string(what) + " is not positive semidefinite");
  }
}

// Condition number of a symmetric PSD matrix; infinite when near-singular.
double psd_condition(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace

void DlmParams::validate() const {
  const Eigen::Index p = phi.rows();
  const Eigen::Index q = a_obs.rows();
  if (p == 0 || q == 0) throw ConfigError("state and observation dimensions must be positive");
  if (phi.cols() != p) throw ConfigError("phi must be square");
  if (q_cov.rows() != p || q_cov.cols() != p) throw ConfigError("q_cov dimension mismatch");
  if (a_obs.cols() != p) throw ConfigError("a_obs dimension mismatch");
  if (r_cov.rows() != q || r_cov.cols() != q) throw ConfigError("r_cov dimension mismatch");
  if (mu0.size() != p) throw ConfigError("mu0 dimension mismatch");
  if (sigma0.rows() != p || sigma0.cols() != p) throw ConfigError("sigma0 dimension mismatch");
  require_symmetric_psd(q_cov, "q_cov");
  require_symmetric_psd(r_cov, "r_cov");
  require_symmetric_psd(sigma0, "sigma0");
}

FilterResult kf_filter(const DlmParams& params, const std::vector<Vector>& ys) {
  params.validate();
  if (ys.empty()) throw InsufficientDataError("kalman filter needs at least one observation");
  const Eigen::Index p = params.phi.rows();
  const Eigen::Index q = params.a_obs.rows();
  for (std::size_t t = 0; t < ys.size(); ++t) {
    if (ys[t].size() != q) {
      throw ConfigError("observation " + std::to_string(t + 1) + " has dimension " +
                        std::to_string(ys[t].size()) + ", expected " + std::to_string(q));
    }
  }

  const std::size_t n = ys.size();
  FilterResult r;
  r.x_pred.reserve(n);
  r.p_pred.reserve(n);
  r.x_filt.reserve(n);
  r.p_filt.reserve(n);
  r.gains.reserve(n);
  r.innovations.reserve(n);
  r.innovation_covs.reserve(n);

  const Matrix identity = Matrix::Identity(p, p);
  Vector x = params.mu0;
  Matrix cov = symmetrize(params.sigma0);
  double loglik = 0.0;
  const double log2pi = std::log(2.0 * std::numbers::pi);

  for (std::size_t t = 0; t < n; ++t) {
    const Vector x_pred = params.phi * x;
    const Matrix p_pred = symmetrize(params.phi * cov * params.phi.transpose() + params.q_cov);

    const Matrix sigma_t =
        symmetrize(params.a_obs * p_pred * params.a_obs.transpose() + params.r_cov);
    Eigen::LLT<Matrix> llt(sigma_t);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("singular innovation covariance at t=" + std::to_string(t + 1));
    }
    const Vector innov = ys[t] - params.a_obs * x_pred;
    const Matrix gain = llt.solve(params.a_obs * p_pred.transpose()).transpose();

    x = x_pred + gain * innov;
    const Matrix i_ka = identity - gain * params.a_obs;
    if (psd_condition(p_pred) > kJosephCondLimit) {
      // Joseph form resists the catastrophic cancellation of (I-KA)P when the
      // predicted covariance is ill-conditioned, keeping the result PSD.
      cov = symmetrize(i_ka * p_pred * i_ka.transpose() +
                       gain * params.r_cov * gain.transpose());
    } else {
      cov = symmetrize(i_ka * p_pred);
    }

    const Matrix l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    const Vector white = llt.matrixL().solve(innov);
    loglik += -0.5 * (static_cast<double>(q) * log2pi + logdet + white.squaredNorm());

    r.x_pred.push_back(x_pred);
    r.p_pred.push_back(p_pred);
    r.x_filt.push_back(x);
    r.p_filt.push_back(cov);
    r.gains.push_back(gain);
    r.innovations.push_back(innov);
    r.innovation_covs.push_back(sigma_t);
  }
  if (!std::isfinite(loglik)) throw NumericalError("non-finite filter log-likelihood");
  r.loglik = loglik;
  return r;
}

SmoothResult kf_smooth(const DlmParams& params, const FilterResult& filt) {
  const std::size_t n = filt.x_filt.size();
  if (n == 0) throw InsufficientDataError("smoother needs a non-empty filter result");
  const Eigen::Index p = params.phi.rows();

  // Filtered moments extended with the t = 0 prior so the recursion can reach
  // the initial state (needed by the EM updates for mu0/sigma0).
  auto x_filt_at = [&](std::size_t t) -> const Vector& {
    return t == 0 ? params.mu0 : filt.x_filt[t - 1];
  };
  auto p_filt_at = [&](std::size_t t) -> const Matrix& {
    return t == 0 ? params.sigma0 : filt.p_filt[t - 1];
  };
  auto p_pred_at = [&](std::size_t t) -> const Matrix& {
    return filt.p_pred[t - 1];  // P_t^{t-1}, valid for t = 1..n
  };

  SmoothResult sm;
  sm.x_smooth.assign(n + 1, Vector::Zero(p));
  sm.p_smooth.assign(n + 1, Matrix::Zero(p, p));
  sm.p_lag.assign(n + 1, Matrix::Zero(p, p));

  sm.x_smooth[n] = filt.x_filt[n - 1];
  sm.p_smooth[n] = filt.p_filt[n - 1];

  std::vector<Matrix> smoother_gain(n, Matrix::Zero(p, p));  // J_t for t = 0..n-1
  for (std::size_t t = n; t-- > 0;) {
    const Matrix& p_next_pred = p_pred_at(t + 1);
    Eigen::FullPivLU<Matrix> lu(p_next_pred);
    if (!lu.isInvertible()) {
      throw NumericalError("singular predicted covariance at t=" + std::to_string(t + 1));
    }
    const Matrix j = p_filt_at(t) * params.phi.transpose() * lu.inverse();
    smoother_gain[t] = j;
    sm.x_smooth[t] = x_filt_at(t) + j * (sm.x_smooth[t + 1] - params.phi * x_filt_at(t));
    sm.p_smooth[t] =
        symmetrize(p_filt_at(t) + j * (sm.p_smooth[t + 1] - p_next_pred) * j.transpose());
  }

  // Lag-one covariances, initialized at P_{n,n-1}^n = (I - K_n A) Phi P_{n-1}^{n-1}.
  const Matrix identity = Matrix::Identity(p, p);
  sm.p_lag[n] = (identity - filt.gains[n - 1] * params.a_obs) * params.phi * p_filt_at(n - 1);
  for (std::size_t t = n - 1; t >= 1; --t) {
    sm.p_lag[t] = p_filt_at(t) * smoother_gain[t - 1].transpose() +
                  smoother_gain[t] * (sm.p_lag[t + 1] - params.phi * p_filt_at(t)) *
                      smoother_gain[t - 1].transpose();
  }
  return sm;
}

EmStats accumulate_em_stats(const std::vector<Vector>& ys, const SmoothResult& sm) {
  const std::size_t n = ys.size();
  const Eigen::Index p = sm.x_smooth.front().size();
  EmStats s;
  s.f11 = Matrix::Zero(p, p);
  s.f10 = Matrix::Zero(p, p);
  s.f00 = Matrix::Zero(p, p);
  for (std::size_t t = 1; t <= n; ++t) {
    s.f11 += sm.x_smooth[t] * sm.x_smooth[t].transpose() + sm.p_smooth[t];
    s.f10 += sm.x_smooth[t] * sm.x_smooth[t - 1].transpose() + sm.p_lag[t];
    s.f00 += sm.x_smooth[t - 1] * sm.x_smooth[t - 1].transpose() + sm.p_smooth[t - 1];
  }
  return s;
}

EmStepResult em_step(const DlmParams& params, const std::vector<Vector>& ys) {
  const FilterResult filt = kf_filter(params, ys);
  const SmoothResult sm = kf_smooth(params, filt);
  const EmStats stats = accumulate_em_stats(ys, sm);
  const double n = static_cast<double>(ys.size());
  const Eigen::Index p = params.phi.rows();

  EmStepResult out;
  out.loglik = filt.loglik;

  Matrix f00 = symmetrize(stats.f00);
  Eigen::LLT<Matrix> llt(f00);
  if (llt.info() != Eigen::Success) {
    // Near-singular second-moment matrix: ridge it rather than fail, as a
    // degenerate state direction carries no information about Phi.
    f00 += 1e-10 * f00.trace() * Matrix::Identity(p, p);
    llt.compute(f00);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("F00 not invertible even after regularization");
    }
    out.warnings.push_back("regularized singular F00 with ridge 1e-10*trace");
  }

  const Matrix phi_new = llt.solve(stats.f10.transpose()).transpose();  // F10 F00^{-1}
  const Matrix q_new =
      symmetrize((stats.f11 - phi_new * stats.f10.transpose()) / n);

  Matrix r_new = Matrix::Zero(params.a_obs.rows(), params.a_obs.rows());
  for (std::size_t t = 1; t <= ys.size(); ++t) {
    const Vector resid = ys[t - 1] - params.a_obs * sm.x_smooth[t];
    r_new += resid * resid.transpose() +
             params.a_obs * sm.p_smooth[t] * params.a_obs.transpose();
  }
  r_new = symmetrize(r_new / n);

  out.params = params;  // A stays fixed
  out.params.phi = phi_new;
  out.params.q_cov = q_new;
  out.params.r_cov = r_new;
  out.params.mu0 = sm.x_smooth[0];
  out.params.sigma0 = symmetrize(sm.p_smooth[0]);
  return out;
}

EmFitResult em_fit(const DlmParams& params0, const std::vector<Vector>& ys,
                   const EmOptions& opts) {
  params0.validate();
  if (opts.max_iter < 0) throw ConfigError("max_iter must be non-negative");

  EmFitResult out;
  out.params = params0;
  // Degenerate data (e.g. a constant series) drives Q, R, sigma0 toward zero
  // until some iterate can no longer be filtered; EM then stops at the last
  // parameters whose likelihood was actually evaluated instead of failing.
  DlmParams last_evaluated = params0;
  double prev_ll = 0.0;
  bool have_prev = false;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    EmStepResult step;
    try {
      step = em_step(out.params, ys);
    } catch (const NumericalError& e) {
      if (!have_prev) throw;  // the starting parameters themselves are unusable
      out.warnings.push_back("aborted at iteration " + std::to_string(iter + 1) + ": " +
                             e.what());
      out.params = last_evaluated;
      out.trace.push_back(out.trace.back());
      return out;
    }
    out.trace.push_back(step.loglik);
    for (auto& w : step.warnings) out.warnings.push_back(std::move(w));
    if (!std::isfinite(step.loglik)) {
      out.warnings.push_back("aborted: non-finite log-likelihood at iteration " +
                             std::to_string(iter + 1));
      return out;
    }
    last_evaluated = out.params;
    out.params = std::move(step.params);
    if (have_prev) {
      const double rel = (step.loglik - prev_ll) / std::max(1.0, std::abs(prev_ll));
      if (rel < opts.tol) {
        prev_ll = step.loglik;
        break;
      }
    }
    prev_ll = step.loglik;
    have_prev = true;
  }
  // Close the trace with the likelihood the final parameters actually attain.
  try {
    out.trace.push_back(kf_filter(out.params, ys).loglik);
  } catch (const NumericalError& e) {
    if (out.trace.empty()) throw;  // max_iter 0 and unusable starting parameters
    out.warnings.push_back(std::string("final iterate was degenerate (") + e.what() +
                           "); kept the last evaluated parameters");
    out.params = last_evaluated;
    out.trace.push_back(out.trace.back());
  }
  return out;
}

ObsForecast forecast_one(const DlmParams& params, const Vector& x_filt_last,
                         const Matrix& p_filt_last) {
  ObsForecast f;
  const Vector x_next = params.phi * x_filt_last;
  const Matrix p_next =
      params.phi * p_filt_last * params.phi.transpose() + params.q_cov;
  f.mean = params.a_obs * x_next;
  f.cov = params.a_obs * p_next * params.a_obs.transpose() + params.r_cov;
  return f;
}

namespace {

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

Matrix scalar_matrix(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace

std::vector<ForecastPair> online_forecast_prices(const marketdata::PriceSeries& series,
                                                 const marketdata::SplitSpec& split,
                                                 const KalmanWalkOptions& opts) {
  const auto lens = marketdata::split_lengths(series.size(), split);
  const std::size_t n_history = lens.train + lens.cv;  // everything before the test window
  if (n_history < 3) throw InsufficientDataError("training window too short for EM");

  const std::vector<double>& prices = series.values;
  std::vector<double> train(prices.begin(), prices.begin() + static_cast<std::ptrdiff_t>(n_history));
  std::vector<double> diffs(train.size() - 1);
  for (std::size_t t = 0; t + 1 < train.size(); ++t) diffs[t] = train[t + 1] - train[t];
  const double diff_var = std::max(sample_variance(diffs), 1e-12);

  DlmParams init;
  init.phi = scalar_matrix(1.0);
  init.q_cov = scalar_matrix(0.1 * diff_var);
  init.a_obs = scalar_matrix(1.0);
  init.r_cov = scalar_matrix(0.9 * diff_var);
  init.mu0 = Vector::Constant(1, train.front());
  init.sigma0 = scalar_matrix(std::max(sample_variance(train), 1e-12));

  auto to_obs = [](const std::vector<double>& xs) {
    std::vector<Vector> ys;
    ys.reserve(xs.size());
    for (double x : xs) ys.push_back(Vector::Constant(1, x));
    return ys;
  };

  EmFitResult fit = em_fit(init, to_obs(train), opts.em);
  DlmParams params = fit.params;

  // Filter through the history once, then walk the test window one minute at
  // a time, emitting each forecast before observing its price.
  FilterResult filt = kf_filter(params, to_obs(train));
  Vector x = filt.x_filt.back();
  Matrix p = filt.p_filt.back();

  std::vector<double> observed = train;
  std::vector<ForecastPair> pairs;
  pairs.reserve(lens.test);
  for (std::size_t m = 0; m < lens.test; ++m) {
    const std::size_t idx = n_history + m;
    if (opts.refit_every > 0 && m > 0 &&
        m % static_cast<std::size_t>(opts.refit_every) == 0) {
      fit = em_fit(params, to_obs(observed), opts.em);
      params = fit.params;
      const FilterResult refilt = kf_filter(params, to_obs(observed));
      x = refilt.x_filt.back();
      p = refilt.p_filt.back();
    }

    const ObsForecast fc = forecast_one(params, x, p);
    ForecastPair pair;
    pair.timestamp = series.timestamps[idx - 1];  // the decision minute
    pair.today = prices[idx - 1];
    pair.forecast = fc.mean(0);
    pair.tmw = prices[idx];
    pairs.push_back(pair);

    // Single filter update with the newly observed price.
    const Vector x_pred = params.phi * x;
    const Matrix p_pred =
        symmetrize(params.phi * p * params.phi.transpose() + params.q_cov);
    const Matrix sigma_t =
        symmetrize(params.a_obs * p_pred * params.a_obs.transpose() + params.r_cov);
    Eigen::LLT<Matrix> llt(sigma_t);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("singular innovation covariance during online walk");
    }
    const Vector y = Vector::Constant(1, prices[idx]);
    const Vector innov = y - params.a_obs * x_pred;
    const Matrix gain = llt.solve(params.a_obs * p_pred.transpose()).transpose();
    x = x_pred + gain * innov;
    const Matrix i_ka =
        Matrix::Identity(params.phi.rows(), params.phi.rows()) - gain * params.a_obs;
    if (psd_condition(p_pred) > kJosephCondLimit) {
      p = symmetrize(i_ka * p_pred * i_ka.transpose() + gain * params.r_cov * gain.transpose());
    } else {
      p = symmetrize(i_ka * p_pred);
    }
    observed.push_back(prices[idx]);
  }
  return pairs;
}

}  // namespace sigkit::statespace
