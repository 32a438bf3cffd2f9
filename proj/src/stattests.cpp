#include "sigkit/stattests.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace sigkit::stattests {

namespace {

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd xtx_inv;
  double ssr = 0.0;
  std::size_t nobs = 0;
};

OlsFit ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < x.cols()) {
    throw NumericalError("singular design matrix in unit-root regression");
  }
  OlsFit fit;
  fit.beta = qr.solve(y);
  const Eigen::VectorXd resid = y - x * fit.beta;
  fit.ssr = resid.squaredNorm();
  fit.xtx_inv = (x.transpose() * x).inverse();
  fit.nobs = static_cast<std::size_t>(x.rows());
  return fit;
}

// Design matrix for the ADF regression at augmentation order `lags`, using
// observations t = start .. n_dy-1 in differenced-series indexing.
void adf_design(const std::vector<double>& y, const std::vector<double>& dy, int lags,
                std::size_t start, Eigen::MatrixXd& x, Eigen::VectorXd& rhs) {
  const std::size_t rows = dy.size() - start;
  const std::size_t cols = 2 + static_cast<std::size_t>(lags);
  x.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  rhs.resize(static_cast<Eigen::Index>(rows));
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t t = start + r;  // dy[t] = y[t+1] - y[t]
    rhs(static_cast<Eigen::Index>(r)) = dy[t];
    x(static_cast<Eigen::Index>(r), 0) = 1.0;
    x(static_cast<Eigen::Index>(r), 1) = y[t];  // the lagged level
    for (int i = 1; i <= lags; ++i) {
      x(static_cast<Eigen::Index>(r), 1 + i) = dy[t - static_cast<std::size_t>(i)];
    }
  }
}

}  // namespace

AdfResult adf_test(const std::vector<double>& series, int max_lags) {
  const std::size_t n = series.size();
  if (max_lags < 0) {
    max_lags = static_cast<int>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
  }
  if (n <= static_cast<std::size_t>(max_lags) + 10) {
    throw InsufficientDataError("adf test needs more than " + std::to_string(max_lags + 10) +
                                " observations, got " + std::to_string(n));
  }

  std::vector<double> dy(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t) dy[t] = series[t + 1] - series[t];

  // Choose the lag order on the common sample t >= max_lags so AIC values are
  // comparable, then refit the winner on its own full sample.
  Eigen::MatrixXd x;
  Eigen::VectorXd rhs;
  int best_lag = 0;
  double best_aic = 0.0;
  for (int lag = 0; lag <= max_lags; ++lag) {
    adf_design(series, dy, lag, static_cast<std::size_t>(max_lags), x, rhs);
    const OlsFit fit = ols(x, rhs);
    const double nobs = static_cast<double>(fit.nobs);
    const double aic =
        nobs * std::log(fit.ssr / nobs) + 2.0 * static_cast<double>(x.cols());
    if (lag == 0 || aic < best_aic) {
      best_aic = aic;
      best_lag = lag;
    }
  }

  adf_design(series, dy, best_lag, static_cast<std::size_t>(best_lag), x, rhs);
  const OlsFit fit = ols(x, rhs);
  const double dof = static_cast<double>(fit.nobs) - static_cast<double>(x.cols());
  if (dof <= 0.0) throw InsufficientDataError("adf regression has no residual degrees of freedom");
  const double sigma2 = fit.ssr / dof;
  const double se = std::sqrt(sigma2 * fit.xtx_inv(1, 1));
  if (!(se > 0.0) || !std::isfinite(se)) {
    throw NumericalError("degenerate standard error in unit-root regression");
  }

  AdfResult r;
  r.statistic = fit.beta(1) / se;
  r.lags_used = best_lag;
  r.critical_values = {{"1%", -3.43}, {"5%", -2.86}, {"10%", -2.57}};
  r.reject_5pct = r.statistic < r.critical_values.at("5%");
  return r;
}

namespace {

void require_valid(const SkewLaplaceParams& p) {
  if (!(p.scale > 0.0) || !(p.asymmetry > 0.0)) {
    throw DomainError("skew-Laplace scale and asymmetry must be positive");
  }
}

}  // namespace

double skew_laplace_pdf(double x, const SkewLaplaceParams& p) {
  require_valid(p);
  const double norm = p.asymmetry / (p.scale * (1.0 + p.asymmetry * p.asymmetry));
  const double z = x - p.location;
  return z >= 0.0 ? norm * std::exp(-p.asymmetry * z / p.scale)
                  : norm * std::exp(z / (p.asymmetry * p.scale));
}

double skew_laplace_cdf(double x, const SkewLaplaceParams& p) {
  require_valid(p);
  const double k2 = p.asymmetry * p.asymmetry;
  const double z = x - p.location;
  if (z < 0.0) return k2 / (1.0 + k2) * std::exp(z / (p.asymmetry * p.scale));
  return 1.0 - 1.0 / (1.0 + k2) * std::exp(-p.asymmetry * z / p.scale);
}

double skew_laplace_loglik(const std::vector<double>& sample, const SkewLaplaceParams& p) {
  require_valid(p);
  const double k = p.asymmetry;
  double weighted = 0.0;
  for (double x : sample) {
    const double z = x - p.location;
    weighted += z >= 0.0 ? k * z : -z / k;
  }
  const double n = static_cast<double>(sample.size());
  return n * std::log(k / (p.scale * (1.0 + k * k))) - weighted / p.scale;
}

namespace {

// Loss g(m) = kappa*sum(x-m)+ + (1/kappa)*sum(m-x)+ evaluated from prefix sums
// of the sorted sample; minimizing g over m maximizes the profile likelihood.
struct QuantileLoss {
  const std::vector<double>& xs;      // sorted
  const std::vector<double>& prefix;  // prefix[i] = sum of xs[0..i-1]

  double eval(double m, double kappa) const {
    const auto it = std::lower_bound(xs.begin(), xs.end(), m);
    const std::size_t below = static_cast<std::size_t>(it - xs.begin());
    const double total = prefix.back();
    const double sum_below = prefix[below];
    const double n_below = static_cast<double>(below);
    const double n_above = static_cast<double>(xs.size()) - n_below;
    const double s_minus = n_below * m - sum_below;          // sum over x < m of (m-x)
    const double s_plus = (total - sum_below) - n_above * m;  // sum over x >= m of (x-m)
    return kappa * s_plus + s_minus / kappa;
  }
};

}  // namespace

SkewLaplaceParams fit_skew_laplace(const std::vector<double>& sample) {
  const std::size_t n = sample.size();
  if (n < 10) {
    throw InsufficientDataError("skew-Laplace fit needs at least 10 points, got " +
                                std::to_string(n));
  }
  std::vector<double> xs = sample;
  std::sort(xs.begin(), xs.end());
  if (xs.front() == xs.back()) throw DomainError("skew-Laplace fit: zero-variance sample");

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + xs[i];
  const QuantileLoss loss{xs, prefix};

  // Profile log-likelihood of kappa, with location at the asymmetric-loss
  // quantile (checked against its order-statistic neighbours) and the scale at
  // its closed form sigma = g(m)/n, which makes the loss term equal n exactly.
  auto profile = [&](double kappa, SkewLaplaceParams* out) {
    const double q = kappa * kappa / (1.0 + kappa * kappa);
    const std::size_t center =
        std::min(n - 1, static_cast<std::size_t>(q * static_cast<double>(n)));
    double best_m = xs[center];
    double best_g = loss.eval(best_m, kappa);
    for (std::size_t j = center > 2 ? center - 2 : 0; j <= std::min(n - 1, center + 2); ++j) {
      const double g = loss.eval(xs[j], kappa);
      if (g < best_g) {
        best_g = g;
        best_m = xs[j];
      }
    }
    const double sigma = best_g / static_cast<double>(n);
    if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
    if (out) *out = SkewLaplaceParams{best_m, sigma, kappa};
    return static_cast<double>(n) * std::log(kappa / (sigma * (1.0 + kappa * kappa))) -
           static_cast<double>(n);
  };

  // Golden-section search on log(kappa).
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = -5.0;
  double hi = 5.0;
  double a = hi - phi * (hi - lo);
  double b = lo + phi * (hi - lo);
  double fa = profile(std::exp(a), nullptr);
  double fb = profile(std::exp(b), nullptr);
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    if (fa < fb) {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = profile(std::exp(b), nullptr);
    } else {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = profile(std::exp(a), nullptr);
    }
  }
  SkewLaplaceParams params;
  profile(std::exp((lo + hi) / 2.0), &params);
  return params;
}

KsResult ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw InsufficientDataError("ks statistic needs at least one point");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    if (!(f >= 0.0 && f <= 1.0)) throw DomainError("cdf value outside [0,1]");
    d = std::max(d, f - static_cast<double>(i) / n);       // left limit of the ECDF
    d = std::max(d, static_cast<double>(i + 1) / n - f);   // right limit
  }
  return KsResult{std::min(d, 1.0), sample.size()};
}

}  // namespace sigkit::stattests
