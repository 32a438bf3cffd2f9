#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sigkit/errors.hpp"

namespace sigkit::stattests {

struct AdfResult {
  double statistic = 0.0;                       // t-ratio on the level coefficient
  int lags_used = 0;                            // augmentation order chosen by AIC
  bool reject_5pct = false;                     // statistic < critical_values["5%"]
  std::map<std::string, double> critical_values;  // {"1%", "5%", "10%"}
};

// Unit-root regression with constant, no trend:
//   dy_t = alpha + gamma*y_{t-1} + sum_i beta_i*dy_{t-i} + eps.
// Lag order 0..max_lags chosen by AIC on a common sample; max_lags < 0 means
// the Schwert rule floor(12*(n/100)^(1/4)). Throws NumericalError when the
// design matrix is rank-deficient (e.g. a constant series).
AdfResult adf_test(const std::vector<double>& series, int max_lags = -1);

struct SkewLaplaceParams {
  double location = 0.0;
  double scale = 1.0;      // sigma > 0
  double asymmetry = 1.0;  // kappa > 0; 1 = symmetric Laplace
};

// Density kappa/(sigma*(1+kappa^2)) * exp(-kappa*(x-m)/sigma)      for x >= m
//                                   * exp((x-m)/(kappa*sigma))     for x <  m
double skew_laplace_pdf(double x, const SkewLaplaceParams& p);
double skew_laplace_cdf(double x, const SkewLaplaceParams& p);
double skew_laplace_loglik(const std::vector<double>& sample, const SkewLaplaceParams& p);

// Maximum-likelihood fit: golden-section search over kappa with the location
// (an asymmetric-loss sample quantile) and scale solved in closed form.
SkewLaplaceParams fit_skew_laplace(const std::vector<double>& sample);

struct KsResult {
  double statistic = 0.0;  // sup |empirical CDF - cdf| over sample points
  std::size_t n = 0;
};

// Two-sided statistic using both empirical-CDF limits at each sample point.
KsResult ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf);

}  // namespace sigkit::stattests
