#include "sigkit/arima.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Dense>

#include "sigkit/parallel.hpp"

namespace sigkit::arima {

namespace {

constexpr double kPacfBound = 1.0 - 1e-8;
constexpr double kBadObjective = 1e100;
constexpr int kMaxBfgsIter = 500;
constexpr double kGradTol = 1e-8;  // relative to max(1, |objective|)

double sample_mean(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return m / static_cast<double>(xs.size());
}

// Durbin-Levinson: partial autocorrelations in (-1,1) -> coefficients of a
// stationary AR polynomial 1 - a_1 B - ... - a_k B^k.
std::vector<double> pacf_to_coeffs(const std::vector<double>& pacf) {
  std::vector<double> a(pacf.size(), 0.0);
  std::vector<double> prev(pacf.size(), 0.0);
  for (std::size_t k = 0; k < pacf.size(); ++k) {
    std::copy(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k), prev.begin());
    a[k] = pacf[k];
    for (std::size_t j = 0; j < k; ++j) a[j] = prev[j] - pacf[k] * prev[k - 1 - j];
  }
  return a;
}

// Inverse of pacf_to_coeffs; false when the polynomial is not stationary.
bool coeffs_to_pacf(std::vector<double> a, std::vector<double>& pacf) {
  const std::size_t p = a.size();
  pacf.assign(p, 0.0);
  for (std::size_t k = p; k-- > 0;) {
    const double r = a[k];
    if (!(std::abs(r) < 1.0)) return false;
    pacf[k] = r;
    const double denom = 1.0 - r * r;
    std::vector<double> prev(k);
    for (std::size_t j = 0; j < k; ++j) prev[j] = (a[j] + r * a[k - 1 - j]) / denom;
    for (std::size_t j = 0; j < k; ++j) a[j] = prev[j];
  }
  return true;
}

std::vector<double> tanh_clamped(const Eigen::VectorXd& u, int offset, int count) {
  std::vector<double> r(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    r[static_cast<std::size_t>(i)] =
        std::clamp(std::tanh(u(offset + i)), -kPacfBound, kPacfBound);
  }
  return r;
}

// State-space structure of ARMA(p,q) in Harvey's form with r = max(p, q+1):
// transition T has the zero-padded AR coefficients in column 0 and an identity
// superdiagonal; the state-noise loading is (1, theta_1, .., theta_{r-1}).
struct HarveyForm {
  int r = 1;
  std::vector<double> phi;   // column 0 of T, length r
  std::vector<double> rvec;  // noise loading, length r
};

HarveyForm harvey_form(const std::vector<double>& ar, const std::vector<double>& ma) {
  HarveyForm h;
  h.r = std::max(static_cast<int>(ar.size()), static_cast<int>(ma.size()) + 1);
  h.phi.assign(static_cast<std::size_t>(h.r), 0.0);
  h.rvec.assign(static_cast<std::size_t>(h.r), 0.0);
  for (std::size_t i = 0; i < ar.size(); ++i) h.phi[i] = ar[i];
  h.rvec[0] = 1.0;
  for (std::size_t j = 0; j < ma.size(); ++j) h.rvec[j + 1] = ma[j];
  return h;
}

Eigen::MatrixXd transition_matrix(const HarveyForm& h) {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(h.r, h.r);
  for (int i = 0; i < h.r; ++i) {
    t(i, 0) = h.phi[static_cast<std::size_t>(i)];
    if (i + 1 < h.r) t(i, i + 1) = 1.0;
  }
  return t;
}

// Stationary covariance: solve P = T P T' + R R' through the vectorized
// linear system (I - T (x) T) vec(P) = vec(R R').
std::optional<Eigen::MatrixXd> stationary_cov(const HarveyForm& h) {
  const int r = h.r;
  const Eigen::MatrixXd t = transition_matrix(h);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(r * r, r * r);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) {
      for (int k = 0; k < r; ++k) {
        for (int l = 0; l < r; ++l) {
          a(i * r + k, j * r + l) -= t(i, j) * t(k, l);
        }
      }
    }
  }
  Eigen::VectorXd rhs(r * r);
  for (int i = 0; i < r; ++i) {
    for (int k = 0; k < r; ++k) {
      rhs(i * r + k) = h.rvec[static_cast<std::size_t>(i)] * h.rvec[static_cast<std::size_t>(k)];
    }
  }
  const Eigen::VectorXd vec_p = a.partialPivLu().solve(rhs);
  if (!vec_p.allFinite()) return std::nullopt;
  Eigen::MatrixXd p(r, r);
  for (int i = 0; i < r; ++i) {
    for (int k = 0; k < r; ++k) p(i, k) = vec_p(i * r + k);
  }
  p = 0.5 * (p + p.transpose()).eval();
  return p;
}

struct FilterStats {
  double sum_log_f = 0.0;
  double ssq = 0.0;  // sum of e_t^2 / f_t
  bool ok = false;
};

// Scalar-observation innovations filter at unit innovation variance, written
// against the companion structure of T so each step costs ~3r^2 flops.
FilterStats innovations_filter(const HarveyForm& h, const Eigen::MatrixXd& pstat,
                               const std::vector<double>& z) {
  const int r = h.r;
  const std::size_t rr = static_cast<std::size_t>(r);
  std::vector<double> a(rr, 0.0);
  std::vector<double> af(rr);
  std::vector<double> p(rr * rr);
  std::vector<double> pf(rr * rr);
  std::vector<double> s(rr * rr);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) p[static_cast<std::size_t>(i * r + j)] = pstat(i, j);
  }

  FilterStats stats;
  for (double zt : z) {
    const double f = p[0];
    if (!(f > 0.0) || !std::isfinite(f)) return stats;
    const double v = zt - a[0];
    stats.sum_log_f += std::log(f);
    stats.ssq += v * v / f;

    const double vf = v / f;
    for (std::size_t i = 0; i < rr; ++i) af[i] = a[i] + p[i * rr] * vf;
    for (std::size_t i = 0; i < rr; ++i) {
      const double pi0 = p[i * rr];
      for (std::size_t j = 0; j < rr; ++j) pf[i * rr + j] = p[i * rr + j] - pi0 * p[j * rr] / f;
    }

    for (std::size_t i = 0; i < rr; ++i) {
      a[i] = h.phi[i] * af[0] + (i + 1 < rr ? af[i + 1] : 0.0);
    }
    for (std::size_t i = 0; i < rr; ++i) {
      for (std::size_t j = 0; j < rr; ++j) {
        s[i * rr + j] = h.phi[i] * pf[j] + (i + 1 < rr ? pf[(i + 1) * rr + j] : 0.0);
      }
    }
    for (std::size_t i = 0; i < rr; ++i) {
      for (std::size_t j = 0; j < rr; ++j) {
        p[i * rr + j] = h.phi[j] * s[i * rr] + (j + 1 < rr ? s[i * rr + j + 1] : 0.0) +
                        h.rvec[i] * h.rvec[j];
      }
    }
  }
  stats.ok = std::isfinite(stats.sum_log_f) && std::isfinite(stats.ssq);
  return stats;
}

// Unconstrained parameter vector: p AR partials (atanh), q MA partials, then
// the mean when estimated.
struct ParamDecode {
  std::vector<double> ar;
  std::vector<double> ma;
  double mean = 0.0;
};

ParamDecode decode_params(const Eigen::VectorXd& w, int p, int q, bool include_mean) {
  ParamDecode d;
  d.ar = pacf_to_coeffs(tanh_clamped(w, 0, p));
  const std::vector<double> mb = pacf_to_coeffs(tanh_clamped(w, p, q));
  d.ma.resize(mb.size());
  for (std::size_t j = 0; j < mb.size(); ++j) d.ma[j] = -mb[j];
  d.mean = include_mean ? w(p + q) : 0.0;
  return d;
}

struct Objective {
  const std::vector<double>& xs;
  int p, q;
  bool include_mean;
  // Filled by the last successful evaluation so the optimum needs no re-run.
  mutable double last_sigma2 = 0.0;

  double operator()(const Eigen::VectorXd& w) const {
    const ParamDecode d = decode_params(w, p, q, include_mean);
    const HarveyForm h = harvey_form(d.ar, d.ma);
    const auto pstat = stationary_cov(h);
    if (!pstat) return kBadObjective;
    std::vector<double> z(xs.size());
    for (std::size_t t = 0; t < xs.size(); ++t) z[t] = xs[t] - d.mean;
    const FilterStats stats = innovations_filter(h, *pstat, z);
    if (!stats.ok) return kBadObjective;
    const double n = static_cast<double>(xs.size());
    const double sigma2 = stats.ssq / n;
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) return kBadObjective;
    last_sigma2 = sigma2;
    return 0.5 * (n * std::log(2.0 * std::numbers::pi) + stats.sum_log_f + n * std::log(sigma2) +
                  n);
  }
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  bool converged = false;
};

template <class F>
BfgsResult bfgs_minimize(const F& f, Eigen::VectorXd x0) {
  const Eigen::Index n = x0.size();
  auto gradient = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
      xp(i) = x(i) + h;
      const double fp = f(xp);
      xp(i) = x(i) - h;
      const double fm = f(xp);
      xp(i) = x(i);
      g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
  };

  BfgsResult out;
  out.x = std::move(x0);
  out.f = f(out.x);
  if (out.f >= kBadObjective) {
    // Hopeless start (should not happen with transformed parameters); restart
    // from the origin of the unconstrained space.
    out.x.setZero();
    out.f = f(out.x);
  }
  Eigen::VectorXd g = gradient(out.x);
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);

  for (int iter = 0; iter < kMaxBfgsIter; ++iter) {
    if (g.cwiseAbs().maxCoeff() <= kGradTol * std::max(1.0, std::abs(out.f))) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd dir = -(h_inv * g);
    double slope = dir.dot(g);
    if (!(slope < 0.0)) {  // lost positive-definiteness: reset to steepest descent
      h_inv.setIdentity();
      dir = -g;
      slope = dir.dot(g);
    }

    double step = 1.0;
    bool moved = false;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = out.x + step * dir;
      f_new = f(x_new);
      if (f_new <= out.f + 1e-4 * step * slope) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) {
      // No improving step exists at line-search resolution: numerical optimum.
      out.converged = true;
      break;
    }

    const Eigen::VectorXd g_new = gradient(x_new);
    const Eigen::VectorXd s = x_new - out.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(n, n);
      const double rho = 1.0 / sy;
      h_inv = (identity - rho * s * y.transpose()) * h_inv *
                  (identity - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
    const bool f_stalled = std::abs(f_new - out.f) <= 1e-12 * (std::abs(out.f) + 1.0);
    out.x = std::move(x_new);
    out.f = f_new;
    g = g_new;
    if (f_stalled) {
      out.converged = true;
      break;
    }
  }
  return out;
}

// Hannan-Rissanen starting values: long-AR residuals, then one least-squares
// regression on lagged data and lagged residuals. Falls back to the origin of
// the unconstrained space when anything degenerates.
Eigen::VectorXd starting_point(const std::vector<double>& xs, int p, int q, bool include_mean) {
  const int dim = p + q + (include_mean ? 1 : 0);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
  const double mean0 = include_mean ? sample_mean(xs) : 0.0;
  if (include_mean) w(p + q) = mean0;
  if (p + q == 0) return w;

  const std::size_t n = xs.size();
  std::vector<double> z(n);
  for (std::size_t t = 0; t < n; ++t) z[t] = xs[t] - mean0;

  const int long_ar = std::clamp(p + q + 5, 5, 25);
  if (n < static_cast<std::size_t>(long_ar + p + q) + 20) return w;

  // Long-AR residuals by OLS.
  std::vector<double> resid(n, 0.0);
  {
    const std::size_t rows = n - static_cast<std::size_t>(long_ar);
    Eigen::MatrixXd x(rows, long_ar);
    Eigen::VectorXd y(rows);
    for (std::size_t t = 0; t < rows; ++t) {
      y(static_cast<Eigen::Index>(t)) = z[t + static_cast<std::size_t>(long_ar)];
      for (int i = 0; i < long_ar; ++i) {
        x(static_cast<Eigen::Index>(t), i) =
            z[t + static_cast<std::size_t>(long_ar) - static_cast<std::size_t>(i) - 1];
      }
    }
    const Eigen::VectorXd c = x.colPivHouseholderQr().solve(y);
    if (!c.allFinite()) return w;
    for (std::size_t t = static_cast<std::size_t>(long_ar); t < n; ++t) {
      double pred = 0.0;
      for (int i = 0; i < long_ar; ++i) pred += c(i) * z[t - static_cast<std::size_t>(i) - 1];
      resid[t] = z[t] - pred;
    }
  }

  // Second-stage regression on p data lags and q residual lags.
  const std::size_t start = static_cast<std::size_t>(long_ar + std::max(p, q));
  const std::size_t rows = n - start;
  Eigen::MatrixXd x(rows, p + q);
  Eigen::VectorXd y(rows);
  for (std::size_t t = 0; t < rows; ++t) {
    const std::size_t at = t + start;
    y(static_cast<Eigen::Index>(t)) = z[at];
    for (int i = 0; i < p; ++i) {
      x(static_cast<Eigen::Index>(t), i) = z[at - static_cast<std::size_t>(i) - 1];
    }
    for (int j = 0; j < q; ++j) {
      x(static_cast<Eigen::Index>(t), p + j) = resid[at - static_cast<std::size_t>(j) - 1];
    }
  }
  const Eigen::VectorXd c = x.colPivHouseholderQr().solve(y);
  if (!c.allFinite()) return w;

  std::vector<double> ar0(static_cast<std::size_t>(p));
  std::vector<double> ma0(static_cast<std::size_t>(q));
  for (int i = 0; i < p; ++i) ar0[static_cast<std::size_t>(i)] = c(i);
  for (int j = 0; j < q; ++j) ma0[static_cast<std::size_t>(j)] = c(p + j);

  std::vector<double> pacf;
  if (coeffs_to_pacf(ar0, pacf)) {
    for (int i = 0; i < p; ++i) {
      w(i) = std::atanh(std::clamp(pacf[static_cast<std::size_t>(i)], -0.98, 0.98));
    }
  }
  std::vector<double> mb(ma0.size());
  for (std::size_t j = 0; j < ma0.size(); ++j) mb[j] = -ma0[j];
  if (coeffs_to_pacf(mb, pacf)) {
    for (int j = 0; j < q; ++j) {
      w(p + j) = std::atanh(std::clamp(pacf[static_cast<std::size_t>(j)], -0.98, 0.98));
    }
  }
  return w;
}

ArmaModel model_from_params(const Eigen::VectorXd& w, const Objective& obj, double negll,
                            std::size_t n_obs) {
  const ParamDecode d = decode_params(w, obj.p, obj.q, obj.include_mean);
  ArmaModel m;
  m.p = obj.p;
  m.q = obj.q;
  m.ar = d.ar;
  m.ma = d.ma;
  m.mean = d.mean;
  m.include_mean = obj.include_mean;
  m.sigma2 = obj.last_sigma2;
  m.loglik = -negll;
  m.n_obs = n_obs;
  return m;
}

void require_variation(const std::vector<double>& xs) {
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (*lo == *hi) throw DomainError("degenerate variance: series is constant");
}

}  // namespace

ArmaModel fit_arma(const std::vector<double>& series, int p, int q, bool include_mean) {
  if (p < 0 || q < 0) throw ConfigError("negative ARMA order");
  if (p > 12 || q > 12) throw ConfigError("ARMA order above 12 not supported");
  const std::size_t n = series.size();
  const std::size_t need = 10 * static_cast<std::size_t>(p + q + 1);
  if (n < need) {
    throw InsufficientDataError("arma(" + std::to_string(p) + "," + std::to_string(q) +
                                ") needs at least " + std::to_string(need) +
                                " observations, got " + std::to_string(n));
  }
  require_variation(series);

  if (p == 0 && q == 0) {
    // iid Gaussian: closed-form maximum likelihood.
    ArmaModel m;
    m.include_mean = include_mean;
    m.mean = include_mean ? sample_mean(series) : 0.0;
    double ss = 0.0;
    for (double x : series) ss += (x - m.mean) * (x - m.mean);
    m.sigma2 = ss / static_cast<double>(n);
    if (!(m.sigma2 > 0.0)) throw DomainError("degenerate variance in white-noise fit");
    m.loglik = -0.5 * static_cast<double>(n) *
               (std::log(2.0 * std::numbers::pi * m.sigma2) + 1.0);
    m.n_obs = n;
    return m;
  }

  const Objective obj{series, p, q, include_mean};
  const Eigen::VectorXd w0 = starting_point(series, p, q, include_mean);
  const BfgsResult res = bfgs_minimize(obj, w0);
  if (res.f >= kBadObjective) {
    throw NumericalError("arma likelihood not evaluable at any visited point");
  }
  obj(res.x);  // refresh last_sigma2 at the solution
  ArmaModel m = model_from_params(res.x, obj, res.f, n);
  if (!res.converged) {
    throw ArmaConvergenceError("arma(" + std::to_string(p) + "," + std::to_string(q) +
                                   ") fit did not converge within " +
                                   std::to_string(kMaxBfgsIter) + " iterations",
                               std::move(m));
  }
  return m;
}

double innovations_loglik(const ArmaModel& model, const std::vector<double>& series) {
  if (series.empty()) throw InsufficientDataError("loglik of empty series");
  if (!(model.sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
  const HarveyForm h = harvey_form(model.ar, model.ma);
  const auto pstat = stationary_cov(h);
  if (!pstat) throw NumericalError("no stationary covariance: AR polynomial not stationary");
  std::vector<double> z(series.size());
  for (std::size_t t = 0; t < series.size(); ++t) z[t] = series[t] - model.mean;
  const FilterStats stats = innovations_filter(h, *pstat, z);
  if (!stats.ok) throw NumericalError("innovations filter failed");
  const double n = static_cast<double>(series.size());
  return -0.5 * (n * std::log(2.0 * std::numbers::pi * model.sigma2) + stats.sum_log_f +
                 stats.ssq / model.sigma2);
}

statespace::DlmParams to_dlm(const ArmaModel& model) {
  const HarveyForm h = harvey_form(model.ar, model.ma);
  const auto pstat = stationary_cov(h);
  if (!pstat) throw NumericalError("no stationary covariance: AR polynomial not stationary");
  statespace::DlmParams d;
  d.phi = transition_matrix(h);
  Eigen::VectorXd rvec(h.r);
  for (int i = 0; i < h.r; ++i) rvec(i) = h.rvec[static_cast<std::size_t>(i)];
  d.q_cov = model.sigma2 * rvec * rvec.transpose();
  d.a_obs = Eigen::MatrixXd::Zero(1, h.r);
  d.a_obs(0, 0) = 1.0;
  d.r_cov = Eigen::MatrixXd::Zero(1, 1);
  d.mu0 = Eigen::VectorXd::Zero(h.r);
  d.sigma0 = model.sigma2 * *pstat;
  return d;
}

AicValue aic(const ArmaModel& model) {
  const int k = model.include_mean ? 1 : 0;
  return AicValue{-model.loglik + 2.0 * static_cast<double>(model.p + model.q + k + 1)};
}

ArmaModel select_order(const std::vector<double>& series, int p_max, int q_max,
                       bool include_mean, int n_threads) {
  if (p_max < 0 || q_max < 0 || p_max > 6 || q_max > 6) {
    throw ConfigError("order grid limits must lie in [0, 6]");
  }
  const int cells = (p_max + 1) * (q_max + 1);
  std::vector<std::optional<ArmaModel>> fits(static_cast<std::size_t>(cells));
  std::vector<std::string> failures(static_cast<std::size_t>(cells));

  parallel_for(cells, n_threads, [&](std::int64_t cell) {
    const int p = static_cast<int>(cell) / (q_max + 1);
    const int q = static_cast<int>(cell) % (q_max + 1);
    try {
      fits[static_cast<std::size_t>(cell)] = fit_arma(series, p, q, include_mean);
    } catch (const Error& e) {
      failures[static_cast<std::size_t>(cell)] = e.what();
    }
  });

  const ArmaModel* best = nullptr;
  double best_aic = 0.0;
  for (const auto& fit : fits) {
    if (!fit) continue;
    const double a = aic(*fit).value;
    const bool better =
        best == nullptr || a < best_aic ||
        (a == best_aic && (fit->p + fit->q < best->p + best->q ||
                           (fit->p + fit->q == best->p + best->q && fit->q < best->q)));
    if (better) {
      best = &*fit;
      best_aic = a;
    }
  }
  if (best == nullptr) {
    std::string msg = "every order-grid fit failed:";
    for (std::size_t i = 0; i < failures.size() && i < 4; ++i) msg += " [" + failures[i] + "]";
    throw ConvergenceError(msg);
  }
  return *best;
}

double forecast_one(const ArmaModel& model, const std::vector<double>& history) {
  const std::size_t need = static_cast<std::size_t>(std::max(model.p, model.q));
  if (history.size() < need || history.empty()) {
    throw InsufficientDataError("forecast needs at least " + std::to_string(need) +
                                " observations, got " + std::to_string(history.size()));
  }
  const std::size_t n = history.size();
  const std::size_t p = static_cast<std::size_t>(model.p);
  const std::size_t q = static_cast<std::size_t>(model.q);

  std::vector<double> z(n);
  for (std::size_t t = 0; t < n; ++t) z[t] = history[t] - model.mean;

  std::vector<double> eps;
  if (q > 0) {
    // Conditional residuals with zero pre-sample values.
    eps.assign(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      double pred = 0.0;
      for (std::size_t i = 0; i < p && i < t; ++i) pred += model.ar[i] * z[t - i - 1];
      for (std::size_t j = 0; j < q && j < t; ++j) pred += model.ma[j] * eps[t - j - 1];
      eps[t] = z[t] - pred;
    }
  }

  double fc = 0.0;
  for (std::size_t i = 0; i < p; ++i) fc += model.ar[i] * z[n - i - 1];
  for (std::size_t j = 0; j < q; ++j) fc += model.ma[j] * eps[n - j - 1];
  return model.mean + fc;
}

std::vector<ForecastPair> online_forecast_prices(const marketdata::PriceSeries& series,
                                                 const marketdata::SplitSpec& split,
                                                 const ArimaWalkOptions& opts) {
  const auto lens = marketdata::split_lengths(series.size(), split);
  const std::size_t n_history = lens.train + lens.cv;
  const std::vector<double>& prices = series.values;

  std::vector<double> returns;
  returns.reserve(series.size() - 1);
  for (std::size_t t = 1; t < n_history; ++t) {
    if (!(prices[t] > 0.0) || !(prices[t - 1] > 0.0)) {
      throw DomainError("non-positive price in training window");
    }
    returns.push_back(std::log(prices[t] / prices[t - 1]));
  }

  // A constant return series (e.g. constant prices) has no likelihood to
  // maximize; the conditional expectation is simply that constant.
  auto is_degenerate = [](const std::vector<double>& rs) {
    for (double r : rs) {
      if (r != rs.front()) return false;
    }
    return true;
  };
  auto constant_return_model = [](const std::vector<double>& rs) {
    ArmaModel m;
    m.mean = rs.empty() ? 0.0 : rs.front();
    m.sigma2 = 1.0;  // never enters the forecast; keeps the sigma2 > 0 invariant
    m.n_obs = rs.size();
    return m;
  };

  ArmaModel model = is_degenerate(returns)
                        ? constant_return_model(returns)
                        : select_order(returns, opts.p_max, opts.q_max, true, opts.n_threads);
  const int p_sel = model.p;
  const int q_sel = model.q;

  std::vector<ForecastPair> pairs;
  pairs.reserve(lens.test);
  for (std::size_t m = 0; m < lens.test; ++m) {
    const std::size_t idx = n_history + m;
    if (opts.refit_every > 0 && m > 0 &&
        m % static_cast<std::size_t>(opts.refit_every) == 0) {
      model = is_degenerate(returns) ? constant_return_model(returns)
                                     : fit_arma(returns, p_sel, q_sel, true);
    }
    const double ret_fc = forecast_one(model, returns);
    ForecastPair pair;
    pair.timestamp = series.timestamps[idx - 1];  // the decision minute
    pair.today = prices[idx - 1];
    pair.forecast = prices[idx - 1] * std::exp(ret_fc);
    pair.tmw = prices[idx];
    pairs.push_back(pair);
    returns.push_back(std::log(prices[idx] / prices[idx - 1]));
  }
  return pairs;
}

}  // namespace sigkit::arima
