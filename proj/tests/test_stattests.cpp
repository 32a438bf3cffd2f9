#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "sigkit/errors.hpp"
#include "sigkit/rng.hpp"
#include "sigkit/stattests.hpp"

using namespace sigkit;
using namespace sigkit::stattests;

namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (auto& x : xs) x = rng.normal();
  return xs;
}

std::vector<double> random_walk(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> xs(n);
  double level = 0.0;
  for (auto& x : xs) {
    level += rng.normal();
    x = level;
  }
  return xs;
}

std::vector<double> laplace_sample(std::size_t n, std::uint64_t seed, double location,
                                   double scale) {
  Rng rng(seed);
  std::vector<double> xs(n);
  for (auto& x : xs) {
    const double u = rng.uniform();
    x = u < 0.5 ? location + scale * std::log(2.0 * u)
                : location - scale * std::log(2.0 * (1.0 - u));
  }
  return xs;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("adf: degenerate and undersized inputs") {
  const std::vector<double> zeros(500, 0.0);
  CHECK_THROWS_AS(adf_test(zeros), NumericalError);
  const std::vector<double> constant(500, 3.5);
  CHECK_THROWS_AS(adf_test(constant), NumericalError);
  CHECK_THROWS_AS(adf_test(white_noise(12, 1), 5), InsufficientDataError);
}

TEST_CASE("adf: published constant-case critical values") {
  const AdfResult r = adf_test(white_noise(500, 2));
  REQUIRE(r.critical_values.size() == 3);
  CHECK(r.critical_values.at("1%") == -3.43);
  CHECK(r.critical_values.at("5%") == -2.86);
  CHECK(r.critical_values.at("10%") == -2.57);
  CHECK(r.lags_used >= 0);
}

TEST_CASE("adf: rejection flag is exactly the 5% comparison") {
  for (std::uint64_t seed = 10; seed < 18; ++seed) {
    const AdfResult walk = adf_test(random_walk(400, seed));
    CHECK(walk.reject_5pct == (walk.statistic < walk.critical_values.at("5%")));
    const AdfResult noise = adf_test(white_noise(400, seed));
    CHECK(noise.reject_5pct == (noise.statistic < noise.critical_values.at("5%")));
  }
}

TEST_CASE("adf: white noise is stationary, a random walk is not") {
  const AdfResult noise = adf_test(white_noise(2000, 3));
  CHECK(noise.reject_5pct);
  CHECK(noise.statistic < -10.0);  // far into the rejection region
  const AdfResult walk = adf_test(random_walk(2000, 3));
  CHECK_FALSE(walk.reject_5pct);
}

TEST_CASE("adf: statistic is invariant under positive scaling") {
  const auto base = random_walk(800, 4);
  auto scaled = base;
  for (auto& x : scaled) x *= 3.7;
  const AdfResult a = adf_test(base);
  const AdfResult b = adf_test(scaled);
  CHECK(a.lags_used == b.lags_used);
  CHECK(a.statistic == doctest::Approx(b.statistic).epsilon(1e-8));
}

TEST_CASE("adf: Monte Carlo size and power at n=2000") {
  // a lighter version of the acceptance sweep: 50 replications per hypothesis
  int walk_rejections = 0;
  int noise_rejections = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    walk_rejections += adf_test(random_walk(2000, 100 + seed)).reject_5pct ? 1 : 0;
    noise_rejections += adf_test(white_noise(2000, 200 + seed)).reject_5pct ? 1 : 0;
  }
  CHECK(walk_rejections <= 8);    // nominal size 5%
  CHECK(noise_rejections >= 47);  // power is essentially 1 at this length
}

TEST_CASE("skew-laplace: pdf integrates to one and cdf matches it") {
  const SkewLaplaceParams p{0.3, 0.8, 1.4};
  // trapezoid over a wide bracket
  double integral = 0.0;
  const double lo = -30.0, hi = 30.0;
  const int steps = 200000;
  const double h = (hi - lo) / steps;
  double prev = skew_laplace_pdf(lo, p);
  for (int i = 1; i <= steps; ++i) {
    const double cur = skew_laplace_pdf(lo + h * i, p);
    integral += 0.5 * (prev + cur) * h;
    prev = cur;
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(skew_laplace_cdf(-30.0, p) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(skew_laplace_cdf(30.0, p) == doctest::Approx(1.0).epsilon(1e-9));
  // cdf' == pdf by finite differences at a few points
  for (double x : {-1.0, 0.29, 0.3, 0.31, 2.0}) {
    const double eps = 1e-6;
    const double deriv = (skew_laplace_cdf(x + eps, p) - skew_laplace_cdf(x - eps, p)) / (2 * eps);
    CHECK(deriv == doctest::Approx(skew_laplace_pdf(x, p)).epsilon(1e-4));
  }
  CHECK_THROWS_AS(skew_laplace_pdf(0.0, SkewLaplaceParams{0.0, -1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(skew_laplace_pdf(0.0, SkewLaplaceParams{0.0, 1.0, 0.0}), DomainError);
}

TEST_CASE("skew-laplace: symmetric sample recovers asymmetry near one") {
  const auto xs = laplace_sample(10000, 5, 0.0, 1.0);
  const SkewLaplaceParams fit = fit_skew_laplace(xs);
  CHECK(fit.asymmetry >= 0.9);
  CHECK(fit.asymmetry <= 1.1);
  CHECK(fit.scale > 0.0);
  CHECK(std::abs(fit.location) < 0.1);
}

TEST_CASE("skew-laplace: shift equivariance") {
  const auto xs = laplace_sample(5000, 6, 0.0, 0.7);
  auto shifted = xs;
  const double c = 3.7;
  for (auto& x : shifted) x += c;
  const SkewLaplaceParams a = fit_skew_laplace(xs);
  const SkewLaplaceParams b = fit_skew_laplace(shifted);
  CHECK(b.location - a.location == doctest::Approx(c).epsilon(1e-6));
  CHECK(b.scale == doctest::Approx(a.scale).epsilon(1e-6));
  CHECK(b.asymmetry == doctest::Approx(a.asymmetry).epsilon(1e-6));
}

TEST_CASE("skew-laplace: errors on degenerate samples") {
  CHECK_THROWS_AS(fit_skew_laplace({1.0, 2.0, 3.0, 4.0, 5.0}), InsufficientDataError);
  const std::vector<double> flat(50, 2.0);
  CHECK_THROWS_AS(fit_skew_laplace(flat), DomainError);
}

TEST_CASE("skew-laplace: fit is a local maximum of the log-likelihood") {
  for (std::uint64_t seed : {7ULL, 8ULL, 9ULL}) {
    const auto xs = laplace_sample(4000, seed, 0.1, 1.3);
    const SkewLaplaceParams fit = fit_skew_laplace(xs);
    const double base = skew_laplace_loglik(xs, fit);
    for (double delta : {1e-4, -1e-4}) {
      SkewLaplaceParams m = fit;
      m.location += delta;
      CHECK(skew_laplace_loglik(xs, m) <= base + 1e-9);
      SkewLaplaceParams s = fit;
      s.scale += delta;
      CHECK(skew_laplace_loglik(xs, s) <= base + 1e-9);
      SkewLaplaceParams k = fit;
      k.asymmetry += delta;
      CHECK(skew_laplace_loglik(xs, k) <= base + 1e-9);
    }
  }
}

TEST_CASE("skew-laplace: refitting from the fitted sample is deterministic") {
  const auto xs = laplace_sample(2000, 10, -0.5, 0.4);
  const SkewLaplaceParams a = fit_skew_laplace(xs);
  const SkewLaplaceParams b = fit_skew_laplace(xs);
  CHECK(a.location == b.location);
  CHECK(a.scale == b.scale);
  CHECK(a.asymmetry == b.asymmetry);
}

TEST_CASE("ks: hand-evaluated cases") {
  // single point at the median of the reference distribution
  const KsResult single = ks_statistic({0.0}, normal_cdf);
  CHECK(single.n == 1);
  CHECK(single.statistic == doctest::Approx(0.5).epsilon(1e-12));

  // sample placed exactly at interior quantiles: D = 1/(2n)
  const std::size_t n = 100;
  std::vector<double> quantiles(n);
  for (std::size_t i = 0; i < n; ++i) {
    quantiles[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
  }
  auto uniform_cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  const KsResult q = ks_statistic(quantiles, uniform_cdf);
  CHECK(q.statistic <= 1.0 / static_cast<double>(n));
  CHECK(q.statistic == doctest::Approx(0.005).epsilon(1e-12));

  CHECK_THROWS_AS(ks_statistic({}, uniform_cdf), InsufficientDataError);
  CHECK_THROWS_AS(ks_statistic({0.5}, [](double) { return 1.5; }), DomainError);
}

TEST_CASE("ks: uniform samples against the uniform cdf") {
  auto uniform_cdf = [](double x) { return std::clamp(x, 0.0, 1.0); };
  int good = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(300 + seed);
    std::vector<double> xs(10000);
    for (auto& x : xs) x = rng.uniform();
    const KsResult r = ks_statistic(xs, uniform_cdf);
    CHECK(r.statistic >= 0.0);
    CHECK(r.statistic <= 1.0);
    good += r.statistic < 0.02 ? 1 : 0;
  }
  CHECK(good >= 48);
}

TEST_CASE("ks: invariant under strictly monotone transformation") {
  const auto xs = white_noise(3000, 11);
  const KsResult base = ks_statistic(xs, normal_cdf);
  std::vector<double> cubed(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) cubed[i] = xs[i] * xs[i] * xs[i];
  const KsResult moved =
      ks_statistic(cubed, [](double y) { return normal_cdf(std::cbrt(y)); });
  CHECK(moved.statistic == doctest::Approx(base.statistic).epsilon(1e-9));
  CHECK(base.statistic > 0.0);
  CHECK(base.statistic < 0.05);
}
