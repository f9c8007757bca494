#include <doctest.h>

#include "nalin/spectrum.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

using namespace nalin;

namespace {

Cocycle constant_cocycle(const Mat& a, long len = 200) {
  return Cocycle(0, std::vector<Mat>(static_cast<std::size_t>(len), a));
}

Mat diag(std::initializer_list<double> v) {
  Vec d(static_cast<long>(v.size()));
  long i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

std::shared_ptr<const DiscreteSystem> constant_map(const Mat& a) {
  return std::make_shared<ExplicitMap>(ExplicitMap::linear_map(static_cast<int>(a.rows()), [a](long) { return a; }, true));
}

// exact distance in log scale from x to the nearest of the given log points
double nearest(double x, const std::vector<double>& pts) {
  double best = 1e300;
  for (double p : pts) best = std::min(best, std::abs(x - p));
  return best;
}

}  // namespace

TEST_CASE("QR rates of constant diagonal and orthogonal cocycles") {
  auto rates = qr_growth_rates(constant_cocycle(diag({0.5, 3.0})), 10);
  REQUIRE(rates.size() == 2);
  CHECK(std::abs(rates[0].lo - std::log(0.5)) < 1e-8);
  CHECK(std::abs(rates[0].hi - std::log(0.5)) < 1e-8);
  CHECK(std::abs(rates[1].lo - std::log(3.0)) < 1e-8);
  CHECK(std::abs(rates[1].hi - std::log(3.0)) < 1e-8);

  const double th = 0.7;
  Mat rot(2, 2);
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  for (const auto& r : qr_growth_rates(constant_cocycle(rot), 10)) {
    CHECK(std::abs(r.lo) < 1e-8);
    CHECK(std::abs(r.hi) < 1e-8);
  }
  CHECK_THROWS_AS(qr_growth_rates(constant_cocycle(rot, 15), 10), Error);
}

TEST_CASE("QR rates of a Jordan block collapse to its single exponent") {
  Mat a(2, 2);
  a << -1, 1, 0, -1;
  const Mat ea = a.exp();
  const auto cocycle = constant_cocycle(ea, 400);
  double prev_width = 1e300;
  for (int w : {5, 20, 80}) {
    const auto rates = qr_growth_rates(cocycle, w);
    double width = 0.0;
    for (const auto& r : rates) width = std::max({width, std::abs(r.lo + 1.0), std::abs(r.hi + 1.0)});
    CHECK(width <= prev_width + 1e-12);
    CHECK(width < 0.05);
    prev_width = width;
  }
  // direct norm growth of A(n,0): |e^{nA}| ~ n e^{-n}, so the exponent is -1 + ln(n)/n
  for (long n : {50L, 200L}) {
    const double growth = std::log(operator_norm(cocycle.product(n, 0))) / static_cast<double>(n);
    CHECK(std::abs(growth - (-1.0 + std::log(static_cast<double>(n)) / n)) < 1e-3);
  }
}

TEST_CASE("dichotomy test on the saddle") {
  const auto cocycle = constant_cocycle(diag({std::exp(-1.0), std::exp(1.0)}));
  auto r = dichotomy_test(cocycle, 1.0, 10, 0.05);
  CHECK(r.passes);
  CHECK(std::abs(r.margin - 1.0) < 1e-9);
  CHECK_FALSE(dichotomy_test(cocycle, std::exp(1.0), 10, 0.05).passes);
  r = dichotomy_test(cocycle, std::exp(-0.5), 10, 0.05);
  CHECK(r.passes);
  CHECK(std::abs(r.margin - 0.5) < 1e-9);
}

TEST_CASE("spectrum of autonomous diagonal systems matches eigenvalue moduli") {
  const auto est = estimate_spectrum(constant_cocycle(diag({std::exp(-1.0), std::exp(1.0)})));
  REQUIRE(est.r == 2);
  CHECK(est.k == 1);
  CHECK(est.hyperbolic);
  const auto logs = est.log_intervals();
  CHECK(std::abs(logs[0].first + 1.0) <= 2e-3);
  CHECK(std::abs(logs[0].second + 1.0) <= 2e-3);
  CHECK(std::abs(logs[1].first - 1.0) <= 2e-3);
  CHECK(std::abs(logs[1].second - 1.0) <= 2e-3);

  const auto three = estimate_spectrum(constant_cocycle(diag({std::exp(-2.0), std::exp(-1.0), std::exp(1.0)})));
  CHECK(three.r == 3);
  CHECK(three.k == 2);
  const std::vector<double> exact{-2.0, -1.0, 1.0};
  for (const auto& [a, b] : three.log_intervals()) {
    CHECK(nearest(a, exact) <= 2e-3);
    CHECK(nearest(b, exact) <= 2e-3);
  }
}

TEST_CASE("scan consistency with the dichotomy test") {
  const auto cocycle = constant_cocycle(diag({std::exp(-2.0), std::exp(-1.0), std::exp(1.0)}));
  const auto est = estimate_spectrum(cocycle);
  const auto logs = est.log_intervals();
  int inconsistencies = 0;
  for (const auto& p : est.scan) {
    const double lm = std::log(p.mu);
    double dist = 1e300;
    bool inside = false;
    for (const auto& [a, b] : logs) {
      if (lm >= a && lm <= b) inside = true;
      dist = std::min(dist, lm < a ? a - lm : (lm > b ? lm - b : 0.0));
    }
    if (inside && p.passes) ++inconsistencies;
    if (dist > 0.05 && !p.passes) ++inconsistencies;
  }
  CHECK(inconsistencies == 0);
  for (const auto& [a, b] : est.intervals) {
    CHECK_FALSE(dichotomy_test(cocycle, a, 10, 0.05).passes);
    CHECK_FALSE(dichotomy_test(cocycle, b, 10, 0.05).passes);
    CHECK_FALSE(dichotomy_test(cocycle, std::sqrt(a * b), 10, 0.05).passes);
  }
}

TEST_CASE("thick interval from a switching scalar cocycle") {
  // blocks of 40 steps alternating between e^{-2} and e^{-1}
  std::vector<Mat> steps;
  for (long n = 0; n < 400; ++n) steps.push_back(Mat::Constant(1, 1, std::exp((n / 40) % 2 == 0 ? -2.0 : -1.0)));
  const Cocycle cocycle(0, steps);
  const auto est = estimate_spectrum(cocycle);
  REQUIRE(est.r == 1);
  CHECK(est.k == 1);
  // oracle: envelope of window-averaged log growth of the scalar products
  double lo = 1e300, hi = -1e300;
  for (long n = 10; n + 10 <= 400; ++n) {
    const double g = std::log(cocycle.product(n + 10, n)(0, 0)) / 10.0;
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  const auto logs = est.log_intervals();
  CHECK(std::abs(logs[0].first - lo) <= 2e-3);
  CHECK(std::abs(logs[0].second - hi) <= 2e-3);
  CHECK(std::abs(lo + 2.0) < 1e-9);
  CHECK(std::abs(hi + 1.0) < 1e-9);
}

TEST_CASE("spectrum properties: refinement and rescaling") {
  std::vector<Mat> steps;
  for (long n = 0; n < 300; ++n) {
    Mat a = diag({std::exp(-1.5 + 0.3 * ((n / 30) % 2)), std::exp(0.8)});
    a(0, 1) = 0.3;
    steps.push_back(a);
  }
  const Cocycle cocycle(0, steps);
  SpectrumSettings coarse;
  coarse.grid_step = 2e-3;
  const auto fine_est = estimate_spectrum(cocycle);
  const auto coarse_est = estimate_spectrum(cocycle, coarse);
  REQUIRE(fine_est.r == coarse_est.r);
  for (std::size_t i = 0; i < fine_est.intervals.size(); ++i) {
    const auto f = fine_est.log_intervals()[i];
    const auto c = coarse_est.log_intervals()[i];
    CHECK(f.first <= c.first + 2e-3);
    CHECK(f.second >= c.second - 2e-3);
  }
  const double c = 1.7;
  const auto scaled = estimate_spectrum(cocycle.scaled(c));
  REQUIRE(scaled.r == fine_est.r);
  for (std::size_t i = 0; i < scaled.intervals.size(); ++i) {
    CHECK(std::abs(scaled.log_intervals()[i].first - fine_est.log_intervals()[i].first - std::log(c)) <= 2e-3);
    CHECK(std::abs(scaled.log_intervals()[i].second - fine_est.log_intervals()[i].second - std::log(c)) <= 2e-3);
  }
}

TEST_CASE("non-hyperbolic spectrum is flagged") {
  const auto est = estimate_spectrum(constant_cocycle(diag({std::exp(-1.0), 1.0})));
  CHECK_FALSE(est.hyperbolic);
}

TEST_CASE("projections of diagonal and Jordan-coupled systems") {
  const auto sys = constant_map(diag({std::exp(-1.0), std::exp(1.0)}));
  ProjectionFamily p(sys, 1);
  CHECK((p.at(0) - diag({1.0, 0.0})).norm() < 1e-12);
  CHECK((p.at(7) - diag({1.0, 0.0})).norm() < 1e-12);

  Mat a(3, 3);
  a << -1, 1, 0, 0, -1, 0, 0, 0, 1;
  const auto jsys = constant_map(a.exp());
  ProjectionFamily pj(jsys, 2);
  for (long n = -3; n <= 3; ++n) {
    const Mat pn = pj.at(n);
    CHECK((pn - diag({1.0, 1.0, 0.0})).norm() <= 1e-6);
    CHECK(pj.invariance_residual(n) <= 1e-6);
    CHECK((pn * pn - pn).norm() <= 1e-9);
    CHECK(std::abs(pn.trace() - 2.0) < 1e-9);
  }
}

TEST_CASE("ill-conditioned splitting is refused") {
  // stable and unstable eigenvectors at angle 1e-10
  Mat v(2, 2);
  v << 1, 1, 0, 1e-10;
  const Mat a = v * diag({0.5, 2.0}) * v.inverse();
  ProjectionFamily p(constant_map(a), 1, 60, 1, 1e-8);
  CHECK_THROWS_AS(p.at(0), Error);
}

TEST_CASE("adapted norm of the autonomous saddle is the coordinate l1 norm") {
  const auto sys = constant_map(diag({std::exp(-1.0), std::exp(1.0)}));
  auto proj = std::make_shared<ProjectionFamily>(sys, 1);
  Vec x(2);
  x << 0.3, -0.7;
  const double an = adapted_norm(*sys, *proj, 1.0, 0, x, 40);
  CHECK(std::abs(an - 1.0) < 1e-12);
  CHECK(an >= x.norm());
  const auto data = adapted_norms(sys, proj, {1.0, 1.0, 1.0, 0.0});
  CHECK(data.sandwich_lower <= 1.0);
  CHECK(data.sandwich_upper <= 1.0);
  CHECK(data.C >= 1.0);
  CHECK(data.C <= 1.05 * std::sqrt(2.0) + 1e-12);
}

TEST_CASE("fitted constants of the autonomous saddle") {
  Mat a = diag({-1.0, 1.0});
  auto fam = std::make_shared<EvolutionFamily>(LinearSystem::constant(a, -100, 100), NonlinearTerm::zero(2));
  auto sys = std::make_shared<DiscretizedFlow>(fam);
  ProjectionFamily p(sys, 1);
  const auto c = fit_dichotomy_constants(*fam, p);
  CHECK(std::abs(c.lambda - 1.0) < 1e-6);
  CHECK(std::abs(c.lambda_bar - 1.0) < 1e-6);
  CHECK(c.eps < 1e-6);
  CHECK(std::abs(c.M - 1.05) < 1e-6);
  CHECK(dichotomy_violation_rate(*fam, p, c, 200, 0, 20, 10, 5) == 0.0);
}
