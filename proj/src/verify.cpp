#include "nalin/verify.hpp"
#include "nalin/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nalin {

namespace {

constexpr double kMinRadius = 1e-12;

void record(CheckResult& c, double value, const Vec& x, double t) {
  ++c.samples;
  if (!c.witness || value > c.measured) {
    c.measured = value;
    c.witness = x;
    c.witness_t = t;
  }
}

std::string describe(const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); }

void skip(CheckResult& c, const Error& e, double t) {
  ++c.skipped;
  if (c.notes.size() < 5) {
    std::ostringstream os;
    os << "skipped sample at t = " << t << " (" << describe(e) << ")";
    c.notes.push_back(os.str());
  }
}

int first_level(double radius) { return std::max(4, static_cast<int>(std::ceil(-std::log2(radius)))); }

// largest r_{j+1} / r_j over the last 6 levels; 0 when all ratios vanish
double worst_step(const ExpansionReport& e) {
  double worst = 0.0;
  const std::size_t n = e.ratios.size();
  for (std::size_t k = n >= 6 ? n - 5 : 1; k < n; ++k) {
    if (e.ratios[k - 1] > 0.0) worst = std::max(worst, e.ratios[k] / e.ratios[k - 1]);
    else if (e.ratios[k] > 0.0) worst = std::numeric_limits<double>::infinity();
  }
  return worst;
}

}  // namespace

HolderFit fit_holder(const PointMap& map, int dim, double radius, int pairs, double decades, std::uint64_t seed) {
  if (pairs < 200) fail(ErrorCode::invalid_argument, "Holder fit needs at least 200 pairs");
  if (decades < 3.0) fail(ErrorCode::invalid_argument, "Holder fit needs a spread of at least 3 decades");
  if (!(radius > 0.0) || radius * std::pow(10.0, -decades) / 4.0 < kMinRadius) {
    fail(ErrorCode::invalid_argument, "Holder fit radius range reaches the floating-point floor");
  }
  Sampler rng(seed);
  HolderFit fit;
  fit.min_distance = std::numeric_limits<double>::infinity();
  for (int k = 0; k < pairs; ++k) {
    const Vec x = rng.in_ball(dim, radius / 2.0);
    const double delta = radius / 4.0 * std::pow(10.0, -decades * rng.uniform(0.0, 1.0));
    const Vec y = x + delta * rng.unit_vector(dim);
    const double dm = (map(x) - map(y)).norm();
    if (!(dm > 0.0)) continue;
    fit.points.emplace_back(std::log(delta), std::log(dm));
    fit.min_distance = std::min(fit.min_distance, delta);
    fit.max_distance = std::max(fit.max_distance, delta);
  }
  fit.pairs = static_cast<int>(fit.points.size());
  if (fit.pairs < 200) fail(ErrorCode::invalid_argument, "too many coincident images for a Holder fit");
  double mx = 0.0, my = 0.0;
  for (const auto& [a, b] : fit.points) {
    mx += a;
    my += b;
  }
  mx /= fit.pairs;
  my /= fit.pairs;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [a, b] : fit.points) {
    sxx += (a - mx) * (a - mx);
    sxy += (a - mx) * (b - my);
    syy += (b - my) * (b - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.decades = std::log10(fit.max_distance / fit.min_distance);
  return fit;
}

ExpansionReport check_expansion(const PointMap& map, int dim, int j_first, int j_last, double rho, int directions,
                                std::uint64_t seed) {
  require(j_last >= j_first + 5, "expansion check needs at least 6 dyadic levels");
  require(rho > 0.0 && rho < 1.0, "rho must lie in (0, 1)");
  if (std::ldexp(1.0, -j_last) < kMinRadius) fail(ErrorCode::invalid_argument, "dyadic radius below 1e-12");
  Sampler rng(seed);
  std::vector<Vec> dirs;
  for (int k = 0; k < directions; ++k) dirs.push_back(rng.unit_vector(dim));
  ExpansionReport out;
  out.rho = rho;
  for (int j = j_first; j <= j_last; ++j) {
    const double r = std::ldexp(1.0, -j);
    double worst = 0.0;
    for (const auto& u : dirs) {
      const Vec x = r * u;
      worst = std::max(worst, (map(x) - x).norm() / std::pow(r, 1.0 + rho));
    }
    out.levels.push_back(j);
    out.radii.push_back(r);
    out.ratios.push_back(worst);
  }
  out.monotone = worst_step(out) <= 1.05;
  return out;
}

CheckResult check_solution_mapping(const ContinuousConjugacy& cc, bool inverse_map, const RadiusFn& radius,
                                   const VerifySettings& s) {
  CheckResult c;
  c.item = inverse_map ? "A5" : "A4";
  c.description = inverse_map ? "G(t, y(t)) solves the nonlinear equation along linear solutions y"
                              : "H(t, x(t)) solves the linear equation along nonlinear solutions x";
  c.tolerance = s.tol_ver;
  const EvolutionFamily& fam = cc.family();
  const int dim = fam.dimension();
  Sampler rng(s.seed + (inverse_map ? 505 : 404));
  const int steps = static_cast<int>(std::llround((s.t1 - s.t0) / s.dt));
  int truncated = 0;
  for (int k = 0; k < s.trajectories; ++k) {
    const Vec x0 = rng.in_ball(dim, radius(s.t0) / 2.0);
    const double scale = x0.norm();
    if (scale == 0.0) continue;
    double t = s.t0;
    try {
      const Vec m0 = inverse_map ? cc.G(s.t0, x0) : cc.H(s.t0, x0);
      Vec along = x0;  // x(t) (nonlinear) or y(t) (linear)
      Vec image = m0;  // T(t,t0) H(t0,x0) or phi(t,t0; G(t0,y0))
      for (int m = 1; m <= steps; ++m) {
        const double prev = t;
        t = s.t0 + m * s.dt;
        if (inverse_map) {
          along = fam.transition(prev, t) * along;
          image = fam.flow(prev, t, image);
        } else {
          along = fam.flow(prev, t, along);
          image = fam.transition(prev, t) * image;
        }
        const Vec lhs = inverse_map ? cc.G(t, along) : cc.H(t, along);
        record(c, (lhs - image).norm() / scale, x0, t);
      }
    } catch (const Error& e) {
      // the identities hold on V_t only: a solution leaving it ends its sample window there
      if (e.code() == ErrorCode::domain) {
        ++truncated;
      } else {
        skip(c, e, t);
      }
    }
  }
  if (truncated > 0) {
    c.notes.push_back(std::to_string(truncated) + " of " + std::to_string(s.trajectories) +
                      " solutions left V_t before t1 and were truncated there");
  }
  c.pass = c.samples > 0 && c.skipped == 0 && c.measured <= c.tolerance;
  return c;
}

CheckResult check_inverse(const ContinuousConjugacy& cc, const RadiusFn& radius, const VerifySettings& s) {
  CheckResult c;
  c.item = "A3";
  c.description = "H(t, G(t, x)) = x and G(t, H(t, x)) = x";
  c.tolerance = s.tol_inverse;
  const int dim = cc.family().dimension();
  Sampler rng(s.seed + 303);
  for (int k = 0; k < s.inverse_samples; ++k) {
    const double t = rng.uniform(s.t0, s.t1);
    const Vec x = rng.in_ball(dim, radius(t) / 2.0);
    const double scale = x.norm();
    if (scale == 0.0) continue;
    try {
      const double a = (cc.H(t, cc.G(t, x)) - x).norm() / scale;
      const double b = (cc.G(t, cc.H(t, x)) - x).norm() / scale;
      record(c, std::max(a, b), x, t);
    } catch (const Error& e) {
      skip(c, e, t);
    }
  }
  c.pass = c.samples > 0 && c.measured <= c.tolerance;
  return c;
}

CheckResult check_equivariance(const ContinuousConjugacy& cc, const VerifySettings& s) {
  CheckResult c;
  c.item = "B3";
  c.description = "e^{At} H~(x) = H~(phi(t, 0; x)) for the averaged conjugacy";
  // 1e-4 at |x| = 1e-2
  c.tolerance = 1e-2 * s.equivariance_radius;
  const EvolutionFamily& fam = cc.family();
  Sampler rng(s.seed + 606);
  const Vec x = s.equivariance_radius * rng.unit_vector(fam.dimension());
  try {
    const Vec hx = cc.averaged_H(x);
    for (double t : s.equivariance_times) {
      const Vec lhs = fam.transition(0.0, t) * hx;
      const Vec rhs = cc.averaged_H(fam.flow(0.0, t, x));
      record(c, (lhs - rhs).norm(), x, t);
    }
  } catch (const Error& e) {
    skip(c, e, 0.0);
  }
  c.pass = c.samples > 0 && c.skipped == 0 && c.measured <= c.tolerance;
  return c;
}

VerificationReport verify_conjugacy(const ContinuousConjugacy& cc, const RadiusFn& radius, const VerifySettings& s) {
  require(s.t1 > s.t0 && s.dt > 0.0, "verification needs t1 > t0 and dt > 0");
  VerificationReport rep;
  rep.seed = s.seed;
  const int dim = cc.family().dimension();

  {
    CheckResult c;
    c.item = "A1";
    c.description = "dyadic ratios |M(t,x) - x| / |x|^{1+rho} non-increasing over the last 6 levels (M = H, G)";
    c.tolerance = 1.05;
    const double t = s.expansion_time;
    const int j0 = first_level(radius(t));
    try {
      rep.expansion_H = check_expansion([&](const Vec& x) { return cc.H(t, x); }, dim, j0, j0 + 10, s.rho,
                                        s.expansion_directions, s.seed + 101);
      rep.expansion_G = check_expansion([&](const Vec& x) { return cc.G(t, x); }, dim, j0, j0 + 10, s.rho,
                                        s.expansion_directions, s.seed + 102);
      c.samples = 2 * static_cast<int>(rep.expansion_H.levels.size()) * s.expansion_directions;
      c.measured = std::max(worst_step(rep.expansion_H), worst_step(rep.expansion_G));
      c.witness_t = t;
      c.pass = rep.expansion_H.monotone && rep.expansion_G.monotone;
      if (!c.pass) {
        const auto& bad = rep.expansion_H.monotone ? rep.expansion_G : rep.expansion_H;
        c.witness = Vec::Constant(1, bad.radii.back());
        c.notes.push_back(std::string("ratio increase for ") + (rep.expansion_H.monotone ? "G" : "H"));
      }
    } catch (const Error& e) {
      skip(c, e, t);
    }
    rep.items.push_back(std::move(c));
  }
  {
    CheckResult c;
    c.item = "A2";
    c.description = "Holder regression slope >= min(alpha, 0.95) - 0.05 for H and G";
    c.tolerance = std::min(s.alpha, 0.95) - 0.05;
    const double t = s.holder_time;
    try {
      rep.holder_H = fit_holder([&](const Vec& x) { return cc.H(t, x); }, dim, radius(t), s.holder_pairs,
                                s.holder_decades, s.seed + 201);
      rep.holder_G = fit_holder([&](const Vec& x) { return cc.G(t, x); }, dim, radius(t), s.holder_pairs,
                                s.holder_decades, s.seed + 202);
      c.samples = rep.holder_H.pairs + rep.holder_G.pairs;
      c.measured = std::min(rep.holder_H.slope, rep.holder_G.slope);
      c.witness_t = t;
      c.pass = c.measured >= c.tolerance;
    } catch (const Error& e) {
      skip(c, e, t);
    }
    rep.items.push_back(std::move(c));
  }
  rep.items.push_back(check_inverse(cc, radius, s));
  rep.items.push_back(check_solution_mapping(cc, false, radius, s));
  rep.items.push_back(check_solution_mapping(cc, true, radius, s));
  if (s.equivariance && cc.family().autonomous()) rep.items.push_back(check_equivariance(cc, s));

  rep.all_pass = std::all_of(rep.items.begin(), rep.items.end(), [](const CheckResult& c) { return c.pass; });
  return rep;
}

}  // namespace nalin
