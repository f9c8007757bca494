#include "nalin/spectrum.hpp"
#include "nalin/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nalin {

Cocycle::Cocycle(long first, std::vector<Mat> steps, std::vector<Mat> inverses)
    : first_(first), steps_(std::move(steps)), inverses_(std::move(inverses)) {
  require(!steps_.empty(), "cocycle needs at least one step");
  const auto d = steps_.front().rows();
  for (const auto& a : steps_) require(a.rows() == d && a.cols() == d, "cocycle steps must share a square shape");
  if (inverses_.empty()) {
    inverses_.reserve(steps_.size());
    for (const auto& a : steps_) {
      Eigen::PartialPivLU<Mat> lu(a);
      if (!(std::abs(lu.determinant()) > 0.0)) fail(ErrorCode::degenerate_cocycle, "singular cocycle step");
      inverses_.push_back(lu.inverse());
    }
  }
  require(inverses_.size() == steps_.size(), "inverse count mismatch");
}

Cocycle Cocycle::from_system(const DiscreteSystem& system, long first, long last) {
  require(first < last, "empty cocycle window");
  std::vector<Mat> steps, inverses;
  for (long n = first; n < last; ++n) {
    steps.push_back(system.step(n));
    inverses.push_back(system.step_inverse(n));
  }
  return Cocycle(first, std::move(steps), std::move(inverses));
}

Mat Cocycle::product(long m, long n) const {
  const int d = dimension();
  Mat p = Mat::Identity(d, d);
  if (m > n) {
    for (long i = n; i < m; ++i) p = step(i) * p;
  } else {
    for (long i = n - 1; i >= m; --i) p = step_inverse(i) * p;
  }
  return p;
}

Cocycle Cocycle::scaled(double factor) const {
  require(factor > 0.0, "scale factor must be positive");
  std::vector<Mat> s, inv;
  s.reserve(steps_.size());
  inv.reserve(steps_.size());
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    s.push_back(steps_[i] * factor);
    inv.push_back(inverses_[i] / factor);
  }
  return Cocycle(first_, std::move(s), std::move(inv));
}

double Cocycle::max_condition() const {
  double worst = 1.0;
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    worst = std::max(worst, steps_[i].norm() * inverses_[i].norm());
  }
  return worst;
}

// ---------------------------------------------------------------------------

std::vector<RateInterval> qr_growth_rates(const Cocycle& cocycle, int w) {
  require(w >= 1, "subwindow length must be positive");
  const long len = cocycle.size();
  if (len < 2L * w) {
    std::ostringstream os;
    os << "window length " << len << " shorter than twice the subwindow " << w;
    fail(ErrorCode::invalid_argument, os.str());
  }
  const int d = cocycle.dimension();
  Mat q = Mat::Identity(d, d);
  Mat logs(d, len);
  Eigen::HouseholderQR<Mat> qr(d, d);
  for (long i = 0; i < len; ++i) {
    const long n = cocycle.first() + i;
    qr.compute(cocycle.step(n) * q);
    q = qr.householderQ();
    for (int j = 0; j < d; ++j) {
      const double rjj = qr.matrixQR()(j, j);
      if (!(std::abs(rjj) >= 1e-12)) {
        std::ostringstream os;
        os << "triangular diagonal " << rjj << " at n=" << n << ", direction " << j;
        fail(ErrorCode::degenerate_cocycle, os.str());
      }
      if (rjj < 0.0) q.col(j) = -q.col(j);
      logs(j, i) = std::log(std::abs(rjj));
    }
  }

  std::vector<RateInterval> out(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    double window = 0.0;
    for (long i = w; i < 2L * w; ++i) window += logs(j, i);
    double lo = window / w;
    double hi = lo;
    for (long i = 2L * w; i < len; ++i) {
      window += logs(j, i) - logs(j, i - w);
      lo = std::min(lo, window / w);
      hi = std::max(hi, window / w);
    }
    out[static_cast<std::size_t>(j)] = {lo, hi};
  }
  std::sort(out.begin(), out.end(), [](const RateInterval& a, const RateInterval& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
  });
  return out;
}

namespace {

double distance_to_zero(const std::vector<RateInterval>& rates) {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& r : rates) {
    const double dist = r.lo > 0.0 ? r.lo : (r.hi < 0.0 ? -r.hi : 0.0);
    margin = std::min(margin, dist);
  }
  return margin;
}

}  // namespace

DichotomyTestResult dichotomy_test(const Cocycle& cocycle, double mu, int w, double gap) {
  require(mu > 0.0, "mu must be positive");
  require(gap >= 0.0, "gap must be nonnegative");
  const auto rates = qr_growth_rates(cocycle.scaled(1.0 / mu), w);
  DichotomyTestResult r;
  r.margin = distance_to_zero(rates);
  // round-off slack so that a rate exactly gap away from 0 counts as separated
  r.passes = r.margin >= gap - 1e-12;
  return r;
}

int SpectrumEstimate::stable_directions() const {
  return static_cast<int>(
      std::count_if(rates.begin(), rates.end(), [](const RateInterval& r) { return r.lo + r.hi < 0.0; }));
}

std::vector<std::pair<double, double>> SpectrumEstimate::log_intervals() const {
  std::vector<std::pair<double, double>> out;
  out.reserve(intervals.size());
  for (const auto& [a, b] : intervals) out.emplace_back(std::log(a), std::log(b));
  return out;
}

SpectrumEstimate estimate_spectrum(const Cocycle& cocycle, const SpectrumSettings& settings) {
  require(settings.grid_step > 0.0 && settings.refine > 0.0, "grid step and refinement must be positive");
  require(settings.padding > 0.0, "grid padding must be positive");
  if (cocycle.size() < settings.min_window) {
    std::ostringstream os;
    os << "window length " << cocycle.size() << " below the minimum " << settings.min_window;
    fail(ErrorCode::invalid_argument, os.str());
  }
  if (settings.grid_step > 2.0 * settings.gap) {
    std::ostringstream os;
    os << "mu grid step " << settings.grid_step << " can skip a failing band of width " << 2.0 * settings.gap
       << "; use a step <= " << 2.0 * settings.gap;
    fail(ErrorCode::resolution, os.str());
  }
  const int w = settings.subwindow;

  SpectrumEstimate est;
  est.grid_step = settings.grid_step;
  est.rates = qr_growth_rates(cocycle, w);
  double hull_lo = est.rates.front().lo;
  double hull_hi = est.rates.front().hi;
  for (const auto& r : est.rates) {
    hull_lo = std::min(hull_lo, r.lo);
    hull_hi = std::max(hull_hi, r.hi);
  }
  const double grid_lo = hull_lo - settings.padding;
  const long count = static_cast<long>(std::ceil((hull_hi + settings.padding - grid_lo) / settings.grid_step)) + 1;
  std::vector<double> logs(static_cast<std::size_t>(count));
  est.scan.resize(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    const double lm = grid_lo + static_cast<double>(i) * settings.grid_step;
    logs[static_cast<std::size_t>(i)] = lm;
    const auto res = dichotomy_test(cocycle, std::exp(lm), w, settings.gap);
    est.scan[static_cast<std::size_t>(i)] = {std::exp(lm), res.passes, res.margin};
  }

  auto fails_at = [&](double lm) { return !dichotomy_test(cocycle, std::exp(lm), w, settings.gap).passes; };
  // Bisect between a passing and a failing log-mu; returns the failing end.
  auto refine = [&](double passing, double failing) {
    while (std::abs(failing - passing) > settings.refine) {
      const double mid = 0.5 * (passing + failing);
      if (fails_at(mid)) failing = mid;
      else passing = mid;
    }
    return failing;
  };

  long i = 0;
  while (i < count) {
    if (est.scan[static_cast<std::size_t>(i)].passes) {
      ++i;
      continue;
    }
    long j = i;
    while (j + 1 < count && !est.scan[static_cast<std::size_t>(j + 1)].passes) ++j;
    if (i == 0 || j == count - 1) {
      fail(ErrorCode::resolution, "failing mu run touches the edge of the scan grid; increase the padding");
    }
    const double left = refine(logs[static_cast<std::size_t>(i - 1)], logs[static_cast<std::size_t>(i)]);
    const double right = refine(logs[static_cast<std::size_t>(j + 1)], logs[static_cast<std::size_t>(j)]);
    double a = left + settings.gap;
    double b = right - settings.gap;
    if (a > b) a = b = 0.5 * (left + right);
    est.intervals.emplace_back(std::exp(a), std::exp(b));
    i = j + 1;
  }

  est.r = static_cast<int>(est.intervals.size());
  for (const auto& [a, b] : est.intervals) {
    if (b < 1.0) ++est.k;
    if (a <= 1.0 && 1.0 <= b) est.hyperbolic = false;
  }
  return est;
}

// ---------------------------------------------------------------------------

ProjectionFamily::ProjectionFamily(std::shared_ptr<const DiscreteSystem> system, int stable_dim, int burn,
                                   std::uint64_t seed, double min_angle)
    : system_(std::move(system)), k_(stable_dim), burn_(burn), seed_(seed), min_angle_(min_angle) {
  require(system_ != nullptr, "missing discrete system");
  require(k_ >= 0 && k_ <= system_->dimension(), "stable dimension out of range");
  require(burn_ >= 1, "burn length must be positive");
}

namespace {

Mat orthonormalize(const Mat& x) {
  Eigen::HouseholderQR<Mat> qr(x);
  return qr.householderQ() * Mat::Identity(x.rows(), x.cols());
}

}  // namespace

Mat ProjectionFamily::compute(long n, double* quality) const {
  const int d = dimension();
  if (k_ == d) {
    *quality = 1.0;
    return Mat::Identity(d, d);
  }
  if (k_ == 0) {
    *quality = 1.0;
    return Mat::Zero(d, d);
  }
  Sampler rng(seed_ ^ (static_cast<std::uint64_t>(n) * 0x9E3779B97F4A7C15ULL));
  Mat s(d, k_);
  for (int j = 0; j < k_; ++j) s.col(j) = rng.unit_vector(d);
  s = orthonormalize(s);
  for (long m = n + burn_ - 1; m >= n; --m) s = orthonormalize(system_->step_inverse(m) * s);

  Mat u(d, d - k_);
  for (int j = 0; j < d - k_; ++j) u.col(j) = rng.unit_vector(d);
  u = orthonormalize(u);
  for (long m = n - burn_; m < n; ++m) u = orthonormalize(system_->step(m) * u);

  Mat frame(d, d);
  frame << s, u;
  Eigen::JacobiSVD<Mat> svd(frame);
  *quality = svd.singularValues()(d - 1);
  if (*quality < min_angle_) {
    std::ostringstream os;
    os << "stable and unstable frames nearly parallel at n=" << n << " (smallest singular value " << *quality << ")";
    fail(ErrorCode::splitting, os.str());
  }
  Mat lead = Mat::Zero(d, d);
  lead.leftCols(k_) = s;
  return lead * frame.inverse();
}

Mat ProjectionFamily::at(long n) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = cache_.find(n);
    if (it != cache_.end()) return it->second.first;
  }
  double quality = 0.0;
  Mat p = compute(n, &quality);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(n, std::make_pair(std::move(p), quality)).first->second.first;
}

double ProjectionFamily::splitting_quality(long n) const {
  at(n);
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.at(n).second;
}

double ProjectionFamily::invariance_residual(long n) const {
  const Mat a = system_->step(n);
  return (at(n + 1) * a - a * at(n)).norm();
}

Mat continuous_projection(const EvolutionFamily& family, const ProjectionFamily& projections, double t) {
  const double n = std::floor(t);
  const Mat p = projections.at(static_cast<long>(n));
  if (t == n) return p;
  return family.transition(n, t) * p * family.transition(t, n);
}

// ---------------------------------------------------------------------------

namespace {

struct LogSample {
  double y;
  double lag;
  double base;  // |s|
};

}  // namespace

DichotomyConstants fit_dichotomy_constants(const EvolutionFamily& family, const ProjectionFamily& projections,
                                           const ConstantFitSettings& settings) {
  require(settings.t_first < settings.t_last && settings.grid > 0.0 && settings.max_lag > 0.0,
          "invalid constant-fit range");
  std::vector<double> grid;
  for (double t = settings.t_first; t <= settings.t_last + 1e-12; t += settings.grid) grid.push_back(t);
  std::vector<Mat> proj;
  proj.reserve(grid.size());
  for (double t : grid) proj.push_back(continuous_projection(family, projections, t));
  const int d = family.dimension();
  const Mat id = Mat::Identity(d, d);
  // an empty bundle leaves only round-off in its projection
  const bool has_stable = projections.stable_dimension() > 0;
  const bool has_unstable = projections.stable_dimension() < d;

  std::vector<LogSample> split, full;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const double lag = grid[j] - grid[i];
      if (lag > settings.max_lag + 1e-12) break;
      const Mat fwd = family.transition(grid[i], grid[j]);
      const Mat bwd = family.transition(grid[j], grid[i]);
      // P(t) T(t,s) P(s) = T(t,s) P(s); the outer projection removes amplified round-off
      const double ns = operator_norm(proj[j] * fwd * proj[i]);
      const double nu = operator_norm((id - proj[i]) * bwd * (id - proj[j]));
      if (has_stable && ns > 1e-300) split.push_back({std::log(ns), lag, std::abs(grid[i])});
      if (has_unstable && nu > 1e-300) split.push_back({std::log(nu), lag, std::abs(grid[j])});
      full.push_back({std::log(operator_norm(fwd)), lag, std::abs(grid[i])});
      full.push_back({std::log(operator_norm(bwd)), lag, std::abs(grid[j])});
    }
  }
  require(!split.empty(), "no transition samples for the constant fit");

  DichotomyConstants out;
  // y = c - lambda * lag + eps * |s|
  Mat design(static_cast<long>(split.size()), 3);
  Vec rhs(static_cast<long>(split.size()));
  for (std::size_t i = 0; i < split.size(); ++i) {
    design.row(static_cast<long>(i)) << 1.0, -split[i].lag, split[i].base;
    rhs(static_cast<long>(i)) = split[i].y;
  }
  Vec coef = design.colPivHouseholderQr().solve(rhs);
  if (!(coef(2) >= 0.0)) {
    coef.resize(2);
    coef = design.leftCols(2).colPivHouseholderQr().solve(rhs);
    out.eps = 0.0;
  } else {
    out.eps = coef(2);
  }
  // lambda from the largest sample at each lag, so the slower bundle sets the rate
  {
    std::map<long long, std::pair<double, double>> upper;
    for (const auto& s : split) {
      const double y = s.y - out.eps * s.base;
      auto [it, fresh] = upper.try_emplace(std::llround(s.lag / settings.grid), s.lag, y);
      if (!fresh) it->second.second = std::max(it->second.second, y);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [key, p] : upper) {
      sx += p.first;
      sy += p.second;
      sxx += p.first * p.first;
      sxy += p.first * p.second;
    }
    const double n = static_cast<double>(upper.size());
    out.lambda = upper.size() >= 2 ? -(n * sxy - sx * sy) / (n * sxx - sx * sx) : coef(1);
  }
  double envelope = -std::numeric_limits<double>::infinity();
  for (const auto& s : split) envelope = std::max(envelope, s.y + out.lambda * s.lag - out.eps * s.base);

  // y - eps |s| = c + lambda_bar * lag, fitted to the largest sample at each lag: lambda_bar bounds
  // growth in both time directions, so decaying samples must not pull the slope down
  std::map<long long, std::pair<double, double>> upper;  // lag index -> (lag, max y)
  for (const auto& s : full) {
    const double y = s.y - out.eps * s.base;
    auto [it, fresh] = upper.try_emplace(std::llround(s.lag / settings.grid), s.lag, y);
    if (!fresh) it->second.second = std::max(it->second.second, y);
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [key, p] : upper) {
    sx += p.first;
    sy += p.second;
    sxx += p.first * p.first;
    sxy += p.first * p.second;
  }
  const double nf = static_cast<double>(upper.size());
  out.lambda_bar = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
  out.lambda_bar = std::max(out.lambda_bar, std::max(out.lambda, 1e-6));
  double envelope_bar = -std::numeric_limits<double>::infinity();
  for (const auto& s : full) envelope_bar = std::max(envelope_bar, s.y - out.eps * s.base - out.lambda_bar * s.lag);

  out.M = settings.slack * std::exp(std::max({envelope, envelope_bar, 0.0}));
  return out;
}

double dichotomy_violation_rate(const EvolutionFamily& family, const ProjectionFamily& projections,
                                const DichotomyConstants& c, int pairs, double t_first, double t_last,
                                double max_lag, std::uint64_t seed) {
  require(pairs > 0 && t_first < t_last, "invalid sampling range");
  Sampler rng(seed);
  const int d = family.dimension();
  const Mat id = Mat::Identity(d, d);
  int violations = 0;
  int checks = 0;
  for (int i = 0; i < pairs; ++i) {
    const double s = rng.uniform(t_first, t_last);
    const double t = std::min(t_last, s + rng.uniform(0.0, max_lag));
    const Mat ps = continuous_projection(family, projections, s);
    const Mat pt = continuous_projection(family, projections, t);
    const double bound_s = c.M * std::exp(-c.lambda * (t - s) + c.eps * std::abs(s));
    const double bound_u = c.M * std::exp(-c.lambda * (t - s) + c.eps * std::abs(t));
    if (operator_norm(pt * family.transition(s, t) * ps) > bound_s) ++violations;
    if (operator_norm((id - ps) * family.transition(t, s) * (id - pt)) > bound_u) ++violations;
    checks += 2;
  }
  return static_cast<double>(violations) / checks;
}

double adapted_norm(const DiscreteSystem& system, const ProjectionFamily& projections, double lambda, long n,
                    const Vec& x, int horizon) {
  const Mat p = projections.at(n);
  Vec v = p * x;
  Vec u = x - v;
  double stable = v.norm();
  // re-projected every step: round-off left in the other bundle would otherwise grow at its rate
  for (long tau = n; tau < n + horizon; ++tau) {
    v = projections.at(tau + 1) * (system.step(tau) * v);
    stable = std::max(stable, std::exp(lambda * static_cast<double>(tau + 1 - n)) * v.norm());
  }
  double unstable = u.norm();
  for (long tau = n; tau > n - horizon; --tau) {
    u = projections.complement(tau - 1) * (system.step_inverse(tau - 1) * u);
    unstable = std::max(unstable, std::exp(lambda * static_cast<double>(n - tau + 1)) * u.norm());
  }
  return stable + unstable;
}

DichotomyData adapted_norms(std::shared_ptr<const DiscreteSystem> system,
                            std::shared_ptr<const ProjectionFamily> projections, const DichotomyConstants& constants,
                            const AdaptedNormSettings& settings) {
  require(system != nullptr && projections != nullptr, "missing system or projections");
  require(settings.horizon >= 1 && settings.samples >= 1, "invalid adapted-norm settings");
  DichotomyData out;
  out.projections = projections;
  out.constants = constants;
  out.horizon = settings.horizon;
  out.tail_bound = std::exp((constants.lambda - constants.lambda_bar) * settings.horizon);
  if (constants.eps > settings.eps_cap) {
    std::ostringstream os;
    os << "nonuniformity too strong: fitted eps " << constants.eps << " exceeds cap " << settings.eps_cap;
    out.warnings.push_back(os.str());
  }
  Sampler rng(settings.seed);
  const int d = system->dimension();
  double ratio = 0.0;
  for (long n = settings.sample_first; n <= settings.sample_last; ++n) {
    for (int i = 0; i < settings.samples; ++i) {
      const Vec x = rng.unit_vector(d);
      const double an = adapted_norm(*system, *projections, constants.lambda, n, x, settings.horizon);
      out.sandwich_lower = std::max(out.sandwich_lower, x.norm() / an);
      ratio = std::max(ratio, an / (std::exp(constants.eps * std::abs(static_cast<double>(n))) * x.norm()));
    }
  }
  out.C = settings.slack * std::max(1.0, ratio);
  out.sandwich_upper = ratio / out.C;
  return out;
}

}  // namespace nalin
