#include "nalin/conditions.hpp"
#include "nalin/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nalin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_hyperbolic(const SpectrumEstimate& s) {
  if (!s.hyperbolic) fail(ErrorCode::non_hyperbolic, "spectrum contains 1; no hyperbolic splitting");
  require(!s.intervals.empty(), "empty spectrum");
}

}  // namespace

SpectralBoundReport check_spectral_bound(const SpectrumEstimate& spectrum) {
  require_hyperbolic(spectrum);
  SpectralBoundReport rep;
  const int k = spectrum.k;
  const int r = static_cast<int>(spectrum.intervals.size());
  for (int i = 1; i <= r; ++i) {
    const auto [a, b] = spectrum.intervals[static_cast<std::size_t>(i - 1)];
    SpectralBoundEntry e;
    e.index = i;
    e.stable = i <= k;
    e.ratio = b / a;
    e.bound = e.stable ? 1.0 / spectrum.intervals[static_cast<std::size_t>(k - 1)].second
                       : spectrum.intervals[static_cast<std::size_t>(k)].first;
    e.log_margin = std::log(e.bound) - std::log(e.ratio);
    e.pass = e.ratio < e.bound;
    if (!e.pass) {
      rep.pass = false;
      if (rep.first_violation == 0) rep.first_violation = i;
    }
    rep.entries.push_back(e);
  }
  return rep;
}

namespace {

AlphaBound finish_alpha(double gap, double grow_unstable, double grow_stable, std::optional<double> alpha,
                        double rho) {
  require(rho > 0.0 && rho < 1.0, "regularity order must lie in (0, 1)");
  AlphaBound ab;
  ab.rho = rho;
  const bool unstable_branch = grow_unstable > 0.0;
  const bool stable_branch = grow_stable > 0.0;
  if (!unstable_branch && !stable_branch) {
    fail(ErrorCode::non_hyperbolic, "both branches of the Holder bound dropped");
  }
  if (std::isinf(gap)) {
    ab.alpha_max = kInf;
    ab.branch = "one-sided";
  } else {
    const double u = unstable_branch ? gap / grow_unstable : kInf;
    const double s = stable_branch ? gap / grow_stable : kInf;
    ab.alpha_max = std::min(u, s);
    ab.branch = u <= s ? "unstable" : "stable";
  }
  if (alpha) {
    if (!(*alpha > 0.0) || !(*alpha <= 1.0) || !(*alpha < ab.alpha_max)) {
      std::ostringstream os;
      os << "alpha " << *alpha << " outside (0, min(alpha_max, 1)] with alpha_max = " << ab.alpha_max;
      fail(ErrorCode::invalid_argument, os.str());
    }
    ab.chosen = *alpha;
  } else {
    ab.chosen = std::min(0.9 * ab.alpha_max, 0.95);
  }
  return ab;
}

}  // namespace

AlphaBound alpha_upper_bound(const SpectrumEstimate& spectrum, std::optional<double> alpha, double rho) {
  require_hyperbolic(spectrum);
  const int k = spectrum.k;
  const int r = static_cast<int>(spectrum.intervals.size());
  const double a1 = spectrum.intervals.front().first;
  const double br = spectrum.intervals.back().second;
  const double gap = (k == 0 || k == r) ? kInf
                                        : std::log(spectrum.intervals[static_cast<std::size_t>(k)].first) -
                                              std::log(spectrum.intervals[static_cast<std::size_t>(k - 1)].second);
  return finish_alpha(gap, br > 1.0 ? std::log(br) : 0.0, a1 < 1.0 ? -std::log(a1) : 0.0, alpha, rho);
}

AlphaBound autonomous_alpha_bound(const std::vector<std::complex<double>>& eigenvalues, std::optional<double> alpha,
                                  double rho) {
  require(!eigenvalues.empty(), "no eigenvalues");
  std::vector<double> re;
  for (const auto& z : eigenvalues) {
    if (std::abs(z.real()) < 1e-12) fail(ErrorCode::non_hyperbolic, "eigenvalue on the imaginary axis");
    re.push_back(z.real());
  }
  std::sort(re.begin(), re.end());
  const auto p = std::count_if(re.begin(), re.end(), [](double x) { return x < 0.0; });
  const auto d = static_cast<long>(re.size());
  const double gap = (p == 0 || p == d) ? kInf : re[static_cast<std::size_t>(p)] - re[static_cast<std::size_t>(p - 1)];
  return finish_alpha(gap, re.back() > 0.0 ? re.back() : 0.0, re.front() < 0.0 ? -re.front() : 0.0, alpha, rho);
}

// ---------------------------------------------------------------------------

NonlinearityAudit audit_nonlinearity(const NonlinearTerm& f, const AuditSettings& settings,
                                     std::optional<double> eta_cap) {
  require(settings.time_samples >= 1 && settings.x_samples >= 1 && settings.radius > 0.0,
          "invalid audit sampler settings");
  NonlinearityAudit out;
  out.eta_cap = eta_cap.value_or(kInf);
  const int d = f.dimension();
  out.worst_f3_x = Vec::Zero(d);
  if (f.is_zero()) {
    out.f3 = out.eta <= out.eta_cap;
    return out;
  }
  Sampler rng(settings.seed);
  const double eps = f.constants().eps;
  const Vec zero = Vec::Zero(d);
  Vec fv(d);
  Mat jx(d, d), jy(d, d);
  for (int i = 0; i < settings.time_samples; ++i) {
    const double t = settings.time_samples == 1
                         ? settings.t_min
                         : settings.t_min + (settings.t_max - settings.t_min) * i / (settings.time_samples - 1);
    f.evaluate(t, zero, fv);
    if (fv.norm() > out.max_f_at_zero) {
      out.max_f_at_zero = fv.norm();
      out.worst_f1_t = t;
    }
    f.jacobian(t, zero, jx);
    if (operator_norm(jx) > out.max_jacobian_at_zero) {
      out.max_jacobian_at_zero = operator_norm(jx);
      out.worst_f2_t = t;
    }
    const double w3 = std::exp(3.0 * eps * std::abs(t));
    const double w4 = std::exp(4.0 * eps * std::abs(t));
    for (int j = 0; j < settings.x_samples; ++j) {
      const Vec x = rng.in_ball(d, settings.radius);
      f.jacobian(t, x, jx);
      const double e = operator_norm(jx) * w3;
      if (e > out.eta) {
        out.eta = e;
        out.worst_f3_t = t;
        out.worst_f3_x = x;
      }
      // one far pair and one near pair per sample
      const Vec far = rng.in_ball(d, settings.radius);
      const Vec near = x + 1e-3 * settings.radius * rng.unit_vector(d);
      for (const Vec* y : {&far, &near}) {
        const double dxy = (x - *y).norm();
        if (dxy <= 0.0) continue;
        f.jacobian(t, *y, jy);
        out.B = std::max(out.B, operator_norm(jx - jy) * w4 / dxy);
      }
      ++out.samples;
    }
  }
  out.f1 = out.max_f_at_zero <= settings.zero_tol;
  out.f2 = out.max_jacobian_at_zero <= settings.zero_tol;
  out.f3 = out.eta <= out.eta_cap;
  out.f4 = std::isfinite(out.B);
  return out;
}

// ---------------------------------------------------------------------------

LyapunovPerronParams choose_lp_params(const SpectrumEstimate& spectrum, double tau) {
  require_hyperbolic(spectrum);
  require(tau > 0.0 && tau < 0.25, "placement fraction must lie in (0, 0.25)");
  const int k = spectrum.k;
  const int r = static_cast<int>(spectrum.intervals.size());
  LyapunovPerronParams lp;
  lp.one_sided = k == 0 || k == r;
  double lo = k > 0 ? std::log(spectrum.intervals[static_cast<std::size_t>(k - 1)].second) : 0.0;
  double hi = k < r ? std::log(spectrum.intervals[static_cast<std::size_t>(k)].first) : 0.0;
  if (k == 0) lo = -hi;
  if (k == r) hi = -lo;
  lp.lambda_s_plus = std::exp(lo * (1.0 - tau));
  lp.gamma_s = std::exp(lo * (1.0 - 2.0 * tau));
  lp.gamma_u = std::exp(hi * (1.0 - 2.0 * tau));
  lp.lambda_u_minus = std::exp(hi * (1.0 - tau));
  const double lbr = std::log(spectrum.intervals.back().second);
  const double la1 = -std::log(spectrum.intervals.front().first);
  lp.lambda_u_plus = std::exp(lbr + tau * std::abs(lbr));
  lp.lambda_u_plus_inverse = std::exp(la1 + tau * std::abs(la1));
  return lp;
}

double default_K(const LyapunovPerronParams& lp) {
  const double rs = lp.lambda_s_plus / lp.gamma_s;
  const double ru = lp.gamma_u / lp.lambda_u_minus;
  const double base = 4.0 * std::max({1.0, 1.0 / (1.0 - rs), 1.0 / (1.0 - ru)});
  const double series_s = (1.0 / (1.0 - rs) + 1.0 / (1.0 - lp.gamma_s / lp.lambda_u_minus)) / lp.gamma_s;
  const double series_u = (1.0 / (1.0 - lp.lambda_s_plus / lp.gamma_u) + 1.0 / (1.0 - ru)) / lp.gamma_u;
  return std::max({base, series_s, series_u});
}

double SmallnessBudget::u_radius(long n) const {
  return rho * std::exp(-eps * std::abs(static_cast<double>(n))) / C;
}

double SmallnessBudget::v_radius(double t) const { return std::exp(-2.0 * eps * std::abs(t)) * rho_tilde; }

double max_admissible_eta_tilde(double alpha, const LyapunovPerronParams& lp, double C, double K) {
  require(alpha > 0.0 && C > 0.0 && K > 0.0, "alpha, C and K must be positive");
  double best = 1.0 / (4.0 * C * K);
  if (!lp.one_sided) {
    const double room = std::pow(lp.gamma_u / lp.gamma_s, 1.0 / alpha);
    best = std::min(best, (room - lp.lambda_u_plus) / C);
    best = std::min(best, (room - lp.lambda_u_plus_inverse) / C);
  }
  return std::max(best, 0.0);
}

SmallnessBudget smallness_budget(const FlowBounds& flow, const DichotomyData& dichotomy, double alpha,
                                 const LyapunovPerronParams& lp, std::optional<double> K, double delta_cap) {
  require(alpha > 0.0, "alpha must be positive");
  require(delta_cap > 0.0, "delta cap must be positive");
  SmallnessBudget b;
  b.flow = flow;
  b.C = dichotomy.C;
  b.K = K.value_or(default_K(lp));
  require(b.K > 0.0, "K must be positive");
  b.eps = dichotomy.constants.eps;
  b.alpha = alpha;

  const double cb2 = b.K * (b.C * flow.B_tilde) * (b.C * flow.B_tilde);
  b.delta = cb2 > 0.0 ? std::min(delta_cap, 0.9 * 0.25 / cb2) : delta_cap;
  b.rho = b.delta / 4.0;
  b.rho_tilde = b.rho / (flow.a * b.C * std::exp(2.0 * b.eps));

  auto add = [&](const std::string& name, double value, double limit) {
    Threshold t{name, value, limit, value < limit, limit - value};
    b.thresholds.push_back(t);
  };
  add("K(C B~)^2 delta < 1/4", cb2 * b.delta, 0.25);
  add("C K eta~ < 1/4", b.C * b.K * flow.eta_tilde, 0.25);
  if (lp.one_sided) {
    add("gamma_s/gamma_u (lambda_u+ + C eta~)^alpha < 1 (one-sided, vacuous)", 0.0, 1.0);
  } else {
    const double ratio = lp.gamma_s / lp.gamma_u;
    add("gamma_s/gamma_u (lambda_u+ + C eta~)^alpha < 1",
        ratio * std::pow(lp.lambda_u_plus + b.C * flow.eta_tilde, alpha), 1.0);
    add("gamma_s/gamma_u (lambda_u+ + C eta~)^alpha < 1 (inverse maps)",
        ratio * std::pow(lp.lambda_u_plus_inverse + b.C * flow.eta_tilde, alpha), 1.0);
  }
  b.satisfied = std::all_of(b.thresholds.begin(), b.thresholds.end(), [](const Threshold& t) { return t.pass; });
  return b;
}

}  // namespace nalin
