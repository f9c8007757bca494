#include "nalin/conjugacy.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace nalin {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Preimage {
  Vec z;
  Vec fz;  // f_m(z), evaluated at the returned point
};

Preimage preimage(const DiscreteSystem& system, long m, const Vec& y, const ConjugacySettings& s) {
  const Mat& ainv = system.step_inverse(m);
  const Mat a = system.step(m);
  Vec z = system.inverse_guess(m, y);
  const double scale = std::max(y.norm(), std::numeric_limits<double>::min());
  double prev_delta = kInf;
  int growth = 0;
  for (int it = 0; it < s.max_iterations; ++it) {
    Vec fz = system.nonlinear(m, z);
    Vec next = ainv * (y - fz);
    const double delta = (next - z).norm();
    if (delta <= s.tol_fp * scale) return {std::move(z), std::move(fz)};
    if (delta >= prev_delta && ++growth >= 2) break;  // not contracting
    prev_delta = delta;
    z = std::move(next);
  }
  // Newton on A z + f(z) = y
  z = system.inverse_guess(m, y);
  for (int it = 0; it < s.max_iterations; ++it) {
    Vec fz = system.nonlinear(m, z);
    const Vec r = a * z + fz - y;
    if (r.norm() <= s.tol_fp * scale) return {std::move(z), std::move(fz)};
    const Mat jac = a + system.nonlinear_jacobian(m, z);
    const Vec dz = jac.partialPivLu().solve(r);
    if (!dz.allFinite()) break;
    z -= dz;
  }
  fail(ErrorCode::orbit, "backward orbit solve diverged at index " + std::to_string(m));
}

// last * r / (1 - r) with r the largest ratio of successive terms over the last 8 steps, so that
// rates oscillating with the time index are covered
double geometric_tail(const std::vector<double>& terms, double floor) {
  if (terms.empty()) return 0.0;
  const double last = terms.back();
  if (last <= floor) return last;
  double r = 0.0;
  const std::size_t span = std::min<std::size_t>(8, terms.size() - 1);
  for (std::size_t k = terms.size() - span; k < terms.size(); ++k) {
    if (!(terms[k - 1] > 0.0)) return kInf;
    r = std::max(r, terms[k] / terms[k - 1]);
  }
  if (span == 0 || r >= 1.0) return kInf;
  return last * r / (1.0 - r);
}

}  // namespace

Vec solve_preimage(const DiscreteSystem& system, long m, const Vec& y, const ConjugacySettings& settings) {
  if (system.linear()) return system.step_inverse(m) * y;
  return preimage(system, m, y, settings).z;
}

Orbit nonlinear_orbit(const DiscreteSystem& system, long n, const Vec& x, int back, int forward,
                      const ConjugacySettings& settings) {
  require(back >= 0 && forward >= 0, "orbit lengths must be non-negative");
  require(x.size() == system.dimension(), "orbit start has the wrong dimension");
  std::vector<Vec> past;
  bool trunc_back = false;
  Vec z = x;
  for (int k = 0; k < back; ++k) {
    const long m = n - k - 1;
    try {
      z = system.linear() ? Vec(system.step_inverse(m) * z) : preimage(system, m, z, settings).z;
    } catch (const EscapeError&) {
      trunc_back = true;
      break;
    }
    if (!z.allFinite() || z.norm() > settings.escape_radius) {
      trunc_back = true;
      break;
    }
    past.push_back(z);
  }
  Orbit out;
  out.first = n - static_cast<long>(past.size());
  out.truncated_backward = trunc_back;
  out.points.assign(past.rbegin(), past.rend());
  out.points.push_back(x);
  z = x;
  for (int k = 0; k < forward; ++k) {
    const long m = n + k;
    try {
      z = system.linear() ? Vec(system.step(m) * z) : system.apply(m, z);
    } catch (const EscapeError&) {
      out.truncated_forward = true;
      break;
    }
    if (!z.allFinite() || z.norm() > settings.escape_radius) {
      out.truncated_forward = true;
      break;
    }
    out.points.push_back(z);
  }
  return out;
}

// ---------------------------------------------------------------------------

DiscreteConjugacy::DiscreteConjugacy(std::shared_ptr<const DiscreteSystem> system,
                                     std::shared_ptr<const ProjectionFamily> projections, ConjugacySettings settings)
    : system_(std::move(system)), projections_(std::move(projections)), settings_(settings) {
  require(system_ != nullptr && projections_ != nullptr, "conjugacy needs a system and its projections");
  require(projections_->dimension() == system_->dimension(), "projection dimension mismatch");
  require(settings_.tail >= 2, "N_tail must be at least 2");
  const int k = projections_->stable_dimension();
  if (k == system_->dimension()) {
    scheme_ = ConjugacyScheme::forward;
  } else if (k == 0) {
    scheme_ = ConjugacyScheme::backward;
  } else {
    scheme_ = ConjugacyScheme::two_sided;
  }
}

double DiscreteConjugacy::term_floor(const Vec& x) const { return settings_.early_stop * x.norm(); }

ConjugacyEvaluation DiscreteConjugacy::sum(long n, const Vec& x, bool linear_orbit) const {
  const int d = system_->dimension();
  require(x.size() == d, "conjugacy argument has the wrong dimension");
  ConjugacyEvaluation out;
  out.value = Vec::Zero(d);
  if (system_->linear() || x.isZero(0.0)) return out;
  const double floor = term_floor(x);
  const bool two_sided = scheme_ == ConjugacyScheme::two_sided;

  if (scheme_ != ConjugacyScheme::backward) {
    // sum_{i >= n} A(n,i+1) W(i+1) f_i(x_i), A(n,i+1) = A_n^{-1} ... A_i^{-1}
    Mat acc = Mat::Identity(d, d);
    Vec xi = x;
    std::vector<double> terms;
    for (int k = 0; k < settings_.tail; ++k) {
      const long i = n + k;
      const Mat a = system_->step(i);
      Vec next;
      Vec fi;
      try {
        if (linear_orbit) {
          next = a * xi;
          fi = system_->nonlinear(i, xi);
        } else {
          next = system_->apply(i, xi);
          fi = next - a * xi;
        }
      } catch (const EscapeError&) {
        out.truncated = true;
        break;
      }
      acc = acc * system_->step_inverse(i);
      Mat weighted = two_sided ? Mat(acc * projections_->complement(i + 1)) : acc;
      const Vec term = weighted * fi;
      out.value += term;
      ++out.terms_forward;
      terms.push_back(term.norm());
      if (weighted.norm() * fi.norm() <= floor) break;
      xi = std::move(next);
      if (!xi.allFinite() || xi.norm() > settings_.escape_radius) {
        out.truncated = true;
        break;
      }
    }
    out.tail += geometric_tail(terms, floor);
  }

  if (scheme_ != ConjugacyScheme::forward) {
    // -sum_{i < n} A(n,i+1) W(i+1) f_i(x_i), A(n,i+1) = A_{n-1} ... A_{i+1}
    Mat acc = Mat::Identity(d, d);
    Vec xi = x;  // x_{i+1}
    std::vector<double> terms;
    for (int k = 0; k < settings_.tail; ++k) {
      const long i = n - k - 1;
      if (k > 0) acc = acc * system_->step(i + 1);
      Vec cur;
      Vec fi;
      try {
        if (linear_orbit) {
          cur = system_->step_inverse(i) * xi;
          fi = system_->nonlinear(i, cur);
        } else {
          auto pre = preimage(*system_, i, xi, settings_);
          cur = std::move(pre.z);
          fi = std::move(pre.fz);
        }
      } catch (const EscapeError&) {
        out.truncated = true;
        break;
      }
      if (!cur.allFinite() || cur.norm() > settings_.escape_radius) {
        out.truncated = true;
        break;
      }
      Mat weighted = two_sided ? Mat(acc * projections_->at(i + 1)) : acc;
      const Vec term = weighted * fi;
      out.value -= term;
      ++out.terms_backward;
      terms.push_back(term.norm());
      if (weighted.norm() * fi.norm() <= floor) break;
      xi = std::move(cur);
    }
    out.tail += geometric_tail(terms, floor);
  }
  return out;
}

ConjugacyEvaluation DiscreteConjugacy::evaluate(long n, const Vec& x) const {
  ConjugacyEvaluation out = sum(n, x, false);
  if (out.tail > settings_.tol_conj * x.norm()) {
    fail(ErrorCode::tail, "tail estimate " + std::to_string(out.tail) + " at index " + std::to_string(n) +
                              " exceeds tol_conj; increase N_tail");
  }
  out.value += x;
  return out;
}

Vec DiscreteConjugacy::h_inverse(long n, const Vec& y) const {
  require(y.size() == system_->dimension(), "conjugacy argument has the wrong dimension");
  if (system_->linear() || y.isZero(0.0)) return y;
  const int d = system_->dimension();
  Vec z = y - sum(n, y, true).value;

  // chord Newton with a forward-difference Jacobian taken once at the starting point
  const Vec hz = h(n, z);
  const double step = 1e-7 * std::max(z.norm(), 1e-300);
  Mat jac(d, d);
  for (int j = 0; j < d; ++j) {
    Vec zp = z;
    zp(j) += step;
    jac.col(j) = (h(n, zp) - hz) / step;
  }
  const auto lu = jac.partialPivLu();
  const double target = settings_.tol_fp * y.norm();
  Vec r = hz - y;
  double prev = kInf;
  for (int it = 0; it < settings_.max_iterations; ++it) {
    const double rn = r.norm();
    if (rn <= target) return z;
    if (!(rn < prev)) break;
    prev = rn;
    z -= lu.solve(r);
    r = h(n, z) - y;
  }
  if (r.norm() <= 10.0 * target) return z;
  fail(ErrorCode::inverse, "h_n^{-1} Newton iteration failed at index " + std::to_string(n));
}

double DiscreteConjugacy::residual(long n, const Vec& x) const {
  const Vec fx = system_->apply(n, x);
  return (h(n + 1, fx) - system_->step(n) * h(n, x)).norm();
}

Vec quadratic_coefficient(const DiscreteConjugacy& conj, long n, const Vec& direction, double radius) {
  require(radius > 0.0, "radius must be positive");
  const Vec v = direction / direction.norm();
  const Vec h0 = conj.h(n, Vec::Zero(v.size()));
  return (conj.h(n, radius * v) + conj.h(n, -radius * v) - 2.0 * h0) / (2.0 * radius * radius);
}

// ---------------------------------------------------------------------------

namespace {

struct Window {
  const DiscreteSystem& system;
  const ProjectionFamily& proj;
  long first;
  int size;
  std::vector<Mat> steps;  // A_{first+j}
  std::vector<Mat> inverses;
  std::vector<Mat> stable;  // P(first+j)

  Window(const DiscreteSystem& s, const ProjectionFamily& p, long f, int L) : system(s), proj(p), first(f), size(L) {
    for (int j = 0; j < L; ++j) {
      steps.push_back(s.step(f + j));
      inverses.push_back(s.step_inverse(f + j));
      stable.push_back(p.at(f + j));
    }
  }

  Sequence zeros() const { return Sequence(static_cast<std::size_t>(size), Vec::Zero(system.dimension())); }

  // (F y)_j = A_{j-1} y_{j-1} + f_{j-1}(y_{j-1}); the entry shifted out at the end is dropped
  Sequence lift_map(const Sequence& y) const {
    Sequence out = zeros();
    for (int j = 1; j < size; ++j) out[j] = system.apply(first + j - 1, y[j - 1]);
    return out;
  }
  Sequence lift_nonlinear(const Sequence& y) const {
    Sequence out = zeros();
    for (int j = 1; j < size; ++j) out[j] = system.nonlinear(first + j - 1, y[j - 1]);
    return out;
  }
  Sequence lift_linear(const Sequence& y) const {
    Sequence out = zeros();
    for (int j = 1; j < size; ++j) out[j] = steps[j - 1] * y[j - 1];
    return out;
  }
  Sequence lift_linear_inverse(const Sequence& y) const {
    Sequence out = zeros();
    for (int j = 0; j + 1 < size; ++j) out[j] = inverses[j] * y[j + 1];
    return out;
  }
  Sequence project(const Sequence& y, bool stable_part) const {
    Sequence out = zeros();
    for (int j = 0; j < size; ++j) out[j] = stable_part ? Vec(stable[j] * y[j]) : Vec(y[j] - stable[j] * y[j]);
    return out;
  }
  double norm(const Sequence& y) const {
    double s = 0.0, u = 0.0;
    for (int j = 0; j < size; ++j) {
      const Vec ps = stable[j] * y[j];
      s = std::max(s, ps.norm());
      u = std::max(u, (y[j] - ps).norm());
    }
    return s + u;
  }
};

Sequence add(const Sequence& a, const Sequence& b, double sign = 1.0) {
  Sequence out = a;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += sign * b[j];
  return out;
}

}  // namespace

double sequence_norm(const ProjectionFamily& projections, long first, const Sequence& y) {
  double s = 0.0, u = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const Vec ps = projections.at(first + static_cast<long>(j)) * y[j];
    s = std::max(s, ps.norm());
    u = std::max(u, (y[j] - ps).norm());
  }
  return s + u;
}

FoliationSolution solve_foliation(const DiscreteSystem& system, const ProjectionFamily& projections, long first,
                                  const Sequence& x, const Sequence& xi, const LyapunovPerronParams& lp,
                                  const FoliationSettings& settings) {
  require(settings.window >= 2 && settings.tail >= 1, "foliation window too small");
  require(static_cast<int>(x.size()) == settings.window && static_cast<int>(xi.size()) == settings.window,
          "foliation sequences must fill the window");
  require(lp.gamma_s > 0.0 && lp.gamma_s < 1.0, "gamma_s must lie in (0, 1)");
  const Window w(system, projections, first, settings.window);
  const int N = settings.tail;

  // F^i x and f~(F^i x)
  std::vector<Sequence> base{x};
  for (int i = 1; i <= N; ++i) base.push_back(w.lift_map(base.back()));
  std::vector<Sequence> base_f;
  for (const auto& b : base) base_f.push_back(w.lift_nonlinear(b));

  const Sequence s0 = add(w.project(xi, true), w.project(x, true), -1.0);
  const double scale = w.norm(x) + w.norm(w.project(xi, true));

  auto weighted = [&](const std::vector<Sequence>& q) {
    double out = 0.0;
    for (int n = 0; n <= N; ++n) out = std::max(out, std::pow(lp.gamma_s, -n) * w.norm(q[n]));
    return out;
  };

  FoliationSolution sol;
  sol.first = first;
  sol.gamma_s = lp.gamma_s;
  std::vector<Sequence> q(static_cast<std::size_t>(N + 1), w.zeros());
  const double floor = 1e-12 * std::max(scale, std::numeric_limits<double>::min());
  for (int it = 0; it < settings.max_iterations; ++it) {
    std::vector<Sequence> g;
    g.reserve(q.size());
    for (int i = 0; i <= N; ++i) g.push_back(add(w.lift_nonlinear(add(q[i], base[i])), base_f[i], -1.0));
    std::vector<Sequence> next(q.size());
    Sequence s = s0;
    for (int n = 0; n <= N; ++n) {
      next[n] = s;
      s = add(w.lift_linear(s), w.project(g[n], true));
    }
    Sequence u = w.zeros();
    for (int n = N; n >= 0; --n) {
      u = w.lift_linear_inverse(add(u, w.project(g[n], false), -1.0));
      next[n] = add(next[n], u);
    }
    std::vector<Sequence> diff(q.size());
    for (int n = 0; n <= N; ++n) diff[n] = add(next[n], q[n], -1.0);
    const double d = weighted(diff);
    if (!sol.log.empty() && sol.log.back() > floor) sol.contraction = std::max(sol.contraction, d / sol.log.back());
    sol.log.push_back(d);
    q = std::move(next);
    sol.iterations = it + 1;
    if (sol.contraction >= 1.0) {
      fail(ErrorCode::budget_violation,
           "foliation Picard iteration does not contract (factor " + std::to_string(sol.contraction) + ")");
    }
    if (d <= settings.tol * scale) {
      sol.converged = true;
      break;
    }
  }
  sol.weighted_norm = weighted(q);
  sol.q = std::move(q);
  return sol;
}

// ---------------------------------------------------------------------------

GaussLegendre gauss_legendre(int count) {
  require(count >= 1, "quadrature needs at least one node");
  Mat jac = Mat::Zero(count, count);
  for (int k = 1; k < count; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = b;
    jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(jac);
  GaussLegendre out;
  for (int k = 0; k < count; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    out.nodes.push_back(0.5 * (es.eigenvalues()(k) + 1.0));
    out.weights.push_back(v0 * v0);  // 2 v0^2 on [-1, 1], halved for [0, 1]
  }
  return out;
}

ContinuousConjugacy::ContinuousConjugacy(std::shared_ptr<const DiscretizedFlow> flow,
                                         std::shared_ptr<const DiscreteConjugacy> conj,
                                         std::function<double(double)> domain, bool enforce_domain)
    : flow_(std::move(flow)), conj_(std::move(conj)), domain_(std::move(domain)), enforce_(enforce_domain) {
  require(flow_ != nullptr && conj_ != nullptr, "continuous conjugacy needs a flow and a discrete conjugacy");
}

double ContinuousConjugacy::domain_radius(double t) const { return domain_ ? domain_(t) : kInf; }

void ContinuousConjugacy::check_domain(double t, const Vec& x) const {
  if (!enforce_) return;
  const double r = domain_radius(t);
  if (x.norm() > r) {
    fail(ErrorCode::domain, "point of norm " + std::to_string(x.norm()) + " outside V_t (radius " +
                                std::to_string(r) + ") at t = " + std::to_string(t));
  }
}

Vec ContinuousConjugacy::H(double t, const Vec& x) const {
  check_domain(t, x);
  if (flow_->linear()) return x;
  const double n = std::floor(t);
  const long idx = static_cast<long>(n);
  if (t == n) return conj_->h(idx, x);
  const EvolutionFamily& fam = flow_->family();
  return fam.transition(n, t) * conj_->h(idx, fam.flow(t, n, x));
}

Vec ContinuousConjugacy::G(double t, const Vec& x) const {
  check_domain(t, x);
  if (flow_->linear()) return x;
  const double n = std::floor(t);
  const long idx = static_cast<long>(n);
  if (t == n) return conj_->h_inverse(idx, x);
  const EvolutionFamily& fam = flow_->family();
  return fam.flow(n, t, conj_->h_inverse(idx, fam.transition(t, n) * x));
}

Vec ContinuousConjugacy::averaged_H(const Vec& x, int nodes) const {
  const EvolutionFamily& fam = flow_->family();
  if (!fam.autonomous()) fail(ErrorCode::invalid_argument, "averaged conjugacy needs an autonomous system");
  if (flow_->linear()) return x;
  const auto rule = gauss_legendre(nodes);
  Vec out = Vec::Zero(x.size());
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double s = rule.nodes[k];
    out += rule.weights[k] * (fam.transition(0.0, s) * conj_->h(0, fam.flow(0.0, -s, x)));
  }
  return out;
}

}  // namespace nalin
