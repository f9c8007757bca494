#include "nalin/evolution.hpp"
#include "nalin/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nalin {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::numerical_failure: return "numerical_failure";
    case ErrorCode::escape: return "escape";
    case ErrorCode::degenerate_cocycle: return "degenerate_cocycle";
    case ErrorCode::non_hyperbolic: return "non_hyperbolic";
    case ErrorCode::resolution: return "resolution";
    case ErrorCode::splitting: return "splitting";
    case ErrorCode::orbit: return "orbit";
    case ErrorCode::inverse: return "inverse";
    case ErrorCode::budget_violation: return "budget_violation";
    case ErrorCode::domain: return "domain";
    case ErrorCode::tail: return "tail";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

namespace {

double bump(double s) { return s > 0.0 ? std::exp(-1.0 / s) : 0.0; }
double bump_derivative(double s) { return s > 0.0 ? std::exp(-1.0 / s) / (s * s) : 0.0; }

}  // namespace

SmoothCutoff::SmoothCutoff(double inner_radius) : r0_(inner_radius) {
  require(inner_radius > 0.0, "cutoff radius must be positive");
}

double SmoothCutoff::value(double r) const {
  const double u = r / r0_;
  if (u <= 1.0) return 1.0;
  if (u >= 2.0) return 0.0;
  const double g1 = bump(2.0 - u);
  const double g2 = bump(u - 1.0);
  return g1 / (g1 + g2);
}

double SmoothCutoff::derivative(double r) const {
  const double u = r / r0_;
  if (u <= 1.0 || u >= 2.0) return 0.0;
  const double g1 = bump(2.0 - u);
  const double g2 = bump(u - 1.0);
  const double dg1 = -bump_derivative(2.0 - u);
  const double dg2 = bump_derivative(u - 1.0);
  const double sum = g1 + g2;
  return (dg1 * sum - g1 * (dg1 + dg2)) / (sum * sum) / r0_;
}

// ---------------------------------------------------------------------------

LinearSystem::LinearSystem(int dim, Coefficient a, double t_min, double t_max)
    : dim_(dim), a_(std::move(a)), t_min_(t_min), t_max_(t_max) {
  require(dim >= 1, "dimension must be positive");
  require(t_min < t_max, "empty time horizon");
  require(static_cast<bool>(a_), "missing coefficient function");
}

LinearSystem LinearSystem::constant(const Mat& a, double t_min, double t_max) {
  require(a.rows() == a.cols() && a.rows() >= 1, "coefficient must be square");
  LinearSystem sys(static_cast<int>(a.rows()), [a](double, Mat& out) { out = a; }, t_min, t_max);
  sys.constant_ = a;
  return sys;
}

LinearSystem LinearSystem::tabular(std::vector<double> times, std::vector<Mat> samples) {
  require(times.size() >= 2 && times.size() == samples.size(), "tabular system needs >= 2 matching samples");
  const auto dim = samples.front().rows();
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(samples[i].rows() == dim && samples[i].cols() == dim, "tabular samples must share a square shape");
    if (i > 0) require(times[i] > times[i - 1], "tabular times must be strictly increasing");
  }
  const double lo = times.front();
  const double hi = times.back();
  auto table = std::make_shared<std::pair<std::vector<double>, std::vector<Mat>>>(std::move(times), std::move(samples));
  auto coeff = [table](double t, Mat& out) {
    const auto& ts = table->first;
    const auto& ms = table->second;
    if (t <= ts.front()) { out = ms.front(); return; }
    if (t >= ts.back()) { out = ms.back(); return; }
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const auto i = static_cast<std::size_t>(it - ts.begin());
    const double w = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    out = (1.0 - w) * ms[i - 1] + w * ms[i];
  };
  return LinearSystem(static_cast<int>(dim), coeff, lo, hi);
}

bool LinearSystem::contains(double t) const {
  const double slack = 1e-12 * std::max(1.0, std::abs(t));
  return t >= t_min_ - slack && t <= t_max_ + slack;
}

Mat LinearSystem::coefficient(double t) const {
  Mat out(dim_, dim_);
  a_(t, out);
  return out;
}

// ---------------------------------------------------------------------------

NonlinearTerm::NonlinearTerm(int dim, Field f, Jacobian df, NonlinearConstants constants,
                             bool autonomous, std::optional<double> support_radius)
    : dim_(dim), f_(std::move(f)), df_(std::move(df)), constants_(constants),
      autonomous_(autonomous), support_(support_radius) {
  require(dim >= 1, "dimension must be positive");
  require(constants.eps >= 0.0 && constants.eta >= 0.0 && constants.lipschitz >= 0.0,
          "nonlinearity constants must be nonnegative");
}

NonlinearTerm NonlinearTerm::zero(int dim) {
  return NonlinearTerm(dim, nullptr, nullptr, {}, true, 0.0);
}

void NonlinearTerm::evaluate(double t, const Vec& x, Vec& out) const {
  if (!f_) {
    out.setZero(dim_);
    return;
  }
  f_(t, x, out);
}

Vec NonlinearTerm::evaluate(double t, const Vec& x) const {
  Vec out(dim_);
  evaluate(t, x, out);
  return out;
}

void NonlinearTerm::jacobian(double t, const Vec& x, Mat& out) const {
  if (!f_) {
    out.setZero(dim_, dim_);
    return;
  }
  if (df_) {
    df_(t, x, out);
    return;
  }
  out.resize(dim_, dim_);
  Vec xp = x, xm = x, fp(dim_), fm(dim_);
  for (int j = 0; j < dim_; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(j)));
    xp(j) = x(j) + h;
    xm(j) = x(j) - h;
    f_(t, xp, fp);
    f_(t, xm, fm);
    out.col(j) = (fp - fm) / (2.0 * h);
    xp(j) = x(j);
    xm(j) = x(j);
  }
}

Mat NonlinearTerm::jacobian(double t, const Vec& x) const {
  Mat out(dim_, dim_);
  jacobian(t, x, out);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kNodeSpacing = 0.5;

bool on_node(double t, std::int64_t& index) {
  const double scaled = t / kNodeSpacing;
  const double rounded = std::round(scaled);
  if (std::abs(scaled - rounded) <= 1e-12 * std::max(1.0, std::abs(scaled))) {
    index = static_cast<std::int64_t>(rounded);
    return true;
  }
  return false;
}

int steps_for(double length, double h) {
  return std::max(1, static_cast<int>(std::ceil(std::abs(length) / h - 1e-9)));
}

}  // namespace

EvolutionFamily::EvolutionFamily(LinearSystem linear, NonlinearTerm nonlinear, IntegratorSettings settings)
    : linear_(std::move(linear)), nonlinear_(std::move(nonlinear)), settings_(settings) {
  require(linear_.dimension() == nonlinear_.dimension(), "linear part and nonlinearity dimensions differ");
  require(settings_.order == 4, "only the classical fourth-order Runge-Kutta scheme is available");
  require(settings_.step > 0.0 && settings_.step <= kNodeSpacing, "integrator step must lie in (0, 0.5]");
  require(settings_.tol > 0.0, "integrator tolerance must be positive");
  require(settings_.escape_radius > 0.0, "escape radius must be positive");
}

void EvolutionFamily::check_range(double s, double t) const {
  if (!linear_.contains(s) || !linear_.contains(t)) {
    std::ostringstream os;
    os << "times (" << s << ", " << t << ") outside horizon [" << linear_.t_min() << ", " << linear_.t_max() << "]";
    fail(ErrorCode::invalid_argument, os.str());
  }
}

std::vector<EvolutionFamily::Piece> EvolutionFamily::pieces(double s, double t) const {
  std::vector<Piece> out;
  if (s == t) return out;
  const bool forward = t > s;
  const double h = settings_.step;
  const int full_steps = steps_for(kNodeSpacing, h);

  // Node indices strictly between s and t, in travel order.
  std::int64_t idx = 0;
  double cursor = s;
  std::int64_t next;
  if (forward) {
    next = on_node(s, idx) ? idx + 1 : static_cast<std::int64_t>(std::floor(s / kNodeSpacing)) + 1;
  } else {
    next = on_node(s, idx) ? idx - 1 : static_cast<std::int64_t>(std::ceil(s / kNodeSpacing)) - 1;
  }
  std::int64_t end_idx = 0;
  const bool t_node = on_node(t, end_idx);
  while (true) {
    const double node = static_cast<double>(next) * kNodeSpacing;
    const bool beyond = forward ? node >= t : node <= t;
    if (beyond) break;
    Piece p{cursor, node, 0, std::nullopt};
    std::int64_t from_idx = 0;
    if (on_node(cursor, from_idx)) {
      p.from = static_cast<double>(from_idx) * kNodeSpacing;
      p.steps = full_steps;
      p.node = forward ? from_idx : next;
    } else {
      p.steps = steps_for(node - cursor, h);
    }
    out.push_back(p);
    cursor = node;
    next += forward ? 1 : -1;
  }
  Piece last{cursor, t, 0, std::nullopt};
  std::int64_t from_idx = 0;
  if (t_node && on_node(cursor, from_idx) && std::abs(end_idx - from_idx) == 1) {
    last.from = static_cast<double>(from_idx) * kNodeSpacing;
    last.to = static_cast<double>(end_idx) * kNodeSpacing;
    last.steps = full_steps;
    last.node = forward ? from_idx : end_idx;
  } else {
    last.steps = steps_for(t - cursor, h);
  }
  out.push_back(last);
  return out;
}

Mat EvolutionFamily::integrate_linear(const Piece& piece) const {
  const int d = dimension();
  const double dt = (piece.to - piece.from) / piece.steps;
  Mat x = Mat::Identity(d, d);
  Mat a0(d, d), a1(d, d), a2(d, d), k1(d, d), k2(d, d), k3(d, d), k4(d, d), tmp(d, d);
  double t = piece.from;
  linear_.coefficient(t, a0);
  for (int i = 0; i < piece.steps; ++i) {
    const double tm = piece.from + (i + 0.5) * dt;
    const double te = (i + 1 == piece.steps) ? piece.to : piece.from + (i + 1) * dt;
    linear_.coefficient(tm, a1);
    linear_.coefficient(te, a2);
    k1.noalias() = a0 * x;
    tmp = x + 0.5 * dt * k1;
    k2.noalias() = a1 * tmp;
    tmp = x + 0.5 * dt * k2;
    k3.noalias() = a1 * tmp;
    tmp = x + dt * k3;
    k4.noalias() = a2 * tmp;
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    a0.swap(a2);
    t = te;
  }
  if (!x.allFinite()) throw NumericalFailure(piece.from, piece.to, "non-finite transition matrix");
  return x;
}

Mat EvolutionFamily::segment(const Piece& piece) const {
  if (!piece.node || !settings_.memoize) return integrate_linear(piece);
  const auto key = std::make_pair(*piece.node, piece.to > piece.from);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    const auto it = segment_cache_.find(key);
    if (it != segment_cache_.end()) return it->second;
  }
  Mat m = integrate_linear(piece);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  segment_cache_.emplace(key, m);
  return m;
}

std::size_t EvolutionFamily::cached_segments() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  return segment_cache_.size();
}

Mat EvolutionFamily::transition(double s, double t) const {
  check_range(s, t);
  const int d = dimension();
  Mat result = Mat::Identity(d, d);
  for (const auto& p : pieces(s, t)) result = segment(p) * result;
  return result;
}

TransitionResult EvolutionFamily::transition_with_condition(double s, double t) const {
  TransitionResult r;
  r.matrix = transition(s, t);
  Eigen::JacobiSVD<Mat> svd(r.matrix);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  r.condition = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();
  return r;
}

void EvolutionFamily::integrate_state(const Piece& piece, Vec& x) const {
  const int d = dimension();
  const double dt = (piece.to - piece.from) / piece.steps;
  Mat a0(d, d), a1(d, d), a2(d, d);
  Vec k1(d), k2(d), k3(d), k4(d), tmp(d), fv(d);
  const double escape2 = settings_.escape_radius * settings_.escape_radius;
  linear_.coefficient(piece.from, a0);
  for (int i = 0; i < piece.steps; ++i) {
    const double t0 = piece.from + i * dt;
    const double tm = piece.from + (i + 0.5) * dt;
    const double te = (i + 1 == piece.steps) ? piece.to : piece.from + (i + 1) * dt;
    linear_.coefficient(tm, a1);
    linear_.coefficient(te, a2);
    nonlinear_.evaluate(t0, x, fv);
    k1.noalias() = a0 * x;
    k1 += fv;
    tmp = x + 0.5 * dt * k1;
    nonlinear_.evaluate(tm, tmp, fv);
    k2.noalias() = a1 * tmp;
    k2 += fv;
    tmp = x + 0.5 * dt * k2;
    nonlinear_.evaluate(tm, tmp, fv);
    k3.noalias() = a1 * tmp;
    k3 += fv;
    tmp = x + dt * k3;
    nonlinear_.evaluate(te, tmp, fv);
    k4.noalias() = a2 * tmp;
    k4 += fv;
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    a0.swap(a2);
    if (!(x.squaredNorm() <= escape2)) break;
  }
  const double n = x.norm();
  if (x.allFinite() && n > settings_.escape_radius) {
    std::ostringstream os;
    os << "orbit escaped radius " << settings_.escape_radius << " at t=" << piece.to;
    throw EscapeError(piece.to, n, os.str());
  }
  if (!x.allFinite()) throw NumericalFailure(piece.from, piece.to, "non-finite state");
}

void EvolutionFamily::integrate_variational(const Piece& piece, Vec& x, Mat& jac) const {
  const int d = dimension();
  const double dt = (piece.to - piece.from) / piece.steps;
  Mat a0(d, d), a1(d, d), a2(d, d), df(d, d), m(d, d);
  Vec k1(d), k2(d), k3(d), k4(d), tmp(d), fv(d);
  Mat j1(d, d), j2(d, d), j3(d, d), j4(d, d), jt(d, d);
  const double escape2 = settings_.escape_radius * settings_.escape_radius;
  linear_.coefficient(piece.from, a0);
  for (int i = 0; i < piece.steps; ++i) {
    const double t0 = piece.from + i * dt;
    const double tm = piece.from + (i + 0.5) * dt;
    const double te = (i + 1 == piece.steps) ? piece.to : piece.from + (i + 1) * dt;
    linear_.coefficient(tm, a1);
    linear_.coefficient(te, a2);

    nonlinear_.evaluate(t0, x, fv);
    nonlinear_.jacobian(t0, x, df);
    k1.noalias() = a0 * x;
    k1 += fv;
    m = a0 + df;
    j1.noalias() = m * jac;

    tmp = x + 0.5 * dt * k1;
    jt = jac + 0.5 * dt * j1;
    nonlinear_.evaluate(tm, tmp, fv);
    nonlinear_.jacobian(tm, tmp, df);
    k2.noalias() = a1 * tmp;
    k2 += fv;
    m = a1 + df;
    j2.noalias() = m * jt;

    tmp = x + 0.5 * dt * k2;
    jt = jac + 0.5 * dt * j2;
    nonlinear_.evaluate(tm, tmp, fv);
    nonlinear_.jacobian(tm, tmp, df);
    k3.noalias() = a1 * tmp;
    k3 += fv;
    m = a1 + df;
    j3.noalias() = m * jt;

    tmp = x + dt * k3;
    jt = jac + dt * j3;
    nonlinear_.evaluate(te, tmp, fv);
    nonlinear_.jacobian(te, tmp, df);
    k4.noalias() = a2 * tmp;
    k4 += fv;
    m = a2 + df;
    j4.noalias() = m * jt;

    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    jac += (dt / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
    a0.swap(a2);
    if (!(x.squaredNorm() <= escape2)) break;
  }
  if (x.allFinite() && x.norm() > settings_.escape_radius) {
    std::ostringstream os;
    os << "orbit escaped radius " << settings_.escape_radius << " at t=" << piece.to;
    throw EscapeError(piece.to, x.norm(), os.str());
  }
  if (!x.allFinite() || !jac.allFinite()) throw NumericalFailure(piece.from, piece.to, "non-finite variational state");
}

Vec EvolutionFamily::flow(double s, double t, const Vec& x) const {
  check_range(s, t);
  require(x.size() == dimension(), "state dimension mismatch");
  Vec state = x;
  for (const auto& p : pieces(s, t)) integrate_state(p, state);
  return state;
}

std::pair<Vec, Mat> EvolutionFamily::flow_with_jacobian(double s, double t, const Vec& x) const {
  check_range(s, t);
  require(x.size() == dimension(), "state dimension mismatch");
  Vec state = x;
  Mat jac = Mat::Identity(dimension(), dimension());
  for (const auto& p : pieces(s, t)) integrate_variational(p, state, jac);
  return {state, jac};
}

Mat EvolutionFamily::variational_flow(double s, double t, const Vec& x) const {
  return flow_with_jacobian(s, t, x).second;
}

// ---------------------------------------------------------------------------

FlowBounds compute_flow_bounds(double M, double lambda_bar, double eps, double eta, double B) {
  require(M > 0.0 && lambda_bar > 0.0 && eps >= 0.0 && eta >= 0.0 && B >= 0.0,
          "flow bounds need M, lambda_bar > 0 and eps, eta, B >= 0");
  FlowBounds fb;
  const double grow = std::exp(lambda_bar + 2.0 * eps);
  fb.M_tilde = M * std::exp(lambda_bar) * std::exp(M * grow);
  const double gronwall = std::exp(M * eta * grow);
  fb.a = M * std::exp(lambda_bar) * gronwall;
  // a vanishing factor gives 0 even when M~ overflows
  fb.d_lip = B == 0.0 ? 0.0 : M * B * fb.a * fb.M_tilde * grow * gronwall;
  fb.eta_tilde = eta == 0.0 ? 0.0 : M * fb.M_tilde * eta * std::exp(lambda_bar + 2.0 * eps + 1.0);
  fb.B_tilde = B == 0.0 ? 0.0 : 2.0 * fb.a * fb.d_lip * std::exp(lambda_bar + 4.0 * eps) * B * M * fb.M_tilde;
  return fb;
}

MeasuredFlowConstants measure_flow_constants(const EvolutionFamily& family, long n_first, long n_last,
                                             double radius, int samples, std::uint64_t seed) {
  require(n_first <= n_last && samples > 0 && radius > 0.0, "invalid sampling request");
  Sampler rng(seed);
  MeasuredFlowConstants out;
  const int d = family.dimension();
  const double eps = family.nonlinear().constants().eps;
  for (long n = n_first; n <= n_last; ++n) {
    for (int k = 0; k < samples; ++k) {
      const double r = static_cast<double>(n) + rng.uniform(0.0, 1.0);
      const Vec x = rng.in_ball(d, radius);
      const Vec y = rng.in_ball(d, radius);
      const Mat jx = family.variational_flow(static_cast<double>(n), r, x);
      const Mat jy = family.variational_flow(static_cast<double>(n), r, y);
      const double weight = std::exp(-eps * std::abs(static_cast<double>(n)));
      out.jacobian_bound = std::max(out.jacobian_bound, operator_norm(jx) * weight);
      out.flow_lipschitz = std::max(out.flow_lipschitz, std::max(operator_norm(jx), operator_norm(jy)) * weight);
      const double dxy = (x - y).norm();
      if (dxy > 1e-12) out.jacobian_lipschitz = std::max(out.jacobian_lipschitz, operator_norm(jx - jy) / dxy);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Vec DiscreteSystem::nonlinear(long n, const Vec& x) const { return apply(n, x) - step(n) * x; }

Vec DiscreteSystem::inverse_guess(long n, const Vec& y) const { return step_inverse(n) * y; }

DiscretizedFlow::DiscretizedFlow(std::shared_ptr<const EvolutionFamily> family) : family_(std::move(family)) {
  require(family_ != nullptr, "missing evolution family");
}

Mat DiscretizedFlow::step(long n) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = steps_.find(n);
    if (it != steps_.end()) return it->second;
  }
  Mat m = family_->transition(static_cast<double>(n), static_cast<double>(n + 1));
  std::lock_guard<std::mutex> lock(mutex_);
  return steps_.emplace(n, std::move(m)).first->second;
}

Mat DiscretizedFlow::step_inverse(long n) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto it = inverses_.find(n);
    if (it != inverses_.end()) return it->second;
  }
  Mat m = family_->transition(static_cast<double>(n + 1), static_cast<double>(n));
  std::lock_guard<std::mutex> lock(mutex_);
  return inverses_.emplace(n, std::move(m)).first->second;
}

Vec DiscretizedFlow::apply(long n, const Vec& x) const {
  if (linear()) return step(n) * x;
  return family_->flow(static_cast<double>(n), static_cast<double>(n + 1), x);
}

Vec DiscretizedFlow::nonlinear(long n, const Vec& x) const {
  if (linear()) return Vec::Zero(dimension());
  return apply(n, x) - step(n) * x;
}

Mat DiscretizedFlow::nonlinear_jacobian(long n, const Vec& x) const {
  if (linear()) return Mat::Zero(dimension(), dimension());
  return family_->variational_flow(static_cast<double>(n), static_cast<double>(n + 1), x) - step(n);
}

Vec DiscretizedFlow::inverse_guess(long n, const Vec& y) const {
  if (linear()) return step_inverse(n) * y;
  return family_->flow(static_cast<double>(n + 1), static_cast<double>(n), y);
}

ExplicitMap::ExplicitMap(int dim, StepFn a, MapFn f, JacFn df, bool autonomous, double eps)
    : dim_(dim), a_(std::move(a)), f_(std::move(f)), df_(std::move(df)), autonomous_(autonomous), eps_(eps) {
  require(dim >= 1, "dimension must be positive");
  require(static_cast<bool>(a_), "missing step matrix function");
  require(static_cast<bool>(f_) == static_cast<bool>(df_), "nonlinearity and its Jacobian must be given together");
}

ExplicitMap ExplicitMap::linear_map(int dim, StepFn a, bool autonomous) {
  return ExplicitMap(dim, std::move(a), nullptr, nullptr, autonomous);
}

Mat ExplicitMap::step(long n) const { return a_(n); }

Mat ExplicitMap::step_inverse(long n) const {
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    const auto it = cache_->inverses.find(n);
    if (it != cache_->inverses.end()) return it->second;
  }
  Mat inv = a_(n).partialPivLu().inverse();
  std::lock_guard<std::mutex> lock(cache_->mutex);
  return cache_->inverses.emplace(n, std::move(inv)).first->second;
}

Vec ExplicitMap::apply(long n, const Vec& x) const {
  Vec y = a_(n) * x;
  if (f_) y += f_(n, x);
  return y;
}

Vec ExplicitMap::nonlinear(long n, const Vec& x) const {
  if (!f_) return Vec::Zero(dim_);
  return f_(n, x);
}

Mat ExplicitMap::nonlinear_jacobian(long n, const Vec& x) const {
  if (!df_) return Mat::Zero(dim_, dim_);
  return df_(n, x);
}

// ---------------------------------------------------------------------------

Discretization discretize(std::shared_ptr<const EvolutionFamily> family, long first, long last) {
  require(family != nullptr, "missing evolution family");
  require(first < last, "empty discretization window");
  require(family->linear().contains(static_cast<double>(first)) && family->linear().contains(static_cast<double>(last)),
          "discretization window outside the horizon");
  Discretization out;
  out.first = first;
  out.last = last;
  out.system = std::make_shared<DiscretizedFlow>(std::move(family));
  out.steps.reserve(static_cast<std::size_t>(last - first));
  for (long n = first; n < last; ++n) out.steps.push_back(out.system->step(n));
  return out;
}

DiscretizationCheck check_discretization(const DiscreteSystem& system, long first, long last,
                                         double radius, int samples_per_step, std::uint64_t seed) {
  require(first < last, "empty window");
  Sampler rng(seed);
  DiscretizationCheck out;
  const int d = system.dimension();
  const Vec zero = Vec::Zero(d);
  for (long n = first; n < last; ++n) {
    out.max_f_at_zero = std::max(out.max_f_at_zero, system.nonlinear(n, zero).norm());
    out.max_jacobian_at_zero = std::max(out.max_jacobian_at_zero, operator_norm(system.nonlinear_jacobian(n, zero)));
    const double weight = std::exp(system.eps() * std::abs(static_cast<double>(n)));
    for (int k = 0; k < samples_per_step; ++k) {
      const Vec x = rng.in_ball(d, radius);
      out.jacobian_envelope = std::max(out.jacobian_envelope, operator_norm(system.nonlinear_jacobian(n, x)) * weight);
      ++out.samples;
    }
  }
  return out;
}

}  // namespace nalin
