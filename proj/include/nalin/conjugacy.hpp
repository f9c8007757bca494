#pragma once

#include "nalin/common.hpp"
#include "nalin/conditions.hpp"
#include "nalin/evolution.hpp"
#include "nalin/spectrum.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace nalin {

struct ConjugacySettings {
  /// N_tail: maximal number of terms on each side of the sum.
  int tail = 40;
  int max_iterations = 200;
  double tol_fp = 1e-13;
  /// Largest accepted tail estimate, relative to |x|.
  double tol_conj = 1e-10;
  /// Orbits are truncated once they leave this ball.
  double escape_radius = 1e3;
  /// A one-sided sum stops once a term bound drops below early_stop |x|. Below about 1e-15 |x|
  /// the terms f_i = x_{i+1} - A_i x_i are round-off and no longer decay.
  double early_stop = 1e-14;
};

/// Points x_m of the discrete orbit through (n, x) for m in [first, first + size).
struct Orbit {
  long first = 0;
  std::vector<Vec> points;
  bool truncated_backward = false;
  bool truncated_forward = false;

  long last() const { return first + static_cast<long>(points.size()) - 1; }
  const Vec& at(long m) const { return points.at(static_cast<std::size_t>(m - first)); }
};

/// Solves (A_m + f_m)(z) = y by fixed-point iteration z <- A_m^{-1}(y - f_m(z)), falling back to
/// Newton when the iteration stops contracting.
Vec solve_preimage(const DiscreteSystem& system, long m, const Vec& y, const ConjugacySettings& settings);

/// Orbit on [n - back, n + forward], truncated at the escape radius.
Orbit nonlinear_orbit(const DiscreteSystem& system, long n, const Vec& x, int back, int forward,
                      const ConjugacySettings& settings = {});

enum class ConjugacyScheme {
  /// k = d: v_n = sum_{i >= n} A(n,i+1) f_i(x_i).
  forward,
  /// k = 0: v_n = -sum_{i < n} A(n,i+1) f_i(x_i).
  backward,
  /// 0 < k < d: projected two-sided sum.
  two_sided,
};

struct ConjugacyEvaluation {
  Vec value;
  /// Geometric estimate of the dropped terms (both sides added).
  double tail = 0.0;
  int terms_forward = 0;
  int terms_backward = 0;
  bool truncated = false;
};

/// h_n(x) = x + v_n(x) with v_{m+1}(x_{m+1}) = A_m v_m(x_m) - f_m(x_m) along orbits.
class DiscreteConjugacy {
 public:
  DiscreteConjugacy(std::shared_ptr<const DiscreteSystem> system,
                    std::shared_ptr<const ProjectionFamily> projections, ConjugacySettings settings = {});

  const DiscreteSystem& system() const { return *system_; }
  const ConjugacySettings& settings() const { return settings_; }
  ConjugacyScheme scheme() const { return scheme_; }

  ConjugacyEvaluation evaluate(long n, const Vec& x) const;
  Vec h(long n, const Vec& x) const { return evaluate(n, x).value; }
  /// Linear-orbit sum for the starting point, then a chord-Newton polish on h_n(z) = y.
  Vec h_inverse(long n, const Vec& y) const;

  /// |h_{n+1}((A_n + f_n)(x)) - A_n h_n(x)|.
  double residual(long n, const Vec& x) const;

 private:
  ConjugacyEvaluation sum(long n, const Vec& x, bool linear_orbit) const;
  double term_floor(const Vec& x) const;

  std::shared_ptr<const DiscreteSystem> system_;
  std::shared_ptr<const ProjectionFamily> projections_;
  ConjugacySettings settings_;
  ConjugacyScheme scheme_;
};

/// (h(r v) + h(-r v) - 2 h(0)) / (2 r^2): the quadratic Taylor coefficient along v.
Vec quadratic_coefficient(const DiscreteConjugacy& conj, long n, const Vec& direction, double radius);

// ---------------------------------------------------------------------------
// Stable foliation on a finite window of the sequence space

struct FoliationSettings {
  /// Number of sequence entries; index j stands for time first + j.
  int window = 16;
  /// Iterates of the lifted map kept, q_0 ... q_tail.
  int tail = 40;
  int max_iterations = 200;
  /// Stop once successive iterates differ by less than tol (|x| + |xi|) in the weighted metric.
  double tol = 1e-13;
};

using Sequence = std::vector<Vec>;

struct FoliationSolution {
  long first = 0;
  /// q[n][j], n = 0..tail.
  std::vector<Sequence> q;
  /// Weighted sup distance between successive Picard iterates.
  std::vector<double> log;
  /// Largest ratio of successive entries of the log above round-off.
  double contraction = 0.0;
  int iterations = 0;
  bool converged = false;
  /// sup_n gamma_s^{-n} |q_n|.
  double weighted_norm = 0.0;
  double gamma_s = 0.0;

  const Sequence& q0() const { return q.front(); }
};

/// |y| = sup_j |P(j) y_j| + sup_j |(I - P(j)) y_j|.
double sequence_norm(const ProjectionFamily& projections, long first, const Sequence& y);

/// Picard iteration of
///   q_n = A_s^n (xi - pi_s x) + sum_{i<n} A_s^{n-i-1} pi_s [f(q_i + F^i x) - f(F^i x)]
///         - sum_{i=n}^{tail} A_u^{n-i-1} pi_u [f(q_i + F^i x) - f(F^i x)]
/// where F is the shift-lifted map on the window and entries leaving the window are dropped.
FoliationSolution solve_foliation(const DiscreteSystem& system, const ProjectionFamily& projections, long first,
                                  const Sequence& x, const Sequence& xi, const LyapunovPerronParams& lp,
                                  const FoliationSettings& settings = {});

// ---------------------------------------------------------------------------
// Continuous-time conjugacies

struct GaussLegendre {
  std::vector<double> nodes;  // on [0, 1]
  std::vector<double> weights;
};

/// Golub-Welsch nodes and weights mapped to [0, 1].
GaussLegendre gauss_legendre(int count);

class ContinuousConjugacy {
 public:
  /// domain(t) is the radius of V_t; evaluations outside it raise a domain error unless
  /// enforce_domain is false.
  ContinuousConjugacy(std::shared_ptr<const DiscretizedFlow> flow, std::shared_ptr<const DiscreteConjugacy> conj,
                      std::function<double(double)> domain = {}, bool enforce_domain = true);

  /// T(t, n) h_n(phi(n, t; x)), n = floor(t).
  Vec H(double t, const Vec& x) const;
  /// phi(t, n; h_n^{-1}(T(n, t) x)).
  Vec G(double t, const Vec& x) const;
  /// int_0^1 e^{As} h(phi(-s, 0; x)) ds; autonomous systems only.
  Vec averaged_H(const Vec& x, int nodes = 64) const;

  double domain_radius(double t) const;
  const EvolutionFamily& family() const { return flow_->family(); }
  const DiscreteConjugacy& discrete() const { return *conj_; }

 private:
  void check_domain(double t, const Vec& x) const;

  std::shared_ptr<const DiscretizedFlow> flow_;
  std::shared_ptr<const DiscreteConjugacy> conj_;
  std::function<double(double)> domain_;
  bool enforce_;
};

}  // namespace nalin
