#pragma once

#include "nalin/common.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

namespace nalin {

/// C-infinity bump equal to 1 on [0, r0] and 0 on [2 r0, inf).
class SmoothCutoff {
 public:
  explicit SmoothCutoff(double inner_radius);

  double value(double r) const;
  double derivative(double r) const;
  double inner_radius() const { return r0_; }
  double outer_radius() const { return 2.0 * r0_; }

 private:
  double r0_;
};

/// x' = A(t) x on a finite horizon.
class LinearSystem {
 public:
  using Coefficient = std::function<void(double t, Mat& out)>;

  LinearSystem(int dim, Coefficient a, double t_min, double t_max);

  static LinearSystem constant(const Mat& a, double t_min, double t_max);
  /// Piecewise-linear interpolation of sampled coefficients; times strictly increasing.
  static LinearSystem tabular(std::vector<double> times, std::vector<Mat> samples);

  int dimension() const { return dim_; }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }
  bool contains(double t) const;

  void coefficient(double t, Mat& out) const { a_(t, out); }
  Mat coefficient(double t) const;

  bool autonomous() const { return constant_.has_value(); }
  const std::optional<Mat>& constant_matrix() const { return constant_; }

 private:
  int dim_;
  Coefficient a_;
  double t_min_;
  double t_max_;
  std::optional<Mat> constant_;
};

/// Declared constants of the nonlinearity: nonuniformity rate, derivative bound and its Lipschitz constant.
struct NonlinearConstants {
  double eps = 0.0;
  double eta = 0.0;
  double lipschitz = 0.0;
};

/// f(t, x) with its spatial Jacobian. A missing Jacobian falls back to central differences.
class NonlinearTerm {
 public:
  using Field = std::function<void(double t, const Vec& x, Vec& out)>;
  using Jacobian = std::function<void(double t, const Vec& x, Mat& out)>;

  NonlinearTerm(int dim, Field f, Jacobian df, NonlinearConstants constants,
                bool autonomous, std::optional<double> support_radius = std::nullopt);

  static NonlinearTerm zero(int dim);

  int dimension() const { return dim_; }
  bool is_zero() const { return !f_; }
  bool autonomous() const { return autonomous_; }
  bool analytic_jacobian() const { return static_cast<bool>(df_); }
  const NonlinearConstants& constants() const { return constants_; }
  /// f vanishes outside this ball when set.
  std::optional<double> support_radius() const { return support_; }

  void evaluate(double t, const Vec& x, Vec& out) const;
  Vec evaluate(double t, const Vec& x) const;
  void jacobian(double t, const Vec& x, Mat& out) const;
  Mat jacobian(double t, const Vec& x) const;

 private:
  int dim_;
  Field f_;
  Jacobian df_;
  NonlinearConstants constants_;
  bool autonomous_;
  std::optional<double> support_;
};

struct IntegratorSettings {
  /// Classical RK4; only order 4 is implemented.
  int order = 4;
  double step = 1e-3;
  /// Nominal accuracy used for tolerance scaling in checks, not for step control.
  double tol = 1e-10;
  double escape_radius = 1e6;
  bool memoize = true;
};

struct TransitionResult {
  Mat matrix;
  double condition = 1.0;
};

/// Evaluator for T(t,s), phi(t,s;x) and D_x phi(t,s;x).
///
/// Every integration walks the half-integer node grid: a call from s to t
/// integrates s -> first node, node -> node, ..., last node -> t with a fixed
/// number of RK4 steps per piece. Full node-to-node pieces of the linear
/// propagator are memoised. Because the flow uses the same pieces, the
/// linearisation of the discrete flow map coincides with the linear
/// propagator up to round-off.
class EvolutionFamily {
 public:
  EvolutionFamily(LinearSystem linear, NonlinearTerm nonlinear, IntegratorSettings settings = {});

  int dimension() const { return linear_.dimension(); }
  const LinearSystem& linear() const { return linear_; }
  const NonlinearTerm& nonlinear() const { return nonlinear_; }
  const IntegratorSettings& settings() const { return settings_; }
  bool autonomous() const { return linear_.autonomous() && nonlinear_.autonomous(); }

  /// T(t, s).
  Mat transition(double s, double t) const;
  TransitionResult transition_with_condition(double s, double t) const;
  /// phi(t, s; x).
  Vec flow(double s, double t, const Vec& x) const;
  /// D_x phi(t, s; x) from the variational equation along the orbit.
  Mat variational_flow(double s, double t, const Vec& x) const;
  std::pair<Vec, Mat> flow_with_jacobian(double s, double t, const Vec& x) const;

  std::size_t cached_segments() const;

 private:
  struct Piece {
    double from;
    double to;
    int steps;
    std::optional<std::int64_t> node;  // set when [from, to] is a full node-to-node segment
  };

  std::vector<Piece> pieces(double s, double t) const;
  void check_range(double s, double t) const;
  Mat integrate_linear(const Piece& piece) const;
  Mat segment(const Piece& piece) const;
  void integrate_state(const Piece& piece, Vec& x) const;
  void integrate_variational(const Piece& piece, Vec& x, Mat& jac) const;

  LinearSystem linear_;
  NonlinearTerm nonlinear_;
  IntegratorSettings settings_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::int64_t, bool>, Mat> segment_cache_;
};

/// Constants derived from the continuous-time bounds for the time-one maps.
struct FlowBounds {
  double M_tilde = 0.0;
  double a = 0.0;
  double d_lip = 0.0;
  double eta_tilde = 0.0;
  double B_tilde = 0.0;
};

/// M~, a, d, eta~, B~ from (M, lambda_bar, eps) and the nonlinearity bounds (eta, B).
///
/// M~ = M e^{lb} e^{M e^{lb + 2 eps}}; a and d are the Gronwall constants of the
/// flow and of its Jacobian on unit intervals; eta~ = M M~ eta e^{lb + 2 eps + 1};
/// B~ = 2 a d e^{lb + 4 eps} B M M~.
FlowBounds compute_flow_bounds(double M, double lambda_bar, double eps, double eta, double B);

/// Sampled counterparts of a and d: sup |D_x phi(r,n;x)| e^{-eps|n|} and the
/// Lipschitz quotient of D_x phi over a ball.
struct MeasuredFlowConstants {
  double flow_lipschitz = 0.0;
  double jacobian_lipschitz = 0.0;
  double jacobian_bound = 0.0;
};

MeasuredFlowConstants measure_flow_constants(const EvolutionFamily& family, long n_first, long n_last,
                                             double radius, int samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Discrete systems x_{n+1} = A_n x_n + f_n(x_n)

class DiscreteSystem {
 public:
  virtual ~DiscreteSystem() = default;

  virtual int dimension() const = 0;
  virtual bool autonomous() const = 0;
  /// True when f_n vanishes identically.
  virtual bool linear() const = 0;
  /// Nonuniformity rate carried by the nonlinear part.
  virtual double eps() const { return 0.0; }

  virtual Mat step(long n) const = 0;
  virtual Mat step_inverse(long n) const = 0;
  /// A_n x + f_n(x).
  virtual Vec apply(long n, const Vec& x) const = 0;
  virtual Vec nonlinear(long n, const Vec& x) const;
  virtual Mat nonlinear_jacobian(long n, const Vec& x) const = 0;
  /// Starting point for solving apply(n, x) = y.
  virtual Vec inverse_guess(long n, const Vec& y) const;
};

/// A_n = T(n+1, n), f_n(x) = phi(n+1, n; x) - A_n x.
class DiscretizedFlow final : public DiscreteSystem {
 public:
  explicit DiscretizedFlow(std::shared_ptr<const EvolutionFamily> family);

  int dimension() const override { return family_->dimension(); }
  bool autonomous() const override { return family_->autonomous(); }
  bool linear() const override { return family_->nonlinear().is_zero(); }
  double eps() const override { return family_->nonlinear().constants().eps; }

  Mat step(long n) const override;
  Mat step_inverse(long n) const override;
  Vec apply(long n, const Vec& x) const override;
  Vec nonlinear(long n, const Vec& x) const override;
  Mat nonlinear_jacobian(long n, const Vec& x) const override;
  Vec inverse_guess(long n, const Vec& y) const override;

  const EvolutionFamily& family() const { return *family_; }
  std::shared_ptr<const EvolutionFamily> family_ptr() const { return family_; }

 private:
  std::shared_ptr<const EvolutionFamily> family_;
  mutable std::mutex mutex_;
  mutable std::map<long, Mat> steps_;
  mutable std::map<long, Mat> inverses_;
};

/// Discrete system given directly by its maps.
class ExplicitMap final : public DiscreteSystem {
 public:
  using StepFn = std::function<Mat(long n)>;
  using MapFn = std::function<Vec(long n, const Vec& x)>;
  using JacFn = std::function<Mat(long n, const Vec& x)>;

  ExplicitMap(int dim, StepFn a, MapFn f, JacFn df, bool autonomous, double eps = 0.0);
  static ExplicitMap linear_map(int dim, StepFn a, bool autonomous);

  int dimension() const override { return dim_; }
  bool autonomous() const override { return autonomous_; }
  bool linear() const override { return !f_; }
  double eps() const override { return eps_; }

  Mat step(long n) const override;
  Mat step_inverse(long n) const override;
  Vec apply(long n, const Vec& x) const override;
  Vec nonlinear(long n, const Vec& x) const override;
  Mat nonlinear_jacobian(long n, const Vec& x) const override;

 private:
  int dim_;
  StepFn a_;
  MapFn f_;
  JacFn df_;
  bool autonomous_;
  double eps_;
  struct InverseCache {
    std::mutex mutex;
    std::map<long, Mat> inverses;
  };
  std::shared_ptr<InverseCache> cache_ = std::make_shared<InverseCache>();
};

struct Discretization {
  long first = 0;
  long last = 0;  // A_n for n in [first, last)
  std::vector<Mat> steps;
  std::shared_ptr<const DiscretizedFlow> system;

  const Mat& step(long n) const { return steps.at(static_cast<std::size_t>(n - first)); }
  Vec nonlinear(long n, const Vec& x) const { return system->nonlinear(n, x); }
};

/// A_n and f_n for n in [first, last).
Discretization discretize(std::shared_ptr<const EvolutionFamily> family, long first, long last);

struct DiscretizationCheck {
  double max_f_at_zero = 0.0;
  double max_jacobian_at_zero = 0.0;
  /// sup over samples of |Df_n(x)| e^{eps |n|}; compare against eta~.
  double jacobian_envelope = 0.0;
  int samples = 0;
};

/// (fn0) at x = 0 for every n and the (Dfn0) envelope on sampled x in a ball.
DiscretizationCheck check_discretization(const DiscreteSystem& system, long first, long last,
                                         double radius, int samples_per_step, std::uint64_t seed);

}  // namespace nalin
