#pragma once

#include "nalin/common.hpp"
#include "nalin/evolution.hpp"
#include "nalin/spectrum.hpp"

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nalin {

struct SpectralBoundEntry {
  int index = 0;  // 1-based interval index
  bool stable = true;
  double ratio = 0.0;  // b_i / a_i
  double bound = 0.0;  // 1/b_k or a_{k+1}
  double log_margin = 0.0;
  bool pass = false;
};

struct SpectralBoundReport {
  bool pass = true;
  std::vector<SpectralBoundEntry> entries;
  /// 1-based index of the first violating interval, 0 if none.
  int first_violation = 0;
};

/// b_i/a_i < 1/b_k for i <= k and b_j/a_j < a_{k+1} for j > k.
/// Equivalent to b_i b_k < a_i and b_j < a_j a_{k+1} (no order-2 resonance).
SpectralBoundReport check_spectral_bound(const SpectrumEstimate& spectrum);

struct AlphaBound {
  /// +inf for a one-sided spectrum.
  double alpha_max = 0.0;
  /// "unstable" when (ln a_{k+1} - ln b_k)/ln b_r is the minimum, "stable" for the ln a_1^{-1} ratio,
  /// "one-sided" when the gap is unbounded.
  std::string branch;
  double chosen = 0.0;
  double rho = 0.1;
};

AlphaBound alpha_upper_bound(const SpectrumEstimate& spectrum, std::optional<double> alpha = std::nullopt,
                             double rho = 0.1);
AlphaBound autonomous_alpha_bound(const std::vector<std::complex<double>>& eigenvalues,
                                  std::optional<double> alpha = std::nullopt, double rho = 0.1);

struct AuditSettings {
  double t_min = 0.0;
  double t_max = 10.0;
  int time_samples = 41;
  double radius = 1.0;
  int x_samples = 16;
  std::uint64_t seed = 11;
  double zero_tol = 1e-12;
};

struct NonlinearityAudit {
  bool f1 = true;
  bool f2 = true;
  bool f3 = true;
  bool f4 = true;
  double max_f_at_zero = 0.0;
  double max_jacobian_at_zero = 0.0;
  double eta = 0.0;
  double B = 0.0;
  /// Threshold F3 was judged against; infinite when none was supplied.
  double eta_cap = 0.0;
  int samples = 0;
  double worst_f1_t = 0.0;
  double worst_f2_t = 0.0;
  double worst_f3_t = 0.0;
  Vec worst_f3_x;
};

/// F1/F2 at x = 0, eta = sup |D_x f(t,x)| e^{3 eps|t|}, B = sup |D_x f(t,x) - D_x f(t,y)| e^{4 eps|t|} / |x-y|.
NonlinearityAudit audit_nonlinearity(const NonlinearTerm& f, const AuditSettings& settings,
                                     std::optional<double> eta_cap = std::nullopt);

struct LyapunovPerronParams {
  double lambda_s_plus = 0.0;
  double gamma_s = 0.0;
  double gamma_u = 0.0;
  double lambda_u_minus = 0.0;
  double lambda_u_plus = 0.0;
  /// Counterpart of lambda_u_plus for the inverse maps, 1/a_1 pushed outward.
  double lambda_u_plus_inverse = 0.0;
  bool one_sided = false;
  int tail = 40;
  int max_iterations = 200;
  double tol_fp = 1e-13;
};

/// Rates at log-fractions tau and 2 tau inside the central gap. A missing side of
/// a one-sided spectrum is mirrored from the present one.
LyapunovPerronParams choose_lp_params(const SpectrumEstimate& spectrum, double tau = 0.02);

/// 4 max(1, 1/(1 - lambda_s+/gamma_s), 1/(1 - gamma_u/lambda_u-)) raised to the geometric-series
/// constants of the weighted foliation estimates when those are larger.
double default_K(const LyapunovPerronParams& lp);

struct Threshold {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = false;
  /// limit - value
  double margin = 0.0;
};

struct SmallnessBudget {
  FlowBounds flow;
  double C = 1.0;
  double K = 0.0;
  double eps = 0.0;
  double alpha = 0.0;
  double delta = 0.0;
  double rho = 0.0;
  double rho_tilde = 0.0;
  std::vector<Threshold> thresholds;
  bool satisfied = false;

  double u_radius(long n) const;
  double v_radius(double t) const;
};

/// Largest eta~ allowed by CK eta~ < 1/4 and gamma_s/gamma_u (lambda_u+ + C eta~)^alpha < 1
/// (for both the forward and the inverse maps); 0 when none is.
double max_admissible_eta_tilde(double alpha, const LyapunovPerronParams& lp, double C, double K);

SmallnessBudget smallness_budget(const FlowBounds& flow, const DichotomyData& dichotomy, double alpha,
                                 const LyapunovPerronParams& lp, std::optional<double> K = std::nullopt,
                                 double delta_cap = 1.0);

}  // namespace nalin
