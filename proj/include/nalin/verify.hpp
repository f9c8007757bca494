#pragma once

#include "nalin/common.hpp"
#include "nalin/conjugacy.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nalin {

using PointMap = std::function<Vec(const Vec&)>;
using RadiusFn = std::function<double(double)>;

/// One verified property with its worst sample.
struct CheckResult {
  std::string item;
  std::string description;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  int samples = 0;
  int skipped = 0;
  std::optional<Vec> witness;
  double witness_t = 0.0;
  std::vector<std::string> notes;
};

struct HolderFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  int pairs = 0;
  double min_distance = 0.0;
  double max_distance = 0.0;
  /// log10(max_distance / min_distance)
  double decades = 0.0;
  /// Sampled (log |x - y|, log |H x - H y|) pairs, kept for plotting.
  std::vector<std::pair<double, double>> points;
};

/// Regression of log|map(x) - map(y)| on log|x - y| for pairs inside the ball of the given radius,
/// with |x - y| log-uniform over the requested number of decades below radius / 4.
HolderFit fit_holder(const PointMap& map, int dim, double radius, int pairs, double decades, std::uint64_t seed);

struct ExpansionReport {
  std::vector<int> levels;
  std::vector<double> radii;
  std::vector<double> ratios;
  double rho = 0.5;
  /// r_{j+1} <= 1.05 r_j over the last 6 levels.
  bool monotone = false;
};

/// r_j = max over sampled |x| = 2^{-j} of |map(x) - x| / |x|^{1 + rho}.
ExpansionReport check_expansion(const PointMap& map, int dim, int j_first, int j_last, double rho, int directions,
                                std::uint64_t seed);

struct VerifySettings {
  double t0 = 0.0;
  double t1 = 5.0;
  double dt = 0.25;
  int trajectories = 10;
  int inverse_samples = 200;
  int holder_pairs = 200;
  double holder_decades = 4.0;
  double holder_time = 1.5;
  double expansion_time = 1.5;
  double rho = 0.5;
  int expansion_directions = 8;
  /// Solution-mapping tolerance relative to |x0|.
  double tol_ver = 1e-4;
  /// Composition tolerance relative to |x|.
  double tol_inverse = 1e-5;
  double alpha = 0.9;
  std::uint64_t seed = 1;
  /// Equivariance check for autonomous systems.
  bool equivariance = true;
  std::vector<double> equivariance_times{0.25, 0.5, 1.0};
  double equivariance_radius = 1e-2;
};

struct VerificationReport {
  /// A1 ... A5 in order, then B3 when checked.
  std::vector<CheckResult> items;
  HolderFit holder_H;
  HolderFit holder_G;
  ExpansionReport expansion_H;
  ExpansionReport expansion_G;
  std::uint64_t seed = 0;
  bool all_pass = false;
};

/// (A4) for H along nonlinear solutions, or (A5) for G along linear solutions.
CheckResult check_solution_mapping(const ContinuousConjugacy& cc, bool inverse_map, const RadiusFn& radius,
                                   const VerifySettings& settings);
/// max |H(t, G(t, x)) - x| and |G(t, H(t, x)) - x| relative to |x|, t uniform in [t0, t1].
CheckResult check_inverse(const ContinuousConjugacy& cc, const RadiusFn& radius, const VerifySettings& settings);
/// |e^{At} H~(x) - H~(phi(t, 0; x))| at |x| = equivariance_radius.
CheckResult check_equivariance(const ContinuousConjugacy& cc, const VerifySettings& settings);

VerificationReport verify_conjugacy(const ContinuousConjugacy& cc, const RadiusFn& radius,
                                    const VerifySettings& settings);

}  // namespace nalin
