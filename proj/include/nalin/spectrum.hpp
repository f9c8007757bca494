#pragma once

#include "nalin/common.hpp"
#include "nalin/evolution.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace nalin {

/// A_n for n in [first, first + size) with the products A(m, n).
class Cocycle {
 public:
  Cocycle(long first, std::vector<Mat> steps, std::vector<Mat> inverses = {});

  static Cocycle from_system(const DiscreteSystem& system, long first, long last);

  long first() const { return first_; }
  /// One past the last step index.
  long last() const { return first_ + static_cast<long>(steps_.size()); }
  long size() const { return static_cast<long>(steps_.size()); }
  int dimension() const { return static_cast<int>(steps_.front().rows()); }

  const Mat& step(long n) const { return steps_.at(static_cast<std::size_t>(n - first_)); }
  const Mat& step_inverse(long n) const { return inverses_.at(static_cast<std::size_t>(n - first_)); }
  /// A(m, n): A_{m-1} ... A_n for m > n, identity for m = n, inverses for m < n.
  Mat product(long m, long n) const;

  Cocycle scaled(double factor) const;
  double max_condition() const;

 private:
  long first_;
  std::vector<Mat> steps_;
  std::vector<Mat> inverses_;
};

/// Log-scale growth interval of one QR direction.
struct RateInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Discrete QR iteration along the cocycle. The first w steps are burn-in; each
/// direction's interval is the min/max over sliding length-w windows of the mean
/// log diagonal growth. Sorted by lower end.
std::vector<RateInterval> qr_growth_rates(const Cocycle& cocycle, int w);

struct DichotomyTestResult {
  bool passes = false;
  /// Distance from 0 to the nearest rate interval of the rescaled cocycle (0 when one contains it).
  double margin = 0.0;
};

/// Splitting test on the cocycle A_n / mu.
DichotomyTestResult dichotomy_test(const Cocycle& cocycle, double mu, int w, double gap);

struct SpectrumSettings {
  int subwindow = 10;
  int min_window = 40;
  double grid_step = 1e-3;
  double padding = 0.5;
  double gap = 0.05;
  double refine = 1e-9;
};

struct ScanPoint {
  double mu = 0.0;
  bool passes = false;
  double margin = 0.0;
};

struct SpectrumEstimate {
  std::vector<std::pair<double, double>> intervals;
  int k = 0;
  int r = 0;
  bool hyperbolic = true;
  std::vector<ScanPoint> scan;
  std::vector<RateInterval> rates;
  double grid_step = 0.0;

  std::vector<std::pair<double, double>> log_intervals() const;
  /// Number of QR directions with negative growth rate: the dimension of the stable bundle.
  int stable_directions() const;
};

/// Intervals from the mu-scan of dichotomy_test. Each maximal failing run is
/// refined by bisection and then shrunk by the gap on both sides, which undoes
/// the inflation the margin requirement puts around every rate interval.
SpectrumEstimate estimate_spectrum(const Cocycle& cocycle, const SpectrumSettings& settings = {});

// ---------------------------------------------------------------------------

/// P(n) onto the stable directions, computed on demand by subspace iteration:
/// the stable space at n is the backward image of a generic k-frame placed at
/// n + burn, the unstable space the forward image of a (d-k)-frame from n - burn.
class ProjectionFamily {
 public:
  ProjectionFamily(std::shared_ptr<const DiscreteSystem> system, int stable_dim, int burn = 60,
                   std::uint64_t seed = 1, double min_angle = 1e-8);

  int dimension() const { return system_->dimension(); }
  int stable_dimension() const { return k_; }
  int burn() const { return burn_; }

  Mat at(long n) const;
  Mat complement(long n) const { return Mat::Identity(dimension(), dimension()) - at(n); }
  /// |P(n+1) A_n - A_n P(n)|.
  double invariance_residual(long n) const;
  /// Smallest singular value of the orthonormal frame [S U] at n.
  double splitting_quality(long n) const;

 private:
  Mat compute(long n, double* quality) const;

  std::shared_ptr<const DiscreteSystem> system_;
  int k_;
  int burn_;
  std::uint64_t seed_;
  double min_angle_;
  mutable std::mutex mutex_;
  mutable std::map<long, std::pair<Mat, double>> cache_;
};

/// T(t, n) P(n) T(n, t) with n = floor(t).
Mat continuous_projection(const EvolutionFamily& family, const ProjectionFamily& projections, double t);

struct DichotomyConstants {
  double M = 1.0;
  double lambda = 0.0;
  double lambda_bar = 0.0;
  double eps = 0.0;
};

struct ConstantFitSettings {
  double t_first = 0.0;
  double t_last = 20.0;
  double grid = 0.5;
  double max_lag = 10.0;
  double slack = 1.05;
};

/// Least-squares fit of the log bounds with the intercept raised to the envelope.
DichotomyConstants fit_dichotomy_constants(const EvolutionFamily& family, const ProjectionFamily& projections,
                                           const ConstantFitSettings& settings = {});

/// Fraction of sampled pairs violating |T(t,s)P(s)| <= M e^{-lambda(t-s) + eps|s|} and its unstable mirror.
double dichotomy_violation_rate(const EvolutionFamily& family, const ProjectionFamily& projections,
                                const DichotomyConstants& constants, int pairs, double t_first, double t_last,
                                double max_lag, std::uint64_t seed);

struct AdaptedNormSettings {
  int horizon = 40;
  double eps_cap = 0.5;
  double slack = 1.05;
  int samples = 64;
  long sample_first = 0;
  long sample_last = 10;
  std::uint64_t seed = 3;
};

struct DichotomyData {
  std::shared_ptr<const ProjectionFamily> projections;
  DichotomyConstants constants;
  double C = 1.0;
  int horizon = 40;
  /// e^{(lambda - lambda_bar) horizon}: relative weight of the discarded suprema.
  double tail_bound = 0.0;
  /// Largest |x| / |x|_n and |x|_n / (C e^{eps|n|} |x|) over the samples.
  double sandwich_lower = 0.0;
  double sandwich_upper = 0.0;
  std::vector<std::string> warnings;
};

/// |x|_n with the suprema over integer tau truncated to |tau - n| <= horizon.
double adapted_norm(const DiscreteSystem& system, const ProjectionFamily& projections, double lambda, long n,
                    const Vec& x, int horizon);

DichotomyData adapted_norms(std::shared_ptr<const DiscreteSystem> system,
                            std::shared_ptr<const ProjectionFamily> projections, const DichotomyConstants& constants,
                            const AdaptedNormSettings& settings = {});

}  // namespace nalin
