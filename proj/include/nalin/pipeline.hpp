#pragma once

#include "nalin/catalog.hpp"
#include "nalin/common.hpp"
#include "nalin/conditions.hpp"
#include "nalin/conjugacy.hpp"
#include "nalin/evolution.hpp"
#include "nalin/spectrum.hpp"
#include "nalin/verify.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nalin {

enum class Command { spectrum, conditions, linearize, verify };

/// Process exit codes.
enum ExitCode : int {
  exit_ok = 0,
  exit_failed = 2,
  exit_numerical = 3,
  exit_config = 64,
};

struct SystemConfig {
  /// Catalog entry name; empty when a table is given.
  std::string name;
  std::map<std::string, double> parameters;
  /// CSV of rows t, a_11, a_12, ..., a_dd (row-major), resolved against the config directory.
  std::string table;
};

struct RunConfig {
  SystemConfig system;
  double t_min = -120.0;
  double t_max = 120.0;
  /// Step indices [first, last) of the cocycle used for the spectrum.
  long window_first = -30;
  long window_last = 30;
  IntegratorSettings integrator;
  SpectrumSettings spectrum;
  double lp_tau = 0.02;
  std::optional<double> K;
  std::optional<double> alpha;
  ConstantFitSettings fit;
  int violation_pairs = 400;
  AdaptedNormSettings adapted;
  AuditSettings audit;
  ConjugacySettings conjugacy;
  long n_first = 0;
  long n_last = 5;
  int samples_per_n = 20;
  double series_radius = 1e-3;
  bool foliation = true;
  FoliationSettings foliation_settings{8, 20, 200, 1e-13};
  VerifySettings verify;
  /// Sampling radius used when the smallness budget is not satisfied.
  double working_radius = 1e-2;
  std::uint64_t seed = 1;
  bool svg = false;
  std::string out_dir;
};

/// Strict JSON parsing: unknown keys, wrong types and out-of-range values raise a config error.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);
/// Sets the run seed and the per-stage seeds derived from it.
void set_seed(RunConfig& config, std::uint64_t seed);

struct SystemSetup {
  CatalogEntry entry;
  std::shared_ptr<const DiscretizedFlow> flow;
};

SystemSetup build_system(const RunConfig& config);
/// Rows t, a_11, ..., a_dd.
LinearSystem read_table(const std::string& path);

SpectrumEstimate compute_spectrum(const SystemSetup& setup, const RunConfig& config);

struct ConditionsResult {
  SpectralBoundReport bound;
  std::optional<AlphaBound> alpha;
  /// Everything below is filled only when the spectral bound holds.
  bool evaluated = false;
  LyapunovPerronParams lp;
  std::shared_ptr<const ProjectionFamily> projections;
  DichotomyData dichotomy;
  double violation_rate = 0.0;
  NonlinearityAudit audit;
  /// Largest eta~ the thresholds admit at the chosen alpha, and the eta it corresponds to.
  double max_eta_tilde = 0.0;
  double eta_cap = 0.0;
  FlowBounds flow;
  SmallnessBudget budget;
  std::vector<std::string> warnings;

  bool pass() const { return bound.pass && evaluated && budget.satisfied; }
};

ConditionsResult compute_conditions(const SystemSetup& setup, const SpectrumEstimate& spectrum,
                                    const RunConfig& config);

struct DumpRow {
  long n = 0;
  Vec x;
  Vec hx;
  /// |h_{n+1}((A_n + f_n)(x)) - A_n h_n(x)| / |x|.
  double residual = 0.0;
};

struct SeriesDiagnostic {
  double radius = 0.0;
  double measured = 0.0;
  std::optional<double> expected;
};

struct LinearizeResult {
  std::shared_ptr<const DiscreteConjugacy> conjugacy;
  std::shared_ptr<const ContinuousConjugacy> continuous;
  /// True when the radii come from the smallness budget, false for the working radius.
  bool guaranteed = false;
  double radius_at_zero = 0.0;
  std::vector<DumpRow> dump;
  double max_residual = 0.0;
  std::optional<SeriesDiagnostic> series;
  std::optional<FoliationSolution> foliation;
  std::string foliation_error;
  VerificationReport verification;
};

/// Radius of U_n (discrete) or V_t (continuous) used for sampling.
double sampling_radius(const ConditionsResult& conditions, const RunConfig& config, double t, bool continuous);

LinearizeResult compute_linearization(const SystemSetup& setup, const ConditionsResult& conditions,
                                      const RunConfig& config);

struct RecheckResult {
  int rows = 0;
  double max_value_error = 0.0;
  double max_residual = 0.0;
  double value_tolerance = 0.0;
  double residual_tolerance = 0.0;
  bool pass = false;
};

std::vector<DumpRow> read_dump(const std::string& path);
RecheckResult recheck_dump(const SystemSetup& setup, const ConditionsResult& conditions,
                           const std::vector<DumpRow>& rows, const RunConfig& config);

struct RunOptions {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool override_budget = false;
};

struct RunOutcome {
  int exit_code = exit_ok;
  std::vector<std::string> messages;
  std::vector<std::string> files;
};

/// Runs a command end to end, writes its reports and maps failures to exit codes.
RunOutcome run_command(Command command, const RunConfig& config, const RunOptions& options);

int exit_code_for(ErrorCode code);
std::optional<Command> parse_command(const std::string& name);

}  // namespace nalin
