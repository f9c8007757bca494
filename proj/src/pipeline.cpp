#include "nalin/pipeline.hpp"
#include "nalin/sampling.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nalin {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_double(const std::string& cell, const std::string& where) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || (end && *end != '\0')) fail(ErrorCode::config, where + ": '" + cell + "' is not a number");
  return v;
}

std::shared_ptr<const DiscreteConjugacy> make_conjugacy(const SystemSetup& setup, const ConditionsResult& cond,
                                                        const RunConfig& config) {
  require(cond.evaluated, "conjugacy needs evaluated conditions");
  return std::make_shared<DiscreteConjugacy>(setup.flow, cond.projections, config.conjugacy);
}

// |h_{n+1}(F_n x) - A_n h_n(x)| / |x| with h_n(x) already known
double relative_residual(const DiscreteConjugacy& conj, long n, const Vec& x, const Vec& hx) {
  const auto& sys = conj.system();
  const Vec lhs = conj.h(n + 1, sys.apply(n, x));
  return (lhs - sys.step(n) * hx).norm() / x.norm();
}

}  // namespace

LinearSystem read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read table " + path);
  std::vector<double> times;
  std::vector<Mat> samples;
  std::string line;
  int row = 0;
  int dim = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv(line);
    const std::string where = path + ":" + std::to_string(row);
    if (times.empty() && !cells.empty() && cells[0].find_first_of("0123456789") == std::string::npos) continue;
    const auto entries = static_cast<int>(cells.size()) - 1;
    const int d = static_cast<int>(std::lround(std::sqrt(std::max(entries, 0))));
    if (entries < 1 || d * d != entries) fail(ErrorCode::config, where + ": expected t followed by d*d entries");
    if (dim == 0) dim = d;
    if (d != dim) fail(ErrorCode::config, where + ": row width changes");
    times.push_back(to_double(cells[0], where));
    Mat a(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) a(i, j) = to_double(cells[static_cast<std::size_t>(1 + i * d + j)], where);
    samples.push_back(std::move(a));
  }
  try {
    return LinearSystem::tabular(std::move(times), std::move(samples));
  } catch (const Error& e) {
    fail(ErrorCode::config, path + ": " + e.what());
  }
}

SystemSetup build_system(const RunConfig& config) {
  SystemSetup out;
  if (!config.system.table.empty()) {
    LinearSystem table = read_table(config.system.table);
    if (config.t_min < table.t_min() || config.t_max > table.t_max()) {
      fail(ErrorCode::config, "horizon exceeds the time range of the table");
    }
    const int d = table.dimension();
    LinearSystem lin(d, [table](double t, Mat& a) { table.coefficient(t, a); }, config.t_min, config.t_max);
    out.entry.name = "table";
    out.entry.description = "tabulated coefficients from " + config.system.table;
    out.entry.family = std::make_shared<EvolutionFamily>(std::move(lin), NonlinearTerm::zero(d), config.integrator);
  } else {
    out.entry = make_catalog_entry(config.system.name, config.system.parameters, config.t_min, config.t_max,
                                   config.integrator);
  }
  out.flow = std::make_shared<DiscretizedFlow>(out.entry.family);
  return out;
}

SpectrumEstimate compute_spectrum(const SystemSetup& setup, const RunConfig& config) {
  const Cocycle cocycle = Cocycle::from_system(*setup.flow, config.window_first, config.window_last);
  return estimate_spectrum(cocycle, config.spectrum);
}

ConditionsResult compute_conditions(const SystemSetup& setup, const SpectrumEstimate& spectrum,
                                    const RunConfig& config) {
  if (!spectrum.hyperbolic) fail(ErrorCode::non_hyperbolic, "the spectrum contains 1; no dichotomy to linearize");
  ConditionsResult out;
  out.bound = check_spectral_bound(spectrum);
  const auto& entry = setup.entry;
  const bool exact = entry.family->autonomous() && !entry.eigenvalues.empty();
  try {
    out.alpha = exact ? autonomous_alpha_bound(entry.eigenvalues, config.alpha)
                      : alpha_upper_bound(spectrum, config.alpha);
  } catch (const Error& e) {
    if (config.alpha) fail(ErrorCode::config, std::string("alpha override rejected: ") + e.what());
    throw;
  }
  if (!out.bound.pass) return out;

  const int stable_dim = spectrum.stable_directions();
  if (entry.stable_dimension && *entry.stable_dimension != stable_dim) {
    out.warnings.push_back("estimated stable dimension " + std::to_string(stable_dim) +
                           " differs from the catalog value " + std::to_string(*entry.stable_dimension));
  }
  out.lp = choose_lp_params(spectrum, config.lp_tau);
  out.lp.tail = config.conjugacy.tail;
  out.lp.max_iterations = config.conjugacy.max_iterations;
  out.lp.tol_fp = config.conjugacy.tol_fp;
  out.projections = std::make_shared<ProjectionFamily>(setup.flow, stable_dim, 60, config.seed + 5);

  const EvolutionFamily& family = *entry.family;
  const DichotomyConstants constants = fit_dichotomy_constants(family, *out.projections, config.fit);
  out.violation_rate = dichotomy_violation_rate(family, *out.projections, constants, config.violation_pairs,
                                                config.fit.t_first, config.fit.t_last, config.fit.max_lag,
                                                config.seed + 7);
  out.dichotomy = adapted_norms(setup.flow, out.projections, constants, config.adapted);

  const double K = config.K.value_or(default_K(out.lp));
  out.max_eta_tilde = max_admissible_eta_tilde(out.alpha->chosen, out.lp, out.dichotomy.C, K);
  // eta~ is linear in eta
  const double per_eta = compute_flow_bounds(constants.M, constants.lambda_bar, constants.eps, 1.0, 0.0).eta_tilde;
  out.eta_cap = out.max_eta_tilde / per_eta;
  out.audit = audit_nonlinearity(family.nonlinear(), config.audit, out.eta_cap);
  out.flow = compute_flow_bounds(constants.M, constants.lambda_bar, constants.eps, out.audit.eta, out.audit.B);
  out.budget = smallness_budget(out.flow, out.dichotomy, out.alpha->chosen, out.lp, K);
  out.evaluated = true;
  return out;
}

double sampling_radius(const ConditionsResult& cond, const RunConfig& config, double t, bool continuous) {
  if (!cond.evaluated || !cond.budget.satisfied) return config.working_radius;
  return continuous ? cond.budget.v_radius(t) : cond.budget.u_radius(static_cast<long>(std::floor(t)));
}

namespace {

RadiusFn continuous_radius(const ConditionsResult& cond, const RunConfig& config) {
  if (!cond.evaluated || !cond.budget.satisfied) {
    const double r = config.working_radius;
    return [r](double) { return r; };
  }
  return [budget = cond.budget](double t) { return budget.v_radius(t); };
}

}  // namespace

LinearizeResult compute_linearization(const SystemSetup& setup, const ConditionsResult& cond,
                                      const RunConfig& config) {
  LinearizeResult out;
  out.conjugacy = make_conjugacy(setup, cond, config);
  out.guaranteed = cond.budget.satisfied;
  out.radius_at_zero = sampling_radius(cond, config, 0.0, true);
  const RadiusFn radius = continuous_radius(cond, config);
  out.continuous = std::make_shared<ContinuousConjugacy>(setup.flow, out.conjugacy, radius);
  const DiscreteConjugacy& conj = *out.conjugacy;
  const int d = setup.flow->dimension();

  Sampler rng(config.seed + 707);
  for (long n = config.n_first; n <= config.n_last; ++n) {
    const double r = sampling_radius(cond, config, static_cast<double>(n), false);
    for (int k = 0; k < config.samples_per_n; ++k) {
      DumpRow row;
      row.n = n;
      row.x = rng.in_ball(d, r);
      row.hx = conj.h(n, row.x);
      row.residual = relative_residual(conj, n, row.x, row.hx);
      out.max_residual = std::max(out.max_residual, row.residual);
      out.dump.push_back(std::move(row));
    }
  }

  if (d == 1) {
    SeriesDiagnostic s;
    s.radius = config.series_radius;
    s.measured = quadratic_coefficient(conj, 0, Vec::Ones(1), config.series_radius)(0);
    s.expected = setup.entry.series_coefficient;
    out.series = s;
  }

  if (config.foliation) {
    const FoliationSettings& fs = config.foliation_settings;
    Sequence x, xi;
    for (int j = 0; j < fs.window; ++j) {
      const long m = config.n_first + j;
      const double r = sampling_radius(cond, config, static_cast<double>(m), false);
      x.push_back(rng.in_ball(d, r / 2.0));
      xi.push_back(cond.projections->at(m) * rng.in_ball(d, r / 2.0));
    }
    try {
      out.foliation = solve_foliation(*setup.flow, *cond.projections, config.n_first, x, xi, cond.lp, fs);
    } catch (const Error& e) {
      out.foliation_error = std::string(to_string(e.code())) + ": " + e.what();
    }
  }

  VerifySettings vs = config.verify;
  vs.alpha = cond.alpha->chosen;
  out.verification = verify_conjugacy(*out.continuous, radius, vs);
  return out;
}

std::vector<DumpRow> read_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read dump " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::config, path + " is empty");
  const auto header = split_csv(line);
  const auto cols = static_cast<int>(header.size());
  if (cols < 4 || (cols - 2) % 2 != 0 || header.front() != "n" || header.back() != "residual") {
    fail(ErrorCode::config, path + ": header must be n, x1..xd, h1..hd, residual");
  }
  const int d = (cols - 2) / 2;
  std::vector<DumpRow> rows;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = path + ":" + std::to_string(row);
    if (static_cast<int>(cells.size()) != cols) fail(ErrorCode::config, where + ": wrong number of columns");
    DumpRow r;
    const double n = to_double(cells[0], where);
    if (n != std::floor(n)) fail(ErrorCode::config, where + ": n must be an integer");
    r.n = static_cast<long>(n);
    r.x.resize(d);
    r.hx.resize(d);
    for (int i = 0; i < d; ++i) {
      r.x(i) = to_double(cells[static_cast<std::size_t>(1 + i)], where);
      r.hx(i) = to_double(cells[static_cast<std::size_t>(1 + d + i)], where);
    }
    r.residual = to_double(cells.back(), where);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) fail(ErrorCode::config, path + " has no rows");
  return rows;
}

RecheckResult recheck_dump(const SystemSetup& setup, const ConditionsResult& cond, const std::vector<DumpRow>& rows,
                           const RunConfig& config) {
  const auto conj = make_conjugacy(setup, cond, config);
  RecheckResult out;
  out.value_tolerance = 1e-9;
  out.residual_tolerance = 1e-6;
  for (const auto& r : rows) {
    if (r.x.size() != setup.flow->dimension()) fail(ErrorCode::config, "dump dimension does not match the system");
    const double scale = r.x.norm();
    if (scale == 0.0) continue;
    const Vec hx = conj->h(r.n, r.x);
    out.max_value_error = std::max(out.max_value_error, (hx - r.hx).norm() / scale);
    out.max_residual = std::max(out.max_residual, relative_residual(*conj, r.n, r.x, hx));
    ++out.rows;
  }
  out.pass = out.rows > 0 && out.max_value_error <= out.value_tolerance && out.max_residual <= out.residual_tolerance;
  return out;
}

}  // namespace nalin
