#include "nalin/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <sstream>

namespace nalin {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

const char* kBanner = "OUTSIDE GUARANTEED REGIME: the smallness budget is not satisfied; samples use the working radius";

std::string num(double v, int precision = 17) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << std::setprecision(precision) << v;
  return os.str();
}

ojson jnum(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

ojson jvec(const Vec& v) {
  ojson out = ojson::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(jnum(v(i)));
  return out;
}

ojson jpairs(const std::vector<std::pair<double, double>>& v) {
  ojson out = ojson::array();
  for (const auto& [a, b] : v) out.push_back({jnum(a), jnum(b)});
  return out;
}

class Writer {
 public:
  explicit Writer(fs::path dir) : dir_(std::move(dir)) {}

  void text(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) fail(ErrorCode::io, "cannot write " + p.string());
    files_.push_back(p.string());
  }
  void json(const std::string& name, const ojson& j) { text(name, j.dump(2) + "\n"); }

  const std::vector<std::string>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------

ojson spectrum_json(const RunConfig& config, const SystemSetup& setup, const SpectrumEstimate& est) {
  ojson j;
  j["system"] = setup.entry.name;
  j["window"] = {config.window_first, config.window_last};
  j["grid_step"] = jnum(est.grid_step);
  j["hyperbolic"] = est.hyperbolic;
  j["k"] = est.k;
  j["r"] = est.r;
  j["stable_dimension"] = est.stable_directions();
  j["intervals"] = jpairs(est.intervals);
  j["log_intervals"] = jpairs(est.log_intervals());
  ojson rates = ojson::array();
  for (const auto& r : est.rates) rates.push_back({jnum(r.lo), jnum(r.hi)});
  j["qr_rates"] = rates;
  if (!setup.entry.eigenvalues.empty()) {
    std::vector<double> moduli;
    for (const auto& e : setup.entry.eigenvalues) moduli.push_back(std::exp(e.real()));
    std::sort(moduli.begin(), moduli.end());
    ojson m = ojson::array();
    for (double v : moduli) m.push_back(jnum(v));
    j["eigenvalue_moduli"] = m;
  }
  return j;
}

std::string spectrum_csv(const SpectrumEstimate& est) {
  std::string out = "mu,passes,margin\n";
  for (const auto& p : est.scan) out += num(p.mu) + "," + (p.passes ? "1" : "0") + "," + num(p.margin) + "\n";
  return out;
}

ojson conditions_json(const ConditionsResult& c) {
  ojson j;
  ojson sb;
  sb["pass"] = c.bound.pass;
  sb["first_violation"] = c.bound.first_violation;
  ojson margins = ojson::array();
  for (const auto& e : c.bound.entries) {
    margins.push_back({{"index", e.index},
                       {"side", e.stable ? "stable" : "unstable"},
                       {"ratio", jnum(e.ratio)},
                       {"bound", jnum(e.bound)},
                       {"log_margin", jnum(e.log_margin)},
                       {"pass", e.pass}});
  }
  sb["margins"] = margins;
  j["spectral_bound"] = sb;
  if (c.alpha) {
    j["alpha"] = {{"max", jnum(c.alpha->alpha_max)}, {"chosen", jnum(c.alpha->chosen)}, {"branch", c.alpha->branch}};
  }
  j["evaluated"] = c.evaluated;
  if (c.evaluated) {
    const auto& k = c.dichotomy.constants;
    j["dichotomy"] = {{"M", jnum(k.M)},
                      {"lambda", jnum(k.lambda)},
                      {"lambda_bar", jnum(k.lambda_bar)},
                      {"eps", jnum(k.eps)},
                      {"C", jnum(c.dichotomy.C)},
                      {"violation_rate", jnum(c.violation_rate)},
                      {"norm_horizon", c.dichotomy.horizon},
                      {"tail_bound", jnum(c.dichotomy.tail_bound)}};
    j["lp"] = {{"lambda_s_plus", jnum(c.lp.lambda_s_plus)},    {"gamma_s", jnum(c.lp.gamma_s)},
               {"gamma_u", jnum(c.lp.gamma_u)},                {"lambda_u_minus", jnum(c.lp.lambda_u_minus)},
               {"lambda_u_plus", jnum(c.lp.lambda_u_plus)},    {"lambda_u_plus_inverse", jnum(c.lp.lambda_u_plus_inverse)},
               {"one_sided", c.lp.one_sided},                  {"tail", c.lp.tail}};
    const auto& a = c.audit;
    j["audit"] = {{"F1", a.f1},
                  {"F2", a.f2},
                  {"F3", a.f3},
                  {"F4", a.f4},
                  {"max_f_at_zero", jnum(a.max_f_at_zero)},
                  {"max_jacobian_at_zero", jnum(a.max_jacobian_at_zero)},
                  {"eta", jnum(a.eta)},
                  {"B", jnum(a.B)},
                  {"eta_cap", jnum(a.eta_cap)},
                  {"samples", a.samples}};
    const auto& b = c.budget;
    ojson th = ojson::array();
    for (const auto& t : b.thresholds) {
      th.push_back({{"name", t.name},
                    {"value", jnum(t.value)},
                    {"limit", jnum(t.limit)},
                    {"margin", jnum(t.margin)},
                    {"pass", t.pass}});
    }
    j["budget"] = {{"satisfied", b.satisfied},
                   {"K", jnum(b.K)},
                   {"C", jnum(b.C)},
                   {"eps", jnum(b.eps)},
                   {"alpha", jnum(b.alpha)},
                   {"delta", jnum(b.delta)},
                   {"rho", jnum(b.rho)},
                   {"rho_tilde", jnum(b.rho_tilde)},
                   {"max_eta_tilde", jnum(c.max_eta_tilde)},
                   {"flow", {{"M_tilde", jnum(b.flow.M_tilde)},
                             {"a", jnum(b.flow.a)},
                             {"d", jnum(b.flow.d_lip)},
                             {"eta_tilde", jnum(b.flow.eta_tilde)},
                             {"B_tilde", jnum(b.flow.B_tilde)}}},
                   {"thresholds", th}};
  }
  ojson w = ojson::array();
  for (const auto& s : c.warnings) w.push_back(s);
  for (const auto& s : c.dichotomy.warnings) w.push_back(s);
  j["warnings"] = w;
  j["pass"] = c.pass();
  return j;
}

std::string dump_csv(const LinearizeResult& r, int d) {
  std::string out = "n";
  for (int i = 1; i <= d; ++i) out += ",x" + std::to_string(i);
  for (int i = 1; i <= d; ++i) out += ",h" + std::to_string(i);
  out += ",residual\n";
  for (const auto& row : r.dump) {
    out += std::to_string(row.n);
    for (int i = 0; i < d; ++i) out += "," + num(row.x(i));
    for (int i = 0; i < d; ++i) out += "," + num(row.hx(i));
    out += "," + num(row.residual) + "\n";
  }
  return out;
}

const char* scheme_name(ConjugacyScheme s) {
  switch (s) {
    case ConjugacyScheme::forward: return "forward";
    case ConjugacyScheme::backward: return "backward";
    case ConjugacyScheme::two_sided: return "two_sided";
  }
  return "";
}

ojson conjugacy_json(const LinearizeResult& r, const RunConfig& config) {
  ojson j;
  const auto& s = r.conjugacy->settings();
  j["scheme"] = scheme_name(r.conjugacy->scheme());
  j["guaranteed"] = r.guaranteed;
  j["radius_at_zero"] = jnum(r.radius_at_zero);
  j["n_range"] = {config.n_first, config.n_last};
  j["samples"] = r.dump.size();
  j["max_residual"] = jnum(r.max_residual);
  j["settings"] = {{"tail", s.tail},         {"max_iterations", s.max_iterations}, {"tol_fp", jnum(s.tol_fp)},
                   {"tol_conj", jnum(s.tol_conj)}, {"early_stop", jnum(s.early_stop)}};
  if (r.series) {
    ojson sc = {{"radius", jnum(r.series->radius)}, {"measured", jnum(r.series->measured)}};
    if (r.series->expected) {
      sc["expected"] = jnum(*r.series->expected);
      const double diff = std::abs(r.series->measured - *r.series->expected);
      if (*r.series->expected != 0.0) {
        sc["relative_error"] = jnum(diff / std::abs(*r.series->expected));
      } else {
        sc["absolute_error"] = jnum(diff);
      }
    }
    j["series_coefficient"] = sc;
  }
  if (config.foliation) {
    ojson f;
    if (r.foliation) {
      f = {{"converged", r.foliation->converged},
           {"iterations", r.foliation->iterations},
           {"contraction", jnum(r.foliation->contraction)},
           {"weighted_norm", jnum(r.foliation->weighted_norm)},
           {"gamma_s", jnum(r.foliation->gamma_s)}};
    } else {
      f = {{"error", r.foliation_error}};
    }
    j["foliation"] = f;
  }
  return j;
}

std::string foliation_csv(const FoliationSolution& f) {
  std::string out = "iteration,weighted_sup_norm\n";
  for (std::size_t i = 0; i < f.log.size(); ++i) out += std::to_string(i + 1) + "," + num(f.log[i]) + "\n";
  return out;
}

std::string expansion_csv(const VerificationReport& v) {
  std::string out = "map,level,radius,ratio\n";
  for (const auto* e : {&v.expansion_H, &v.expansion_G}) {
    const char* name = e == &v.expansion_H ? "H" : "G";
    for (std::size_t i = 0; i < e->levels.size(); ++i) {
      out += std::string(name) + "," + std::to_string(e->levels[i]) + "," + num(e->radii[i]) + "," +
             num(e->ratios[i]) + "\n";
    }
  }
  return out;
}

ojson holder_json(const HolderFit& f) {
  return {{"slope", jnum(f.slope)},       {"intercept", jnum(f.intercept)},       {"r_squared", jnum(f.r_squared)},
          {"pairs", f.pairs},             {"min_distance", jnum(f.min_distance)}, {"max_distance", jnum(f.max_distance)},
          {"decades", jnum(f.decades)}};
}

ojson verification_json(const LinearizeResult& r, bool banner) {
  const auto& v = r.verification;
  ojson j;
  j["all_pass"] = v.all_pass;
  j["seed"] = v.seed;
  j["regime"] = banner ? "outside guaranteed regime" : "guaranteed";
  j["radius_at_zero"] = jnum(r.radius_at_zero);
  ojson items = ojson::array();
  for (const auto& c : v.items) {
    ojson it = {{"item", c.item},
                {"description", c.description},
                {"pass", c.pass},
                {"measured", jnum(c.measured)},
                {"tolerance", jnum(c.tolerance)},
                {"samples", c.samples},
                {"skipped", c.skipped}};
    it["witness"] = c.witness ? jvec(*c.witness) : ojson(nullptr);
    it["witness_t"] = jnum(c.witness_t);
    ojson notes = ojson::array();
    for (const auto& n : c.notes) notes.push_back(n);
    it["notes"] = notes;
    items.push_back(it);
  }
  j["items"] = items;
  j["holder"] = {{"H", holder_json(v.holder_H)}, {"G", holder_json(v.holder_G)}};
  j["expansion_rho"] = jnum(v.expansion_H.rho);
  return j;
}

std::string verification_txt(const LinearizeResult& r, const SystemSetup& setup, bool banner) {
  const auto& v = r.verification;
  std::ostringstream os;
  os.imbue(std::locale::classic());
  if (banner) os << kBanner << "\n\n";
  os << "system " << setup.entry.name << ", seed " << v.seed << ", radius of V_0 " << num(r.radius_at_zero, 6)
     << "\n";
  os << "conjugacy: max relative residual " << num(r.max_residual, 6) << " over " << r.dump.size() << " samples\n";
  if (r.series) {
    os << "quadratic coefficient of h_0: " << num(r.series->measured, 8);
    if (r.series->expected) os << " (series value " << num(*r.series->expected, 8) << ")";
    os << "\n";
  }
  os << "\n";
  for (const auto& c : v.items) {
    os << (c.pass ? "PASS " : "FAIL ") << c.item << "  measured " << num(c.measured, 6) << "  tolerance "
       << num(c.tolerance, 6) << "  samples " << c.samples;
    if (c.skipped) os << "  skipped " << c.skipped;
    os << "\n     " << c.description << "\n";
    for (const auto& n : c.notes) os << "     note: " << n << "\n";
  }
  os << "\nHolder slopes: H " << num(v.holder_H.slope, 6) << ", G " << num(v.holder_G.slope, 6) << " over "
     << num(v.holder_H.decades, 3) << " decades\n";
  os << (v.all_pass ? "all checks passed\n" : "some checks failed\n");
  return os.str();
}

std::string holder_svg(const VerificationReport& v) {
  const double w = 640, h = 420, pad = 50;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto* f : {&v.holder_H, &v.holder_G}) {
    for (const auto& [a, b] : f->points) {
      x0 = std::min(x0, a), x1 = std::max(x1, a);
      y0 = std::min(y0, b), y1 = std::max(y1, b);
    }
  }
  if (!(x1 > x0) || !(y1 > y0)) return "";
  auto px = [&](double a) { return num(pad + (a - x0) / (x1 - x0) * (w - 2 * pad), 6); };
  auto py = [&](double b) { return num(h - pad - (b - y0) / (y1 - y0) * (h - 2 * pad), 6); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"20\" font-size=\"13\">log |M x - M y| against log |x - y| (H blue, G red)</text>\n";
  const char* colors[] = {"#1f4e9c", "#b22222"};
  int idx = 0;
  for (const auto* f : {&v.holder_H, &v.holder_G}) {
    for (const auto& [a, b] : f->points) {
      os << "<circle cx=\"" << px(a) << "\" cy=\"" << py(b) << "\" r=\"1.6\" fill=\"" << colors[idx] << "\"/>\n";
    }
    os << "<line x1=\"" << px(x0) << "\" y1=\"" << py(f->intercept + f->slope * x0) << "\" x2=\"" << px(x1)
       << "\" y2=\"" << py(f->intercept + f->slope * x1) << "\" stroke=\"" << colors[idx] << "\"/>\n";
    ++idx;
  }
  os << "</svg>\n";
  return os.str();
}

ojson recheck_json(const RecheckResult& r) {
  return {{"rows", r.rows},
          {"max_value_error", jnum(r.max_value_error)},
          {"value_tolerance", jnum(r.value_tolerance)},
          {"max_residual", jnum(r.max_residual)},
          {"residual_tolerance", jnum(r.residual_tolerance)},
          {"pass", r.pass}};
}

std::string describe(const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); }

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config:
    case ErrorCode::io:
    case ErrorCode::invalid_argument:
      return exit_config;
    case ErrorCode::non_hyperbolic:
    case ErrorCode::budget_violation:
      return exit_failed;
    default:
      return exit_numerical;
  }
}

std::optional<Command> parse_command(const std::string& name) {
  if (name == "spectrum") return Command::spectrum;
  if (name == "conditions") return Command::conditions;
  if (name == "linearize") return Command::linearize;
  if (name == "verify") return Command::verify;
  return std::nullopt;
}

RunOutcome run_command(Command command, const RunConfig& base, const RunOptions& options) {
  RunConfig config = base;
  if (options.seed) set_seed(config, *options.seed);
  const fs::path dir = !options.out_dir.empty() ? options.out_dir : !config.out_dir.empty() ? config.out_dir : ".";
  RunOutcome out;
  Writer w(dir);
  try {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::io, "cannot create output directory " + dir.string());

    const SystemSetup setup = build_system(config);
    const SpectrumEstimate spectrum = compute_spectrum(setup, config);
    w.json("spectrum.json", spectrum_json(config, setup, spectrum));
    w.text("spectrum_scan.csv", spectrum_csv(spectrum));
    if (command == Command::spectrum) {
      out.files = w.files();
      return out;
    }

    const ConditionsResult cond = compute_conditions(setup, spectrum, config);
    w.json("conditions.json", conditions_json(cond));
    for (const auto& s : cond.warnings) out.messages.push_back("warning: " + s);
    if (!cond.bound.pass) {
      out.messages.push_back("spectral bound violated at interval " + std::to_string(cond.bound.first_violation));
      out.exit_code = exit_failed;
      out.files = w.files();
      return out;
    }
    const bool banner = !cond.budget.satisfied;
    if (banner) out.messages.push_back(kBanner);
    if (command == Command::conditions) {
      if (banner) out.exit_code = exit_failed;
      out.files = w.files();
      return out;
    }

    if (command == Command::verify) {
      const auto rows = read_dump((dir / "conjugacy.csv").string());
      const RecheckResult r = recheck_dump(setup, cond, rows, config);
      w.json("recheck.json", recheck_json(r));
      out.messages.push_back(std::string("dump re-check ") + (r.pass ? "passed" : "failed") + ": " +
                             std::to_string(r.rows) + " rows, max value error " + num(r.max_value_error, 3) +
                             ", max residual " + num(r.max_residual, 3));
      if (!r.pass) out.exit_code = exit_failed;
      out.files = w.files();
      return out;
    }

    const LinearizeResult lin = compute_linearization(setup, cond, config);
    const int d = setup.flow->dimension();
    w.text("conjugacy.csv", dump_csv(lin, d));
    w.json("conjugacy.json", conjugacy_json(lin, config));
    if (lin.foliation) w.text("foliation.csv", foliation_csv(*lin.foliation));
    w.text("expansion.csv", expansion_csv(lin.verification));
    w.json("verification.json", verification_json(lin, banner));
    w.text("verification.txt", verification_txt(lin, setup, banner));
    if (config.svg) {
      const std::string svg = holder_svg(lin.verification);
      if (!svg.empty()) w.text("holder.svg", svg);
    }
    if (!lin.foliation_error.empty()) out.messages.push_back("foliation: " + lin.foliation_error);
    for (const auto& c : lin.verification.items) {
      if (!c.pass) out.messages.push_back("verification item " + c.item + " failed (measured " + num(c.measured, 4) +
                                          ", tolerance " + num(c.tolerance, 4) + ")");
    }
    const bool ok = lin.verification.all_pass && lin.foliation_error.empty();
    if (!ok || (banner && !options.override_budget)) out.exit_code = exit_failed;
  } catch (const Error& e) {
    out.exit_code = exit_code_for(e.code());
    out.messages.push_back("error: " + describe(e));
  } catch (const std::exception& e) {
    out.exit_code = exit_numerical;
    out.messages.push_back(std::string("error: ") + e.what());
  }
  out.files = w.files();
  return out;
}

}  // namespace nalin
