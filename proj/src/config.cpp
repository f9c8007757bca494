#include "nalin/pipeline.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace nalin {

namespace {

using json = nlohmann::json;

[[noreturn]] void bad(const std::string& what) { fail(ErrorCode::config, what); }

// Reads keys of one JSON object and rejects anything it was not asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_ + " must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void number(const char* key, double& out) {
    if (const json* v = child(key)) out = as_number(*v, where(key));
  }
  void number(const char* key, std::optional<double>& out) {
    if (const json* v = child(key)) out = as_number(*v, where(key));
  }
  template <class Int>
  void integer(const char* key, Int& out) {
    if (const json* v = child(key)) out = static_cast<Int>(as_integer(*v, where(key)));
  }
  void flag(const char* key, bool& out) {
    if (const json* v = child(key)) {
      if (!v->is_boolean()) bad(where(key) + " must be a boolean");
      out = v->get<bool>();
    }
  }
  void text(const char* key, std::string& out) {
    if (const json* v = child(key)) {
      if (!v->is_string()) bad(where(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) bad("unknown key " + (path_.empty() ? item.key() : path_ + "." + item.key()));
    }
  }

  static double as_number(const json& v, const std::string& where) {
    if (!v.is_number()) bad(where + " must be a number");
    return v.get<double>();
  }
  static long long as_integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) bad(where + " must be an integer");
    return v.get<long long>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class T>
void pair_of(const json& v, const std::string& where, T& lo, T& hi) {
  if (!v.is_array() || v.size() != 2) bad(where + " must be a two-element array");
  if constexpr (std::is_integral_v<T>) {
    lo = static_cast<T>(Reader::as_integer(v[0], where));
    hi = static_cast<T>(Reader::as_integer(v[1], where));
  } else {
    lo = Reader::as_number(v[0], where);
    hi = Reader::as_number(v[1], where);
  }
}

void check(bool ok, const std::string& what) {
  if (!ok) bad(what);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader top(root, "");

  const json* sys = top.child("system");
  if (!sys) bad("missing key system");
  {
    Reader r(*sys, "system");
    r.text("name", c.system.name);
    r.text("table", c.system.table);
    if (const json* p = r.child("parameters")) {
      Reader params(*p, "system.parameters");
      for (const auto& item : p->items()) {
        double v = 0.0;
        params.number(item.key().c_str(), v);
        c.system.parameters[item.key()] = v;
      }
      params.finish();
    }
    r.finish();
    check(c.system.name.empty() != c.system.table.empty(), "system needs exactly one of name and table");
    check(c.system.table.empty() || c.system.parameters.empty(), "tabular systems take no parameters");
    if (!c.system.table.empty()) {
      const std::filesystem::path p(c.system.table);
      c.system.table = (p.is_absolute() ? p : std::filesystem::path(base_dir) / p).string();
    }
  }

  if (const json* v = top.child("horizon")) pair_of(*v, "horizon", c.t_min, c.t_max);
  if (const json* v = top.child("window")) pair_of(*v, "window", c.window_first, c.window_last);
  top.number("alpha", c.alpha);
  top.integer("seed", c.seed);
  if (top.has("seed") && root["seed"].get<long long>() < 0) bad("seed must be non-negative");

  if (const json* v = top.child("integrator")) {
    Reader r(*v, "integrator");
    r.integer("order", c.integrator.order);
    r.number("step", c.integrator.step);
    r.number("tol", c.integrator.tol);
    r.number("escape_radius", c.integrator.escape_radius);
    r.finish();
  }
  if (const json* v = top.child("spectrum")) {
    Reader r(*v, "spectrum");
    r.integer("subwindow", c.spectrum.subwindow);
    r.integer("min_window", c.spectrum.min_window);
    r.number("grid_step", c.spectrum.grid_step);
    r.number("padding", c.spectrum.padding);
    r.number("gap", c.spectrum.gap);
    r.number("refine", c.spectrum.refine);
    r.finish();
  }
  if (const json* v = top.child("lp")) {
    Reader r(*v, "lp");
    r.number("tau", c.lp_tau);
    r.number("K", c.K);
    r.integer("tail", c.conjugacy.tail);
    r.integer("max_iterations", c.conjugacy.max_iterations);
    r.number("tol_fp", c.conjugacy.tol_fp);
    r.number("tol_conj", c.conjugacy.tol_conj);
    r.number("early_stop", c.conjugacy.early_stop);
    r.number("escape_radius", c.conjugacy.escape_radius);
    r.finish();
  }
  if (const json* v = top.child("dichotomy")) {
    Reader r(*v, "dichotomy");
    r.number("fit_first", c.fit.t_first);
    r.number("fit_last", c.fit.t_last);
    r.number("grid", c.fit.grid);
    r.number("max_lag", c.fit.max_lag);
    r.number("slack", c.fit.slack);
    r.integer("violation_pairs", c.violation_pairs);
    r.integer("norm_horizon", c.adapted.horizon);
    r.integer("norm_samples", c.adapted.samples);
    r.finish();
  }
  if (const json* v = top.child("audit")) {
    Reader r(*v, "audit");
    r.number("t_min", c.audit.t_min);
    r.number("t_max", c.audit.t_max);
    r.integer("time_samples", c.audit.time_samples);
    r.number("radius", c.audit.radius);
    r.integer("x_samples", c.audit.x_samples);
    r.finish();
  }
  if (const json* v = top.child("conjugacy")) {
    Reader r(*v, "conjugacy");
    r.integer("n_first", c.n_first);
    r.integer("n_last", c.n_last);
    r.integer("samples_per_n", c.samples_per_n);
    r.number("series_radius", c.series_radius);
    r.finish();
  }
  if (const json* v = top.child("foliation")) {
    Reader r(*v, "foliation");
    r.flag("enabled", c.foliation);
    r.integer("window", c.foliation_settings.window);
    r.integer("tail", c.foliation_settings.tail);
    r.integer("max_iterations", c.foliation_settings.max_iterations);
    r.number("tol", c.foliation_settings.tol);
    r.finish();
  }
  if (const json* v = top.child("verify")) {
    Reader r(*v, "verify");
    auto& s = c.verify;
    r.number("t0", s.t0);
    r.number("t1", s.t1);
    r.number("dt", s.dt);
    r.integer("trajectories", s.trajectories);
    r.integer("inverse_samples", s.inverse_samples);
    r.integer("holder_pairs", s.holder_pairs);
    r.number("holder_decades", s.holder_decades);
    r.number("holder_time", s.holder_time);
    r.number("expansion_time", s.expansion_time);
    r.number("rho", s.rho);
    r.integer("expansion_directions", s.expansion_directions);
    r.number("tol_ver", s.tol_ver);
    r.number("tol_inverse", s.tol_inverse);
    r.flag("equivariance", s.equivariance);
    if (const json* times = r.child("equivariance_times")) {
      if (!times->is_array() || times->empty()) bad("verify.equivariance_times must be a non-empty array");
      s.equivariance_times.clear();
      for (const auto& t : *times) s.equivariance_times.push_back(Reader::as_number(t, "verify.equivariance_times"));
    }
    r.number("equivariance_radius", s.equivariance_radius);
    r.number("working_radius", c.working_radius);
    r.finish();
  }
  if (const json* v = top.child("output")) {
    Reader r(*v, "output");
    r.text("dir", c.out_dir);
    r.flag("svg", c.svg);
    r.finish();
  }
  top.finish();

  check(c.t_min < c.t_max, "horizon must satisfy t_min < t_max");
  check(c.window_first < c.window_last, "window must satisfy first < last");
  check(c.window_first >= c.t_min && c.window_last <= c.t_max, "window must lie inside the horizon");
  check(c.integrator.step > 0.0 && c.integrator.tol > 0.0, "integrator step and tol must be positive");
  check(c.spectrum.grid_step > 0.0 && c.spectrum.gap > 0.0, "spectrum grid_step and gap must be positive");
  check(c.lp_tau > 0.0 && c.lp_tau < 0.25, "lp.tau must lie in (0, 0.25)");
  check(!c.K || *c.K > 0.0, "lp.K must be positive");
  check(c.conjugacy.tail >= 2, "lp.tail must be at least 2");
  check(c.n_first <= c.n_last && c.samples_per_n >= 1, "conjugacy needs n_first <= n_last and samples_per_n >= 1");
  check(c.series_radius > 0.0, "conjugacy.series_radius must be positive");
  check(c.violation_pairs >= 1, "dichotomy.violation_pairs must be positive");
  check(c.verify.t0 < c.verify.t1 && c.verify.dt > 0.0, "verify needs t0 < t1 and dt > 0");
  check(c.verify.trajectories >= 1 && c.verify.inverse_samples >= 1, "verify sample counts must be positive");
  check(c.verify.holder_pairs >= 200, "verify.holder_pairs must be at least 200");
  check(c.verify.holder_decades >= 3.0, "verify.holder_decades must be at least 3");
  check(c.verify.rho > 0.0 && c.verify.rho < 1.0, "verify.rho must lie in (0, 1)");
  check(c.verify.expansion_directions >= 1, "verify.expansion_directions must be positive");
  check(c.working_radius > 0.0, "verify.working_radius must be positive");
  set_seed(c, c.seed);
  return c;
}

void set_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.audit.seed = seed + 11;
  config.adapted.seed = seed + 3;
  config.verify.seed = seed;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config(ss.str(), dir.empty() ? "." : dir.string());
}

}  // namespace nalin
