#include "nalin/catalog.hpp"

#include <cmath>

namespace nalin {

namespace {

using Params = std::map<std::string, double>;

const std::map<std::string, Params>& defaults() {
  static const std::map<std::string, Params> table{
      {"autonomous_saddle", {{"eta", 0.0}, {"r0", 0.25}}},
      {"autonomous_3d", {}},
      {"jordan", {}},
      {"jordan_saddle", {}},
      {"scalar_quadratic", {{"lambda", 0.5}, {"c", 1.0}, {"r0", 0.25}}},
      {"scalar_nonuniform", {{"omega", 0.7}, {"amp", 0.02}, {"b", 1.0}, {"r0", 0.25}}},
      {"scalar_switching", {{"low", -2.0}, {"high", -1.0}, {"period", 40.0}, {"sharpness", 20.0}}},
      {"thick_spectrum_fail",
       {{"low", -3.0}, {"high", -0.1}, {"unstable", 1.0}, {"period", 20.0}, {"sharpness", 20.0}}},
  };
  return table;
}

Params merge(const std::string& name, const Params& given) {
  Params out = catalog_defaults(name);
  for (const auto& [key, value] : given) {
    if (!out.count(key)) fail(ErrorCode::config, "unknown parameter '" + key + "' for catalog entry " + name);
    if (!std::isfinite(value)) fail(ErrorCode::config, "parameter '" + key + "' must be finite");
    out[key] = value;
  }
  return out;
}

// d/dx chi(|x|) = chi'(r) x^T / r
Vec cutoff_gradient(const SmoothCutoff& chi, const Vec& x) {
  const double r = x.norm();
  if (r == 0.0) return Vec::Zero(x.size());
  return chi.derivative(r) / r * x;
}

// sup over |x| <= 2 r0 of |d/dx (chi(|x|) x^2)|, sampled finely
double scalar_quadratic_slope(const SmoothCutoff& chi) {
  double best = 0.0;
  const int n = 4000;
  for (int i = 0; i <= n; ++i) {
    const double x = chi.outer_radius() * i / n;
    best = std::max(best, std::abs(chi.derivative(x) * x * x + 2.0 * chi.value(x) * x));
  }
  return best;
}

// Lipschitz constant of the slope above
double scalar_quadratic_curvature(const SmoothCutoff& chi) {
  double best = 0.0;
  const int n = 4000;
  const double dx = chi.outer_radius() / n;
  double prev = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double x = dx * i;
    const double s = chi.derivative(x) * x * x + 2.0 * chi.value(x) * x;
    best = std::max(best, std::abs(s - prev) / dx);
    prev = s;
  }
  return best;
}

Mat matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<long>(rows.size()), static_cast<long>(rows.begin()->size()));
  long i = 0;
  for (const auto& row : rows) {
    long j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

std::vector<std::complex<double>> eigenvalues_of(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a);
  std::vector<std::complex<double>> out;
  for (long i = 0; i < a.rows(); ++i) out.push_back(es.eigenvalues()(i));
  return out;
}

// m + w tanh(kappa sin(pi t / L)): blocks of length L near m - w and m + w
double switching(double t, double low, double high, double period, double sharpness) {
  const double pi = std::acos(-1.0);
  return 0.5 * (low + high) + 0.5 * (high - low) * std::tanh(sharpness * std::sin(pi * t / period));
}

}  // namespace

std::vector<std::string> catalog_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : defaults()) out.push_back(name);
  return out;
}

std::map<std::string, double> catalog_defaults(const std::string& name) {
  const auto it = defaults().find(name);
  if (it == defaults().end()) fail(ErrorCode::config, "unknown catalog entry '" + name + "'");
  return it->second;
}

CatalogEntry make_catalog_entry(const std::string& name, const std::map<std::string, double>& parameters,
                                double t_min, double t_max, const IntegratorSettings& integrator) {
  CatalogEntry e;
  e.name = name;
  e.parameters = merge(name, parameters);
  const Params& p = e.parameters;
  if (!(t_min < t_max)) fail(ErrorCode::config, "horizon must satisfy t_min < t_max");

  auto build = [&](LinearSystem lin, NonlinearTerm f) {
    e.family = std::make_shared<EvolutionFamily>(std::move(lin), std::move(f), integrator);
  };

  if (name == "autonomous_saddle") {
    e.description = "x' = diag(-1, 1) x + eta chi(|x|) (x2^2, x1^2)";
    const Mat a = matrix({{-1, 0}, {0, 1}});
    const double eta = p.at("eta");
    const SmoothCutoff chi(p.at("r0"));
    if (eta == 0.0) {
      build(LinearSystem::constant(a, t_min, t_max), NonlinearTerm::zero(2));
    } else {
      auto f = [eta, chi](double, const Vec& x, Vec& out) {
        out.resize(2);
        const double c = eta * chi.value(x.norm());
        out << c * x(1) * x(1), c * x(0) * x(0);
      };
      auto df = [eta, chi](double, const Vec& x, Mat& out) {
        Vec q(2);
        q << x(1) * x(1), x(0) * x(0);
        Mat dq(2, 2);
        dq << 0, 2 * x(1), 2 * x(0), 0;
        out = eta * (chi.value(x.norm()) * dq + q * cutoff_gradient(chi, x).transpose());
      };
      build(LinearSystem::constant(a, t_min, t_max),
            NonlinearTerm(2, f, df, {0.0, 0.0, 0.0}, true, chi.outer_radius()));
    }
    e.eigenvalues = eigenvalues_of(a);
    e.stable_dimension = 1;
  } else if (name == "autonomous_3d") {
    e.description = "x' = [[-3,1,0],[0,-1,1],[0,0,2]] x";
    const Mat a = matrix({{-3, 1, 0}, {0, -1, 1}, {0, 0, 2}});
    build(LinearSystem::constant(a, t_min, t_max), NonlinearTerm::zero(3));
    e.eigenvalues = eigenvalues_of(a);
    e.stable_dimension = 2;
  } else if (name == "jordan") {
    e.description = "x' = [[-1,1],[0,-1]] x";
    const Mat a = matrix({{-1, 1}, {0, -1}});
    build(LinearSystem::constant(a, t_min, t_max), NonlinearTerm::zero(2));
    e.eigenvalues = eigenvalues_of(a);
    e.stable_dimension = 2;
  } else if (name == "jordan_saddle") {
    e.description = "x' = [[-1,1,0],[0,-1,0],[0,0,1]] x";
    const Mat a = matrix({{-1, 1, 0}, {0, -1, 0}, {0, 0, 1}});
    build(LinearSystem::constant(a, t_min, t_max), NonlinearTerm::zero(3));
    e.eigenvalues = eigenvalues_of(a);
    e.stable_dimension = 2;
  } else if (name == "scalar_quadratic") {
    // time-one map lambda x + c x^2 + O(x^3) inside the cutoff: x' = a x + b x^2 with a = ln lambda
    // has x(1) = lambda x / (1 + (b/a)(1 - lambda) x), so b = c a / (lambda (lambda - 1)).
    e.description = "x' = ln(lambda) x + b chi(|x|) x^2, time-one map lambda x + c x^2 + O(x^3)";
    const double lambda = p.at("lambda");
    const double c = p.at("c");
    if (!(lambda > 0.0 && lambda < 1.0)) fail(ErrorCode::config, "scalar_quadratic needs 0 < lambda < 1");
    const double a = std::log(lambda);
    const double b = c * a / (lambda * (lambda - 1.0));
    const SmoothCutoff chi(p.at("r0"));
    const Mat am = Mat::Constant(1, 1, a);
    if (c == 0.0) {
      build(LinearSystem::constant(am, t_min, t_max), NonlinearTerm::zero(1));
    } else {
      auto f = [b, chi](double, const Vec& x, Vec& out) {
        out.resize(1);
        out(0) = b * chi.value(std::abs(x(0))) * x(0) * x(0);
      };
      auto df = [b, chi](double, const Vec& x, Mat& out) {
        const double r = std::abs(x(0));
        out.resize(1, 1);
        out(0, 0) = b * x(0) * (chi.derivative(r) * r + 2.0 * chi.value(r));
      };
      const NonlinearConstants k{0.0, std::abs(b) * scalar_quadratic_slope(chi),
                                 std::abs(b) * scalar_quadratic_curvature(chi)};
      build(LinearSystem::constant(am, t_min, t_max), NonlinearTerm(1, f, df, k, true, chi.outer_radius()));
    }
    e.parameters["b"] = b;
    e.eigenvalues = {a};
    e.stable_dimension = 1;
    e.series_coefficient = c / (lambda - lambda * lambda);
  } else if (name == "scalar_nonuniform") {
    e.description = "x' = (-omega - amp t sin t) x + b e^{-3 eps |t|} chi(|x|) x^2, eps = 2 amp";
    const double omega = p.at("omega");
    const double amp = p.at("amp");
    const double b = p.at("b");
    const double eps = 2.0 * std::abs(amp);
    const SmoothCutoff chi(p.at("r0"));
    LinearSystem lin(
        1, [omega, amp](double t, Mat& out) { out.setConstant(1, 1, -omega - amp * t * std::sin(t)); }, t_min,
        t_max);
    if (b == 0.0) {
      build(std::move(lin), NonlinearTerm::zero(1));
    } else {
      auto f = [b, eps, chi](double t, const Vec& x, Vec& out) {
        out.resize(1);
        out(0) = b * std::exp(-3.0 * eps * std::abs(t)) * chi.value(std::abs(x(0))) * x(0) * x(0);
      };
      auto df = [b, eps, chi](double t, const Vec& x, Mat& out) {
        const double r = std::abs(x(0));
        out.resize(1, 1);
        out(0, 0) = b * std::exp(-3.0 * eps * std::abs(t)) * x(0) * (chi.derivative(r) * r + 2.0 * chi.value(r));
      };
      const NonlinearConstants k{eps, std::abs(b) * scalar_quadratic_slope(chi),
                                 std::abs(b) * scalar_quadratic_curvature(chi)};
      build(std::move(lin), NonlinearTerm(1, f, df, k, false, chi.outer_radius()));
    }
    e.stable_dimension = 1;
  } else if (name == "scalar_switching") {
    e.description = "x' = a(t) x, a switching smoothly between low and high on blocks of length period";
    const double lo = p.at("low"), hi = p.at("high"), L = p.at("period"), kappa = p.at("sharpness");
    if (!(L > 0.0)) fail(ErrorCode::config, "period must be positive");
    build(LinearSystem(
              1, [=](double t, Mat& out) { out.setConstant(1, 1, switching(t, lo, hi, L, kappa)); }, t_min, t_max),
          NonlinearTerm::zero(1));
    if (hi < 0.0) e.stable_dimension = 1;
  } else if (name == "thick_spectrum_fail") {
    e.description = "x1' = a(t) x1 with a switching between low and high, x2' = unstable x2";
    const double lo = p.at("low"), hi = p.at("high"), L = p.at("period"), kappa = p.at("sharpness");
    const double u = p.at("unstable");
    if (!(L > 0.0)) fail(ErrorCode::config, "period must be positive");
    build(LinearSystem(
              2,
              [=](double t, Mat& out) {
                out.setZero(2, 2);
                out(0, 0) = switching(t, lo, hi, L, kappa);
                out(1, 1) = u;
              },
              t_min, t_max),
          NonlinearTerm::zero(2));
    e.stable_dimension = 1;
  }
  return e;
}

}  // namespace nalin
