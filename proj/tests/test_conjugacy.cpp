#include <doctest.h>

#include "nalin/catalog.hpp"
#include "nalin/conjugacy.hpp"
#include "nalin/sampling.hpp"

#include <cmath>

using namespace nalin;

namespace {

struct Built {
  CatalogEntry entry;
  std::shared_ptr<DiscretizedFlow> flow;
  std::shared_ptr<ProjectionFamily> proj;
  std::shared_ptr<DiscreteConjugacy> conj;
};

Built build(const std::string& name, std::map<std::string, double> params = {}, ConjugacySettings s = {}) {
  Built b;
  b.entry = make_catalog_entry(name, params, -60, 60);
  b.flow = std::make_shared<DiscretizedFlow>(b.entry.family);
  b.proj = std::make_shared<ProjectionFamily>(b.flow, *b.entry.stable_dimension);
  b.conj = std::make_shared<DiscreteConjugacy>(b.flow, b.proj, s);
  return b;
}

Vec scalar(double v) { return Vec::Constant(1, v); }

// x -> A x + eta chi(|x|) (x2^2, x1^2) with A = diag(1/2, 2)
std::shared_ptr<ExplicitMap> explicit_saddle(double eta) {
  const SmoothCutoff chi(0.25);
  Mat a(2, 2);
  a << 0.5, 0, 0, 2.0;
  auto f = [eta, chi](long, const Vec& x) {
    Vec out(2);
    const double c = eta * chi.value(x.norm());
    out << c * x(1) * x(1), c * x(0) * x(0);
    return out;
  };
  auto df = [eta, chi](long, const Vec& x) {
    Vec q(2);
    q << x(1) * x(1), x(0) * x(0);
    Mat dq(2, 2);
    dq << 0, 2 * x(1), 2 * x(0), 0;
    const double r = x.norm();
    Vec grad = r > 0 ? Vec(chi.derivative(r) / r * x) : Vec::Zero(2);
    return Mat(eta * (chi.value(r) * dq + q * grad.transpose()));
  };
  return std::make_shared<ExplicitMap>(2, [a](long) { return a; }, f, df, true);
}

LyapunovPerronParams saddle_lp() {
  LyapunovPerronParams lp;
  lp.lambda_s_plus = std::pow(0.5, 0.98);
  lp.gamma_s = std::pow(0.5, 0.96);
  lp.gamma_u = std::pow(2.0, 0.96);
  lp.lambda_u_minus = std::pow(2.0, 0.98);
  return lp;
}

}  // namespace

TEST_CASE("linear systems give identity conjugacies and linear orbits") {
  auto b = build("scalar_quadratic", {{"c", 0.0}});
  const Vec x = scalar(0.013);
  CHECK(b.conj->h(3, x) == x);
  CHECK(b.conj->h_inverse(3, x) == x);
  const auto orbit = nonlinear_orbit(*b.flow, 0, x, 3, 3);
  for (long m = -3; m <= 3; ++m) {
    CHECK(std::abs(orbit.at(m)(0) - std::pow(0.5, m) * 0.013) <= 1e-12 * std::abs(orbit.at(m)(0)));
  }
}

TEST_CASE("zero is fixed by orbits and conjugacies") {
  auto b = build("scalar_quadratic");
  const Vec zero = Vec::Zero(1);
  const auto orbit = nonlinear_orbit(*b.flow, 2, zero, 4, 4);
  for (const auto& p : orbit.points) CHECK(p(0) == 0.0);
  CHECK(b.conj->h(2, zero)(0) == 0.0);
  CHECK(b.conj->h_inverse(2, zero)(0) == 0.0);
}

TEST_CASE("backward orbit reproduces the forward map") {
  const SmoothCutoff chi(0.25);
  ExplicitMap map(
      1, [](long) { return Mat::Constant(1, 1, 0.5); },
      [chi](long, const Vec& x) { return Vec(Vec::Constant(1, chi.value(std::abs(x(0))) * x(0) * x(0))); },
      [chi](long, const Vec& x) {
        const double r = std::abs(x(0));
        return Mat(Mat::Constant(1, 1, x(0) * (chi.derivative(r) * r + 2.0 * chi.value(r))));
      },
      true);
  ConjugacySettings s;
  const auto orbit = nonlinear_orbit(map, 0, scalar(0.01), 5, 0, s);
  REQUIRE(orbit.first == -5);
  for (long m = -5; m < 0; ++m) {
    const double fwd = map.apply(m, orbit.at(m))(0);
    CHECK(std::abs(fwd - orbit.at(m + 1)(0)) <= 10 * s.tol_fp * std::abs(orbit.at(m + 1)(0)));
  }
}

TEST_CASE("scalar quadratic conjugacy matches the series coefficient") {
  auto b = build("scalar_quadratic");
  const double expected = *b.entry.series_coefficient;
  CHECK(std::abs(expected - 4.0) < 1e-12);
  for (double r : {1e-2, 1e-3, 1e-4}) {
    const double c = quadratic_coefficient(*b.conj, 0, scalar(1.0), r)(0);
    CHECK(std::abs(c - 4.0) <= 0.05 * 4.0);
  }
  // inverse: series inversion of x + 4 x^2 gives y - 4 y^2
  const double r = 1e-3;
  const double inv = (b.conj->h_inverse(0, scalar(r))(0) + b.conj->h_inverse(0, scalar(-r))(0)) / (2 * r * r);
  CHECK(std::abs(inv + 4.0) <= 0.05 * 4.0);
}

TEST_CASE("conjugacy residual, round trip and autonomy collapse") {
  for (const char* name : {"scalar_quadratic", "scalar_nonuniform"}) {
    CAPTURE(name);
    auto b = build(name);
    Sampler rng(7);
    double worst_res = 0.0, worst_trip = 0.0;
    for (int k = 0; k < 30; ++k) {
      const long n = k % 3;
      const Vec x = rng.in_ball(1, 0.05);
      const Vec ax = b.flow->step(n) * b.conj->h(n, x);
      worst_res = std::max(worst_res, b.conj->residual(n, x) / ax.norm());
      worst_trip = std::max(worst_trip, (b.conj->h_inverse(n, b.conj->h(n, x)) - x).norm());
    }
    CHECK(worst_res <= 1e-6);
    CHECK(worst_trip <= 10 * b.conj->settings().tol_fp);
  }
  auto q = build("scalar_quadratic");
  const Vec x = scalar(0.02);
  const Vec h0 = q.conj->h(0, x);
  for (long n = 1; n <= 3; ++n) CHECK((q.conj->h(n, x) - h0).norm() <= 10 * q.conj->settings().tol_fp);
}

TEST_CASE("tail doubling stays within the reported tail bound") {
  ConjugacySettings shorter;
  shorter.tail = 20;
  shorter.tol_conj = 1e-6;
  auto b = build("scalar_nonuniform", {}, shorter);
  ConjugacySettings longer;
  longer.tail = 40;
  DiscreteConjugacy doubled(b.flow, b.proj, longer);
  for (double v : {0.01, -0.03, 0.05}) {
    const auto e = b.conj->evaluate(1, scalar(v));
    const auto d = doubled.evaluate(1, scalar(v));
    CHECK((e.value - d.value).norm() <= e.tail + 1e-17);
  }
}

TEST_CASE("expansion ratios decay on dyadic radii") {
  auto b = build("scalar_quadratic");
  double prev = 1e300;
  for (int j = 4; j <= 12; ++j) {
    const double r = std::ldexp(1.0, -j);
    const double ratio = std::abs(b.conj->h(0, scalar(r))(0) - r) / std::pow(r, 1.5);
    CHECK(ratio < prev);
    prev = ratio;
  }
}

TEST_CASE("two-sided sum on an explicit saddle") {
  auto map = explicit_saddle(0.5);
  auto proj = std::make_shared<ProjectionFamily>(map, 1);
  DiscreteConjugacy conj(map, proj);
  CHECK(conj.scheme() == ConjugacyScheme::two_sided);
  CHECK(conj.h(0, Vec::Zero(2)).norm() == 0.0);
  Sampler rng(3);
  for (int k = 0; k < 20; ++k) {
    const Vec x = rng.in_ball(2, 0.05);
    const Vec ax = map->step(0) * conj.h(0, x);
    CHECK(conj.residual(0, x) <= 1e-10 * ax.norm());
    CHECK((conj.h_inverse(0, conj.h(0, x)) - x).norm() <= 1e-12);
  }
}

TEST_CASE("foliation solver: trivial cases") {
  const long first = 0;
  FoliationSettings fs;
  fs.window = 6;
  fs.tail = 10;
  auto lin = std::make_shared<ExplicitMap>(2,
                                           [](long) {
                                             Mat a(2, 2);
                                             a << 0.5, 0, 0, 2.0;
                                             return a;
                                           },
                                           nullptr, nullptr, true);
  ProjectionFamily proj(lin, 1);
  Sampler rng(5);
  Sequence x, xi;
  for (int j = 0; j < fs.window; ++j) {
    x.push_back(rng.in_ball(2, 0.01));
    Vec s = Vec::Zero(2);
    s(0) = rng.uniform(-0.01, 0.01);
    xi.push_back(s);
  }
  // f = 0: q_n = A_s^n (xi - pi_s x), the shift moving entries to later indices
  const auto sol = solve_foliation(*lin, proj, first, x, xi, saddle_lp(), fs);
  for (int n = 0; n <= fs.tail; ++n) {
    for (int j = 0; j < fs.window; ++j) {
      Vec expected = Vec::Zero(2);
      if (j - n >= 0) expected(0) = std::pow(0.5, n) * (xi[j - n](0) - x[j - n](0));
      CHECK((sol.q[n][j] - expected).norm() <= 1e-15);
    }
  }
  // xi = pi_s x: zero is the fixed point
  auto map = explicit_saddle(0.5);
  ProjectionFamily pm(map, 1);
  Sequence same;
  for (const auto& v : x) same.push_back(pm.at(0) * v);
  const auto zero = solve_foliation(*map, pm, first, x, same, saddle_lp(), fs);
  for (const auto& qn : zero.q)
    for (const auto& v : qn) CHECK(v.norm() == 0.0);
}

TEST_CASE("foliation solver contracts and q0 is Holder") {
  auto map = explicit_saddle(1e-3);
  ProjectionFamily proj(map, 1);
  FoliationSettings fs;
  fs.window = 8;
  fs.tail = 20;
  Sampler rng(9);
  auto random_seq = [&](double r) {
    Sequence s;
    for (int j = 0; j < fs.window; ++j) s.push_back(rng.in_ball(2, r));
    return s;
  };
  Sequence xi = random_seq(0.01);
  for (auto& v : xi) v(1) = 0.0;
  for (int k = 0; k < 10; ++k) {
    const Sequence x = random_seq(0.01);
    const Sequence y = random_seq(0.01);
    const auto sx = solve_foliation(*map, proj, 0, x, xi, saddle_lp(), fs);
    const auto sy = solve_foliation(*map, proj, 0, y, xi, saddle_lp(), fs);
    CHECK(sx.converged);
    CHECK(sx.contraction < 0.25);
    Sequence diff, dq;
    for (int j = 0; j < fs.window; ++j) {
      diff.push_back(x[j] - y[j]);
      dq.push_back(sx.q0()[j] - sy.q0()[j]);
    }
    const double dxy = sequence_norm(proj, 0, diff);
    CHECK(sequence_norm(proj, 0, dq) <= 3.0 * std::pow(dxy, 0.9));
    CHECK(sx.weighted_norm <= 2.0 * (sequence_norm(proj, 0, x) + sequence_norm(proj, 0, xi)));
  }
}

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
  const auto rule = gauss_legendre(64);
  double total = 0.0;
  for (double w : rule.weights) total += w;
  CHECK(std::abs(total - 1.0) < 1e-13);
  for (int k : {1, 7, 40, 127}) {
    double q = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) q += rule.weights[i] * std::pow(rule.nodes[i], k);
    CHECK(std::abs(q - 1.0 / (k + 1)) < 1e-13);
  }
}

TEST_CASE("continuous conjugacies H and G") {
  auto lin = build("scalar_quadratic", {{"c", 0.0}});
  ContinuousConjugacy id(lin.flow, lin.conj);
  CHECK(id.H(1.3, scalar(0.02)) == scalar(0.02));
  CHECK(id.G(1.3, scalar(0.02)) == scalar(0.02));

  auto b = build("scalar_quadratic");
  ContinuousConjugacy cc(b.flow, b.conj);
  CHECK(cc.H(0.7, Vec::Zero(1))(0) == 0.0);
  // H maps solutions to solutions of the linear equation
  const Vec x0 = scalar(1e-2);
  const Vec h0 = cc.H(0.0, x0);
  double worst = 0.0;
  for (double t = 0.25; t <= 5.0; t += 0.25) {
    const Vec xt = b.entry.family->flow(0.0, t, x0);
    const Vec lhs = cc.H(t, xt);
    const Vec rhs = b.entry.family->transition(0.0, t) * h0;
    worst = std::max(worst, (lhs - rhs).norm());
  }
  CHECK(worst <= 1e-4);
  CHECK(worst <= 1e-10);
  Sampler rng(4);
  for (int k = 0; k < 10; ++k) {
    const double t = rng.uniform(0.0, 5.0);
    const Vec x = rng.in_ball(1, 0.01);
    CHECK((cc.H(t, cc.G(t, x)) - x).norm() <= 1e-11);
    CHECK((cc.G(t, cc.H(t, x)) - x).norm() <= 1e-11);
  }
  ContinuousConjugacy bounded(b.flow, b.conj, [](double) { return 1e-3; });
  CHECK_THROWS_AS(bounded.H(0.5, scalar(1e-2)), Error);
}

TEST_CASE("averaged conjugacy is equivariant") {
  auto b = build("scalar_quadratic");
  ContinuousConjugacy cc(b.flow, b.conj);
  CHECK(cc.averaged_H(Vec::Zero(1))(0) == 0.0);
  const Vec x = scalar(1e-2);
  const Vec hx = cc.averaged_H(x);
  const double t = 0.5;
  const Vec lhs = b.entry.family->transition(0.0, t) * hx;
  const Vec rhs = cc.averaged_H(b.entry.family->flow(0.0, t, x));
  CHECK((lhs - rhs).norm() <= 1e-4);
  CHECK((lhs - rhs).norm() <= 1e-10);

  auto lin = build("scalar_quadratic", {{"c", 0.0}});
  CHECK(ContinuousConjugacy(lin.flow, lin.conj).averaged_H(x) == x);
  auto nonaut = build("scalar_nonuniform");
  CHECK_THROWS_AS(ContinuousConjugacy(nonaut.flow, nonaut.conj).averaged_H(x), Error);
}
