#include <doctest.h>

#include <cmath>

#include "contjump/errors.hpp"
#include "contjump/generators.hpp"
#include "contjump/harness.hpp"

using namespace contjump;

namespace {

const TorusGeometry kGeom(1, 20.0);

KernelSpec factorized(int nodes = 0) {
  return KernelSpec(KernelVariant::Factorized, RadialProfile::uniform_ball(1.0, 0.5), RadialProfile::smooth_bump(1.0, 1.0),
                    1, Mutation::None, nodes);
}

KernelSpec momentum(int nodes = 0) {
  return KernelSpec(KernelVariant::MomentumConserving, RadialProfile::uniform_ball(1.0, 0.5),
                    RadialProfile::smooth_bump(1.0, 1.0), 1, Mutation::None, nodes);
}

Observable cylinder() {
  CylinderFunction f;
  f.profiles = {TestProfile{{10.0, 0, 0}, 1.5, 1.0}, TestProfile{{10.8, 0, 0}, 1.2, 0.7}};
  f.outer = PolynomialOuter{0.3, {1.0, -0.5}, {0.2, 0.4, 0.4, -0.3}, {0.1, 0.05}};
  return f;
}

Observable linear(const TestProfile& p) { return CylinderFunction{{p}, PolynomialOuter{0.0, {1.0}, {}, {}}}; }

Configuration small_gamma() { return Configuration{{Vec{9.2, 0, 0}, Vec{10.1, 0, 0}, Vec{10.9, 0, 0}, Vec{12.4, 0, 0}}}; }

Configuration moved(Configuration g, std::size_t i, std::size_t j, double h1, double h2) {
  g.points[i] = kGeom.wrap(g.points[i] + Vec{h1, 0, 0});
  g.points[j] = kGeom.wrap(g.points[j] + Vec{h2, 0, 0});
  return g;
}

/** Direct pair sum of int int q (F(moved) - F) on a fine midpoint grid. */
double brute_L(const Observable& F, const Configuration& g, const KernelSpec& k, int m = 400) {
  double f0 = evaluate(F, kGeom, g), step = 2.0 / m, total = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      Vec x = kGeom.min_image_diff(g.points[i], g.points[j]);
      for (int a = 0; a < m; ++a) {
        double h1 = -1.0 + (a + 0.5) * step;
        if (k.variant() == KernelVariant::MomentumConserving) {
          double q = eval_q(k, x, Vec{h1, 0, 0}, Vec{-h1, 0, 0});
          if (q != 0.0) total += q * (evaluate(F, kGeom, moved(g, i, j, h1, -h1)) - f0) * step;
          continue;
        }
        for (int b = 0; b < m; ++b) {
          double h2 = -1.0 + (b + 0.5) * step;
          double q = eval_q(k, x, Vec{h1, 0, 0}, Vec{h2, 0, 0});
          if (q != 0.0) total += q * (evaluate(F, kGeom, moved(g, i, j, h1, h2)) - f0) * step * step;
        }
      }
    }
  return total;
}

double fd_first(const std::function<double(double)>& f, double x, double h = 1e-4) {
  return (f(x + h) - f(x - h)) / (2 * h);
}

double fd_second(const std::function<double(double)>& f, double x, double h = 1e-3) {
  return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
}

}  // namespace

TEST_CASE("apply_L matches a brute-force double integral (factorized)") {
  Observable F = cylinder();
  Configuration g = small_gamma();
  double brute = brute_L(F, g, factorized(), 300);
  CHECK(apply_L(F, kGeom, g, factorized()) == doctest::Approx(brute).epsilon(2e-3));
}

TEST_CASE("apply_L matches a brute-force integral (momentum)") {
  Observable F = cylinder();
  Configuration g = small_gamma();
  double brute = brute_L(F, g, momentum(), 20000);
  CHECK(apply_L(F, kGeom, g, momentum()) == doctest::Approx(brute).epsilon(2e-3));
}

TEST_CASE("apply_L vanishes on constants and on sparse configurations") {
  Observable C = CylinderFunction{{TestProfile{{10.0, 0, 0}, 1.0, 1.0}}, PolynomialOuter{2.5, {0.0}, {}, {}}};
  CHECK(apply_L(C, kGeom, small_gamma(), factorized()) == doctest::Approx(0.0));
  CHECK(apply_L(cylinder(), kGeom, Configuration{}, factorized()) == 0.0);
  CHECK(apply_L(cylinder(), kGeom, Configuration{{Vec{10.0, 0, 0}}}, factorized()) == 0.0);
}

TEST_CASE("diffusive scaling at eps = 1 is the unscaled generator") {
  Observable F = cylinder();
  Configuration g = small_gamma();
  for (const auto& k : {factorized(), momentum()})
    CHECK(apply_L_eps_diffusive(F, kGeom, g, k, 1.0) == doctest::Approx(apply_L(F, kGeom, g, k)).epsilon(1e-12));
}

TEST_CASE("diffusive limit of a linear statistic (symbolic oracle)") {
  KernelSpec k = factorized();
  TestProfile phi{{10.0, 0, 0}, 1.5, 1.0};
  Observable F = linear(phi);
  Configuration g = small_gamma();
  auto p = [&](double x) { return phi.value(kGeom, Vec{x, 0, 0}); };
  auto b = [&](double x) { return k.b_value(Vec{x, 0, 0}); };
  double expected = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double x = g.points[i][0], A = 0.0, B = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (j == i) continue;
      double u = kGeom.min_image_diff(g.points[j], g.points[i])[0];
      A += b(u);
      B += fd_first(b, u);
    }
    expected += fd_second(p, x) * A + fd_first(p, x) * B;
  }
  expected *= k.constants().mean_a * k.constants().c;
  CHECK(apply_L0_diffusive(F, kGeom, g, k) == doctest::Approx(expected).epsilon(1e-4));
}

TEST_CASE("pointwise convergence of the diffusive scaling") {
  Observable F = cylinder();
  Configuration g = small_gamma();
  for (const auto& k : {factorized(), momentum()}) {
    double l0 = apply_L0_diffusive(F, kGeom, g, k);
    double prev = std::abs(apply_L_eps_diffusive(F, kGeom, g, k, 0.4) - l0);
    for (double eps : {0.1, 0.025}) {
      double gap = std::abs(apply_L_eps_diffusive(F, kGeom, g, k, eps) - l0);
      CHECK(gap < prev);
      prev = gap;
    }
    CHECK(prev < 0.02 * std::abs(l0) + 1e-6);
  }
}

TEST_CASE("limit generator needs a differentiable b") {
  KernelSpec k(KernelVariant::Factorized, RadialProfile::uniform_ball(1.0, 0.5), RadialProfile::uniform_ball(1.0, 1.0), 1);
  CHECK_THROWS_AS(apply_L0_diffusive(cylinder(), kGeom, small_gamma(), k), NotDifferentiable);
}

TEST_CASE("quadrature refinement at eps = 0.4 is below the statistical error") {
  Observable F = default_cylinders(kGeom, 1, 42)[0];
  KernelSpec coarse = factorized(), fine = factorized(128);
  RunningStats diff;
  for (std::size_t i = 0; i < 200; ++i) {
    Rng rng = make_stream(42, i, 1);
    Configuration g = sample_poisson(kGeom, 1.0, rng);
    double d = apply_L_eps_diffusive(F, kGeom, g, coarse, 0.4) - apply_L_eps_diffusive(F, kGeom, g, fine, 0.4);
    diff.add(d * d);
  }
  auto res = diffusive_convergence(F, kGeom, coarse, 1.0, {0.4}, {200, 42, 1});
  CHECK(std::sqrt(diff.mean()) < res.rows[0].gap_se);
}

TEST_CASE("birth-and-death scaling at eps = 1 is the unscaled generator") {
  TestProfile phi{{10.0, 0, 0}, 1.5, 0.5};
  Configuration g = small_gamma();
  for (const Observable& F : {Observable(ExponentialFunction{phi}), cylinder()})
    CHECK(apply_L_eps_bd(F, kGeom, g, factorized(), 1.0) == doctest::Approx(apply_L(F, kGeom, g, factorized())).epsilon(1e-12));
}

TEST_CASE("birth-and-death pieces sum to the scaled generator") {
  TestProfile phi{{10.0, 0, 0}, 1.5, 0.5};
  Observable F = ExponentialFunction{phi};
  Configuration g = small_gamma();
  for (double eps : {1.0, 0.5, 0.25}) {
    BdPieces p = bd_pieces(F, kGeom, g, factorized(), eps);
    CHECK(p.sum() == doctest::Approx(apply_L_eps_bd(F, kGeom, g, factorized(), eps)).epsilon(1e-10));
  }
  CHECK_THROWS_AS(bd_pieces(cylinder(), kGeom, g, factorized(), 0.5), UnsupportedError);
}

TEST_CASE("birth integrals against direct torus integration") {
  KernelSpec k = factorized();
  TestProfile phi{{10.0, 0, 0}, 1.5, 0.5};
  auto ex = exp_birth_integrals(kGeom, k, phi);
  const int m = 4000;
  double step = kGeom.side() / m, single = 0.0, pair = 0.0;
  std::vector<double> e(m);
  for (int i = 0; i < m; ++i) e[i] = std::exp(phi.value(kGeom, Vec{(i + 0.5) * step, 0, 0}));
  for (int i = 0; i < m; ++i) single += (e[i] - 1.0) * step;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double u = kGeom.min_image_diff(Vec{(i + 0.5) * step, 0, 0}, Vec{(j + 0.5) * step, 0, 0})[0];
      if (std::abs(u) >= 1.0) continue;
      pair += k.b_value(Vec{u, 0, 0}) * (e[i] * e[j] - 1.0) * step * step;
    }
  CHECK(ex.single == doctest::Approx(single).epsilon(1e-6));
  CHECK(ex.pair == doctest::Approx(pair).epsilon(1e-4));
}

TEST_CASE("closed-form and grid birth terms agree") {
  TestProfile phi{{10.0, 0, 0}, 1.5, 0.5};
  Observable F = ExponentialFunction{phi};
  Configuration g = small_gamma();
  double a = apply_L0_bd(F, kGeom, g, factorized(), 1.0, BirthQuadrature::Auto);
  double b = apply_L0_bd(F, kGeom, g, factorized(), 1.0, BirthQuadrature::Grid);
  CHECK(a == doctest::Approx(b).epsilon(1e-3));
}

TEST_CASE("exponential limit pieces: zero test function gives zero") {
  Observable F = ExponentialFunction{TestProfile{{10.0, 0, 0}, 1.5, 0.0}};
  Configuration g = small_gamma();
  BdPieces p = bd_limit_pieces(F, kGeom, g, factorized(), 1.0);
  CHECK(p.sum() == doctest::Approx(0.0));
}

TEST_CASE("jump carre du champ against brute force") {
  KernelSpec k = factorized();
  Observable F = cylinder();
  Observable G = linear(TestProfile{{10.3, 0, 0}, 1.0, 1.0});
  Configuration g = small_gamma();
  const int m = 300;
  double step = 2.0 / m, brute = 0.0, f0 = evaluate(F, kGeom, g), g0 = evaluate(G, kGeom, g);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = i + 1; j < g.size(); ++j) {
      Vec x = kGeom.min_image_diff(g.points[i], g.points[j]);
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
          double h1 = -1 + (a + 0.5) * step, h2 = -1 + (b + 0.5) * step;
          double q = eval_q(k, x, Vec{h1, 0, 0}, Vec{h2, 0, 0});
          if (q == 0.0) continue;
          Configuration mv = moved(g, i, j, h1, h2);
          brute += 0.5 * q * (evaluate(F, kGeom, mv) - f0) * (evaluate(G, kGeom, mv) - g0) * step * step;
        }
    }
  CHECK(carre_du_champ(FormKind::Jump, F, G, kGeom, g, k, 1.0) == doctest::Approx(brute).epsilon(2e-3));
}

TEST_CASE("diffusive carre du champ of a linear statistic") {
  KernelSpec k = factorized();
  TestProfile phi{{10.0, 0, 0}, 1.5, 1.0};
  Observable F = linear(phi);
  Configuration g = small_gamma();
  double expected = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double A = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (j != i) A += k.b_value(kGeom.min_image_diff(g.points[j], g.points[i]));
    double d = fd_first([&](double x) { return phi.value(kGeom, Vec{x, 0, 0}); }, g.points[i][0]);
    expected += d * d * A;
  }
  expected *= k.constants().mean_a * k.constants().c;
  CHECK(carre_du_champ(FormKind::Diffusive, F, F, kGeom, g, k, 1.0) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("Dirichlet forms are nonnegative on the diagonal") {
  Observable F = cylinder();
  McSettings mc{300, 5, 1};
  for (auto kind : {FormKind::Jump, FormKind::Diffusive, FormKind::BirthDeath})
    CHECK(dirichlet_form_mc(kind, F, F, kGeom, factorized(), 1.0, mc).mean >= 0.0);
}

TEST_CASE("pair moment exact value") {
  CHECK(pair_moment_exact(2.0) == doctest::Approx(14.0));
  CHECK(pair_moment_exact(0.0) == 0.0);
}

TEST_CASE("pair moment Monte Carlo") {
  Window w;
  w.hi[0] = 2.0;
  auto r = pair_moment_check(w, 1.0, kGeom, {20000, 3, 0});
  CHECK(r.exact == doctest::Approx(14.0));
  CHECK(r.pass);
}

TEST_CASE("Mecke identity for the default functionals") {
  for (const auto& f : default_mecke_functionals(kGeom)) {
    auto r = mecke_check(f.G, central_window(kGeom), 1.0, kGeom, {20000, 11, 0});
    CHECK_MESSAGE(r.pass, f.name);
  }
}

TEST_CASE("Mecke identity for a count-dependent functional") {
  Window w = central_window(kGeom);
  PointFunctional G = [w](const Configuration& g, const Vec& x) {
    return w.contains(x, 1) ? static_cast<double>(g.size()) : 0.0;
  };
  auto r = mecke_check(G, w, 1.0, kGeom, {20000, 12, 0});
  // E[N_W N] = z|W| (z L + 1)
  double exact = 10.0 * (20.0 + 1.0);
  CHECK(r.pass);
  CHECK(std::abs(r.lhs.mean - exact) < 4.0 * r.lhs.stderr_);
}

TEST_CASE("duality of generators and forms") {
  auto cyl = default_cylinders(kGeom, 2, 42);
  McSettings mc{1500, 8, 0};
  CHECK(duality_check(FormKind::Jump, cyl[0], cyl[1], kGeom, factorized(), 1.0, mc).pass);
  CHECK(duality_check(FormKind::Diffusive, cyl[0], cyl[1], kGeom, factorized(), 1.0, mc).pass);
  CHECK(duality_check(FormKind::Diffusive, cyl[0], cyl[1], kGeom, momentum(), 1.0, mc).pass);
  Observable E1 = ExponentialFunction{TestProfile{{10.0, 0, 0}, 1.5, 0.5}};
  Observable E2 = ExponentialFunction{TestProfile{{10.7, 0, 0}, 1.2, -0.4}};
  CHECK(duality_check(FormKind::BirthDeath, E1, E2, kGeom, factorized(), 1.0, mc).pass);
}

TEST_CASE("Monte Carlo estimates are thread-count independent") {
  auto cyl = default_cylinders(kGeom, 2, 42);
  auto a = dirichlet_form_mc(FormKind::Jump, cyl[0], cyl[1], kGeom, factorized(), 1.0, {300, 9, 1});
  auto b = dirichlet_form_mc(FormKind::Jump, cyl[0], cyl[1], kGeom, factorized(), 1.0, {300, 9, 4});
  CHECK(a.mean == b.mean);
  CHECK(a.stderr_ == b.stderr_);
}
