#include <doctest.h>

#include <cmath>

#include "contjump/errors.hpp"
#include "contjump/kernels.hpp"

using namespace contjump;

namespace {

KernelSpec factorized(int dim = 1) {
  return KernelSpec(KernelVariant::Factorized, RadialProfile::uniform_ball(1.0, 0.5), RadialProfile::smooth_bump(1.0, 1.0),
                    dim);
}

KernelSpec momentum(int dim = 1) {
  return KernelSpec(KernelVariant::MomentumConserving, RadialProfile::uniform_ball(1.0, 0.5),
                    RadialProfile::smooth_bump(1.0, 1.0), dim);
}

/** Midpoint integral of fn over [-r, r]. */
template <class Fn>
double integrate_1d(Fn&& fn, double r, int m = 100000) {
  double h = 2.0 * r / m, s = 0.0;
  for (int i = 0; i < m; ++i) s += fn(-r + (i + 0.5) * h) * h;
  return s;
}

}  // namespace

TEST_CASE("kernel constants match independent integrals in d = 1") {
  KernelSpec k = factorized();
  const auto& c = k.constants();
  double mean_a = integrate_1d([&](double h) { return k.a_value(Vec{h, 0, 0}); }, 1.0);
  double second = integrate_1d([&](double h) { return h * h * k.a_value(Vec{h, 0, 0}); }, 1.0);
  double mean_b = integrate_1d([&](double x) { return k.b_value(Vec{x, 0, 0}); }, 1.0);
  CHECK(c.mean_a == doctest::Approx(mean_a).epsilon(1e-6));
  CHECK(c.mean_a == doctest::Approx(1.0));
  CHECK(c.c == doctest::Approx(second).epsilon(1e-6));
  CHECK(c.c == doctest::Approx(1.0 / 3.0));
  CHECK(c.mean_b == doctest::Approx(mean_b).epsilon(1e-7));
  CHECK(c.sup_b == doctest::Approx(1.0));
}

TEST_CASE("kernel constants in d = 2") {
  KernelSpec k = factorized(2);
  CHECK(k.constants().mean_a == doctest::Approx(0.5 * M_PI));
  // per-coordinate second moment of the ball: h pi r^4 / 4
  CHECK(k.constants().c == doctest::Approx(0.5 * M_PI / 4.0));
}

TEST_CASE("smooth bump a has the expected second moment") {
  KernelSpec k(KernelVariant::Factorized, RadialProfile::smooth_bump(1.3, 0.7), RadialProfile::smooth_bump(1.0, 1.0), 1);
  double second = integrate_1d([&](double h) { return h * h * k.a_value(Vec{h, 0, 0}); }, 1.3);
  CHECK(k.constants().c == doctest::Approx(second).epsilon(1e-6));
}

TEST_CASE("jump quadrature weights sum to <a>") {
  for (int dim = 1; dim <= 3; ++dim) {
    KernelSpec k = factorized(dim);
    double s = 0.0;
    for (double w : k.quadrature().weights) s += w;
    CHECK(s == doctest::Approx(k.constants().mean_a).epsilon(1e-12));
  }
}

TEST_CASE("unmutated kernels satisfy the symmetry identities") {
  Rng rng(1);
  for (int dim = 1; dim <= 2; ++dim) {
    CHECK(check_symmetry(factorized(dim), 2000, rng) < 1e-12);
    CHECK(check_symmetry(momentum(dim), 2000, rng) < 1e-12);
  }
  CHECK(check_symmetry(factorized().with_mutation(Mutation::SquaredAcceptance), 2000, rng) < 1e-12);
}

TEST_CASE("symmetry-breaking mutations are detected") {
  Rng rng(2);
  CHECK(check_symmetry(factorized().with_mutation(Mutation::OddB), 2000, rng) > 1e-3);
  CHECK(check_symmetry(momentum().with_mutation(Mutation::OddB), 2000, rng) > 1e-3);
  CHECK(check_symmetry(factorized().with_mutation(Mutation::PreJumpOnly), 2000, rng) > 1e-3);
}

TEST_CASE("factorized q is the product form") {
  KernelSpec k = factorized();
  Vec x{0.4, 0, 0}, h1{0.3, 0, 0}, h2{-0.2, 0, 0};
  double expected = 0.25 * (k.b_value(x) + k.b_value(x + h2 - h1));
  CHECK(eval_q(k, x, h1, h2) == doctest::Approx(expected));
  CHECK(eval_q(k, x, Vec{1.5, 0, 0}, h2) == 0.0);
}

TEST_CASE("momentum q requires opposite jumps") {
  KernelSpec k = momentum();
  Vec x{0.4, 0, 0}, h{0.3, 0, 0};
  CHECK(eval_q(k, x, h, -h) == doctest::Approx(0.5 * k.b_value(x - h)));
  CHECK_THROWS_AS(eval_q(k, x, h, Vec{0.1, 0, 0}), DomainError);
}

TEST_CASE("total pair rate against a direct double integral") {
  KernelSpec k = factorized();
  for (double x0 : {0.0, 0.5, 1.7, 2.9}) {
    Vec x{x0, 0, 0};
    const int m = 800;
    double h = 2.0 / m, s = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) s += eval_q(k, x, Vec{-1 + (i + 0.5) * h, 0, 0}, Vec{-1 + (j + 0.5) * h, 0, 0}) * h * h;
    CHECK(total_pair_rate(k, x) == doctest::Approx(s).epsilon(2e-3).scale(1e-3));
  }
}

TEST_CASE("total pair rate for the momentum variant") {
  KernelSpec k = momentum();
  Vec x{0.3, 0, 0};
  double s = integrate_1d([&](double h) { return eval_q(k, x, Vec{h, 0, 0}, Vec{-h, 0, 0}); }, 1.0);
  CHECK(total_pair_rate(k, x) == doctest::Approx(s).epsilon(2e-3));
}

TEST_CASE("scaled kernels reduce to q at eps = 1") {
  KernelSpec k = factorized();
  ScaledKernel d = scaled_kernel_diffusive(k, 1.0), b = scaled_kernel_bd(k, 1.0);
  Vec x{0.4, 0, 0}, h1{0.3, 0, 0}, h2{-0.6, 0, 0};
  CHECK(d.density(x, h1, h2) == eval_q(k, x, h1, h2));
  CHECK(b.density(x, h1, h2) == eval_q(k, x, h1, h2));
}

TEST_CASE("diffusive scaling conserves the second moment of the jump law") {
  KernelSpec k = factorized();
  for (double eps : {0.5, 0.1}) {
    ScaledKernel s = scaled_kernel_diffusive(k, eps);
    CHECK(s.rate_prefactor() == doctest::Approx(1.0 / (eps * eps)));
    CHECK(s.jump_scale() == doctest::Approx(eps));
    // eps^-2 * int |h1|^2 a_eps(h1) a_eps(h2) dh1 dh2 is eps-independent
    double m2 = 0.0;
    const int m = 400;
    double step = 2.0 * eps / m;
    Vec x{0.0, 0, 0};
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        Vec h1{-eps + (i + 0.5) * step, 0, 0}, h2{-eps + (j + 0.5) * step, 0, 0};
        m2 += h1[0] * h1[0] * s.density(x, h1, h2) / (k.b_value(x) + k.b_value(x + h2 - h1)) * step * step;
      }
    CHECK(m2 == doctest::Approx(k.constants().mean_a * k.constants().c).epsilon(1e-3));
  }
}

TEST_CASE("birth-and-death scaling spreads jumps over 1/eps") {
  KernelSpec k = factorized();
  ScaledKernel s = scaled_kernel_bd(k, 0.25);
  CHECK(s.rate_prefactor() == 1.0);
  CHECK(s.jump_scale() == doctest::Approx(4.0));
  CHECK(s.jump_reach() == doctest::Approx(4.0));
}

TEST_CASE("profile validation") {
  CHECK_THROWS(KernelSpec(KernelVariant::Factorized, RadialProfile::uniform_ball(-1.0, 0.5),
                          RadialProfile::smooth_bump(1.0, 1.0), 1));
  CHECK_THROWS_AS(RadialProfile::uniform_ball(1.0, 0.5).gradient(Vec{0.2, 0, 0}, 1), NotDifferentiable);
}

TEST_CASE("sampling a follows a / <a>") {
  KernelSpec k(KernelVariant::Factorized, RadialProfile::smooth_bump(1.0, 1.0), RadialProfile::smooth_bump(1.0, 1.0), 1);
  Rng rng(9);
  const int n = 100000;
  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double h = k.sample_a(rng)[0];
    CHECK_MESSAGE(std::abs(h) < 1.0, "sample outside support");
    m2 += h * h / n;
  }
  double expected = k.constants().c / k.constants().mean_a;
  CHECK(m2 == doctest::Approx(expected).epsilon(0.02));
}
