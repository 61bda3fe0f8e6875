#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "contjump/cell_list.hpp"
#include "contjump/errors.hpp"
#include "contjump/simulation.hpp"
#include "contjump/stats.hpp"

using namespace contjump;

namespace {

const TorusGeometry kGeom(1, 20.0);

KernelSpec factorized() {
  return KernelSpec(KernelVariant::Factorized, RadialProfile::uniform_ball(1.0, 0.5), RadialProfile::smooth_bump(1.0, 1.0),
                    1);
}

KernelSpec momentum() {
  return KernelSpec(KernelVariant::MomentumConserving, RadialProfile::uniform_ball(1.0, 0.5),
                    RadialProfile::smooth_bump(1.0, 1.0), 1);
}

}  // namespace

TEST_CASE("cell grid neighbours cover every point within the cutoff") {
  for (int dim = 1; dim <= 3; ++dim) {
    TorusGeometry g(dim, 9.0);
    Rng rng(dim);
    Configuration c = sample_poisson(g, 2.0, rng);
    CellGrid grid(g, 1.3);
    for (std::size_t i = 0; i < c.size(); ++i) grid.insert(i, c.points[i]);
    for (std::size_t i = 0; i < c.size(); ++i) {
      std::set<std::size_t> seen;
      grid.for_neighbors(c.points[i], [&](std::size_t id) { CHECK(seen.insert(id).second); });
      for (std::size_t j = 0; j < c.size(); ++j)
        if (g.distance(c.points[i], c.points[j]) <= 1.3) CHECK(seen.count(j) == 1);
    }
  }
}

TEST_CASE("cell grid removal") {
  CellGrid grid(kGeom, 2.0);
  grid.insert(0, Vec{1.0, 0, 0});
  grid.insert(1, Vec{1.5, 0, 0});
  grid.remove(0, Vec{1.0, 0, 0});
  std::vector<std::size_t> ids;
  grid.for_neighbors(Vec{1.2, 0, 0}, [&](std::size_t id) { ids.push_back(id); });
  CHECK(ids == std::vector<std::size_t>{1});
}

TEST_CASE("pair set operations") {
  PairSet s(5);
  CHECK(s.insert(0, 1));
  CHECK(s.insert(3, 1));
  CHECK_FALSE(s.insert(1, 0));
  CHECK(s.contains(1, 3));
  CHECK(s.size() == 2);
  s.erase_all(1);
  CHECK(s.size() == 0);
  CHECK(s.insert(2, 4));
  CHECK(s.erase(4, 2));
  CHECK_FALSE(s.contains(2, 4));
}

TEST_CASE("jump simulation conserves particle number") {
  Rng rng(1);
  Configuration g0 = sample_poisson(kGeom, 1.0, rng);
  for (const auto& k : {factorized(), momentum()}) {
    Trajectory t = simulate_jumps(g0, kGeom, k, 5.0, rng);
    CHECK(!t.events.empty());
    double last = 0.0;
    for (const auto& e : t.events) {
      CHECK(e.kind == EventKind::Jump);
      CHECK(e.t >= last);
      CHECK(e.t <= 5.0);
      last = e.t;
    }
    Configuration end = state_at(t, kGeom, 5.0);
    CHECK(end.size() == g0.size());
    for (const auto& x : end.points) {
      CHECK(x[0] >= 0.0);
      CHECK(x[0] < kGeom.side());
    }
  }
}

TEST_CASE("momentum-conserving jumps preserve the centre of mass") {
  Rng rng(2);
  Configuration g0 = sample_poisson(kGeom, 1.0, rng);
  Trajectory t = simulate_jumps(g0, kGeom, momentum(), 3.0, rng);
  for (const auto& e : t.events) CHECK(e.u[0] + e.v[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("zero horizon produces no events") {
  Rng rng(3);
  Configuration g0 = sample_poisson(kGeom, 1.0, rng);
  CHECK(simulate_jumps(g0, kGeom, factorized(), 0.0, rng).events.empty());
  CHECK(simulate_bd(g0, kGeom, factorized(), 1.0, 0.0, rng).events.empty());
}

TEST_CASE("torus too small for the kernel is rejected") {
  TorusGeometry small(1, 5.0);
  Rng rng(4);
  Configuration g0 = sample_poisson(small, 1.0, rng);
  CHECK_THROWS_AS(simulate_jumps(g0, small, factorized(), 1.0, rng), ConfigurationError);
}

TEST_CASE("stationary jump count matches T z^2 L <a>^2 <b>") {
  KernelSpec k = factorized();
  const double T = 2.0;
  RunningStats n;
  for (std::uint64_t r = 0; r < 400; ++r) {
    Rng rng = make_stream(5, r);
    Configuration g0 = sample_poisson(kGeom, 1.0, rng);
    n.add(static_cast<double>(simulate_jumps(g0, kGeom, k, T, rng).events.size()));
  }
  const auto& c = k.constants();
  double expected = T * kGeom.volume() * c.mean_a * c.mean_a * c.mean_b;
  CHECK(std::abs(n.mean() - expected) < 4.0 * n.stderr_());
}

TEST_CASE("free birth-and-death relaxes to the Poisson mean") {
  KernelSpec k = factorized();
  const auto& c = k.constants();
  const double T = 0.8, rate = c.mean_a * c.mean_b;
  RunningStats n;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    Rng rng = make_stream(6, r);
    Trajectory t = simulate_free_bd(Configuration{}, kGeom, k, 1.0, T, rng);
    n.add(static_cast<double>(state_at(t, kGeom, T).size()));
  }
  double expected = kGeom.volume() * (1.0 - std::exp(-rate * T));
  CHECK(std::abs(n.mean() - expected) < 4.0 * n.stderr_());
}

TEST_CASE("pair birth-and-death keeps the Poisson mean count") {
  KernelSpec k = factorized();
  RunningStats d;
  for (std::uint64_t r = 0; r < 1000; ++r) {
    Rng rng = make_stream(7, r);
    Configuration g0 = sample_poisson(kGeom, 1.0, rng);
    Trajectory t = simulate_bd(g0, kGeom, k, 1.0, 2.0, rng);
    d.add(static_cast<double>(state_at(t, kGeom, 2.0).size()) - static_cast<double>(g0.size()));
  }
  CHECK(std::abs(d.mean()) < 4.0 * d.stderr_());
}

TEST_CASE("trajectory serialization round-trips exactly") {
  Rng rng(8);
  Configuration g0 = sample_poisson(kGeom, 1.0, rng);
  Trajectory t = simulate_bd(g0, kGeom, factorized(), 1.0, 1.0, rng);
  std::stringstream ss;
  write_trajectory(ss, t);
  Trajectory back = read_trajectory(ss);
  CHECK(back.dim == t.dim);
  CHECK(back.horizon == t.horizon);
  REQUIRE(back.events.size() == t.events.size());
  REQUIRE(back.initial.size() == t.initial.size());
  for (std::size_t i = 0; i < t.initial.size(); ++i) CHECK(back.initial.points[i] == t.initial.points[i]);
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    CHECK(back.events[i].t == t.events[i].t);
    CHECK(back.events[i].kind == t.events[i].kind);
  }
  Configuration a = state_at(t, kGeom, 1.0), b = state_at(back, kGeom, 1.0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.points[i] == b.points[i]);
}

TEST_CASE("malformed trajectory input is rejected") {
  std::stringstream ss("dim,1\nhorizon,1\ninitial,0\nt,event_kind,payload\n0.5,teleport,1\n");
  CHECK_THROWS_AS(read_trajectory(ss), InvalidParameter);
}

TEST_CASE("pair death removes both points") {
  Configuration g{{Vec{1, 0, 0}, Vec{2, 0, 0}, Vec{3, 0, 0}, Vec{4, 0, 0}}};
  Event e;
  e.kind = EventKind::PairDeath;
  e.i = 0;
  e.j = 2;
  apply_event(g, e, kGeom);
  REQUIRE(g.size() == 2);
  std::vector<double> xs{g.points[0][0], g.points[1][0]};
  std::sort(xs.begin(), xs.end());
  CHECK(xs == std::vector<double>{2.0, 4.0});
}

TEST_CASE("pair correlation of Poisson samples is flat") {
  const std::size_t bins = 5;
  std::vector<RunningStats> s(bins);
  for (std::uint64_t r = 0; r < 1000; ++r) {
    Rng rng = make_stream(9, r);
    auto pc = pair_correlation(sample_poisson(kGeom, 1.0, rng), kGeom, bins, 2.0);
    for (std::size_t b = 0; b < bins; ++b) s[b].add(pc[b]);
  }
  for (const auto& st : s) CHECK(std::abs(st.mean() - 1.0) < 4.0 * st.stderr_());
}

TEST_CASE("counting observation") {
  Configuration g{{Vec{1, 0, 0}, Vec{5, 0, 0}, Vec{6, 0, 0}}};
  Window w;
  w.lo[0] = 4.0;
  w.hi[0] = 7.0;
  CHECK(measure(g, kGeom, CountIn{w})[0] == 2.0);
}

TEST_CASE("diffusion step variance matches 2 c_eff b(x) h") {
  KernelSpec k = factorized();
  const double h = 1e-4, sep = 0.4;
  Configuration g0{{Vec{10.0, 0, 0}, Vec{10.0 + sep, 0, 0}}};
  RunningStats v;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    Rng rng = make_stream(10, r);
    auto path = simulate_diffusion(g0, kGeom, k, h, h, rng);
    double dx = kGeom.min_image_diff(g0.points[0], path.states.back().points[0])[0];
    v.add(dx * dx);
  }
  double expected = 2.0 * k.constants().mean_a * k.constants().c * k.b_value(Vec{sep, 0, 0}) * h;
  CHECK(v.mean() == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("diffusion warns about large steps") {
  Rng rng(11);
  Configuration g0 = sample_poisson(kGeom, 1.0, rng);
  KernelSpec k = factorized();
  double limit = diffusion_step_limit(k);
  auto path = simulate_diffusion(g0, kGeom, k, 20.0 * limit, 10.0 * limit, rng);
  CHECK(!path.warnings.empty());
  CHECK(path.states.back().size() == g0.size());
  auto quiet = simulate_diffusion(g0, kGeom, k, limit, 0.5 * limit, rng);
  CHECK(quiet.warnings.empty());
}

TEST_CASE("diffusion requires a differentiable b") {
  KernelSpec k(KernelVariant::Factorized, RadialProfile::uniform_ball(1.0, 0.5), RadialProfile::uniform_ball(1.0, 1.0), 1);
  Rng rng(12);
  CHECK_THROWS_AS(simulate_diffusion(Configuration{}, kGeom, k, 1.0, 0.1, rng), NotDifferentiable);
}

TEST_CASE("observe replays events at the sample times") {
  Rng rng(13);
  Configuration g0 = sample_poisson(kGeom, 1.0, rng);
  Trajectory t = simulate_bd(g0, kGeom, factorized(), 1.0, 1.0, rng);
  Window all;
  all.hi[0] = kGeom.side();
  auto obs = observe(t, kGeom, CountIn{all}, {0.0, 0.5, 1.0});
  CHECK(obs[0][0] == static_cast<double>(g0.size()));
  CHECK(obs[1][0] == static_cast<double>(state_at(t, kGeom, 0.5).size()));
  CHECK(obs[2][0] == static_cast<double>(state_at(t, kGeom, 1.0).size()));
  CHECK_THROWS_AS(observe(t, kGeom, CountIn{all}, {0.5, 0.1}), InvalidParameter);
}
