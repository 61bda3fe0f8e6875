#include "contjump/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "contjump/cell_list.hpp"
#include "contjump/csv.hpp"

namespace contjump {

namespace {

void remove_swap(Configuration& gamma, std::size_t i) {
  if (i >= gamma.size()) throw std::out_of_range("event index out of range");
  gamma.points[i] = gamma.points.back();
  gamma.points.pop_back();
}

Vec uniform_point(const TorusGeometry& geom, Rng& rng) {
  Vec x{};
  for (int k = 0; k < geom.dim(); ++k) x[k] = geom.side() * uniform01(rng);
  return geom.wrap(x);
}

void check_horizon(double T) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw InvalidParameter("time horizon must be nonnegative");
}

void check_intensity(double z) {
  if (!(z >= 0.0) || !std::isfinite(z)) throw InvalidParameter("intensity must be nonnegative");
}

}  // namespace

void apply_event(Configuration& gamma, const Event& e, const TorusGeometry& geom) {
  switch (e.kind) {
    case EventKind::Jump:
      gamma.points.at(e.i) = geom.wrap(gamma.points.at(e.i) + e.u);
      gamma.points.at(e.j) = geom.wrap(gamma.points.at(e.j) + e.v);
      break;
    case EventKind::PairBirth:
      gamma.points.push_back(e.u);
      gamma.points.push_back(e.v);
      break;
    case EventKind::PairDeath:
      remove_swap(gamma, std::max(e.i, e.j));
      remove_swap(gamma, std::min(e.i, e.j));
      break;
    case EventKind::Birth: gamma.points.push_back(e.u); break;
    case EventKind::Death: remove_swap(gamma, e.i); break;
  }
}

Configuration state_at(const Trajectory& traj, const TorusGeometry& geom, double t) {
  Configuration g = traj.initial;
  for (const auto& e : traj.events) {
    if (e.t > t) break;
    apply_event(g, e, geom);
  }
  return g;
}

Trajectory simulate_jumps(const Configuration& gamma0, const TorusGeometry& geom, const KernelSpec& spec, double T,
                          Rng& rng) {
  check_horizon(T);
  geom.require_range(spec.b_reach() + 2.0 * spec.a_reach());
  const bool momentum = spec.variant() == KernelVariant::MomentumConserving;
  const double mean_a = spec.constants().mean_a;
  const double sup = momentum ? spec.momentum_sup() : spec.combine_sup();
  const double bound = momentum ? mean_a * sup : mean_a * mean_a * sup;
  const double cutoff = spec.interaction_range();
  const double cut2 = cutoff * cutoff;

  Trajectory traj{geom.dim(), T, gamma0, {}};
  Configuration g = gamma0;
  const std::size_t n = g.size();
  CellGrid cells(geom, cutoff);
  PairSet pairs(n);
  for (std::size_t i = 0; i < n; ++i) cells.insert(i, g.points[i]);
  auto link = [&](std::size_t i) {
    cells.for_neighbors(g.points[i], [&](std::size_t j) {
      if (j != i && geom.distance2(g.points[i], g.points[j]) <= cut2) pairs.insert(i, j);
    });
  };
  for (std::size_t i = 0; i < n; ++i) link(i);
  if (!(bound > 0.0)) return traj;

  double t = 0.0;
  for (;;) {
    if (pairs.size() == 0) break;
    t += exponential(rng, bound * static_cast<double>(pairs.size()));
    if (t > T) break;
    auto [i, j] = pairs.at(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(pairs.size())));
    Vec xbar = geom.min_image_diff(g.points[i], g.points[j]);
    Vec h1 = spec.sample_a(rng), h2;
    double rate;
    if (momentum) {
      h2 = -h1;
      rate = spec.momentum_part(spec.b_value(geom.reduce(xbar - h1)));
    } else {
      h2 = spec.sample_a(rng);
      rate = spec.combine(spec.b_value(xbar), spec.b_value(geom.reduce(xbar + h2 - h1)));
    }
    double accept = rate / sup;
    if (accept > 1.0 + 1e-12) throw std::logic_error("thinning acceptance probability exceeds one");
    if (uniform01(rng) >= accept) continue;

    Event e{t, EventKind::Jump, i, j, h1, h2};
    for (std::size_t p : {i, j}) {
      pairs.erase_all(p);
      cells.remove(p, g.points[p]);
    }
    g.points[i] = geom.wrap(g.points[i] + h1);
    g.points[j] = geom.wrap(g.points[j] + h2);
    cells.insert(i, g.points[i]);
    cells.insert(j, g.points[j]);
    link(i);
    link(j);
    traj.events.push_back(e);
  }
  return traj;
}

Trajectory simulate_bd(const Configuration& gamma0, const TorusGeometry& geom, const KernelSpec& spec, double z,
                       double T, Rng& rng) {
  check_horizon(T);
  check_intensity(z);
  const auto& k = spec.constants();
  const double a2 = k.mean_a * k.mean_a;
  const double vol = geom.volume();
  const double bsup = spec.b_sup();
  const double single_birth = a2 * z * z * k.mean_b * vol;
  const double pair_birth = 0.5 * a2 * z * z * vol * k.mean_b;
  const double death_each = a2 * z * k.mean_b;

  Trajectory traj{geom.dim(), T, gamma0, {}};
  Configuration g = gamma0;
  double t = 0.0;
  for (;;) {
    double n = static_cast<double>(g.size());
    double pair_death = a2 * bsup * 0.5 * n * (n - 1.0);
    double single_death = death_each * n;
    double total = pair_death + single_death + single_birth + pair_birth;
    if (!(total > 0.0)) break;
    t += exponential(rng, total);
    if (t > T) break;
    double r = uniform01(rng) * total;
    Event e;
    e.t = t;
    if (r < pair_death) {
      std::size_t m = g.size();
      std::size_t i = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(m));
      std::size_t j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(m - 1));
      if (j >= i) ++j;
      double accept = spec.b_value(geom.min_image_diff(g.points[i], g.points[j])) / bsup;
      if (accept > 1.0 + 1e-12) throw std::logic_error("thinning acceptance probability exceeds one");
      if (uniform01(rng) >= accept) continue;
      e.kind = EventKind::PairDeath;
      e.i = std::min(i, j);
      e.j = std::max(i, j);
    } else if (r < pair_death + single_death) {
      e.kind = EventKind::Death;
      e.i = std::min(g.size() - 1, static_cast<std::size_t>(uniform01(rng) * n));
    } else if (r < pair_death + single_death + single_birth) {
      e.kind = EventKind::Birth;
      e.u = uniform_point(geom, rng);
    } else {
      e.kind = EventKind::PairBirth;
      e.u = uniform_point(geom, rng);
      e.v = geom.wrap(e.u + spec.b().sample(rng, geom.dim()));
    }
    apply_event(g, e, geom);
    traj.events.push_back(e);
  }
  return traj;
}

Trajectory simulate_free_bd(const Configuration& gamma0, const TorusGeometry& geom, const KernelSpec& spec, double z,
                            double T, Rng& rng) {
  check_horizon(T);
  check_intensity(z);
  const double rate = spec.constants().mean_a * spec.constants().mean_b;
  const double birth = rate * z * geom.volume();
  Trajectory traj{geom.dim(), T, gamma0, {}};
  Configuration g = gamma0;
  double t = 0.0;
  for (;;) {
    double death = rate * static_cast<double>(g.size());
    double total = birth + death;
    if (!(total > 0.0)) break;
    t += exponential(rng, total);
    if (t > T) break;
    Event e;
    e.t = t;
    if (uniform01(rng) * total < birth) {
      e.kind = EventKind::Birth;
      e.u = uniform_point(geom, rng);
    } else {
      e.kind = EventKind::Death;
      e.i = std::min(g.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(g.size())));
    }
    apply_event(g, e, geom);
    traj.events.push_back(e);
  }
  return traj;
}

double diffusion_step_limit(const KernelSpec& spec) {
  const auto& k = spec.constants();
  double c = spec.variant() == KernelVariant::Factorized ? k.mean_a * k.c : k.c;
  if (!(c > 0.0) || !(spec.b_sup() > 0.0)) return std::numeric_limits<double>::infinity();
  return 1e-3 * spec.b_reach() * spec.b_reach() / (c * spec.b_sup());
}

DiffusionPath simulate_diffusion(const Configuration& gamma0, const TorusGeometry& geom, const KernelSpec& spec,
                                 double T, double dt, Rng& rng, std::size_t record_every) {
  check_horizon(T);
  if (!(dt > 0.0)) throw InvalidParameter("time step must be positive");
  if (!spec.b().differentiable()) throw NotDifferentiable("diffusion needs a differentiable b profile");
  const auto& k = spec.constants();
  const bool momentum = spec.variant() == KernelVariant::MomentumConserving;
  const double c = momentum ? k.c : k.mean_a * k.c;
  const int d = geom.dim();
  const double rb2 = spec.b_reach() * spec.b_reach();

  DiffusionPath path;
  if (dt > diffusion_step_limit(spec))
    path.warnings.push_back("time step exceeds the stability heuristic 1e-3 r_b^2 / (c |b|_inf)");
  Configuration g = gamma0;
  path.times.push_back(0.0);
  path.states.push_back(g);
  std::size_t steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-12));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = g.size();
  std::vector<Vec> incr(n);
  for (std::size_t s = 0; s < steps; ++s) {
    double h = std::min(dt, T - static_cast<double>(s) * dt);
    std::fill(incr.begin(), incr.end(), Vec{});
    if (!momentum) {
      for (std::size_t i = 0; i < n; ++i) {
        double A = 0.0;
        Vec B{};
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          Vec u = geom.min_image_diff(g.points[j], g.points[i]);
          if (norm2(u) > rb2) continue;
          A += spec.b_value(u);
          B = B + spec.b_gradient(u);
        }
        double sigma = std::sqrt(2.0 * c * A * h);
        incr[i] = (c * h) * B;
        for (int q = 0; q < d; ++q) incr[i][q] += sigma * normal(rng);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
          Vec u = geom.min_image_diff(g.points[j], g.points[i]);
          if (norm2(u) > rb2) continue;
          double bv = spec.b_value(u);
          Vec gb = spec.b_gradient(u);
          incr[i] = incr[i] + (c * h) * gb;
          incr[j] = incr[j] - (c * h) * gb;
          double sigma = std::sqrt(c * bv * h);
          for (int q = 0; q < d; ++q) {
            double w = sigma * normal(rng);
            incr[i][q] += w;
            incr[j][q] -= w;
          }
        }
    }
    for (std::size_t i = 0; i < n; ++i) g.points[i] = geom.wrap(g.points[i] + incr[i]);
    bool last = s + 1 == steps;
    if (last || (record_every > 0 && (s + 1) % record_every == 0)) {
      path.times.push_back(last ? T : static_cast<double>(s + 1) * dt);
      path.states.push_back(g);
    }
  }
  return path;
}

std::vector<double> pair_correlation(const Configuration& gamma, const TorusGeometry& geom, std::size_t bins,
                                     double r_max) {
  if (bins == 0 || !(r_max > 0.0) || r_max > 0.5 * geom.side())
    throw InvalidParameter("pair correlation needs bins > 0 and 0 < r_max <= L/2");
  std::vector<double> counts(bins, 0.0);
  double width = r_max / static_cast<double>(bins);
  for (std::size_t i = 0; i < gamma.size(); ++i)
    for (std::size_t j = i + 1; j < gamma.size(); ++j) {
      double r = geom.distance(gamma.points[i], gamma.points[j]);
      if (r >= r_max) continue;
      counts[std::min(bins - 1, static_cast<std::size_t>(r / width))] += 1.0;
    }
  int d = geom.dim();
  double vol = geom.volume();
  for (std::size_t b = 0; b < bins; ++b) {
    double lo = static_cast<double>(b) * width, hi = lo + width;
    double shell = unit_ball_volume(d) * (std::pow(hi, d) - std::pow(lo, d));
    counts[b] = 2.0 * counts[b] / (vol * shell);
  }
  return counts;
}

std::vector<double> measure(const Configuration& gamma, const TorusGeometry& geom, const Observation& obs) {
  if (const auto* c = std::get_if<CountIn>(&obs)) {
    double n = 0.0;
    for (const auto& x : gamma.points)
      if (c->window.contains(x, geom.dim())) n += 1.0;
    return {n};
  }
  if (const auto* p = std::get_if<PairCorrelation>(&obs)) return pair_correlation(gamma, geom, p->bins, p->r_max);
  return {evaluate(std::get<Observable>(obs), geom, gamma)};
}

std::vector<std::vector<double>> observe(const Trajectory& traj, const TorusGeometry& geom, const Observation& obs,
                                         const std::vector<double>& sample_times) {
  if (!std::is_sorted(sample_times.begin(), sample_times.end()))
    throw InvalidParameter("sample times must be ascending");
  std::vector<std::vector<double>> out;
  out.reserve(sample_times.size());
  Configuration g = traj.initial;
  std::size_t next = 0;
  for (double t : sample_times) {
    while (next < traj.events.size() && traj.events[next].t <= t) apply_event(g, traj.events[next++], geom);
    out.push_back(measure(g, geom, obs));
  }
  return out;
}

std::string event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Jump: return "jump";
    case EventKind::PairBirth: return "pair_birth";
    case EventKind::PairDeath: return "pair_death";
    case EventKind::Birth: return "birth";
    case EventKind::Death: return "death";
  }
  return "?";
}

namespace {

EventKind parse_kind(const std::string& s) {
  for (auto k : {EventKind::Jump, EventKind::PairBirth, EventKind::PairDeath, EventKind::Birth, EventKind::Death})
    if (event_kind_name(k) == s) return k;
  throw InvalidParameter("unknown event kind '" + s + "'");
}

void put_vec(std::ostream& os, const Vec& v, int d) {
  for (int k = 0; k < d; ++k) os << ',' << format_double(v[k]);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

Vec take_vec(const std::vector<std::string>& f, std::size_t& pos, int d) {
  Vec v{};
  for (int k = 0; k < d; ++k) v[k] = std::stod(f.at(pos++));
  return v;
}

}  // namespace

void write_trajectory(std::ostream& os, const Trajectory& traj) {
  int d = traj.dim;
  os << "dim," << d << '\n';
  os << "horizon," << format_double(traj.horizon) << '\n';
  os << "initial," << traj.initial.size() << '\n';
  for (const auto& x : traj.initial.points) {
    os << "point";
    put_vec(os, x, d);
    os << '\n';
  }
  os << "t,event_kind,payload\n";
  for (const auto& e : traj.events) {
    os << format_double(e.t) << ',' << event_kind_name(e.kind);
    switch (e.kind) {
      case EventKind::Jump:
        os << ',' << e.i << ',' << e.j;
        put_vec(os, e.u, d);
        put_vec(os, e.v, d);
        break;
      case EventKind::PairBirth:
        put_vec(os, e.u, d);
        put_vec(os, e.v, d);
        break;
      case EventKind::PairDeath: os << ',' << e.i << ',' << e.j; break;
      case EventKind::Birth: put_vec(os, e.u, d); break;
      case EventKind::Death: os << ',' << e.i; break;
    }
    os << '\n';
  }
}

Trajectory read_trajectory(std::istream& is) {
  Trajectory traj;
  std::string line;
  std::size_t n_initial = 0;
  bool in_events = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto f = split(line);
    if (!in_events) {
      if (f[0] == "dim") traj.dim = std::stoi(f.at(1));
      else if (f[0] == "horizon") traj.horizon = std::stod(f.at(1));
      else if (f[0] == "initial") n_initial = std::stoul(f.at(1));
      else if (f[0] == "point") {
        std::size_t pos = 1;
        traj.initial.points.push_back(take_vec(f, pos, traj.dim));
      } else if (f[0] == "t") in_events = true;
      else throw InvalidParameter("unexpected trajectory record '" + f[0] + "'");
      continue;
    }
    Event e;
    e.t = std::stod(f.at(0));
    e.kind = parse_kind(f.at(1));
    std::size_t pos = 2;
    switch (e.kind) {
      case EventKind::Jump:
        e.i = std::stoul(f.at(pos++));
        e.j = std::stoul(f.at(pos++));
        e.u = take_vec(f, pos, traj.dim);
        e.v = take_vec(f, pos, traj.dim);
        break;
      case EventKind::PairBirth:
        e.u = take_vec(f, pos, traj.dim);
        e.v = take_vec(f, pos, traj.dim);
        break;
      case EventKind::PairDeath:
        e.i = std::stoul(f.at(pos++));
        e.j = std::stoul(f.at(pos++));
        break;
      case EventKind::Birth: e.u = take_vec(f, pos, traj.dim); break;
      case EventKind::Death: e.i = std::stoul(f.at(pos++)); break;
    }
    traj.events.push_back(e);
  }
  if (traj.initial.size() != n_initial) throw InvalidParameter("trajectory initial point count mismatch");
  return traj;
}

}  // namespace contjump
