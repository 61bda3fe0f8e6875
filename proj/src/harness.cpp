#include "contjump/harness.hpp"

#include <algorithm>
#include <cmath>

namespace contjump {

namespace {

GapRow gap_row(double eps, const RunningStats& sq) {
  double m = std::max(sq.mean(), 0.0);
  double g = std::sqrt(m);
  double se = g > 0.0 ? sq.stderr_() / (2.0 * g) : 0.0;
  return {eps, g, se};
}

Configuration initial_poisson(const TorusGeometry& geom, double z, Rng& rng) {
  return z > 0.0 ? sample_poisson(geom, z, rng) : Configuration{};
}

Trajectory run_simulator(SimulatorKind kind, const Configuration& g0, const TorusGeometry& geom,
                         const KernelSpec& spec, double z, double T, Rng& rng) {
  switch (kind) {
    case SimulatorKind::Jumps: return simulate_jumps(g0, geom, spec, T, rng);
    case SimulatorKind::BirthDeath: return simulate_bd(g0, geom, spec, z, T, rng);
    case SimulatorKind::FreeBirthDeath: return simulate_free_bd(g0, geom, spec, z, T, rng);
  }
  return {};
}

}  // namespace

bool decreasing_within_error(const std::vector<GapRow>& rows, double ratio) {
  if (rows.size() < 2) return false;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    double tol = 3.0 * std::hypot(rows[i].gap_se, rows[i + 1].gap_se);
    if (rows[i + 1].gap > rows[i].gap + tol) return false;
  }
  return rows.back().gap < ratio * rows.front().gap || rows.front().gap == 0.0;
}

DiffusiveConvergence diffusive_convergence(const Observable& F, const TorusGeometry& geom, const KernelSpec& spec,
                                           double z, const std::vector<double>& eps_list, const McSettings& mc) {
  if (eps_list.empty()) throw InvalidParameter("eps list must not be empty");
  for (std::size_t i = 0; i + 1 < eps_list.size(); ++i)
    if (!(eps_list[i + 1] < eps_list[i])) throw InvalidParameter("eps list must be decreasing");
  const std::size_t k = eps_list.size();
  auto stats = mc_columns(mc.n_samples, k, mc.seed, 0xd1ff, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration gamma = sample_poisson(geom, z, rng);
    double l0 = apply_L0_diffusive(F, geom, gamma, spec);
    for (std::size_t i = 0; i < k; ++i) {
      double diff = apply_L_eps_diffusive(F, geom, gamma, spec, eps_list[i]) - l0;
      row[i] = diff * diff;
    }
  });
  DiffusiveConvergence out;
  for (std::size_t i = 0; i < k; ++i) out.rows.push_back(gap_row(eps_list[i], stats[i]));
  out.monotone = decreasing_within_error(out.rows, 1.0);
  out.factor_four = out.rows.back().gap < 0.25 * out.rows.front().gap || out.rows.front().gap == 0.0;
  out.pass = out.monotone && out.factor_four;
  return out;
}

BdConvergence bd_convergence(const TestProfile& phi, const TorusGeometry& geom, const KernelSpec& spec, double z,
                             const std::vector<double>& eps_list, const McSettings& mc) {
  if (eps_list.empty()) throw InvalidParameter("eps list must not be empty");
  for (double e : eps_list)
    if (spec.a_reach() / e > 0.5 * geom.side())
      throw ConfigurationError("jump spread r_a / eps exceeds L/2; outside the localized regime");
  const std::size_t k = eps_list.size();
  Observable F = ExponentialFunction{phi};
  auto stats = mc_columns(mc.n_samples, 3 * k + 1, mc.seed, 0xbd, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration gamma = sample_poisson(geom, z, rng);
    BdPieces lim = bd_limit_pieces(F, geom, gamma, spec, z);
    double first = 0.0;
    bool same = true;
    for (std::size_t i = 0; i < k; ++i) {
      BdPieces p = bd_pieces(F, geom, gamma, spec, eps_list[i]);
      if (i == 0) first = p.p1;
      else same = same && p.p1 == first;
      row[3 * i] = (p.p2 - lim.p2) * (p.p2 - lim.p2);
      row[3 * i + 1] = (p.p3 - lim.p3) * (p.p3 - lim.p3);
      row[3 * i + 2] = (p.p4 - lim.p4) * (p.p4 - lim.p4);
    }
    row[3 * k] = same ? 0.0 : 1.0;
  });
  BdConvergence out;
  for (std::size_t i = 0; i < k; ++i) {
    out.piece2.push_back(gap_row(eps_list[i], stats[3 * i]));
    out.piece3.push_back(gap_row(eps_list[i], stats[3 * i + 1]));
    out.piece4.push_back(gap_row(eps_list[i], stats[3 * i + 2]));
  }
  out.piece1_invariant = stats[3 * k].mean() == 0.0;
  out.pass2 = decreasing_within_error(out.piece2);
  out.pass3 = decreasing_within_error(out.piece3);
  out.pass4 = decreasing_within_error(out.piece4);
  out.pass = out.piece1_invariant && out.pass2 && out.pass3 && out.pass4;
  return out;
}

InvarianceReport invariance_report(const TorusGeometry& geom, const KernelSpec& spec, double z,
                                   const InvarianceSettings& settings, const McSettings& mc) {
  const auto& k = spec.constants();
  double bound = 2.0 * k.mean_a * k.mean_a * spec.b_sup();
  double T = settings.horizon >= 0.0 ? settings.horizon : (bound > 0.0 ? 5.0 / bound : 0.0);
  double r_max = settings.r_max > 0.0 ? settings.r_max : 2.0 * spec.b_reach();
  const std::size_t bins = settings.bins;
  const std::size_t cols = 1 + bins;
  PairCorrelation pc{bins, r_max};
  auto stats = mc_columns(mc.n_samples, 3 * cols, mc.seed, 0x1a7, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration g0 = initial_poisson(geom, z, rng);
    Configuration gT = T > 0.0 ? state_at(run_simulator(settings.sim, g0, geom, spec, z, T, rng), geom, T) : g0;
    auto pc0 = pair_correlation(g0, geom, pc.bins, pc.r_max);
    auto pcT = pair_correlation(gT, geom, pc.bins, pc.r_max);
    double vol = geom.volume();
    std::vector<double> s0{static_cast<double>(g0.size()) / vol}, sT{static_cast<double>(gT.size()) / vol};
    s0.insert(s0.end(), pc0.begin(), pc0.end());
    sT.insert(sT.end(), pcT.begin(), pcT.end());
    for (std::size_t c = 0; c < cols; ++c) {
      row[3 * c] = s0[c];
      row[3 * c + 1] = sT[c];
      row[3 * c + 2] = sT[c] - s0[c];
    }
  });
  InvarianceReport out;
  out.horizon = T;
  out.pass = true;
  for (std::size_t c = 0; c < cols; ++c) {
    StatisticRow r;
    r.name = c == 0 ? "intensity" : "pair_correlation_bin_" + std::to_string(c - 1);
    r.mean_start = stats[3 * c].mean();
    r.mean_end = stats[3 * c + 1].mean();
    r.diff = stats[3 * c + 2].mean();
    r.diff_se = stats[3 * c + 2].stderr_();
    r.pass = std::abs(r.diff) <= 3.0 * r.diff_se;
    out.pass = out.pass && r.pass;
    out.rows.push_back(r);
  }
  return out;
}

namespace {

/** Weighted least-squares decay rate of log C over lags [0, n_lags); weights (C / se)^2. */
double fit_decay(const std::vector<double>& lags, const std::vector<double>& cov, const std::vector<double>& se,
                 std::size_t n_lags) {
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < n_lags; ++i) {
    if (!(cov[i] > 0.0) || !(se[i] > 0.0)) break;
    x.push_back(lags[i]);
    y.push_back(std::log(cov[i]));
    w.push_back(cov[i] * cov[i] / (se[i] * se[i]));
  }
  if (x.size() < 2) return std::nan("");
  return -fit_slope(x, y, w);
}

}  // namespace

SpectralGapReport spectral_gap_report(const TorusGeometry& geom, const KernelSpec& spec, double z,
                                      const TestProfile& phi, const SpectralGapSettings& settings,
                                      const McSettings& mc) {
  const auto& k = spec.constants();
  SpectralGapReport out;
  out.lambda0 = k.mean_a * k.mean_a * z * k.mean_b;
  out.expected = settings.sim == SimulatorKind::FreeBirthDeath ? k.mean_a * k.mean_b : out.lambda0;
  const std::size_t steps = static_cast<std::size_t>(std::floor(settings.horizon / settings.sample_dt + 1e-9));
  const std::size_t max_lag = steps / 2;
  std::vector<double> times(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) times[i] = static_cast<double>(i) * settings.sample_dt;

  const std::size_t R = std::max<std::size_t>(mc.n_samples, 2);
  Observable F = CylinderFunction{{phi}, PolynomialOuter{0.0, {1.0}, {}, {}}};
  auto series = parallel_map<std::vector<double>>(R, mc.threads, [&](std::size_t r) {
    Rng rng = make_stream(mc.seed, r, 0x5ec);
    Configuration g0 = initial_poisson(geom, z, rng);
    Trajectory traj = run_simulator(settings.sim, g0, geom, spec, z, settings.horizon, rng);
    auto obs = observe(traj, geom, F, times);
    std::vector<double> xs(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) xs[i] = obs[i][0];
    return xs;
  });

  double mean = 0.0;
  for (const auto& s : series)
    for (double v : s) mean += v;
  mean /= static_cast<double>(R * (steps + 1));

  // per-replica autocovariance at each lag
  auto replica_cov = [&](const std::vector<double>& s, std::size_t lag) {
    double acc = 0.0;
    std::size_t cnt = steps + 1 - lag;
    for (std::size_t i = 0; i < cnt; ++i) acc += (s[i] - mean) * (s[i + lag] - mean);
    return acc / static_cast<double>(cnt);
  };
  out.lags.resize(max_lag + 1);
  out.autocov.resize(max_lag + 1);
  out.autocov_se.resize(max_lag + 1);
  std::vector<std::vector<double>> per(R, std::vector<double>(max_lag + 1));
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t lag = 0; lag <= max_lag; ++lag) per[r][lag] = replica_cov(series[r], lag);
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    RunningStats st;
    for (std::size_t r = 0; r < R; ++r) st.add(per[r][lag]);
    out.lags[lag] = times[lag];
    out.autocov[lag] = st.mean();
    out.autocov_se[lag] = st.stderr_();
  }

  std::size_t window = 0;
  while (window <= max_lag && out.autocov[window] > 5.0 * out.autocov_se[window]) ++window;
  out.fit_lags = window;
  if (window < 3) {
    out.status = "insufficient-signal";
    out.pass = false;
    return out;
  }
  out.status = "ok";
  out.rate = fit_decay(out.lags, out.autocov, out.autocov_se, window);

  // batch means over replicas for the confidence interval
  std::size_t nb = std::min<std::size_t>(settings.batches, R);
  RunningStats batch_rates;
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<double> cov(window, 0.0);
    std::size_t cnt = 0;
    for (std::size_t r = b; r < R; r += nb, ++cnt)
      for (std::size_t lag = 0; lag < window; ++lag) cov[lag] += per[r][lag];
    for (auto& c : cov) c /= static_cast<double>(cnt);
    double rate = fit_decay(out.lags, cov, out.autocov_se, window);
    if (std::isfinite(rate)) batch_rates.add(rate);
  }
  double half = 1.96 * batch_rates.stderr_();
  out.ci_low = out.rate - half;
  out.ci_high = out.rate + half;
  if (settings.sim == SimulatorKind::FreeBirthDeath)
    out.pass = std::abs(out.rate - out.expected) <= 0.1 * out.expected;
  else
    out.pass = out.rate >= 0.85 * out.lambda0;
  return out;
}

ReversibilityResult reversibility_report(const Observable& F, const Observable& G, const TorusGeometry& geom,
                                         const KernelSpec& spec, double z, const McSettings& mc) {
  return reversibility_check(F, G, geom, spec, z, mc);
}

CylinderFunction random_cylinder(const TorusGeometry& geom, const Vec& center, Rng& rng, int family) {
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  CylinderFunction f;
  const std::size_t n = 2;
  for (std::size_t j = 0; j < n; ++j) {
    TestProfile p;
    Vec c = center;
    for (int q = 0; q < geom.dim(); ++q) c[q] += uni(-1.0, 1.0);
    p.center = geom.wrap(c);
    p.radius = uni(0.8, 1.5);
    p.amplitude = uni(0.5, 1.5);
    f.profiles.push_back(p);
  }
  if (family < 0) family = static_cast<int>(uniform01(rng) * 3.0);
  switch (family) {
    case 0: {
      PolynomialOuter g;
      g.constant = uni(-1, 1);
      for (std::size_t j = 0; j < n; ++j) g.linear.push_back(uni(-1, 1));
      for (std::size_t j = 0; j < n * n; ++j) g.quadratic.push_back(uni(-0.5, 0.5));
      for (std::size_t j = 0; j < n; ++j) g.cubic.push_back(uni(-0.2, 0.2));
      f.outer = g;
      break;
    }
    case 1: {
      TanhProductOuter g;
      g.scale = uni(0.5, 2.0);
      for (std::size_t j = 0; j < n; ++j) {
        g.slope.push_back(uni(0.5, 1.5));
        g.shift.push_back(uni(-0.5, 0.5));
      }
      f.outer = g;
      break;
    }
    default: {
      GaussianOuter g;
      g.scale = uni(0.5, 2.0);
      for (std::size_t j = 0; j < n; ++j) g.center.push_back(uni(0.0, 1.5));
      g.width = uni(0.7, 1.5);
      f.outer = g;
      break;
    }
  }
  return f;
}

std::vector<Observable> default_cylinders(const TorusGeometry& geom, std::size_t n, std::uint64_t seed) {
  Vec mid{};
  for (int q = 0; q < geom.dim(); ++q) mid[q] = 0.5 * geom.side();
  std::vector<Observable> out;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_stream(seed, i, 0xc71);
    out.emplace_back(random_cylinder(geom, mid, rng, static_cast<int>(i % 3)));
  }
  return out;
}

Window central_window(const TorusGeometry& geom) {
  Window w;
  for (int q = 0; q < geom.dim(); ++q) {
    w.lo[q] = 0.25 * geom.side();
    w.hi[q] = 0.75 * geom.side();
  }
  return w;
}

std::vector<NamedFunctional> default_mecke_functionals(const TorusGeometry& geom) {
  Window w = central_window(geom);
  Vec mid{};
  for (int q = 0; q < geom.dim(); ++q) mid[q] = 0.5 * geom.side();
  TestProfile weight{mid, 0.2 * geom.side(), 1.0};
  TestProfile psi{mid, 2.0, 0.7};
  auto others = [](const Configuration& g, const Vec& x, auto&& fn) {
    bool skipped = false;
    for (const auto& y : g.points) {
      if (!skipped && y == x) {
        skipped = true;
        continue;
      }
      fn(y);
    }
  };
  std::vector<NamedFunctional> out;
  out.push_back({"indicator", [w, d = geom.dim()](const Configuration&, const Vec& x) { return w.contains(x, d) ? 1.0 : 0.0; }});
  out.push_back({"neighbour_count", [w, geom, others](const Configuration& g, const Vec& x) {
                   if (!w.contains(x, geom.dim())) return 0.0;
                   double n = 0.0;
                   others(g, x, [&](const Vec& y) { n += geom.distance2(x, y) < 1.0 ? 1.0 : 0.0; });
                   return n;
                 }});
  out.push_back({"weighted_exponential", [geom, weight, psi, others](const Configuration& g, const Vec& x) {
                   double wx = weight.value(geom, x);
                   if (wx == 0.0) return 0.0;
                   double s = 0.0;
                   others(g, x, [&](const Vec& y) { s += psi.value(geom, y); });
                   return wx * std::exp(-s);
                 }});
  return out;
}

}  // namespace contjump
