#include "contjump/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>

#include "contjump/config.hpp"
#include "contjump/csv.hpp"
#include "contjump/errors.hpp"
#include "contjump/fock.hpp"
#include "contjump/harness.hpp"

namespace contjump {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> coordinate_headers(int dim) {
  std::vector<std::string> h;
  for (int q = 0; q < dim; ++q) h.push_back("x" + std::to_string(q + 1));
  return h;
}

/** Shared state of one subcommand run. */
struct Run {
  std::string command;
  RunConfig cfg;
  std::uint64_t seed = kDefaultSeed;
  int threads = 0;
  fs::path out_dir;
  std::ostream& out;
  std::vector<std::string> artifacts;
  bool all_pass = true;

  McSettings mc(std::size_t n) const { return {n, seed, threads}; }
  TorusGeometry geom() const { return cfg.geometry(); }

  CsvWriter csv(const std::string& name, std::vector<std::string> header) {
    artifacts.push_back(name);
    return CsvWriter(out_dir / name, header);
  }

  void verdict(const std::string& what, bool pass) {
    out << (pass ? "PASS " : "FAIL ") << what << "\n";
    all_pass = all_pass && pass;
  }

  double horizon() const {
    if (cfg.experiment.horizon > 0.0) return cfg.experiment.horizon;
    KernelSpec spec = cfg.kernel();
    double bar = 2.0 * spec.constants().mean_a * spec.constants().mean_a * spec.b_sup();
    return 5.0 / bar;
  }

  std::vector<Observable> cylinders(std::size_t n) const {
    std::vector<Observable> obs;
    for (const auto& o : cfg.observables)
      if (!o.is_exponential()) obs.push_back(o);
    if (obs.empty()) return default_cylinders(geom(), n, seed);
    return obs;
  }
};

void cmd_sample_poisson(Run& r) {
  TorusGeometry geom = r.geom();
  const std::size_t n = r.cfg.experiment.samples;
  auto hdr = std::vector<std::string>{"sample", "index"};
  for (auto& h : coordinate_headers(geom.dim())) hdr.push_back(h);
  auto pts = r.csv("poisson_points.csv", hdr);
  RunningStats counts;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_stream(r.seed, i, 0x9015);
    Configuration g = r.cfg.z > 0.0 ? sample_poisson(geom, r.cfg.z, rng) : Configuration{};
    counts.add(static_cast<double>(g.size()));
    for (std::size_t k = 0; k < g.size(); ++k) {
      std::vector<std::string> row{cell(i), cell(k)};
      for (int q = 0; q < geom.dim(); ++q) row.push_back(cell(g.points[k][q]));
      pts.row(row);
    }
  }
  double expected = r.cfg.z * geom.volume();
  bool ok = agree_within(MCEstimate{counts.mean(), counts.stderr_(), counts.count()}, expected);
  auto sum = r.csv("poisson_summary.csv", {"statistic", "mean", "stderr", "expected", "verdict"});
  sum.row({"count", cell(counts.mean()), cell(counts.stderr_()), cell(expected), cell(ok)});
  r.verdict("mean point count matches z L^d", ok);
}

void write_simulation(Run& r, const Trajectory& traj, const std::string& prefix) {
  r.artifacts.push_back(prefix + "_trajectory.csv");
  std::ofstream os(r.out_dir / (prefix + "_trajectory.csv"));
  write_trajectory(os, traj);
  std::map<EventKind, std::size_t> kinds;
  for (const auto& e : traj.events) ++kinds[e.kind];
  TorusGeometry geom = r.geom();
  Configuration end = state_at(traj, geom, traj.horizon);
  auto sum = r.csv(prefix + "_summary.csv", {"statistic", "value"});
  sum.row({"horizon", cell(traj.horizon)});
  sum.row({"initial_count", cell(traj.initial.size())});
  sum.row({"final_count", cell(end.size())});
  sum.row({"events", cell(traj.events.size())});
  for (auto [k, c] : kinds) sum.row({"events_" + event_kind_name(k), cell(c)});
}

void cmd_simulate(Run& r, bool bd) {
  TorusGeometry geom = r.geom();
  KernelSpec spec = r.cfg.kernel();
  Rng rng = make_stream(r.seed, 0, bd ? 0xbd51 : 0x51a);
  Configuration g0 = r.cfg.z > 0.0 ? sample_poisson(geom, r.cfg.z, rng) : Configuration{};
  double T = r.horizon();
  Trajectory traj = bd ? simulate_bd(g0, geom, spec, r.cfg.z, T, rng) : simulate_jumps(g0, geom, spec, T, rng);
  write_simulation(r, traj, bd ? "bd" : "jumps");
  if (!bd) r.verdict("particle number conserved", state_at(traj, geom, T).size() == g0.size());
  else r.out << "simulated " << traj.events.size() << " events up to T = " << T << "\n";
}

void cmd_eval_generator(Run& r) {
  TorusGeometry geom = r.geom();
  KernelSpec spec = r.cfg.kernel();
  auto obs = r.cfg.observables.empty() ? default_cylinders(geom, 2, r.seed) : r.cfg.observables;
  auto csv = r.csv("generator_values.csv", {"sample", "observable", "n_points", "F", "LF", "gamma_FF"});
  const std::size_t n = r.cfg.experiment.samples;
  std::vector<std::vector<double>> rows(n * obs.size());
  parallel_for(n, r.threads, [&](std::size_t i) {
    Rng rng = make_stream(r.seed, i, 0xe7a1);
    Configuration g = r.cfg.z > 0.0 ? sample_poisson(geom, r.cfg.z, rng) : Configuration{};
    for (std::size_t k = 0; k < obs.size(); ++k)
      rows[i * obs.size() + k] = {static_cast<double>(g.size()), evaluate(obs[k], geom, g),
                                  apply_L(obs[k], geom, g, spec),
                                  carre_du_champ(FormKind::Jump, obs[k], obs[k], geom, g, spec, r.cfg.z)};
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const auto& v = rows[i * obs.size() + k];
      csv.row({cell(i), cell(k), cell(static_cast<std::size_t>(v[0])), cell(v[1]), cell(v[2]), cell(v[3])});
    }
  r.out << "evaluated " << obs.size() << " observables on " << n << " samples\n";
}

void cmd_check_identities(Run& r) {
  TorusGeometry geom = r.geom();
  KernelSpec spec = r.cfg.kernel();
  const double z = r.cfg.z;
  auto mc = r.mc(r.cfg.experiment.samples);
  auto csv = r.csv("identities.csv", {"identity", "case", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "verdict"});
  auto row = [&](const std::string& id, const std::string& name, const MCEstimate& a, double b, double b_se,
                 bool pass) {
    csv.row({id, name, cell(a.mean), cell(a.stderr_), cell(b), cell(b_se), cell(pass)});
    r.verdict(id + " " + name, pass);
  };

  if (z > 0.0) {
    Window w = central_window(geom);
    for (const auto& f : default_mecke_functionals(geom)) {
      auto m = mecke_check(f.G, w, z, geom, mc);
      row("mecke", f.name, m.lhs, m.rhs.mean, m.rhs.stderr_, m.pass);
    }
    double side = std::pow(2.0 / z, 1.0 / geom.dim());
    if (side <= geom.side()) {
      Window pw;
      for (int q = 0; q < geom.dim(); ++q) pw.hi[q] = side;
      auto pm = pair_moment_check(pw, z, geom, mc);
      row("pair_moment", "lambda_2", pm.mc, pm.exact, 0.0, pm.pass);
    }
  }

  auto cyl = default_cylinders(geom, 10, r.seed);
  auto e1 = dirichlet_form_mc(FormKind::Jump, cyl[0], cyl[1], geom, spec, z, mc, 1);
  auto e2 = dirichlet_form_mc(FormKind::Jump, cyl[1], cyl[0], geom, spec, z, mc, 2);
  row("symmetry", "form", e1, e2.mean, e2.stderr_, agree_within(e1, e2));

  for (std::size_t k = 0; k < 5; ++k) {
    auto rv = reversibility_report(cyl[2 * k], cyl[2 * k + 1], geom, spec, z, mc);
    row("reversibility", "pair_" + std::to_string(k), rv.lhs, rv.rhs.mean, rv.rhs.stderr_, rv.pass);
  }

  auto dual = [&](FormKind kind, const std::string& name, const Observable& F, const Observable& G) {
    auto d = duality_check(kind, F, G, geom, spec, z, mc);
    row("duality", name, d.pairing, d.form.mean, d.form.stderr_, d.pass);
  };
  dual(FormKind::Jump, "jump", cyl[0], cyl[1]);
  if (spec.b().differentiable()) dual(FormKind::Diffusive, "diffusive", cyl[0], cyl[1]);
  TestProfile psi = r.cfg.phi;
  psi.center[0] = geom.wrap(psi.center + Vec{0.7, 0.0, 0.0})[0];
  dual(FormKind::BirthDeath, "birth_death", ExponentialFunction{r.cfg.phi}, ExponentialFunction{psi});
}

void cmd_scaling_diffusive(Run& r) {
  TorusGeometry geom = r.geom();
  KernelSpec spec = r.cfg.kernel();
  auto obs = r.cylinders(1);
  auto csv = r.csv("scaling_diffusive.csv", {"observable", "eps", "gap", "gap_stderr"});
  for (std::size_t k = 0; k < obs.size(); ++k) {
    auto res = diffusive_convergence(obs[k], geom, spec, r.cfg.z, r.cfg.experiment.eps_diffusive,
                                     r.mc(r.cfg.experiment.samples));
    for (const auto& row : res.rows) csv.row({cell(k), cell(row.eps), cell(row.gap), cell(row.gap_se)});
    r.verdict("diffusive gap decreasing, observable " + std::to_string(k), res.monotone);
    r.verdict("diffusive gap final/initial < 1/4, observable " + std::to_string(k), res.factor_four);
  }
}

void cmd_scaling_bd(Run& r) {
  auto res = bd_convergence(r.cfg.phi, r.geom(), r.cfg.kernel(), r.cfg.z, r.cfg.experiment.eps_bd,
                            r.mc(r.cfg.experiment.samples));
  auto csv = r.csv("scaling_bd.csv", {"piece", "eps", "gap", "gap_stderr"});
  int piece = 2;
  for (const auto* rows : {&res.piece2, &res.piece3, &res.piece4}) {
    for (const auto& row : *rows) csv.row({cell(piece), cell(row.eps), cell(row.gap), cell(row.gap_se)});
    ++piece;
  }
  r.verdict("piece 1 identical across eps", res.piece1_invariant);
  r.verdict("piece 2 gap decreasing", res.pass2);
  r.verdict("piece 3 gap decreasing", res.pass3);
  r.verdict("piece 4 gap decreasing", res.pass4);
}

void cmd_spectral_gap(Run& r) {
  TorusGeometry geom = r.geom();
  KernelSpec spec = r.cfg.kernel();
  auto acf = r.csv("spectral_autocov.csv", {"simulator", "lag", "autocov", "autocov_stderr"});
  auto sum = r.csv("spectral_gap.csv", {"simulator", "rate", "ci_low", "ci_high", "lambda0", "expected", "fit_lags",
                                        "status", "verdict"});
  for (auto [name, sim] : {std::pair{"bd", SimulatorKind::BirthDeath}, {"free_bd", SimulatorKind::FreeBirthDeath}}) {
    SpectralGapSettings st;
    st.sim = sim;
    st.horizon = r.cfg.experiment.gap_horizon;
    st.sample_dt = r.cfg.experiment.gap_dt;
    auto rep = spectral_gap_report(geom, spec, r.cfg.z, r.cfg.phi, st, r.mc(r.cfg.experiment.gap_replicas));
    for (std::size_t i = 0; i < rep.lags.size(); ++i)
      acf.row({name, cell(rep.lags[i]), cell(rep.autocov[i]), cell(rep.autocov_se[i])});
    sum.row({name, cell(rep.rate), cell(rep.ci_low), cell(rep.ci_high), cell(rep.lambda0), cell(rep.expected),
             cell(rep.fit_lags), rep.status, cell(rep.pass)});
    std::string what = std::string(name) + (sim == SimulatorKind::FreeBirthDeath
                                                ? " decay rate within 10% of <a><b>"
                                                : " decay rate >= 0.85 <a>^2 z <b>");
    if (rep.status != "ok") what += " (" + rep.status + ")";
    r.verdict(what, rep.pass);
  }
}

void cmd_fock_bounds(Run& r) {
  const auto& x = r.cfg.experiment;
  TorusGeometry geom(r.cfg.dim, x.fock_side);
  GridSpace grid(geom, x.fock_sites, r.cfg.z);
  Rng rng = make_stream(r.seed, 0, 0xf0c);
  auto rep = fock_structure_report(r.cfg.kernel(), grid, x.fock_n_max, rng);
  auto norms = r.csv("fock_norms.csv", {"n", "jplus", "jzero", "jminus"});
  for (const auto& row : rep.norms) norms.row({cell(row.n), cell(row.jplus), cell(row.jzero), cell(row.jminus)});
  auto checks = r.csv("fock_checks.csv", {"check", "value", "bound", "verdict"});
  auto check = [&](const std::string& name, double value, double bound, bool pass) {
    checks.row({name, cell(value), cell(bound), cell(pass)});
    r.verdict(name, pass);
  };
  check("jminus_is_adjoint_of_jplus", rep.adjoint_error, 1e-12, rep.adjoint_pass);
  check("generator_symmetric", rep.symmetry_error, 1e-12, rep.symmetric_pass);
  check("generator_psd_min_eigenvalue", rep.min_eigenvalue, -1e-8 * rep.operator_norm, rep.psd_pass);
  check("vacuum_in_kernel", rep.vacuum_residual, 1e-12 * rep.operator_norm, rep.vacuum_pass);
  check("form_equality_relative", rep.form.rel_diff, 1e-8, rep.form_pass);
  check("jplus_growth_exponent", rep.exponents.jplus, kJPlusExponentBound,
        rep.exponents.jplus <= kJPlusExponentBound);
  check("jzero_growth_exponent", rep.exponents.jzero, kJZeroExponentBound,
        rep.exponents.jzero <= kJZeroExponentBound);
}

void cmd_invariance(Run& r) {
  TorusGeometry geom = r.geom();
  KernelSpec spec = r.cfg.kernel();
  auto csv = r.csv("invariance.csv",
                   {"simulator", "statistic", "mean_start", "mean_end", "diff", "diff_stderr", "verdict"});
  for (auto [name, sim] : {std::pair{"jumps", SimulatorKind::Jumps}, {"bd", SimulatorKind::BirthDeath}}) {
    InvarianceSettings st;
    st.sim = sim;
    st.horizon = r.horizon();
    st.bins = r.cfg.experiment.bins;
    st.r_max = r.cfg.experiment.r_max;
    auto rep = invariance_report(geom, spec, r.cfg.z, st, r.mc(r.cfg.experiment.replicas));
    for (const auto& row : rep.rows)
      csv.row({name, row.name, cell(row.mean_start), cell(row.mean_end), cell(row.diff), cell(row.diff_se),
               cell(row.pass)});
    r.verdict(std::string(name) + " preserves intensity and pair correlation", rep.pass);
  }
}

void write_manifest(const Run& r, const std::vector<std::string>& args) {
  nlohmann::ordered_json j;
  j["tool"] = "contjump";
  j["version"] = CONTJUMP_VERSION;
  j["subcommand"] = r.command;
  j["arguments"] = args;
  j["seed"] = r.seed;
  j["threads"] = r.threads;
  j["config_hash"] = config_hash(r.cfg);
  j["config"] = to_yaml(r.cfg);
  j["artifacts"] = r.artifacts;
  j["verdict"] = r.all_pass ? "PASS" : "FAIL";
  j["versions"] = {{"compiler", __VERSION__},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"cxx_standard", __cplusplus}};
  std::ofstream os(r.out_dir / "manifest.json");
  os << j.dump(2) << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulator and verification harness for binary-jump dynamics on continuum configurations",
               "contjump"};
  app.set_version_flag("--version", CONTJUMP_VERSION);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out_dir = "contjump_out";
  app.add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides CONTJUMP_SEED and the config file)");
  app.add_option("--threads", threads, "worker threads (default: available cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", out_dir, "output directory for CSV artifacts and the manifest");
  app.require_subcommand(1, 1);

  using Handler = std::function<void(Run&)>;
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"sample-poisson", "sample Poisson configurations", cmd_sample_poisson},
      {"simulate-jumps", "simulate the binary-jump process", [](Run& r) { cmd_simulate(r, false); }},
      {"simulate-bd", "simulate the pair birth-and-death process", [](Run& r) { cmd_simulate(r, true); }},
      {"eval-generator", "evaluate F, LF and Gamma(F,F) on Poisson samples", cmd_eval_generator},
      {"check-identities", "Mecke, pair moment, form symmetry, reversibility and duality", cmd_check_identities},
      {"scaling-diffusive", "gap between L_eps F and the diffusive limit", cmd_scaling_diffusive},
      {"scaling-bd", "per-piece gaps of the birth-and-death scaling", cmd_scaling_bd},
      {"spectral-gap", "autocovariance decay under birth-and-death dynamics", cmd_spectral_gap},
      {"fock-bounds", "structure and norm growth of the second-quantized generator", cmd_fock_bounds},
      {"invariance", "Poisson invariance of the simulators", cmd_invariance},
  };
  for (const auto& [name, desc, handler] : commands) app.add_subcommand(name, desc)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::CallForVersion& e) {
    out << CONTJUMP_VERSION << "\n";
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    auto rest = app.remaining();
    if (!rest.empty() && !rest.front().empty() && rest.front()[0] != '-')
      err << "error: unknown subcommand '" << rest.front() << "'\n\n" << app.help();
    else
      err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  const CLI::App* sub = app.get_subcommands().front();
  Run run{sub->get_name(), {}, kDefaultSeed, 0, out_dir, out, {}, true};
  try {
    run.cfg = config_path.empty() ? parse_config_text("") : parse_config(config_path);
    run.seed = resolve_seed(seed, run.cfg);
    run.threads = threads ? *threads : run.cfg.threads;
    fs::create_directories(run.out_dir);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (const auto& [name, desc, handler] : commands)
      if (name == run.command) handler(run);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    run.all_pass = false;
    write_manifest(run, args);
    return kExitFail;
  }
  write_manifest(run, args);
  return run.all_pass ? kExitPass : kExitFail;
}

}  // namespace contjump
