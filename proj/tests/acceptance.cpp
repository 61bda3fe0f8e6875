/**
 * @file acceptance.cpp
 * @brief Runs the acceptance experiments at full size and prints one PASS/FAIL line per criterion.
 *
 * Every criterion writes its numbers to CSV under <out>/run1. The determinism criterion reruns
 * all of them under <out>/run2 with a different thread count and compares the files byte by byte.
 */
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "contjump/csv.hpp"
#include "contjump/fock.hpp"
#include "contjump/harness.hpp"

using namespace contjump;
namespace fs = std::filesystem;

namespace {

struct Setup {
  std::uint64_t seed = 42;
  int threads = 0;
  fs::path dir;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

const TorusGeometry kGeom(1, 20.0);
constexpr double kZ = 1.0;

KernelSpec kernel(KernelVariant v = KernelVariant::Factorized) {
  return KernelSpec(v, RadialProfile::uniform_ball(1.0, 0.5), RadialProfile::smooth_bump(1.0, 1.0), 1);
}

std::string variant_label(KernelVariant v) { return v == KernelVariant::Factorized ? "factorized" : "momentum"; }

std::string fmt(double x, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << x;
  return os.str();
}

Outcome mecke(const Setup& s) {
  McSettings mc{100000, s.seed, s.threads};
  CsvWriter csv(s.dir / "criterion_01_mecke.csv", {"functional", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "verdict"});
  bool all = true;
  for (const auto& f : default_mecke_functionals(kGeom)) {
    auto r = mecke_check(f.G, central_window(kGeom), kZ, kGeom, mc);
    csv.row({f.name, cell(r.lhs.mean), cell(r.lhs.stderr_), cell(r.rhs.mean), cell(r.rhs.stderr_), cell(r.pass)});
    all = all && r.pass;
  }
  return {all, "3 functionals, n = 100000"};
}

Outcome pair_moment(const Setup& s) {
  Window w;
  w.hi[0] = 2.0;
  auto r = pair_moment_check(w, kZ, kGeom, {100000, s.seed, s.threads});
  CsvWriter csv(s.dir / "criterion_02_pair_moment.csv", {"lambda", "mc", "stderr", "exact", "verdict"});
  csv.row({cell(2.0), cell(r.mc.mean), cell(r.mc.stderr_), cell(r.exact), cell(r.pass)});
  return {r.pass, "MC " + fmt(r.mc.mean) + " +- " + fmt(r.mc.stderr_, 2) + " vs exact " + fmt(r.exact)};
}

Outcome reversibility(const Setup& s) {
  McSettings mc{2000, s.seed, s.threads};
  auto cyl = default_cylinders(kGeom, 10, s.seed);
  CsvWriter csv(s.dir / "criterion_03_reversibility.csv",
                {"kernel", "pair", "lhs", "rhs", "difference", "difference_stderr", "verdict"});
  bool all = true;
  for (auto v : {KernelVariant::Factorized, KernelVariant::MomentumConserving})
    for (std::size_t p = 0; p < 5; ++p) {
      auto r = reversibility_report(cyl[2 * p], cyl[2 * p + 1], kGeom, kernel(v), kZ, mc);
      csv.row({variant_label(v), cell(p), cell(r.lhs.mean), cell(r.rhs.mean), cell(r.difference.mean),
               cell(r.difference.stderr_), cell(r.pass)});
      all = all && r.pass;
    }
  // mutation 1: odd b violates the kernel symmetry identities
  Rng rng = make_stream(s.seed, 0, 0x0dd);
  double odd = check_symmetry(kernel().with_mutation(Mutation::OddB), 5000, rng);
  bool odd_detected = odd > 1e-8;
  csv.row({"odd_b_kernel_symmetry", "-", cell(odd), "0", cell(odd), "0", cell(!odd_detected)});
  // mutation 2: a drifting jump law breaks reversibility of the generator
  int drift_failures = 0;
  for (std::size_t p = 0; p < 5; ++p) {
    auto r = reversibility_report(cyl[2 * p], cyl[2 * p + 1], kGeom, kernel().with_mutation(Mutation::DriftA), kZ, mc);
    csv.row({"drift_a", cell(p), cell(r.lhs.mean), cell(r.rhs.mean), cell(r.difference.mean),
             cell(r.difference.stderr_), cell(r.pass)});
    drift_failures += !r.pass;
  }
  bool pass = all && odd_detected && drift_failures > 0;
  return {pass, "10 pairs symmetric: " + std::string(all ? "yes" : "no") +
                    "; odd-b kernel asymmetry " + fmt(odd, 3) + "; drift mutation fails " +
                    std::to_string(drift_failures) + "/5 pairs"};
}

Outcome duality(const Setup& s) {
  McSettings mc{4000, s.seed, s.threads};
  auto cyl = default_cylinders(kGeom, 2, s.seed);
  Observable e1 = ExponentialFunction{TestProfile{{10.0, 0, 0}, 1.5, 0.5}};
  Observable e2 = ExponentialFunction{TestProfile{{10.7, 0, 0}, 1.2, -0.4}};
  CsvWriter csv(s.dir / "criterion_04_duality.csv",
                {"form", "kernel", "pairing", "form_estimate", "difference", "difference_stderr", "verdict"});
  bool all = true;
  auto one = [&](FormKind kind, const std::string& name, KernelVariant v, const Observable& F, const Observable& G) {
    auto r = duality_check(kind, F, G, kGeom, kernel(v), kZ, mc);
    csv.row({name, variant_label(v), cell(r.pairing.mean), cell(r.form.mean), cell(r.difference.mean),
             cell(r.difference.stderr_), cell(r.pass)});
    all = all && r.pass;
  };
  one(FormKind::Jump, "jump", KernelVariant::Factorized, cyl[0], cyl[1]);
  one(FormKind::Jump, "jump", KernelVariant::MomentumConserving, cyl[0], cyl[1]);
  one(FormKind::Diffusive, "diffusive", KernelVariant::Factorized, cyl[0], cyl[1]);
  one(FormKind::Diffusive, "diffusive", KernelVariant::MomentumConserving, cyl[0], cyl[1]);
  one(FormKind::BirthDeath, "birth_death", KernelVariant::Factorized, e1, e2);
  return {all, "jump, diffusive and birth-death forms, n = 4000"};
}

Outcome invariance(const Setup& s) {
  McSettings mc{1000, s.seed, s.threads};
  CsvWriter csv(s.dir / "criterion_05_invariance.csv",
                {"simulator", "statistic", "mean_start", "mean_end", "diff", "diff_stderr", "verdict"});
  bool all = true;
  double T = 0.0;
  for (auto [name, sim] : {std::pair{"jumps", SimulatorKind::Jumps}, {"bd", SimulatorKind::BirthDeath}}) {
    InvarianceSettings st;
    st.sim = sim;
    auto r = invariance_report(kGeom, kernel(), kZ, st, mc);
    T = r.horizon;
    for (const auto& row : r.rows)
      csv.row({name, row.name, cell(row.mean_start), cell(row.mean_end), cell(row.diff), cell(row.diff_se),
               cell(row.pass)});
    all = all && r.pass;
  }
  InvarianceSettings st;
  auto bad = invariance_report(kGeom, kernel().with_mutation(Mutation::PreJumpOnly), kZ, st, mc);
  for (const auto& row : bad.rows)
    csv.row({"jumps_pre_jump_only", row.name, cell(row.mean_start), cell(row.mean_end), cell(row.diff),
             cell(row.diff_se), cell(row.pass)});
  return {all && !bad.pass, "T = " + fmt(T) + ", 1000 replicas; pre-jump-only mutation " +
                                (bad.pass ? "not detected" : "detected")};
}

Outcome diffusive(const Setup& s) {
  McSettings mc{1000, s.seed, s.threads};
  auto obs = default_cylinders(kGeom, 2, s.seed);
  CsvWriter csv(s.dir / "criterion_06_diffusive.csv", {"kernel", "observable", "eps", "gap", "gap_stderr"});
  bool all = true;
  std::string ratios;
  for (auto v : {KernelVariant::Factorized, KernelVariant::MomentumConserving})
    for (std::size_t k = 0; k < obs.size(); ++k) {
      auto r = diffusive_convergence(obs[k], kGeom, kernel(v), kZ, {0.4, 0.2, 0.1, 0.05}, mc);
      for (const auto& row : r.rows)
        csv.row({variant_label(v), cell(k), cell(row.eps), cell(row.gap), cell(row.gap_se)});
      all = all && r.pass;
      ratios += (ratios.empty() ? "" : ", ") + fmt(r.rows.back().gap / r.rows.front().gap, 3);
    }
  return {all, "final/initial gap ratios " + ratios};
}

Outcome birth_death(const Setup& s) {
  TestProfile phi{{10.0, 0, 0}, 1.5, 0.5};
  auto r = bd_convergence(phi, kGeom, kernel(), kZ, {1.0, 0.5, 0.25, 0.125}, {1000, s.seed, s.threads});
  CsvWriter csv(s.dir / "criterion_07_birth_death.csv", {"piece", "eps", "gap", "gap_stderr"});
  int piece = 2;
  for (const auto* rows : {&r.piece2, &r.piece3, &r.piece4}) {
    for (const auto& row : *rows) csv.row({cell(piece), cell(row.eps), cell(row.gap), cell(row.gap_se)});
    ++piece;
  }
  return {r.pass, std::string("piece 1 invariant: ") + (r.piece1_invariant ? "yes" : "no") + "; pieces 2/3/4 " +
                      (r.pass2 ? "P" : "F") + (r.pass3 ? "P" : "F") + (r.pass4 ? "P" : "F")};
}

Outcome spectral(const Setup& s) {
  TestProfile phi{{10.0, 0, 0}, 2.0, 1.0};
  CsvWriter csv(s.dir / "criterion_08_spectral_gap.csv",
                {"simulator", "rate", "ci_low", "ci_high", "lambda0", "expected", "fit_lags", "status", "verdict"});
  bool all = true;
  std::string detail;
  for (auto [name, sim] : {std::pair{"bd", SimulatorKind::BirthDeath}, {"free_bd", SimulatorKind::FreeBirthDeath}}) {
    SpectralGapSettings st;
    st.sim = sim;
    auto r = spectral_gap_report(kGeom, kernel(), kZ, phi, st, {200, s.seed, s.threads});
    csv.row({name, cell(r.rate), cell(r.ci_low), cell(r.ci_high), cell(r.lambda0), cell(r.expected),
             cell(r.fit_lags), r.status, cell(r.pass)});
    all = all && r.pass;
    detail += std::string(detail.empty() ? "" : "; ") + name + " rate " + fmt(r.rate) +
              (sim == SimulatorKind::FreeBirthDeath ? " vs <a><b> " + fmt(r.expected)
                                                    : " vs 0.85 lambda0 " + fmt(0.85 * r.lambda0));
  }
  return {all, detail};
}

Outcome fock(const Setup& s) {
  GridSpace grid(TorusGeometry(1, 4.0), 4, kZ);
  CsvWriter csv(s.dir / "criterion_09_fock.csv", {"kernel", "check", "value", "verdict"});
  bool all = true;
  std::string detail;
  for (auto v : {KernelVariant::Factorized, KernelVariant::MomentumConserving}) {
    // b must reach past one lattice spacing, otherwise every momentum-conserving move is a swap
    KernelSpec spec(v, RadialProfile::uniform_ball(1.0, 0.5), RadialProfile::smooth_bump(1.5, 1.0), 1);
    Rng rng = make_stream(s.seed, 0, 0xf0c);
    auto r = fock_structure_report(spec, grid, 3, rng);
    std::string k = variant_label(v);
    csv.row({k, "adjoint_error", cell(r.adjoint_error), cell(r.adjoint_pass)});
    csv.row({k, "symmetry_error", cell(r.symmetry_error), cell(r.symmetric_pass)});
    csv.row({k, "min_eigenvalue", cell(r.min_eigenvalue), cell(r.psd_pass)});
    csv.row({k, "vacuum_residual", cell(r.vacuum_residual), cell(r.vacuum_pass)});
    csv.row({k, "form_relative_difference", cell(r.form.rel_diff), cell(r.form_pass)});
    csv.row({k, "jplus_exponent", cell(r.exponents.jplus), cell(r.exponents.jplus <= kJPlusExponentBound)});
    csv.row({k, "jzero_exponent", cell(r.exponents.jzero), cell(r.exponents.jzero <= kJZeroExponentBound)});
    all = all && r.pass;
    detail += (detail.empty() ? "" : "; ") + k + " exponents " + fmt(r.exponents.jplus, 3) + "/" +
              fmt(r.exponents.jzero, 3);
  }
  return {all, detail};
}

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome(const Setup&)> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {1, "Mecke identity", 60, mecke},
      {2, "pair-moment formula", 60, pair_moment},
      {3, "reversibility", 300, reversibility},
      {4, "carre du champ duality", 300, duality},
      {5, "Poisson invariance", 600, invariance},
      {6, "diffusive limit", 900, diffusive},
      {7, "birth-and-death limit", 900, birth_death},
      {8, "spectral gap", 600, spectral},
      {9, "Fock structure", 300, fock},
  };
  return list;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Full-size acceptance run"};
  std::string out = "acceptance_out";
  std::uint64_t seed = 42;
  int threads = 0;
  std::vector<int> only;
  app.add_option("--out", out, "output directory");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads (default: available cores)");
  app.add_option("--only", only, "run only these criteria (skips the determinism rerun)");
  CLI11_PARSE(app, argc, argv);

  int first_threads = threads > 0 ? threads : default_thread_count();
  int second_threads = first_threads > 1 ? std::max(1, first_threads / 2) : 2;
  Setup run1{seed, first_threads, fs::path(out) / "run1"};
  Setup run2{seed, second_threads, fs::path(out) / "run2"};
  fs::remove_all(out);
  fs::create_directories(run1.dir);
  fs::create_directories(run2.dir);

  auto selected = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  bool all = true;
  for (const auto& c : criteria()) {
    if (!selected(c.id)) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(run1);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool in_budget = secs <= c.budget_s;
    bool pass = o.pass && in_budget;
    all = all && pass;
    std::printf("criterion %2d %s  %s: %s [%.1f s of %.0f s]\n", c.id, pass ? "PASS" : "FAIL", c.name.c_str(),
                o.detail.c_str(), secs, c.budget_s);
    std::fflush(stdout);
  }

  if (only.empty()) {
    auto t0 = std::chrono::steady_clock::now();
    for (const auto& c : criteria()) {
      try {
        c.run(run2);
      } catch (const std::exception&) {
      }
    }
    std::size_t files = 0, identical = 0;
    for (const auto& entry : fs::directory_iterator(run1.dir)) {
      ++files;
      fs::path other = run2.dir / entry.path().filename();
      if (fs::exists(other) && slurp(entry.path()) == slurp(other)) ++identical;
    }
    bool pass = files == criteria().size() && identical == files;
    all = all && pass;
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion 10 %s  determinism: %zu/%zu CSV files bit-identical on rerun with %d vs %d threads [%.1f s]\n",
                pass ? "PASS" : "FAIL", identical, files, first_threads, second_threads, secs);
  }
  return all ? 0 : 1;
}
