#pragma once

#include <string>
#include <vector>

#include "contjump/generators.hpp"
#include "contjump/simulation.hpp"

namespace contjump {

struct GapRow {
  double eps = 0.0;
  double gap = 0.0;     ///< sqrt of the mean squared difference
  double gap_se = 0.0;  ///< delta-method stderr of gap
};

/** @brief Monotone within 3 combined stderr at each step, and last < first * ratio. */
bool decreasing_within_error(const std::vector<GapRow>& rows, double ratio = 1.0);

struct DiffusiveConvergence {
  std::vector<GapRow> rows;
  bool monotone = false;
  bool factor_four = false;
  bool pass = false;
};

/** @brief ||L_eps F - L_0 F|| in L^2(pi_z) over eps_list, common samples for every eps. */
DiffusiveConvergence diffusive_convergence(const Observable& F, const TorusGeometry& geom, const KernelSpec& spec,
                                           double z, const std::vector<double>& eps_list, const McSettings& mc);

struct BdConvergence {
  std::vector<GapRow> piece2, piece3, piece4;
  bool piece1_invariant = false;  ///< first piece bit-identical across eps on every sample
  bool pass2 = false, pass3 = false, pass4 = false;
  bool pass = false;
};

BdConvergence bd_convergence(const TestProfile& phi, const TorusGeometry& geom, const KernelSpec& spec, double z,
                             const std::vector<double>& eps_list, const McSettings& mc);

enum class SimulatorKind { Jumps, BirthDeath, FreeBirthDeath };

struct StatisticRow {
  std::string name;
  double mean_start = 0.0;
  double mean_end = 0.0;
  double diff = 0.0;
  double diff_se = 0.0;
  bool pass = false;
};

struct InvarianceReport {
  double horizon = 0.0;
  std::vector<StatisticRow> rows;
  bool pass = false;
};

struct InvarianceSettings {
  SimulatorKind sim = SimulatorKind::Jumps;
  double horizon = -1.0;  ///< < 0: 5 / (2 <a>^2 |b|_inf)
  std::size_t bins = 10;
  double r_max = 0.0;    ///< <= 0: 2 r_b
};

InvarianceReport invariance_report(const TorusGeometry& geom, const KernelSpec& spec, double z,
                                   const InvarianceSettings& settings, const McSettings& mc);

struct SpectralGapSettings {
  SimulatorKind sim = SimulatorKind::BirthDeath;
  double horizon = 50.0;
  double sample_dt = 0.05;
  std::size_t batches = 10;
};

struct SpectralGapReport {
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double lambda0 = 0.0;    ///< <a>^2 z <b>
  double expected = 0.0;   ///< closed-form rate for the free variant, else lambda0
  std::size_t fit_lags = 0;
  std::string status;      ///< "ok" or "insufficient-signal"
  std::vector<double> lags;
  std::vector<double> autocov;
  std::vector<double> autocov_se;
  bool pass = false;
};

SpectralGapReport spectral_gap_report(const TorusGeometry& geom, const KernelSpec& spec, double z,
                                      const TestProfile& phi, const SpectralGapSettings& settings,
                                      const McSettings& mc);

/** @brief Reversibility of apply_L under pi_z for one pair (F, G). */
ReversibilityResult reversibility_report(const Observable& F, const Observable& G, const TorusGeometry& geom,
                                         const KernelSpec& spec, double z, const McSettings& mc);

/** @brief Random cylinder function with profiles placed around `center`. */
CylinderFunction random_cylinder(const TorusGeometry& geom, const Vec& center, Rng& rng, int family = -1);

/** @brief Deterministic list of n random cylinder functions around the torus center. */
std::vector<Observable> default_cylinders(const TorusGeometry& geom, std::size_t n, std::uint64_t seed);

struct NamedFunctional {
  std::string name;
  PointFunctional G;
};

/**
 * @brief Three point functionals supported in the central window [L/4, 3L/4)^d:
 * indicator, neighbour count within distance 1, and a smooth weight times exp(-<psi, gamma minus x>).
 */
std::vector<NamedFunctional> default_mecke_functionals(const TorusGeometry& geom);

/** @brief Central window [L/4, 3L/4)^d. */
Window central_window(const TorusGeometry& geom);

}  // namespace contjump
