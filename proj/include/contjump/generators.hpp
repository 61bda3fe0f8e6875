#pragma once

#include <cstdint>
#include <functional>

#include "contjump/geometry.hpp"
#include "contjump/kernels.hpp"
#include "contjump/observables.hpp"
#include "contjump/stats.hpp"

namespace contjump {

/** @brief (LF)(gamma) for the unscaled kernel. */
double apply_L(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, const KernelSpec& spec);

/** @brief (L F)(gamma) for a scaled kernel. */
double apply_L_scaled(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                      const ScaledKernel& kernel);

double apply_L_eps_diffusive(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                             const KernelSpec& spec, double eps);

/** @brief Limiting diffusion generator; requires a differentiable b. */
double apply_L0_diffusive(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                          const KernelSpec& spec);

/** @brief Full L_eps under the birth-and-death scaling. */
double apply_L_eps_bd(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                      const KernelSpec& spec, double eps);

/** @brief How birth integrals are evaluated in apply_L0_bd. */
enum class BirthQuadrature { Auto, Grid };

/** @brief Four-term birth-and-death limit generator. */
double apply_L0_bd(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                   const KernelSpec& spec, double z, BirthQuadrature mode = BirthQuadrature::Auto);

/** @brief The four pieces of the birth-and-death generator. */
struct BdPieces {
  double p1 = 0.0;  ///< pair removal weighted by b(x2 - x1)
  double p2 = 0.0;
  double p3 = 0.0;
  double p4 = 0.0;
  double sum() const { return p1 + p2 + p3 + p4; }
};

/** @brief Pieces of L_eps for exponential F; throws UnsupportedError otherwise. */
BdPieces bd_pieces(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                   const KernelSpec& spec, double eps);

/** @brief Limits of the pieces (p1 unchanged) for exponential F. */
BdPieces bd_limit_pieces(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                         const KernelSpec& spec, double z);

/** @brief Torus integrals entering the exponential-F birth terms. */
struct ExpBirthIntegrals {
  double single = 0.0;  ///< integral of (e^phi - 1)
  double pair = 0.0;    ///< double integral of b(x2 - x1)(e^{phi(x1) + phi(x2)} - 1)
};

ExpBirthIntegrals exp_birth_integrals(const TorusGeometry& geom, const KernelSpec& spec, const TestProfile& phi);

enum class FormKind { Jump, Diffusive, BirthDeath };

/** @brief Pointwise carre du champ Gamma(F,G)(gamma); its pi_z mean is the Dirichlet form. */
double carre_du_champ(FormKind kind, const Observable& F, const Observable& G, const TorusGeometry& geom,
                      const Configuration& gamma, const KernelSpec& spec, double z);

/** @brief Generator of the given kind applied to F. */
double apply_generator(FormKind kind, const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                       const KernelSpec& spec, double z);

/** @brief Parameters shared by the Monte Carlo estimators. */
struct McSettings {
  std::size_t n_samples = 1000;
  std::uint64_t seed = 42;
  int threads = 0;
};

/** @brief E_{pi_z}[Gamma(F,G)]. */
MCEstimate dirichlet_form_mc(FormKind kind, const Observable& F, const Observable& G, const TorusGeometry& geom,
                             const KernelSpec& spec, double z, const McSettings& mc, std::uint64_t tag = 0);

struct DualityResult {
  MCEstimate pairing;     ///< <-LF, G>
  MCEstimate form;        ///< E(F,G)
  MCEstimate difference;  ///< paired per-sample difference
  bool pass = false;
};

/** @brief <-LF,G> against E(F,G) on common Poisson samples. */
DualityResult duality_check(FormKind kind, const Observable& F, const Observable& G, const TorusGeometry& geom,
                            const KernelSpec& spec, double z, const McSettings& mc);

struct ReversibilityResult {
  MCEstimate lhs;         ///< <-LF, G>
  MCEstimate rhs;         ///< <F, -LG>
  MCEstimate difference;  ///< paired per-sample difference
  bool pass = false;
};

ReversibilityResult reversibility_check(const Observable& F, const Observable& G, const TorusGeometry& geom,
                                        const KernelSpec& spec, double z, const McSettings& mc);

using PointFunctional = std::function<double(const Configuration&, const Vec&)>;

struct MeckeResult {
  MCEstimate lhs;
  MCEstimate rhs;
  bool pass = false;
};

/**
 * @brief E[sum_x G(gamma,x)] against E[z int G(gamma + x, x) dx].
 *
 * The x-integral runs over `support` by a midpoint grid; G must vanish in x outside it.
 * The two sides use independent samples.
 */
MeckeResult mecke_check(const PointFunctional& G, const Window& support, double z, const TorusGeometry& geom,
                        const McSettings& mc, int grid_nodes = 256);

struct PairMomentResult {
  MCEstimate mc;
  double exact = 0.0;
  bool pass = false;
};

/** @brief E[C(N_window, 2)^2] against lambda^4/4 + lambda^3 + lambda^2/2. */
PairMomentResult pair_moment_check(const Window& window, double z, const TorusGeometry& geom, const McSettings& mc);

double pair_moment_exact(double lambda);

}  // namespace contjump
