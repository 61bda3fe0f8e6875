#pragma once

#include <array>
#include <memory>
#include <vector>

#include "contjump/geometry.hpp"
#include "contjump/profiles.hpp"
#include "contjump/random.hpp"

namespace contjump {

enum class KernelVariant { Factorized, MomentumConserving };

/** @brief Deliberate kernel defects used to check that the harness detects them. */
enum class Mutation {
  None,
  OddB,               ///< b(x) -> b(x) (1 + x^1 / (2 r_b)): breaks evenness of b
  DriftA,             ///< a(h) -> a(h - r_a e_1 / 2): breaks evenness of a
  PreJumpOnly,        ///< b(x) + b(x + h2 - h1) -> 2 b(x)
  SquaredAcceptance,  ///< acceptance probability squared
};

struct KernelConstants {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double c = 0.0;
  double sup_b = 0.0;
};

/** @brief Midpoint grid over the support of a, mass-normalized so that sum(weights) = <a>. */
struct JumpQuadrature {
  int nodes_per_dim = 0;
  double spacing = 0.0;
  std::vector<Vec> nodes;
  std::vector<double> weights;
  std::vector<std::array<int, kMaxDim>> index;
  /// Difference table: sum of w_k w_l over node pairs with index_l - index_k = offset.
  std::vector<double> autocorrelation;
  std::vector<Vec> offsets;
  int diff_extent = 0;  ///< 2 n - 1

  std::size_t diff_slot(const std::array<int, kMaxDim>& from, const std::array<int, kMaxDim>& to, int dim) const;
};

/** @brief Jump-rate data q(x,h1,h2) with its derived constants and quadrature tables. */
class KernelSpec {
 public:
  KernelSpec(KernelVariant variant, RadialProfile a, RadialProfile b, int dim, Mutation mutation = Mutation::None,
             int jump_nodes = 0);

  KernelVariant variant() const { return variant_; }
  const RadialProfile& a() const { return a_; }
  const RadialProfile& b() const { return b_; }
  int dim() const { return dim_; }
  Mutation mutation() const { return mutation_; }
  const KernelConstants& constants() const { return constants_; }
  const JumpQuadrature& quadrature() const { return *quad_; }

  /** @brief Copy with a different mutation (tables rebuilt). */
  KernelSpec with_mutation(Mutation m) const;
  /** @brief Copy with a different jump-grid resolution. */
  KernelSpec with_jump_nodes(int n) const;

  double a_value(const Vec& h) const;
  double b_value(const Vec& x) const;
  Vec b_gradient(const Vec& x) const;
  double a_center_shift() const;
  double a_reach() const;  ///< max |h| over supp a
  double b_reach() const { return b_.radius; }
  /** @brief Largest separation with nonzero pair rate. */
  double interaction_range() const;
  double b_sup() const;

  /** @brief Factorized b-part from b(x) and b(x + h2 - h1). */
  double combine(double b0, double b1) const;
  double combine_sup() const;
  /** @brief Momentum b-part from b(x - h). */
  double momentum_part(double bx) const;
  double momentum_sup() const;

  /** @brief Draw h from a / <a>. */
  Vec sample_a(Rng& rng) const;

 private:
  void build();

  KernelVariant variant_;
  RadialProfile a_;
  RadialProfile b_;
  int dim_;
  Mutation mutation_;
  int jump_nodes_;
  KernelConstants constants_;
  std::shared_ptr<const JumpQuadrature> quad_;
};

int default_jump_nodes(int dim);

KernelConstants kernel_constants(const KernelSpec& spec);

/** @brief q(x,h1,h2); MomentumConserving requires h2 = -h1 (else DomainError). */
double eval_q(const KernelSpec& spec, const Vec& x, const Vec& h1, const Vec& h2);

/** @brief Worst violation of the kernel symmetry identities over random tuples. */
double check_symmetry(const KernelSpec& spec, std::size_t n_samples, Rng& rng);

/** @brief Integral of q(x, ., .) over the jumps (quadrature). */
double total_pair_rate(const KernelSpec& spec, const Vec& x);

enum class Scaling { Diffusive, BirthDeath };

/** @brief Scaled kernel: rate prefactor kappa and jump scale s in node variables h = s u. */
class ScaledKernel {
 public:
  ScaledKernel(const KernelSpec& spec, Scaling scaling, double eps);

  const KernelSpec& base() const { return spec_; }
  Scaling scaling() const { return scaling_; }
  double eps() const { return eps_; }
  double rate_prefactor() const { return kappa_; }
  double jump_scale() const { return scale_; }
  double jump_reach() const { return scale_ * spec_.a_reach(); }
  /** @brief Largest separation with nonzero pair rate. */
  double interaction_range() const;
  /** @brief Physical rate density q_eps(x,h1,h2) (momentum: h2 = -h1). */
  double density(const Vec& x, const Vec& h1, const Vec& h2) const;

 private:
  KernelSpec spec_;
  Scaling scaling_;
  double eps_;
  double kappa_;
  double scale_;
};

ScaledKernel scaled_kernel_diffusive(const KernelSpec& spec, double eps);
ScaledKernel scaled_kernel_bd(const KernelSpec& spec, double eps);

}  // namespace contjump
