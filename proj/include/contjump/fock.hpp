#pragma once

#include <array>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "contjump/geometry.hpp"
#include "contjump/kernels.hpp"
#include "contjump/random.hpp"
#include "contjump/stats.hpp"

namespace contjump {

using SparseMatrix = Eigen::SparseMatrix<double>;

/** @brief Maximum basis size allowed in one sector. */
inline constexpr std::size_t kSectorBudget = 20000;

/** @brief M^d sites on the torus carrying weight w = z (L/M)^d each; sectors are multisets of sites. */
class GridSpace {
 public:
  GridSpace(TorusGeometry geom, int sites_per_dim, double z);

  const TorusGeometry& geom() const { return geom_; }
  int sites_per_dim() const { return m_; }
  std::size_t site_count() const { return sites_; }
  double weight() const { return w_; }
  double spacing() const { return geom_.side() / m_; }
  double z() const { return z_; }

  Vec site_position(std::size_t s) const;
  /** @brief Site reached from s by the lattice displacement k (in units of the spacing). */
  std::size_t shift(std::size_t s, const std::array<int, kMaxDim>& k) const;

  /** @brief Sorted multisets of n sites (built on demand; SizeError beyond the budget). */
  const std::vector<std::vector<std::size_t>>& basis(int n) const;
  std::size_t index(int n, const std::vector<std::size_t>& multiset) const;
  /** @brief Diagonal Gram weights n! w^n n! / prod(mult!) of sector n. */
  Eigen::VectorXd gram(int n) const;

 private:
  void ensure(int n) const;

  TorusGeometry geom_;
  int m_;
  double z_;
  std::size_t sites_;
  double w_;
  mutable std::vector<std::vector<std::vector<std::size_t>>> bases_;
  mutable std::vector<std::map<std::vector<std::size_t>, std::size_t>> lookup_;
};

/** @brief One term (x1, x2, h1, h2) of the jump sum with measure mu = w^2 omega^2 q. */
struct JumpTerm {
  std::size_t x1, x2, y1, y2;
  double mu;
};

/** @brief Sector blocks of -L on sectors 0..n_max, plus the pieces needed to verify them. */
struct FockBlocks {
  int n_max = 0;
  std::vector<SparseMatrix> jplus;       ///< [n]: n -> n+1, n = 0..n_max
  std::vector<SparseMatrix> jzero;       ///< [n]: n -> n
  std::vector<SparseMatrix> jminus;      ///< [n]: n -> n-1, n = 1..n_max+1 (slot 0 empty)
  std::vector<std::array<SparseMatrix, 6>> jzero_parts;  ///< [n]: six contributions summing to jzero[n]
  std::vector<SparseMatrix> jzero_direct;  ///< [n]: 1/4 sum mu (A^dag A + B^dag B)
  std::vector<SparseMatrix> jplus_direct;  ///< [n]: 1/4 sum mu A^dag B
  std::vector<Eigen::VectorXd> gram;     ///< [n], n = 0..n_max+1
  std::vector<std::vector<SparseMatrix>> annihilate;  ///< [n][s]: n -> n-1
  std::vector<std::vector<SparseMatrix>> create;      ///< [n][s]: n-1 -> n
  std::vector<JumpTerm> terms;
  double single_rate = 0.0;  ///< sum over y, h1, h2 of w omega^2 q
};

FockBlocks assemble_blocks(const KernelSpec& spec, const GridSpace& grid, int n_max);

/** @brief Weighted adjoint G_to^{-1}... of an operator from sector `from` to sector `to`. */
SparseMatrix weighted_adjoint(const SparseMatrix& T, const Eigen::VectorXd& gram_from, const Eigen::VectorXd& gram_to);

/** @brief Operator norm from (G_from) to (G_to) by power iteration. */
double weighted_norm(const SparseMatrix& T, const Eigen::VectorXd& gram_from, const Eigen::VectorXd& gram_to);

/** @brief Truncated -L on sectors 0..n_max as one dense matrix (sector-major ordering). */
Eigen::MatrixXd truncated_generator(const FockBlocks& blocks);
/** @brief Block-diagonal Gram weights matching truncated_generator. */
Eigen::VectorXd truncated_gram(const FockBlocks& blocks);

struct NormRow {
  int n = 0;
  double jplus = 0.0;
  double jzero = 0.0;
  double jminus = 0.0;  ///< norm of J^- from sector n+1 down to n
};

std::vector<NormRow> verify_norm_growth(const FockBlocks& blocks, int n_max);

struct GrowthExponents {
  double jplus = 0.0;
  double jzero = 0.0;
};

/** @brief Least-squares slopes of log norm against log n over n = 2..n_max. */
GrowthExponents fit_growth(const std::vector<NormRow>& rows);

struct FormCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_diff = 0.0;
  double rel_diff = 0.0;
};

/** @brief <f, (J+ + J0 + J-) f> against 1/4 sum mu |D f|^2; f is sector-major over 0..n_max. */
FormCheck form_equality_check(const FockBlocks& blocks, const Eigen::VectorXd& f);

/** @brief Random vector across sectors 0..n_max (standard normal coefficients). */
Eigen::VectorXd random_fock_vector(const FockBlocks& blocks, Rng& rng);

/** @brief Smallest nonzero eigenvalue of the number operator on sectors 0..n_max. */
double second_quantization_gap(const GridSpace& grid, int n_max);

/** @brief Number operator sum_s w a^dag_s a_s on sector n. */
SparseMatrix number_operator(const GridSpace& grid, int n);


/** @brief Structural checks of the truncated second-quantized generator. */
struct FockStructureReport {
  double adjoint_error = 0.0;    ///< max |adj(J+) - J-| / max |J-|
  double symmetry_error = 0.0;   ///< max asymmetry of the Gram-symmetrized -L, relative to its norm
  double min_eigenvalue = 0.0;
  double operator_norm = 0.0;
  double vacuum_residual = 0.0;  ///< max |(-L) e_0|
  FormCheck form;
  std::vector<NormRow> norms;
  GrowthExponents exponents;
  bool adjoint_pass = false;
  bool symmetric_pass = false;
  bool psd_pass = false;
  bool vacuum_pass = false;
  bool form_pass = false;
  bool growth_pass = false;
  bool pass = false;
};

inline constexpr double kJPlusExponentBound = 1.65;
inline constexpr double kJZeroExponentBound = 2.15;

FockStructureReport fock_structure_report(const KernelSpec& spec, const GridSpace& grid, int n_max, Rng& rng);

}  // namespace contjump
