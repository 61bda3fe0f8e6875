#include "contjump/fock.hpp"

#include <algorithm>
#include <cmath>

namespace contjump {

GridSpace::GridSpace(TorusGeometry geom, int sites_per_dim, double z) : geom_(geom), m_(sites_per_dim), z_(z) {
  if (sites_per_dim < 1) throw InvalidParameter("grid needs at least one site per dimension");
  if (!(z > 0.0)) throw InvalidParameter("intensity z must be positive");
  sites_ = 1;
  for (int k = 0; k < geom_.dim(); ++k) sites_ *= static_cast<std::size_t>(m_);
  w_ = z * std::pow(spacing(), geom_.dim());
}

Vec GridSpace::site_position(std::size_t s) const {
  Vec x{};
  for (int k = geom_.dim() - 1; k >= 0; --k) {
    x[k] = (static_cast<double>(s % static_cast<std::size_t>(m_)) + 0.5) * spacing();
    s /= static_cast<std::size_t>(m_);
  }
  return x;
}

std::size_t GridSpace::shift(std::size_t s, const std::array<int, kMaxDim>& k) const {
  int d = geom_.dim();
  std::array<int, kMaxDim> c{};
  for (int q = d - 1; q >= 0; --q) {
    c[q] = static_cast<int>(s % static_cast<std::size_t>(m_));
    s /= static_cast<std::size_t>(m_);
  }
  std::size_t out = 0;
  for (int q = 0; q < d; ++q) out = out * static_cast<std::size_t>(m_) + static_cast<std::size_t>(((c[q] + k[q]) % m_ + m_) % m_);
  return out;
}

void GridSpace::ensure(int n) const {
  if (n < 0) throw InvalidParameter("sector index must be nonnegative");
  while (static_cast<int>(bases_.size()) <= n) {
    int k = static_cast<int>(bases_.size());
    // dimension C(sites + k - 1, k)
    double dimension = 1.0;
    for (int i = 1; i <= k; ++i) dimension = dimension * static_cast<double>(sites_ + static_cast<std::size_t>(i) - 1) / i;
    if (dimension > static_cast<double>(kSectorBudget))
      throw SizeError("sector " + std::to_string(k) + " exceeds the basis budget");
    std::vector<std::vector<std::size_t>> basis;
    std::vector<std::size_t> cur(static_cast<std::size_t>(k), 0);
    if (k == 0) {
      basis.push_back({});
    } else {
      for (;;) {
        basis.push_back(cur);
        int pos = k - 1;
        while (pos >= 0 && cur[static_cast<std::size_t>(pos)] == sites_ - 1) --pos;
        if (pos < 0) break;
        std::size_t v = cur[static_cast<std::size_t>(pos)] + 1;
        for (int q = pos; q < k; ++q) cur[static_cast<std::size_t>(q)] = v;
      }
    }
    std::map<std::vector<std::size_t>, std::size_t> look;
    for (std::size_t i = 0; i < basis.size(); ++i) look.emplace(basis[i], i);
    bases_.push_back(std::move(basis));
    lookup_.push_back(std::move(look));
  }
}

const std::vector<std::vector<std::size_t>>& GridSpace::basis(int n) const {
  ensure(n);
  return bases_[static_cast<std::size_t>(n)];
}

std::size_t GridSpace::index(int n, const std::vector<std::size_t>& multiset) const {
  ensure(n);
  return lookup_[static_cast<std::size_t>(n)].at(multiset);
}

Eigen::VectorXd GridSpace::gram(int n) const {
  const auto& b = basis(n);
  Eigen::VectorXd g(static_cast<Eigen::Index>(b.size()));
  double nf = std::tgamma(n + 1.0);
  double base = nf * nf * std::pow(w_, n);
  for (std::size_t i = 0; i < b.size(); ++i) {
    double denom = 1.0;
    std::size_t run = 1;
    for (std::size_t q = 1; q <= b[i].size(); ++q) {
      if (q < b[i].size() && b[i][q] == b[i][q - 1]) {
        ++run;
      } else {
        denom *= std::tgamma(static_cast<double>(run) + 1.0);
        run = 1;
      }
    }
    g[static_cast<Eigen::Index>(i)] = base / denom;
  }
  return g;
}

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrix zero(std::size_t rows, std::size_t cols) {
  return SparseMatrix(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::size_t mult(const std::vector<std::size_t>& m, std::size_t s) {
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), s));
}

std::vector<std::size_t> without(std::vector<std::size_t> m, std::size_t s) {
  m.erase(std::find(m.begin(), m.end(), s));
  return m;
}

}  // namespace

FockBlocks assemble_blocks(const KernelSpec& spec, const GridSpace& grid, int n_max) {
  if (n_max < 0) throw InvalidParameter("n_max must be nonnegative");
  const int top = n_max + 1;
  const TorusGeometry& geom = grid.geom();
  const int d = geom.dim();
  const std::size_t S = grid.site_count();
  const double w = grid.weight();
  const double delta = grid.spacing();
  const double omega = std::pow(delta, d);
  for (int n = 0; n <= top; ++n) grid.basis(n);

  FockBlocks B;
  B.n_max = n_max;
  auto dim = [&](int n) { return n < 0 ? std::size_t{0} : grid.basis(n).size(); };
  for (int n = 0; n <= top; ++n) B.gram.push_back(grid.gram(n));

  B.annihilate.resize(static_cast<std::size_t>(top) + 1);
  B.create.resize(static_cast<std::size_t>(top) + 1);
  for (int n = 1; n <= top; ++n) {
    for (std::size_t s = 0; s < S; ++s) {
      std::vector<Triplet> ta, tc;
      const auto& basis = grid.basis(n);
      for (std::size_t i = 0; i < basis.size(); ++i) {
        std::size_t ms = mult(basis[i], s);
        if (ms == 0) continue;
        std::size_t j = grid.index(n - 1, without(basis[i], s));
        ta.emplace_back(static_cast<int>(j), static_cast<int>(i), static_cast<double>(n));
        tc.emplace_back(static_cast<int>(i), static_cast<int>(j), static_cast<double>(ms) / (n * w));
      }
      SparseMatrix a = zero(dim(n - 1), dim(n)), c = zero(dim(n), dim(n - 1));
      a.setFromTriplets(ta.begin(), ta.end());
      c.setFromTriplets(tc.begin(), tc.end());
      B.annihilate[static_cast<std::size_t>(n)].push_back(std::move(a));
      B.create[static_cast<std::size_t>(n)].push_back(std::move(c));
    }
  }

  // lattice jumps
  struct Jump {
    std::array<int, kMaxDim> k;
    Vec h;
    double a;
  };
  std::vector<Jump> jumps;
  int K = static_cast<int>(std::floor(spec.a_reach() / delta + 1e-9));
  int span = 2 * K + 1;
  std::size_t total = 1;
  for (int q = 0; q < d; ++q) total *= static_cast<std::size_t>(span);
  for (std::size_t lin = 0; lin < total; ++lin) {
    Jump j{};
    std::size_t rest = lin;
    for (int q = d - 1; q >= 0; --q) {
      j.k[q] = static_cast<int>(rest % static_cast<std::size_t>(span)) - K;
      rest /= static_cast<std::size_t>(span);
      j.h[q] = j.k[q] * delta;
    }
    j.a = spec.a_value(j.h);
    if (j.a > 0.0) jumps.push_back(j);
  }

  const bool momentum = spec.variant() == KernelVariant::MomentumConserving;
  for (std::size_t x1 = 0; x1 < S; ++x1)
    for (std::size_t x2 = 0; x2 < S; ++x2) {
      Vec xbar = geom.min_image_diff(grid.site_position(x1), grid.site_position(x2));
      for (const auto& j1 : jumps) {
        if (momentum) {
          double q = j1.a * spec.momentum_part(spec.b_value(geom.reduce(xbar - j1.h)));
          if (q == 0.0) continue;
          std::array<int, kMaxDim> neg{};
          for (int c = 0; c < d; ++c) neg[c] = -j1.k[c];
          B.terms.push_back({x1, x2, grid.shift(x1, j1.k), grid.shift(x2, neg), w * w * omega * q});
          continue;
        }
        for (const auto& j2 : jumps) {
          double q = j1.a * j2.a * spec.combine(spec.b_value(xbar), spec.b_value(geom.reduce(xbar + j2.h - j1.h)));
          if (q == 0.0) continue;
          B.terms.push_back({x1, x2, grid.shift(x1, j1.k), grid.shift(x2, j2.k), w * w * omega * omega * q});
        }
      }
    }
  for (const auto& t : B.terms)
    if (t.x1 == 0) B.single_rate += t.mu / w;

  auto ann = [&](int n, std::size_t s) -> const SparseMatrix& {
    return B.annihilate[static_cast<std::size_t>(n)][s];
  };
  auto cre = [&](int n, std::size_t s) -> const SparseMatrix& { return B.create[static_cast<std::size_t>(n)][s]; };

  B.jplus.resize(static_cast<std::size_t>(n_max) + 1);
  B.jzero.resize(static_cast<std::size_t>(n_max) + 1);
  B.jminus.resize(static_cast<std::size_t>(top) + 1);
  B.jzero_parts.resize(static_cast<std::size_t>(n_max) + 1);
  B.jzero_direct.resize(static_cast<std::size_t>(n_max) + 1);
  B.jplus_direct.resize(static_cast<std::size_t>(n_max) + 1);
  B.jminus[0] = zero(0, dim(0));

  for (int n = 0; n <= n_max; ++n) {
    auto& parts = B.jzero_parts[static_cast<std::size_t>(n)];
    for (auto& p : parts) p = zero(dim(n), dim(n));
    SparseMatrix jp = zero(dim(n + 1), dim(n));
    SparseMatrix jm = zero(dim(n), dim(n + 1));
    SparseMatrix dz = zero(dim(n), dim(n));
    SparseMatrix dp = zero(dim(n + 1), dim(n));
    for (const auto& t : B.terms) {
      if (n >= 1) {
        SparseMatrix c1 = ann(n, t.x1), c2 = ann(n, t.x2), b1 = ann(n, t.y1), b2 = ann(n, t.y2);
        SparseMatrix c1d = cre(n, t.x1);
        parts[2] += t.mu * (c1d * c1);
        parts[3] += t.mu * (c1d * c2);
        parts[4] -= t.mu * (c1d * b1);
        parts[5] -= t.mu * (c1d * b2);
        SparseMatrix Bop = b1 + b2 - c1 - c2;             // n -> n-1
        SparseMatrix Bdag = cre(n, t.y1) + cre(n, t.y2) - cre(n, t.x1) - cre(n, t.x2);  // n-1 -> n
        dz += (0.25 * t.mu) * (Bdag * Bop);
        SparseMatrix Rdag_up = cre(n + 1, t.x1) * cre(n, t.x2);  // n-1 -> n+1
        SparseMatrix Pdag_up = cre(n + 1, t.y1) * cre(n, t.y2);
        jp += t.mu * (Rdag_up * c1 - Rdag_up * b1);
        dp += (0.25 * t.mu) * ((Pdag_up - Rdag_up) * Bop);
        SparseMatrix R_down = ann(n, t.x2) * ann(n + 1, t.x1);  // n+1 -> n-1
        jm += t.mu * (c1d * R_down - cre(n, t.y1) * R_down);
      }
      if (n >= 2) {
        SparseMatrix R = ann(n - 1, t.x2) * ann(n, t.x1);
        SparseMatrix P = ann(n - 1, t.y2) * ann(n, t.y1);
        SparseMatrix Rdag = cre(n, t.x1) * cre(n - 1, t.x2);
        SparseMatrix Pdag = cre(n, t.y1) * cre(n - 1, t.y2);
        parts[0] += (0.5 * t.mu) * (Rdag * R);
        parts[1] -= (0.5 * t.mu) * (Rdag * P);
        dz += (0.25 * t.mu) * ((Pdag - Rdag) * (P - R));
      }
    }
    SparseMatrix jz = zero(dim(n), dim(n));
    for (const auto& p : parts) jz += p;
    for (auto* m : {&jz, &jp, &jm, &dz, &dp}) m->prune(0.0);
    B.jzero[static_cast<std::size_t>(n)] = jz;
    B.jplus[static_cast<std::size_t>(n)] = jp;
    B.jminus[static_cast<std::size_t>(n) + 1] = jm;
    B.jzero_direct[static_cast<std::size_t>(n)] = dz;
    B.jplus_direct[static_cast<std::size_t>(n)] = dp;
  }
  return B;
}

SparseMatrix weighted_adjoint(const SparseMatrix& T, const Eigen::VectorXd& gram_from, const Eigen::VectorXd& gram_to) {
  SparseMatrix out = SparseMatrix(T.transpose());
  out = gram_from.cwiseInverse().asDiagonal() * out * gram_to.asDiagonal();
  return out;
}

double weighted_norm(const SparseMatrix& T, const Eigen::VectorXd& gram_from, const Eigen::VectorXd& gram_to) {
  if (T.rows() == 0 || T.cols() == 0 || T.nonZeros() == 0) return 0.0;
  SparseMatrix Tadj = weighted_adjoint(T, gram_from, gram_to);
  Eigen::VectorXd v(T.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  auto wnorm = [](const Eigen::VectorXd& x, const Eigen::VectorXd& g) { return std::sqrt(x.dot(g.cwiseProduct(x))); };
  v /= wnorm(v, gram_from);
  double est = 0.0;
  for (int it = 0; it < 20000; ++it) {
    Eigen::VectorXd u = Tadj * (T * v);
    double nu = wnorm(u, gram_from);
    if (nu == 0.0) return 0.0;
    double next = std::sqrt(nu);
    v = u / nu;
    if (it > 10 && std::abs(next - est) <= 1e-15 * next) {
      est = next;
      break;
    }
    est = next;
  }
  return wnorm(T * v, gram_to);
}

Eigen::MatrixXd truncated_generator(const FockBlocks& blocks) {
  int n_max = blocks.n_max;
  std::vector<Eigen::Index> off(static_cast<std::size_t>(n_max) + 2, 0);
  for (int n = 0; n <= n_max; ++n)
    off[static_cast<std::size_t>(n) + 1] = off[static_cast<std::size_t>(n)] + blocks.gram[static_cast<std::size_t>(n)].size();
  Eigen::Index total = off.back();
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(total, total);
  for (int n = 0; n <= n_max; ++n) {
    auto un = static_cast<std::size_t>(n);
    T.block(off[un], off[un], blocks.jzero[un].rows(), blocks.jzero[un].cols()) = Eigen::MatrixXd(blocks.jzero[un]);
    if (n < n_max) {
      T.block(off[un + 1], off[un], blocks.jplus[un].rows(), blocks.jplus[un].cols()) = Eigen::MatrixXd(blocks.jplus[un]);
      T.block(off[un], off[un + 1], blocks.jminus[un + 1].rows(), blocks.jminus[un + 1].cols()) =
          Eigen::MatrixXd(blocks.jminus[un + 1]);
    }
  }
  return T;
}

Eigen::VectorXd truncated_gram(const FockBlocks& blocks) {
  Eigen::Index total = 0;
  for (int n = 0; n <= blocks.n_max; ++n) total += blocks.gram[static_cast<std::size_t>(n)].size();
  Eigen::VectorXd g(total);
  Eigen::Index pos = 0;
  for (int n = 0; n <= blocks.n_max; ++n) {
    const auto& gn = blocks.gram[static_cast<std::size_t>(n)];
    g.segment(pos, gn.size()) = gn;
    pos += gn.size();
  }
  return g;
}

std::vector<NormRow> verify_norm_growth(const FockBlocks& blocks, int n_max) {
  if (n_max > blocks.n_max) throw InvalidParameter("n_max exceeds the assembled truncation");
  std::vector<NormRow> rows;
  for (int n = 0; n <= n_max; ++n) {
    auto un = static_cast<std::size_t>(n);
    NormRow r;
    r.n = n;
    r.jplus = weighted_norm(blocks.jplus[un], blocks.gram[un], blocks.gram[un + 1]);
    r.jzero = weighted_norm(blocks.jzero[un], blocks.gram[un], blocks.gram[un]);
    r.jminus = weighted_norm(blocks.jminus[un + 1], blocks.gram[un + 1], blocks.gram[un]);
    rows.push_back(r);
  }
  return rows;
}

GrowthExponents fit_growth(const std::vector<NormRow>& rows) {
  std::vector<double> x, yp, y0;
  for (const auto& r : rows) {
    if (r.n < 2) continue;
    x.push_back(std::log(static_cast<double>(r.n)));
    yp.push_back(std::log(r.jplus));
    y0.push_back(std::log(r.jzero));
  }
  if (x.size() < 2) throw InvalidParameter("growth fit needs n_max >= 3");
  return {fit_slope(x, yp), fit_slope(x, y0)};
}

FormCheck form_equality_check(const FockBlocks& blocks, const Eigen::VectorXd& f) {
  Eigen::MatrixXd T = truncated_generator(blocks);
  Eigen::VectorXd g = truncated_gram(blocks);
  if (f.size() != g.size()) throw InvalidParameter("vector size does not match the truncated space");
  FormCheck out;
  out.lhs = f.dot(g.cwiseProduct(T * f));

  int n_max = blocks.n_max;
  std::vector<Eigen::VectorXd> parts;
  Eigen::Index pos = 0;
  for (int n = 0; n <= n_max; ++n) {
    auto sz = blocks.gram[static_cast<std::size_t>(n)].size();
    parts.push_back(f.segment(pos, sz));
    pos += sz;
  }
  const auto& A = blocks.annihilate;
  double rhs = 0.0;
  for (const auto& t : blocks.terms) {
    std::vector<Eigen::VectorXd> df;
    for (int n = 0; n < n_max; ++n) df.push_back(Eigen::VectorXd::Zero(blocks.gram[static_cast<std::size_t>(n)].size()));
    for (int n = 1; n <= n_max; ++n) {
      auto un = static_cast<std::size_t>(n);
      const auto& fn = parts[un];
      df[un - 1] += A[un][t.y1] * fn + A[un][t.y2] * fn - A[un][t.x1] * fn - A[un][t.x2] * fn;
      if (n >= 2) df[un - 2] += A[un - 1][t.y2] * (A[un][t.y1] * fn) - A[un - 1][t.x2] * (A[un][t.x1] * fn);
    }
    double norm2 = 0.0;
    for (int n = 0; n < n_max; ++n) {
      auto un = static_cast<std::size_t>(n);
      norm2 += df[un].dot(blocks.gram[un].cwiseProduct(df[un]));
    }
    rhs += 0.25 * t.mu * norm2;
  }
  out.rhs = rhs;
  out.abs_diff = std::abs(out.lhs - out.rhs);
  double scale = std::max(std::abs(out.lhs), std::abs(out.rhs));
  out.rel_diff = scale > 0.0 ? out.abs_diff / scale : 0.0;
  return out;
}

Eigen::VectorXd random_fock_vector(const FockBlocks& blocks, Rng& rng) {
  Eigen::VectorXd g = truncated_gram(blocks);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd f(g.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = normal(rng);
  return f;
}

SparseMatrix number_operator(const GridSpace& grid, int n) {
  const auto& basis = grid.basis(n);
  SparseMatrix N = zero(basis.size(), basis.size());
  if (n == 0) return N;
  std::vector<Triplet> trip;
  double w = grid.weight();
  for (std::size_t i = 0; i < basis.size(); ++i) {
    double diag = 0.0;
    // sum_s w a^dag_s a_s: a_s contributes n, a^dag_s contributes mult_s / (n w)
    for (std::size_t s = 0; s < grid.site_count(); ++s) {
      std::size_t ms = mult(basis[i], s);
      if (ms) diag += w * static_cast<double>(n) * static_cast<double>(ms) / (n * w);
    }
    trip.emplace_back(static_cast<int>(i), static_cast<int>(i), diag);
  }
  N.setFromTriplets(trip.begin(), trip.end());
  return N;
}

double second_quantization_gap(const GridSpace& grid, int n_max) {
  double gap = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= n_max; ++n) {
    Eigen::MatrixXd N(number_operator(grid, n));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(N);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      double ev = es.eigenvalues()[i];
      if (ev > 1e-12) gap = std::min(gap, ev);
    }
  }
  return gap;
}


FockStructureReport fock_structure_report(const KernelSpec& spec, const GridSpace& grid, int n_max, Rng& rng) {
  FockBlocks blocks = assemble_blocks(spec, grid, n_max);
  FockStructureReport r;
  for (int n = 0; n <= n_max; ++n) {
    SparseMatrix adj = weighted_adjoint(blocks.jplus[n], blocks.gram[n], blocks.gram[n + 1]);
    Eigen::MatrixXd jm(blocks.jminus[n + 1]);
    double scale = std::max(jm.cwiseAbs().maxCoeff(), 1e-300);
    r.adjoint_error = std::max(r.adjoint_error, (Eigen::MatrixXd(adj) - jm).cwiseAbs().maxCoeff() / scale);
  }
  Eigen::MatrixXd T = truncated_generator(blocks);
  Eigen::VectorXd g = truncated_gram(blocks);
  Eigen::MatrixXd S = g.cwiseSqrt().asDiagonal() * T * g.cwiseSqrt().cwiseInverse().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (S + S.transpose()));
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  r.operator_norm = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(r.operator_norm > 0.0))
    throw DomainError("generator vanishes on this lattice: the kernel has no nontrivial moves at this spacing");
  double norm = r.operator_norm;
  r.symmetry_error = (S - S.transpose()).cwiseAbs().maxCoeff() / norm;
  r.vacuum_residual = T.col(0).cwiseAbs().maxCoeff();
  Eigen::VectorXd f = random_fock_vector(blocks, rng);
  r.form = form_equality_check(blocks, f);
  r.norms = verify_norm_growth(blocks, n_max);
  r.exponents = fit_growth(r.norms);

  r.adjoint_pass = r.adjoint_error <= 1e-12;
  r.symmetric_pass = r.symmetry_error <= 1e-12;
  r.psd_pass = r.min_eigenvalue >= -1e-8 * norm;
  r.vacuum_pass = r.vacuum_residual <= 1e-12 * norm;
  r.form_pass = r.form.rel_diff <= 1e-8;
  r.growth_pass = r.exponents.jplus <= kJPlusExponentBound && r.exponents.jzero <= kJZeroExponentBound;
  r.pass = r.adjoint_pass && r.symmetric_pass && r.psd_pass && r.vacuum_pass && r.form_pass && r.growth_pass;
  return r;
}

}  // namespace contjump
