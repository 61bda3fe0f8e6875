#include "contjump/generators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <tuple>

namespace contjump {

namespace {

/** Profile values of one observable at every point and, lazily, at displaced positions. */
class MoveTable {
 public:
  MoveTable(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, const JumpQuadrature& quad,
            double scale, double reach)
      : F_(F), geom_(geom), gamma_(gamma), quad_(quad), scale_(scale), n_(F.arity()) {
    std::size_t m = gamma.size();
    values_.assign(m * n_, 0.0);
    sums_.assign(n_, 0.0);
    near_.assign(m, false);
    for (std::size_t i = 0; i < m; ++i) {
      near_[i] = F.touches(geom, gamma.points[i], reach);
      if (!near_[i]) continue;
      profile_values(F, geom, gamma.points[i], std::span<double>(&values_[i * n_], n_));
      for (std::size_t j = 0; j < n_; ++j) sums_[j] += values_[i * n_ + j];
    }
    base_ = F.outer(sums_);
    plus_.resize(m);
    minus_.resize(m);
    scratch_.resize(n_);
  }

  double base() const { return base_; }
  bool near(std::size_t i) const { return near_[i]; }
  const std::vector<double>& sums() const { return sums_; }
  const double* values(std::size_t i) const { return &values_[i * n_]; }

  /** Displaced profile values of point i at node k; sign +1 or -1. */
  const double* displaced(std::size_t i, std::size_t k, int sign) {
    auto& slot = sign > 0 ? plus_[i] : minus_[i];
    if (slot.empty()) {
      slot.assign(quad_.nodes.size() * n_, 0.0);
      double s = sign > 0 ? scale_ : -scale_;
      for (std::size_t q = 0; q < quad_.nodes.size(); ++q) {
        Vec y = geom_.wrap(gamma_.points[i] + s * quad_.nodes[q]);
        profile_values(F_, geom_, y, std::span<double>(&slot[q * n_], n_));
      }
    }
    return &slot[k * n_];
  }

  /** F(moved) - F(gamma); a null displacement pointer leaves that point in place. */
  double delta(std::size_t i, const double* di, std::size_t j, const double* dj) {
    for (std::size_t c = 0; c < n_; ++c) scratch_[c] = sums_[c];
    if (di) {
      const double* vi = values(i);
      for (std::size_t c = 0; c < n_; ++c) scratch_[c] += di[c] - vi[c];
    }
    if (dj) {
      const double* vj = values(j);
      for (std::size_t c = 0; c < n_; ++c) scratch_[c] += dj[c] - vj[c];
    }
    return F_.outer(scratch_) - base_;
  }

 private:
  const Observable& F_;
  const TorusGeometry& geom_;
  const Configuration& gamma_;
  const JumpQuadrature& quad_;
  double scale_;
  std::size_t n_;
  std::vector<double> values_;
  std::vector<double> sums_;
  std::vector<bool> near_;
  double base_ = 0.0;
  std::vector<std::vector<double>> plus_;
  std::vector<std::vector<double>> minus_;
  std::vector<double> scratch_;
};

/** Unordered pairs (p < q) with at least one point flagged. */
std::vector<std::pair<std::size_t, std::size_t>> flagged_pairs(const std::vector<bool>& flag) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t m = flag.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (!flag[i]) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i || (flag[j] && j < i)) continue;
      out.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

/**
 * Sum over pairs of kappa * int int q * weight(deltas), where deltas[t] is the increment of
 * tables[t] under the move. Weight receives a pointer to one increment per table.
 */
template <class Weight>
double jump_pair_sum(const ScaledKernel& kernel, const TorusGeometry& geom, const Configuration& gamma,
                     std::vector<MoveTable>& tables, Weight weight) {
  const KernelSpec& spec = kernel.base();
  const JumpQuadrature& quad = spec.quadrature();
  const int d = spec.dim();
  const double s = kernel.jump_scale();
  const double range = kernel.interaction_range();
  const bool prune = range < 0.5 * geom.side();
  const std::size_t nodes = quad.nodes.size();
  const std::size_t nt = tables.size();

  std::vector<bool> flag(gamma.size(), false);
  for (const auto& t : tables)
    for (std::size_t i = 0; i < gamma.size(); ++i) flag[i] = flag[i] || t.near(i);

  std::vector<double> delta(nt);
  std::vector<double> bshift(quad.autocorrelation.size());
  std::vector<double> row(nodes);
  double total = 0.0;

  for (auto [p, q] : flagged_pairs(flag)) {
    Vec xbar = geom.min_image_diff(gamma.points[p], gamma.points[q]);
    if (prune && norm2(xbar) > range * range) continue;
    bool np = flag[p], nq = flag[q];
    double pair_total = 0.0;

    if (spec.variant() == KernelVariant::MomentumConserving) {
      for (std::size_t k = 0; k < nodes; ++k) {
        double bx = spec.b_value(geom.reduce(xbar - s * quad.nodes[k]));
        if (bx == 0.0) continue;
        double rate = quad.weights[k] * spec.momentum_part(bx);
        for (std::size_t t = 0; t < nt; ++t) {
          auto& tab = tables[t];
          const double* dp = tab.near(p) ? tab.displaced(p, k, +1) : nullptr;
          const double* dq = tab.near(q) ? tab.displaced(q, k, -1) : nullptr;
          delta[t] = (dp || dq) ? tab.delta(p, dp, q, dq) : 0.0;
        }
        pair_total += rate * weight(delta.data());
      }
      total += pair_total;
      continue;
    }

    double b0 = spec.b_value(xbar);
    bool any_shift = false;
    for (std::size_t slot = 0; slot < bshift.size(); ++slot) {
      bshift[slot] = quad.autocorrelation[slot] != 0.0 ? spec.b_value(geom.reduce(xbar + s * quad.offsets[slot])) : 0.0;
      any_shift = any_shift || bshift[slot] != 0.0;
    }
    if (b0 == 0.0 && !any_shift && spec.mutation() != Mutation::PreJumpOnly) continue;

    if (np && nq) {
      for (std::size_t k = 0; k < nodes; ++k) {
        for (std::size_t l = 0; l < nodes; ++l) {
          double rate = quad.weights[k] * quad.weights[l] *
                        spec.combine(b0, bshift[quad.diff_slot(quad.index[k], quad.index[l], d)]);
          if (rate == 0.0) continue;
          for (std::size_t t = 0; t < nt; ++t) {
            auto& tab = tables[t];
            const double* dp = tab.near(p) ? tab.displaced(p, k, +1) : nullptr;
            const double* dq = tab.near(q) ? tab.displaced(q, l, +1) : nullptr;
            delta[t] = (dp || dq) ? tab.delta(p, dp, q, dq) : 0.0;
          }
          pair_total += rate * weight(delta.data());
        }
      }
    } else {
      // Only one endpoint can change the observables: integrate out the other jump first.
      std::size_t mover = np ? p : q;
      for (std::size_t k = 0; k < nodes; ++k) {
        double r = 0.0;
        for (std::size_t l = 0; l < nodes; ++l) {
          std::size_t slot = np ? quad.diff_slot(quad.index[k], quad.index[l], d)
                                : quad.diff_slot(quad.index[l], quad.index[k], d);
          r += quad.weights[l] * spec.combine(b0, bshift[slot]);
        }
        row[k] = r * quad.weights[k];
      }
      for (std::size_t k = 0; k < nodes; ++k) {
        if (row[k] == 0.0) continue;
        for (std::size_t t = 0; t < nt; ++t) {
          auto& tab = tables[t];
          delta[t] = tab.near(mover) ? tab.delta(mover, tab.displaced(mover, k, +1), mover, nullptr) : 0.0;
        }
        pair_total += row[k] * weight(delta.data());
      }
    }
    total += pair_total;
  }
  return kernel.rate_prefactor() * total;
}

/** Sums, outer gradient and Hessian of a smooth observable at gamma. */
struct SmoothState {
  std::vector<double> sums;
  std::vector<double> grad;
  std::vector<double> hess;

  SmoothState(const Observable& F, const TorusGeometry& geom, const Configuration& gamma)
      : sums(profile_sums(F, geom, gamma)), grad(sums.size()), hess(sums.size() * sums.size()) {
    F.outer_gradient(sums, grad);
    F.outer_hessian(sums, hess);
  }
};

struct PointDerivs {
  Vec grad{};
  double lap = 0.0;
  std::vector<Vec> profile_grads;
};

PointDerivs point_derivs(const Observable& F, const SmoothState& st, const TorusGeometry& geom, const Vec& x) {
  const auto& ps = F.profiles();
  std::size_t n = ps.size();
  PointDerivs out;
  out.profile_grads.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.profile_grads[j] = ps[j].gradient(geom, x);
    out.grad = out.grad + st.grad[j] * out.profile_grads[j];
    out.lap += st.grad[j] * ps[j].laplacian(geom, x);
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) out.lap += st.hess[j * n + k] * dot(out.profile_grads[j], out.profile_grads[k]);
  return out;
}

std::vector<bool> touching(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                           double reach) {
  std::vector<bool> out(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) out[i] = F.touches(geom, gamma.points[i], reach);
  return out;
}

void require_smooth_b(const KernelSpec& spec) {
  if (!spec.b().differentiable()) throw NotDifferentiable("limit generator needs a differentiable b profile");
}

double diffusion_constant(const KernelSpec& spec) {
  const auto& k = spec.constants();
  return spec.variant() == KernelVariant::Factorized ? k.mean_a * k.c : k.c;
}

/** F(gamma minus removed points) - F(gamma) from per-point profile values. */
double removal_delta(const Observable& F, const std::vector<double>& sums, const double* vp, const double* vq,
                     double base, std::vector<double>& scratch) {
  for (std::size_t c = 0; c < sums.size(); ++c) scratch[c] = sums[c] - vp[c] - (vq ? vq[c] : 0.0);
  return F.outer(scratch) - base;
}

struct DeathParts {
  double pair = 0.0;    ///< sum over pairs of b(x2 - x1) (F(gamma \ pair) - F)
  double single = 0.0;  ///< sum over x of (F(gamma \ x) - F)
};

DeathParts death_sums(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                      const KernelSpec& spec) {
  std::size_t m = gamma.size(), n = F.arity();
  std::vector<double> vals(m * n, 0.0), sums(n, 0.0), scratch(n);
  auto flag = touching(F, geom, gamma, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (!flag[i]) continue;
    profile_values(F, geom, gamma.points[i], std::span<double>(&vals[i * n], n));
    for (std::size_t c = 0; c < n; ++c) sums[c] += vals[i * n + c];
  }
  double base = F.outer(sums);
  DeathParts out;
  for (std::size_t i = 0; i < m; ++i)
    if (flag[i]) out.single += removal_delta(F, sums, &vals[i * n], nullptr, base, scratch);
  double rb2 = spec.b_reach() * spec.b_reach();
  for (auto [p, q] : flagged_pairs(flag)) {
    Vec xbar = geom.min_image_diff(gamma.points[p], gamma.points[q]);
    if (norm2(xbar) > rb2) continue;
    double bv = spec.b_value(xbar);
    if (bv == 0.0) continue;
    out.pair += bv * removal_delta(F, sums, &vals[p * n], &vals[q * n], base, scratch);
  }
  return out;
}

/** Lattice on the torus used for birth integrals of general observables. */
struct TorusLattice {
  int per_dim = 0;
  double spacing = 0.0;
  std::size_t size = 0;
};

TorusLattice birth_lattice(const Observable& F, const TorusGeometry& geom, const KernelSpec& spec) {
  double rmin = spec.b_reach();
  for (const auto& p : F.profiles()) rmin = std::min(rmin, p.radius);
  int refine = geom.dim() == 1 ? 32 : (geom.dim() == 2 ? 8 : 4);
  TorusLattice lat;
  lat.per_dim = static_cast<int>(std::ceil(geom.side() * refine / rmin));
  lat.spacing = geom.side() / lat.per_dim;
  lat.size = 1;
  for (int k = 0; k < geom.dim(); ++k) lat.size *= static_cast<std::size_t>(lat.per_dim);
  return lat;
}

struct BirthParts {
  double single = 0.0;  ///< int (F(gamma + x) - F) dx
  double pair = 0.0;    ///< int int b(x2 - x1) (F(gamma + x1 + x2) - F) dx1 dx2
};

BirthParts birth_grid(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                      const KernelSpec& spec) {
  const int d = geom.dim();
  const std::size_t n = F.arity();
  TorusLattice lat = birth_lattice(F, geom, spec);
  const int P = lat.per_dim;
  auto coords = [&](std::size_t lin) {
    std::array<int, kMaxDim> c{};
    for (int k = d - 1; k >= 0; --k) {
      c[k] = static_cast<int>(lin % static_cast<std::size_t>(P));
      lin /= static_cast<std::size_t>(P);
    }
    return c;
  };
  auto point = [&](const std::array<int, kMaxDim>& c) {
    Vec x{};
    for (int k = 0; k < d; ++k) x[k] = (c[k] + 0.5) * lat.spacing;
    return x;
  };
  auto linear = [&](const std::array<int, kMaxDim>& c) {
    std::size_t lin = 0;
    for (int k = 0; k < d; ++k) lin = lin * static_cast<std::size_t>(P) + static_cast<std::size_t>(((c[k] % P) + P) % P);
    return lin;
  };

  std::vector<double> table(lat.size * n, 0.0);
  std::vector<char> active(lat.size, 0);
  std::vector<std::size_t> candidates;
  for (std::size_t lin = 0; lin < lat.size; ++lin) {
    Vec x = point(coords(lin));
    if (F.touches(geom, x, 0.0)) {
      profile_values(F, geom, x, std::span<double>(&table[lin * n], n));
      for (std::size_t c = 0; c < n; ++c) active[lin] = active[lin] || table[lin * n + c] != 0.0;
    }
    if (F.touches(geom, x, spec.b_reach())) candidates.push_back(lin);
  }

  auto sums = profile_sums(F, geom, gamma);
  double base = F.outer(sums);
  std::vector<double> scratch(n);
  double cell = std::pow(lat.spacing, d);
  BirthParts out;
  for (std::size_t lin = 0; lin < lat.size; ++lin) {
    if (!active[lin]) continue;
    for (std::size_t c = 0; c < n; ++c) scratch[c] = sums[c] + table[lin * n + c];
    out.single += F.outer(scratch) - base;
  }
  out.single *= cell;

  // b offsets on the same lattice
  int mmax = static_cast<int>(std::floor(spec.b_reach() / lat.spacing));
  std::vector<std::array<int, kMaxDim>> offs;
  std::vector<double> bw;
  int span = 2 * mmax + 1;
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(span);
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::array<int, kMaxDim> m{};
    Vec u{};
    std::size_t rest = lin;
    for (int k = d - 1; k >= 0; --k) {
      m[k] = static_cast<int>(rest % static_cast<std::size_t>(span)) - mmax;
      rest /= static_cast<std::size_t>(span);
      u[k] = m[k] * lat.spacing;
    }
    double bv = spec.b_value(u);
    if (bv == 0.0) continue;
    offs.push_back(m);
    bw.push_back(bv);
  }
  for (std::size_t c1 : candidates) {
    auto base1 = coords(c1);
    for (std::size_t o = 0; o < offs.size(); ++o) {
      std::array<int, kMaxDim> c2{};
      for (int k = 0; k < d; ++k) c2[k] = base1[k] + offs[o][k];
      std::size_t l2 = linear(c2);
      if (!active[c1] && !active[l2]) continue;
      for (std::size_t c = 0; c < n; ++c) scratch[c] = sums[c] + table[c1 * n + c] + table[l2 * n + c];
      out.pair += bw[o] * (F.outer(scratch) - base);
    }
  }
  out.pair *= cell * cell;
  return out;
}

int exp_birth_nodes(int dim) { return dim == 1 ? 1024 : (dim == 2 ? 64 : 16); }

ExpBirthIntegrals compute_exp_birth(const TorusGeometry& geom, const KernelSpec& spec, const TestProfile& phi) {
  const int d = geom.dim();
  const int n = exp_birth_nodes(d);
  const double h = 2.0 * phi.radius / n;
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(n);
  std::vector<double> psi(total, 0.0);
  double single = 0.0;
  for (std::size_t lin = 0; lin < total; ++lin) {
    Vec x = phi.center;
    std::size_t rest = lin;
    for (int k = d - 1; k >= 0; --k) {
      x[k] += -phi.radius + (static_cast<double>(rest % static_cast<std::size_t>(n)) + 0.5) * h;
      rest /= static_cast<std::size_t>(n);
    }
    psi[lin] = std::expm1(phi.value(geom, geom.wrap(x)));
    single += psi[lin];
  }
  double cell = std::pow(h, d);
  single *= cell;

  int mmax = static_cast<int>(std::floor(spec.b_reach() / h));
  double cross = 0.0;
  int span = 2 * mmax + 1;
  std::size_t offsets = 1;
  for (int k = 0; k < d; ++k) offsets *= static_cast<std::size_t>(span);
  for (std::size_t o = 0; o < offsets; ++o) {
    std::array<int, kMaxDim> m{};
    Vec u{};
    std::size_t rest = o;
    for (int k = d - 1; k >= 0; --k) {
      m[k] = static_cast<int>(rest % static_cast<std::size_t>(span)) - mmax;
      rest /= static_cast<std::size_t>(span);
      u[k] = m[k] * h;
    }
    double bv = spec.b_value(u);
    if (bv == 0.0) continue;
    double acc = 0.0;
    for (std::size_t lin = 0; lin < total; ++lin) {
      if (psi[lin] == 0.0) continue;
      std::size_t rest2 = lin, target = 0;
      std::array<int, kMaxDim> c{};
      for (int k = d - 1; k >= 0; --k) {
        c[k] = static_cast<int>(rest2 % static_cast<std::size_t>(n)) + m[k];
        rest2 /= static_cast<std::size_t>(n);
      }
      bool inside = true;
      for (int k = 0; k < d; ++k) {
        if (c[k] < 0 || c[k] >= n) inside = false;
        target = target * static_cast<std::size_t>(n) + static_cast<std::size_t>(std::max(c[k], 0));
      }
      if (inside) acc += psi[lin] * psi[target];
    }
    cross += bv * acc;
  }
  cross *= cell * cell;
  return {single, cross + 2.0 * spec.constants().mean_b * single};
}

void require_exponential(const Observable& F) {
  if (!F.is_exponential()) throw UnsupportedError("piecewise decomposition needs an exponential observable");
}

}  // namespace

double apply_L_scaled(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                      const ScaledKernel& kernel) {
  if (gamma.size() < 2) return 0.0;
  std::vector<MoveTable> tables;
  tables.emplace_back(F, geom, gamma, kernel.base().quadrature(), kernel.jump_scale(), kernel.jump_reach());
  return jump_pair_sum(kernel, geom, gamma, tables, [](const double* dl) { return dl[0]; });
}

double apply_L(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, const KernelSpec& spec) {
  return apply_L_scaled(F, geom, gamma, scaled_kernel_diffusive(spec, 1.0));
}

double apply_L_eps_diffusive(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                             const KernelSpec& spec, double eps) {
  return apply_L_scaled(F, geom, gamma, scaled_kernel_diffusive(spec, eps));
}

double apply_L_eps_bd(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                      const KernelSpec& spec, double eps) {
  return apply_L_scaled(F, geom, gamma, scaled_kernel_bd(spec, eps));
}

double apply_L0_diffusive(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                          const KernelSpec& spec) {
  require_smooth_b(spec);
  if (gamma.size() < 2) return 0.0;
  const double c = diffusion_constant(spec);
  const bool momentum = spec.variant() == KernelVariant::MomentumConserving;
  const double rb2 = spec.b_reach() * spec.b_reach();
  SmoothState st(F, geom, gamma);
  auto flag = touching(F, geom, gamma, 0.0);
  std::vector<PointDerivs> derivs(gamma.size());
  double total = 0.0;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (!flag[i]) continue;
    const Vec& x = gamma.points[i];
    double A = 0.0;
    Vec B{};
    for (std::size_t j = 0; j < gamma.size(); ++j) {
      if (j == i) continue;
      Vec u = geom.min_image_diff(gamma.points[j], x);
      if (norm2(u) > rb2) continue;
      A += spec.b_value(u);
      B = B + spec.b_gradient(u);
    }
    derivs[i] = point_derivs(F, st, geom, x);
    total += (momentum ? 0.5 : 1.0) * derivs[i].lap * A + dot(derivs[i].grad, B);
  }
  if (momentum) {
    std::size_t n = F.arity();
    for (std::size_t i = 0; i < gamma.size(); ++i) {
      if (!flag[i]) continue;
      for (std::size_t j = i + 1; j < gamma.size(); ++j) {
        if (!flag[j]) continue;
        Vec xbar = geom.min_image_diff(gamma.points[i], gamma.points[j]);
        if (norm2(xbar) > rb2) continue;
        double bv = spec.b_value(xbar);
        if (bv == 0.0) continue;
        double mixed = 0.0;
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = 0; b < n; ++b)
            mixed += st.hess[a * n + b] * dot(derivs[i].profile_grads[a], derivs[j].profile_grads[b]);
        total -= bv * mixed;
      }
    }
  }
  return c * total;
}

ExpBirthIntegrals exp_birth_integrals(const TorusGeometry& geom, const KernelSpec& spec, const TestProfile& phi) {
  using Key = std::tuple<int, double, int, double, double, double, double, double, double, double>;
  static std::mutex mutex;
  static std::map<Key, ExpBirthIntegrals> cache;
  Key key{geom.dim(),        geom.side(),    static_cast<int>(spec.b().shape), spec.b().radius, spec.b().height,
          phi.center[0],     phi.center[1],  phi.center[2],                    phi.radius,      phi.amplitude};
  {
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  ExpBirthIntegrals value = compute_exp_birth(geom, spec.with_mutation(Mutation::None), phi);
  std::lock_guard<std::mutex> lock(mutex);
  cache.emplace(key, value);
  return value;
}

double apply_L0_bd(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                   const KernelSpec& spec, double z, BirthQuadrature mode) {
  const auto& k = spec.constants();
  double a2 = k.mean_a * k.mean_a;
  DeathParts deaths = death_sums(F, geom, gamma, spec);
  BirthParts births;
  if (F.is_exponential() && mode == BirthQuadrature::Auto) {
    ExpBirthIntegrals I = exp_birth_integrals(geom, spec, F.exponential_profile());
    double f0 = evaluate(F, geom, gamma);
    births.single = f0 * I.single;
    births.pair = f0 * I.pair;
  } else {
    births = birth_grid(F, geom, gamma, spec);
  }
  return a2 * (deaths.pair + z * k.mean_b * deaths.single + z * k.mean_b * z * births.single +
               0.5 * z * z * births.pair);
}

BdPieces bd_pieces(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                   const KernelSpec& spec, double eps) {
  require_exponential(F);
  if (spec.variant() != KernelVariant::Factorized || spec.mutation() != Mutation::None)
    throw UnsupportedError("piecewise decomposition is defined for the unmutated factorized kernel");
  ScaledKernel kernel = scaled_kernel_bd(spec, eps);
  const JumpQuadrature& quad = spec.quadrature();
  const TestProfile& phi = F.exponential_profile();
  const int d = geom.dim();
  const double s = kernel.jump_scale();
  const std::size_t m = gamma.size(), nodes = quad.nodes.size();
  const double a2 = spec.constants().mean_a * spec.constants().mean_a;

  std::vector<double> ph(m);
  double S = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    ph[i] = phi.value(geom, gamma.points[i]);
    S += ph[i];
  }
  const double f0 = std::exp(S);

  // E[i][k] = exp(phi(x_i + s u_k)); trivial rows (all ones) are marked.
  std::vector<std::vector<double>> E(m);
  std::vector<double> M(m, spec.constants().mean_a);
  std::vector<bool> moved(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    if (!phi.reaches(geom, gamma.points[i], kernel.jump_reach())) continue;
    E[i].resize(nodes);
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes; ++k) {
      E[i][k] = std::exp(phi.value(geom, geom.wrap(gamma.points[i] + s * quad.nodes[k])));
      acc += quad.weights[k] * E[i][k];
      moved[i] = moved[i] || E[i][k] != 1.0;
    }
    M[i] = acc;
  }

  BdPieces out;
  std::vector<double> bshift(quad.autocorrelation.size());
  std::vector<double> row(nodes);
  for (std::size_t p = 0; p < m; ++p) {
    for (std::size_t q = p + 1; q < m; ++q) {
      bool removal = ph[p] != 0.0 || ph[q] != 0.0;
      bool motion = moved[p] || moved[q];
      if (!removal && !motion) continue;
      Vec xbar = geom.min_image_diff(gamma.points[p], gamma.points[q]);
      double b0 = spec.b_value(xbar);
      double w = std::exp(-ph[p] - ph[q]);
      double shift_sum = 0.0;
      for (std::size_t slot = 0; slot < bshift.size(); ++slot) {
        bshift[slot] =
            quad.autocorrelation[slot] != 0.0 ? spec.b_value(geom.reduce(xbar + s * quad.offsets[slot])) : 0.0;
        shift_sum += quad.autocorrelation[slot] * bshift[slot];
      }
      if (removal) {
        out.p1 += a2 * b0 * (w - 1.0);
        out.p2 += (w - 1.0) * shift_sum;
      }
      if (!motion) continue;
      if (b0 != 0.0) out.p3 += b0 * w * (M[p] * M[q] - a2);
      double p4 = 0.0;
      if (moved[p] && moved[q]) {
        for (std::size_t k = 0; k < nodes; ++k)
          for (std::size_t l = 0; l < nodes; ++l) {
            double bv = bshift[quad.diff_slot(quad.index[k], quad.index[l], d)];
            if (bv == 0.0) continue;
            p4 += quad.weights[k] * quad.weights[l] * bv * (E[p][k] * E[q][l] - 1.0);
          }
      } else {
        std::size_t mover = moved[p] ? p : q;
        for (std::size_t k = 0; k < nodes; ++k) {
          double r = 0.0;
          for (std::size_t l = 0; l < nodes; ++l) {
            std::size_t slot = moved[p] ? quad.diff_slot(quad.index[k], quad.index[l], d)
                                        : quad.diff_slot(quad.index[l], quad.index[k], d);
            r += quad.weights[l] * bshift[slot];
          }
          p4 += quad.weights[k] * r * (E[mover][k] - 1.0);
        }
      }
      out.p4 += w * p4;
    }
  }
  out.p1 *= f0;
  out.p2 *= f0;
  out.p3 *= f0;
  out.p4 *= f0;
  return out;
}

BdPieces bd_limit_pieces(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                         const KernelSpec& spec, double z) {
  require_exponential(F);
  const TestProfile& phi = F.exponential_profile();
  const auto& k = spec.constants();
  const double a2 = k.mean_a * k.mean_a;
  double S = 0.0, singles = 0.0, pair = 0.0;
  std::vector<double> ph(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    ph[i] = phi.value(geom, gamma.points[i]);
    S += ph[i];
    singles += std::expm1(-ph[i]);
  }
  for (std::size_t p = 0; p < gamma.size(); ++p)
    for (std::size_t q = p + 1; q < gamma.size(); ++q) {
      if (ph[p] == 0.0 && ph[q] == 0.0) continue;
      double bv = spec.b_value(geom.min_image_diff(gamma.points[p], gamma.points[q]));
      if (bv != 0.0) pair += bv * std::expm1(-ph[p] - ph[q]);
    }
  const double f0 = std::exp(S);
  ExpBirthIntegrals I = exp_birth_integrals(geom, spec, phi);
  BdPieces out;
  out.p1 = f0 * a2 * pair;
  out.p2 = f0 * a2 * z * k.mean_b * singles;
  out.p3 = f0 * a2 * z * k.mean_b * z * I.single;
  out.p4 = f0 * 0.5 * a2 * z * z * I.pair;
  return out;
}

double apply_generator(FormKind kind, const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                       const KernelSpec& spec, double z) {
  switch (kind) {
    case FormKind::Jump: return apply_L(F, geom, gamma, spec);
    case FormKind::Diffusive: return apply_L0_diffusive(F, geom, gamma, spec);
    case FormKind::BirthDeath: return apply_L0_bd(F, geom, gamma, spec, z);
  }
  return 0.0;
}

double carre_du_champ(FormKind kind, const Observable& F, const Observable& G, const TorusGeometry& geom,
                      const Configuration& gamma, const KernelSpec& spec, double z) {
  if (kind == FormKind::Jump) {
    if (gamma.size() < 2) return 0.0;
    ScaledKernel kernel = scaled_kernel_diffusive(spec, 1.0);
    std::vector<MoveTable> tables;
    tables.emplace_back(F, geom, gamma, spec.quadrature(), 1.0, kernel.jump_reach());
    tables.emplace_back(G, geom, gamma, spec.quadrature(), 1.0, kernel.jump_reach());
    return 0.5 * jump_pair_sum(kernel, geom, gamma, tables, [](const double* dl) { return dl[0] * dl[1]; });
  }
  if (kind == FormKind::Diffusive) {
    require_smooth_b(spec);
    if (gamma.size() < 2) return 0.0;
    const double c = diffusion_constant(spec);
    const double rb2 = spec.b_reach() * spec.b_reach();
    SmoothState sf(F, geom, gamma), sg(G, geom, gamma);
    std::vector<bool> flag(gamma.size());
    std::vector<Vec> gf(gamma.size()), gg(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) {
      const Vec& x = gamma.points[i];
      flag[i] = F.touches(geom, x, 0.0) || G.touches(geom, x, 0.0);
      if (!flag[i]) continue;
      gf[i] = point_derivs(F, sf, geom, x).grad;
      gg[i] = point_derivs(G, sg, geom, x).grad;
    }
    double total = 0.0;
    if (spec.variant() == KernelVariant::Factorized) {
      for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (!flag[i]) continue;
        double A = 0.0;
        for (std::size_t j = 0; j < gamma.size(); ++j) {
          if (j == i) continue;
          Vec u = geom.min_image_diff(gamma.points[j], gamma.points[i]);
          if (norm2(u) <= rb2) A += spec.b_value(u);
        }
        total += dot(gf[i], gg[i]) * A;
      }
      return c * total;
    }
    for (auto [p, q] : flagged_pairs(flag)) {
      Vec xbar = geom.min_image_diff(gamma.points[p], gamma.points[q]);
      if (norm2(xbar) > rb2) continue;
      double bv = spec.b_value(xbar);
      total += bv * dot(gf[p] - gf[q], gg[p] - gg[q]);
    }
    return 0.5 * c * total;
  }
  // birth-and-death: death transitions only, births are their Mecke mirror
  const auto& k = spec.constants();
  const double a2 = k.mean_a * k.mean_a;
  std::size_t m = gamma.size(), nf = F.arity(), ng = G.arity();
  std::vector<double> vf(m * nf, 0.0), vg(m * ng, 0.0);
  std::vector<bool> flag(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Vec& x = gamma.points[i];
    flag[i] = F.touches(geom, x, 0.0) || G.touches(geom, x, 0.0);
    if (!flag[i]) continue;
    profile_values(F, geom, x, std::span<double>(&vf[i * nf], nf));
    profile_values(G, geom, x, std::span<double>(&vg[i * ng], ng));
  }
  auto sf = profile_sums(F, geom, gamma), sg = profile_sums(G, geom, gamma);
  double f0 = F.outer(sf), g0 = G.outer(sg);
  std::vector<double> tf(nf), tg(ng);
  double singles = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!flag[i]) continue;
    singles += removal_delta(F, sf, &vf[i * nf], nullptr, f0, tf) * removal_delta(G, sg, &vg[i * ng], nullptr, g0, tg);
  }
  double rb2 = spec.b_reach() * spec.b_reach();
  for (auto [p, q] : flagged_pairs(flag)) {
    Vec xbar = geom.min_image_diff(gamma.points[p], gamma.points[q]);
    if (norm2(xbar) > rb2) continue;
    double bv = spec.b_value(xbar);
    if (bv == 0.0) continue;
    pairs += bv * removal_delta(F, sf, &vf[p * nf], &vf[q * nf], f0, tf) *
             removal_delta(G, sg, &vg[p * ng], &vg[q * ng], g0, tg);
  }
  return a2 * (pairs + z * k.mean_b * singles);
}

MCEstimate dirichlet_form_mc(FormKind kind, const Observable& F, const Observable& G, const TorusGeometry& geom,
                             const KernelSpec& spec, double z, const McSettings& mc, std::uint64_t tag) {
  auto stats = mc_columns(mc.n_samples, 1, mc.seed, tag, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration gamma = sample_poisson(geom, z, rng);
    row[0] = carre_du_champ(kind, F, G, geom, gamma, spec, z);
  });
  return stats[0].estimate();
}

DualityResult duality_check(FormKind kind, const Observable& F, const Observable& G, const TorusGeometry& geom,
                            const KernelSpec& spec, double z, const McSettings& mc) {
  auto stats = mc_columns(mc.n_samples, 3, mc.seed, 0x0d0a, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration gamma = sample_poisson(geom, z, rng);
    double pairing = -apply_generator(kind, F, geom, gamma, spec, z) * evaluate(G, geom, gamma);
    double form = carre_du_champ(kind, F, G, geom, gamma, spec, z);
    row[0] = pairing;
    row[1] = form;
    row[2] = pairing - form;
  });
  DualityResult r{stats[0].estimate(), stats[1].estimate(), stats[2].estimate(), false};
  r.pass = std::abs(r.difference.mean) <= 3.0 * r.difference.stderr_;
  return r;
}

ReversibilityResult reversibility_check(const Observable& F, const Observable& G, const TorusGeometry& geom,
                                        const KernelSpec& spec, double z, const McSettings& mc) {
  auto stats = mc_columns(mc.n_samples, 3, mc.seed, 0x5e7, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration gamma = sample_poisson(geom, z, rng);
    double lhs = -apply_L(F, geom, gamma, spec) * evaluate(G, geom, gamma);
    double rhs = -apply_L(G, geom, gamma, spec) * evaluate(F, geom, gamma);
    row[0] = lhs;
    row[1] = rhs;
    row[2] = lhs - rhs;
  });
  ReversibilityResult r{stats[0].estimate(), stats[1].estimate(), stats[2].estimate(), false};
  r.pass = std::abs(r.difference.mean) <= 3.0 * r.difference.stderr_;
  return r;
}

MeckeResult mecke_check(const PointFunctional& G, const Window& support, double z, const TorusGeometry& geom,
                        const McSettings& mc, int grid_nodes) {
  const int d = geom.dim();
  std::vector<Vec> nodes;
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(grid_nodes);
  double cell = 1.0;
  for (int k = 0; k < d; ++k) cell *= (support.hi[k] - support.lo[k]) / grid_nodes;
  for (std::size_t lin = 0; lin < total; ++lin) {
    Vec x{};
    std::size_t rest = lin;
    for (int k = d - 1; k >= 0; --k) {
      double h = (support.hi[k] - support.lo[k]) / grid_nodes;
      x[k] = support.lo[k] + (static_cast<double>(rest % static_cast<std::size_t>(grid_nodes)) + 0.5) * h;
      rest /= static_cast<std::size_t>(grid_nodes);
    }
    nodes.push_back(geom.wrap(x));
  }
  auto lhs = mc_columns(mc.n_samples, 1, mc.seed, 0x3ec1, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration gamma = sample_poisson(geom, z, rng);
    double s = 0.0;
    for (const auto& x : gamma.points) s += G(gamma, x);
    row[0] = s;
  });
  auto rhs = mc_columns(mc.n_samples, 1, mc.seed, 0x3ec2, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration gamma = sample_poisson(geom, z, rng);
    gamma.points.push_back(Vec{});
    double s = 0.0;
    for (const auto& x : nodes) {
      gamma.points.back() = x;
      s += G(gamma, x);
    }
    row[0] = z * cell * s;
  });
  MeckeResult r{lhs[0].estimate(), rhs[0].estimate(), false};
  r.pass = agree_within(r.lhs, r.rhs, 3.0);
  return r;
}

double pair_moment_exact(double lambda) {
  double l2 = lambda * lambda;
  return 0.25 * l2 * l2 + l2 * lambda + 0.5 * l2;
}

PairMomentResult pair_moment_check(const Window& window, double z, const TorusGeometry& geom, const McSettings& mc) {
  auto stats = mc_columns(mc.n_samples, 1, mc.seed, 0x9a1, mc.threads, [&](Rng& rng, std::span<double> row) {
    Configuration gamma = sample_poisson(geom, z, rng);
    double n = 0.0;
    for (const auto& x : gamma.points)
      if (window.contains(x, geom.dim())) n += 1.0;
    double pairs = 0.5 * n * (n - 1.0);
    row[0] = pairs * pairs;
  });
  PairMomentResult r{stats[0].estimate(), pair_moment_exact(z * window.volume(geom.dim())), false};
  r.pass = agree_within(r.mc, r.exact, 3.0);
  return r;
}

}  // namespace contjump
