#include "contjump/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace contjump {

int default_jump_nodes(int dim) {
  switch (dim) {
    case 1: return 64;
    case 2: return 12;
    default: return 6;
  }
}

std::size_t JumpQuadrature::diff_slot(const std::array<int, kMaxDim>& from, const std::array<int, kMaxDim>& to,
                                      int dim) const {
  std::size_t slot = 0;
  for (int k = 0; k < dim; ++k)
    slot = slot * static_cast<std::size_t>(diff_extent) + static_cast<std::size_t>(to[k] - from[k] + nodes_per_dim - 1);
  return slot;
}

KernelSpec::KernelSpec(KernelVariant variant, RadialProfile a, RadialProfile b, int dim, Mutation mutation,
                       int jump_nodes)
    : variant_(variant), a_(a), b_(b), dim_(dim), mutation_(mutation), jump_nodes_(jump_nodes) {
  if (dim < 1 || dim > kMaxDim) throw InvalidParameter("dimension must be in 1..3");
  a_.validate();
  b_.validate();
  if (jump_nodes_ <= 0) jump_nodes_ = default_jump_nodes(dim);
  build();
}

KernelSpec KernelSpec::with_mutation(Mutation m) const {
  return KernelSpec(variant_, a_, b_, dim_, m, jump_nodes_);
}

KernelSpec KernelSpec::with_jump_nodes(int n) const { return KernelSpec(variant_, a_, b_, dim_, mutation_, n); }

double KernelSpec::a_center_shift() const { return mutation_ == Mutation::DriftA ? 0.5 * a_.radius : 0.0; }

double KernelSpec::a_reach() const { return a_.radius + a_center_shift(); }

double KernelSpec::a_value(const Vec& h) const {
  Vec u = h;
  u[0] -= a_center_shift();
  return a_.value(u, dim_);
}

double KernelSpec::b_value(const Vec& x) const {
  double v = b_.value(x, dim_);
  if (mutation_ == Mutation::OddB && v > 0.0) v *= 1.0 + 0.5 * x[0] / b_.radius;
  return v;
}

Vec KernelSpec::b_gradient(const Vec& x) const {
  Vec g = b_.gradient(x, dim_);
  if (mutation_ == Mutation::OddB) {
    double v = b_.value(x, dim_);
    g = (1.0 + 0.5 * x[0] / b_.radius) * g;
    g[0] += 0.5 * v / b_.radius;
  }
  return g;
}

double KernelSpec::b_sup() const { return mutation_ == Mutation::OddB ? 1.5 * b_.sup() : b_.sup(); }

double KernelSpec::interaction_range() const {
  return variant_ == KernelVariant::Factorized ? b_.radius + 2.0 * a_reach() : b_.radius + a_reach();
}

double KernelSpec::combine(double b0, double b1) const {
  switch (mutation_) {
    case Mutation::PreJumpOnly: return 2.0 * b0;
    case Mutation::SquaredAcceptance: return (b0 + b1) * (b0 + b1) / (2.0 * b_sup());
    default: return b0 + b1;
  }
}

double KernelSpec::combine_sup() const { return 2.0 * b_sup(); }

double KernelSpec::momentum_part(double bx) const {
  return mutation_ == Mutation::SquaredAcceptance ? bx * bx / b_sup() : bx;
}

double KernelSpec::momentum_sup() const { return b_sup(); }

Vec KernelSpec::sample_a(Rng& rng) const {
  Vec h = a_.sample(rng, dim_);
  h[0] += a_center_shift();
  return h;
}

void KernelSpec::build() {
  constants_.mean_a = a_.mass(dim_);
  constants_.mean_b = b_.mass(dim_);
  constants_.c = a_.second_moment(dim_);
  constants_.sup_b = b_sup();
  if (mutation_ == Mutation::DriftA) {
    double s = a_center_shift();
    constants_.c += s * s * constants_.mean_a;
  }

  auto q = std::make_shared<JumpQuadrature>();
  int n = jump_nodes_;
  q->nodes_per_dim = n;
  q->spacing = 2.0 * a_.radius / n;
  q->diff_extent = 2 * n - 1;
  std::size_t total = 1;
  for (int k = 0; k < dim_; ++k) total *= static_cast<std::size_t>(n);
  double cell = std::pow(q->spacing, dim_);
  double raw = 0.0;
  for (std::size_t lin = 0; lin < total; ++lin) {
    std::array<int, kMaxDim> idx{};
    Vec u{};
    std::size_t rest = lin;
    for (int k = dim_ - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(rest % static_cast<std::size_t>(n));
      rest /= static_cast<std::size_t>(n);
      u[k] = -a_.radius + (idx[k] + 0.5) * q->spacing;
    }
    u[0] += a_center_shift();
    double w = a_value(u) * cell;
    if (w <= 0.0) continue;
    q->nodes.push_back(u);
    q->weights.push_back(w);
    q->index.push_back(idx);
    raw += w;
  }
  if (!(raw > 0.0)) throw InvalidParameter("jump profile a has no mass on the quadrature grid");
  for (auto& w : q->weights) w *= constants_.mean_a / raw;

  std::size_t dsize = 1;
  for (int k = 0; k < dim_; ++k) dsize *= static_cast<std::size_t>(q->diff_extent);
  q->autocorrelation.assign(dsize, 0.0);
  q->offsets.assign(dsize, Vec{});
  for (std::size_t slot = 0; slot < dsize; ++slot) {
    std::size_t rest = slot;
    for (int k = dim_ - 1; k >= 0; --k) {
      int m = static_cast<int>(rest % static_cast<std::size_t>(q->diff_extent)) - (n - 1);
      rest /= static_cast<std::size_t>(q->diff_extent);
      q->offsets[slot][k] = m * q->spacing;
    }
  }
  for (std::size_t k = 0; k < q->nodes.size(); ++k)
    for (std::size_t l = 0; l < q->nodes.size(); ++l)
      q->autocorrelation[q->diff_slot(q->index[k], q->index[l], dim_)] += q->weights[k] * q->weights[l];
  quad_ = std::move(q);
}

KernelConstants kernel_constants(const KernelSpec& spec) { return spec.constants(); }

namespace {

bool same_vec(const Vec& x, const Vec& y, int dim) {
  for (int k = 0; k < dim; ++k)
    if (x[k] != y[k]) return false;
  return true;
}

}  // namespace

double eval_q(const KernelSpec& spec, const Vec& x, const Vec& h1, const Vec& h2) {
  if (spec.variant() == KernelVariant::MomentumConserving) {
    if (!same_vec(h2, -h1, spec.dim())) throw DomainError("momentum-conserving kernel requires h2 = -h1");
    double a1 = spec.a_value(h1);
    if (a1 == 0.0) return 0.0;
    return a1 * spec.momentum_part(spec.b_value(x - h1));
  }
  double aa = spec.a_value(h1) * spec.a_value(h2);
  if (aa == 0.0) return 0.0;
  return aa * spec.combine(spec.b_value(x), spec.b_value(x + h2 - h1));
}

double check_symmetry(const KernelSpec& spec, std::size_t n_samples, Rng& rng) {
  int d = spec.dim();
  double rx = spec.interaction_range();
  double rh = spec.a_reach();
  auto draw = [&](double r) {
    Vec v{};
    for (int k = 0; k < d; ++k) v[k] = r * (2.0 * uniform01(rng) - 1.0);
    return v;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    Vec x = draw(rx);
    Vec h1 = draw(rh);
    if (spec.variant() == KernelVariant::MomentumConserving) {
      double v1 = std::abs(eval_q(spec, -x, h1, -h1) - eval_q(spec, x, -h1, h1));
      double v2 = std::abs(eval_q(spec, x, h1, -h1) - eval_q(spec, -x + 2.0 * h1, h1, -h1));
      worst = std::max({worst, v1, v2});
    } else {
      Vec h2 = draw(rh);
      double v1 = std::abs(eval_q(spec, -x, h1, h2) - eval_q(spec, x, h2, h1));
      double v2 = std::abs(eval_q(spec, x, h1, h2) - eval_q(spec, x + h2 - h1, -h1, -h2));
      worst = std::max({worst, v1, v2});
    }
  }
  return worst;
}

double total_pair_rate(const KernelSpec& spec, const Vec& x) {
  const auto& q = spec.quadrature();
  if (spec.variant() == KernelVariant::MomentumConserving) {
    double s = 0.0;
    for (std::size_t k = 0; k < q.nodes.size(); ++k) s += q.weights[k] * spec.momentum_part(spec.b_value(x - q.nodes[k]));
    return s;
  }
  double b0 = spec.b_value(x);
  if (spec.mutation() == Mutation::None) {
    double m = spec.constants().mean_a;
    double s = m * m * b0;
    for (std::size_t slot = 0; slot < q.autocorrelation.size(); ++slot)
      if (q.autocorrelation[slot] != 0.0) s += q.autocorrelation[slot] * spec.b_value(x + q.offsets[slot]);
    return s;
  }
  double s = 0.0;
  for (std::size_t slot = 0; slot < q.autocorrelation.size(); ++slot)
    if (q.autocorrelation[slot] != 0.0)
      s += q.autocorrelation[slot] * spec.combine(b0, spec.b_value(x + q.offsets[slot]));
  return s;
}

ScaledKernel::ScaledKernel(const KernelSpec& spec, Scaling scaling, double eps)
    : spec_(spec), scaling_(scaling), eps_(eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidParameter("scaling parameter eps must be positive");
  if (scaling == Scaling::Diffusive) {
    kappa_ = 1.0 / (eps * eps);
    scale_ = eps;
  } else {
    kappa_ = 1.0;
    scale_ = 1.0 / eps;
  }
}

double ScaledKernel::interaction_range() const {
  double r = spec_.b_reach() + jump_reach();
  return spec_.variant() == KernelVariant::Factorized ? r + jump_reach() : r;
}

double ScaledKernel::density(const Vec& x, const Vec& h1, const Vec& h2) const {
  int d = spec_.dim();
  bool momentum = spec_.variant() == KernelVariant::MomentumConserving;
  if (momentum && !same_vec(h2, -h1, d)) throw DomainError("momentum-conserving kernel requires h2 = -h1");
  double inv = 1.0 / scale_;
  double jac = std::pow(inv, momentum ? d : 2 * d);
  double pref = kappa_ * jac;
  if (momentum) {
    double a1 = spec_.a_value(inv * h1);
    if (a1 == 0.0) return 0.0;
    return pref * a1 * spec_.momentum_part(spec_.b_value(x - h1));
  }
  double aa = spec_.a_value(inv * h1) * spec_.a_value(inv * h2);
  if (aa == 0.0) return 0.0;
  return pref * aa * spec_.combine(spec_.b_value(x), spec_.b_value(x + h2 - h1));
}

ScaledKernel scaled_kernel_diffusive(const KernelSpec& spec, double eps) {
  return ScaledKernel(spec, Scaling::Diffusive, eps);
}

ScaledKernel scaled_kernel_bd(const KernelSpec& spec, double eps) {
  return ScaledKernel(spec, Scaling::BirthDeath, eps);
}

}  // namespace contjump
