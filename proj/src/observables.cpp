#include "contjump/observables.hpp"

#include <cmath>

namespace contjump {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double at(const std::vector<double>& v, std::size_t i) { return i < v.size() ? v[i] : 0.0; }

double quad_coef(const PolynomialOuter& p, std::size_t j, std::size_t k, std::size_t n) {
  return p.quadratic.empty() ? 0.0 : p.quadratic[j * n + k];
}

}  // namespace

Observable::Observable(CylinderFunction f) : profiles_(std::move(f.profiles)), outer_(std::move(f.outer)) {
  if (profiles_.empty()) throw InvalidParameter("cylinder function needs at least one profile");
  std::size_t n = profiles_.size();
  std::visit(Overloaded{
                 [n](const PolynomialOuter& p) {
                   if ((!p.linear.empty() && p.linear.size() != n) ||
                       (!p.quadratic.empty() && p.quadratic.size() != n * n) ||
                       (!p.cubic.empty() && p.cubic.size() != n))
                     throw InvalidParameter("polynomial coefficient sizes do not match profile count");
                 },
                 [n](const TanhProductOuter& t) {
                   if (t.slope.size() != n || t.shift.size() != n)
                     throw InvalidParameter("tanh product needs one slope and shift per profile");
                 },
                 [n](const GaussianOuter& g) {
                   if (g.center.size() != n) throw InvalidParameter("gaussian centre size must match profile count");
                   if (!(g.width > 0.0)) throw InvalidParameter("gaussian width must be positive");
                 }},
             outer_);
}

Observable::Observable(ExponentialFunction f) : profiles_{f.profile}, exponential_(true) {}

double Observable::outer(std::span<const double> s) const {
  if (exponential_) return std::exp(s[0]);
  std::size_t n = profiles_.size();
  return std::visit(Overloaded{[&](const PolynomialOuter& p) {
                                 double g = p.constant;
                                 for (std::size_t j = 0; j < n; ++j) {
                                   g += at(p.linear, j) * s[j] + at(p.cubic, j) * s[j] * s[j] * s[j];
                                   for (std::size_t k = 0; k < n; ++k) g += quad_coef(p, j, k, n) * s[j] * s[k];
                                 }
                                 return g;
                               },
                               [&](const TanhProductOuter& t) {
                                 double g = t.scale;
                                 for (std::size_t j = 0; j < n; ++j) g *= std::tanh(t.slope[j] * s[j] + t.shift[j]);
                                 return g;
                               },
                               [&](const GaussianOuter& q) {
                                 double r2 = 0.0;
                                 for (std::size_t j = 0; j < n; ++j) r2 += (s[j] - q.center[j]) * (s[j] - q.center[j]);
                                 return q.scale * std::exp(-r2 / (2.0 * q.width * q.width));
                               }},
                    outer_);
}

void Observable::outer_gradient(std::span<const double> s, std::span<double> grad) const {
  std::size_t n = profiles_.size();
  if (exponential_) {
    grad[0] = std::exp(s[0]);
    return;
  }
  std::visit(Overloaded{[&](const PolynomialOuter& p) {
                          for (std::size_t j = 0; j < n; ++j) {
                            double g = at(p.linear, j) + 3.0 * at(p.cubic, j) * s[j] * s[j];
                            for (std::size_t k = 0; k < n; ++k)
                              g += (quad_coef(p, j, k, n) + quad_coef(p, k, j, n)) * s[k];
                            grad[j] = g;
                          }
                        },
                        [&](const TanhProductOuter& t) {
                          std::vector<double> th(n);
                          for (std::size_t j = 0; j < n; ++j) th[j] = std::tanh(t.slope[j] * s[j] + t.shift[j]);
                          for (std::size_t j = 0; j < n; ++j) {
                            double g = t.scale * t.slope[j] * (1.0 - th[j] * th[j]);
                            for (std::size_t k = 0; k < n; ++k)
                              if (k != j) g *= th[k];
                            grad[j] = g;
                          }
                        },
                        [&](const GaussianOuter& q) {
                          double g = outer(s);
                          double w2 = q.width * q.width;
                          for (std::size_t j = 0; j < n; ++j) grad[j] = -g * (s[j] - q.center[j]) / w2;
                        }},
             outer_);
}

void Observable::outer_hessian(std::span<const double> s, std::span<double> hess) const {
  std::size_t n = profiles_.size();
  if (exponential_) {
    hess[0] = std::exp(s[0]);
    return;
  }
  std::visit(Overloaded{[&](const PolynomialOuter& p) {
                          for (std::size_t j = 0; j < n; ++j)
                            for (std::size_t k = 0; k < n; ++k) {
                              double h = quad_coef(p, j, k, n) + quad_coef(p, k, j, n);
                              if (j == k) h += 6.0 * at(p.cubic, j) * s[j];
                              hess[j * n + k] = h;
                            }
                        },
                        [&](const TanhProductOuter& t) {
                          std::vector<double> th(n), dth(n), d2th(n);
                          for (std::size_t j = 0; j < n; ++j) {
                            th[j] = std::tanh(t.slope[j] * s[j] + t.shift[j]);
                            double sech2 = 1.0 - th[j] * th[j];
                            dth[j] = t.slope[j] * sech2;
                            d2th[j] = -2.0 * t.slope[j] * t.slope[j] * th[j] * sech2;
                          }
                          for (std::size_t j = 0; j < n; ++j)
                            for (std::size_t k = 0; k < n; ++k) {
                              double h = t.scale;
                              for (std::size_t m = 0; m < n; ++m) {
                                if (j == k && m == j) h *= d2th[m];
                                else if (m == j || m == k) h *= dth[m];
                                else h *= th[m];
                              }
                              hess[j * n + k] = h;
                            }
                        },
                        [&](const GaussianOuter& q) {
                          double g = outer(s);
                          double w2 = q.width * q.width;
                          for (std::size_t j = 0; j < n; ++j)
                            for (std::size_t k = 0; k < n; ++k) {
                              double h = g * (s[j] - q.center[j]) * (s[k] - q.center[k]) / (w2 * w2);
                              if (j == k) h -= g / w2;
                              hess[j * n + k] = h;
                            }
                        }},
             outer_);
}

bool Observable::touches(const TorusGeometry& geom, const Vec& x, double reach) const {
  for (const auto& p : profiles_)
    if (p.reaches(geom, x, reach)) return true;
  return false;
}

void Observable::validate(const TorusGeometry& geom) const {
  for (const auto& p : profiles_) p.validate(geom);
}

void profile_values(const Observable& F, const TorusGeometry& geom, const Vec& x, std::span<double> out) {
  const auto& ps = F.profiles();
  for (std::size_t j = 0; j < ps.size(); ++j) out[j] = ps[j].value(geom, x);
}

std::vector<double> profile_sums(const Observable& F, const TorusGeometry& geom, const Configuration& gamma) {
  const auto& ps = F.profiles();
  std::vector<double> s(ps.size(), 0.0);
  for (const auto& x : gamma.points)
    for (std::size_t j = 0; j < ps.size(); ++j) s[j] += ps[j].value(geom, x);
  return s;
}

double evaluate(const Observable& F, const TorusGeometry& geom, const Configuration& gamma) {
  return F.outer(profile_sums(F, geom, gamma));
}

Vec point_grad_at(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, std::size_t index) {
  auto s = profile_sums(F, geom, gamma);
  std::vector<double> g(s.size());
  F.outer_gradient(s, g);
  Vec out{};
  const auto& ps = F.profiles();
  for (std::size_t j = 0; j < ps.size(); ++j) out = out + g[j] * ps[j].gradient(geom, gamma.points[index]);
  return out;
}

double point_laplacian_at(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                          std::size_t index) {
  auto s = profile_sums(F, geom, gamma);
  std::size_t n = s.size();
  std::vector<double> g(n), h(n * n);
  F.outer_gradient(s, g);
  F.outer_hessian(s, h);
  const auto& ps = F.profiles();
  const Vec& x = gamma.points[index];
  std::vector<Vec> grads(n);
  double out = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    grads[j] = ps[j].gradient(geom, x);
    out += g[j] * ps[j].laplacian(geom, x);
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) out += h[j * n + k] * dot(grads[j], grads[k]);
  return out;
}

Vec point_grad(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, const Vec& x) {
  return point_grad_at(F, geom, gamma, gamma.index_of(x));
}

double point_laplacian(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, const Vec& x) {
  return point_laplacian_at(F, geom, gamma, gamma.index_of(x));
}

double mixed_second(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, std::size_t i,
                    std::size_t j) {
  auto s = profile_sums(F, geom, gamma);
  std::size_t n = s.size();
  std::vector<double> h(n * n);
  F.outer_hessian(s, h);
  const auto& ps = F.profiles();
  std::vector<Vec> gi(n), gj(n);
  for (std::size_t k = 0; k < n; ++k) {
    gi[k] = ps[k].gradient(geom, gamma.points[i]);
    gj[k] = ps[k].gradient(geom, gamma.points[j]);
  }
  double out = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t m = 0; m < n; ++m) out += h[k * n + m] * dot(gi[k], gj[m]);
  return out;
}

Configuration sample_poisson(const TorusGeometry& geom, double z, Rng& rng) {
  if (!(z > 0.0) || !std::isfinite(z)) throw InvalidParameter("intensity z must be positive");
  double mean = z * geom.volume();
  if (!(mean < 1e9)) throw InvalidParameter("expected point count too large");
  std::poisson_distribution<long> count(mean);
  long n = count(rng);
  Configuration g;
  g.points.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    Vec x{};
    for (int k = 0; k < geom.dim(); ++k) x[k] = geom.side() * uniform01(rng);
    g.points.push_back(geom.wrap(x));
  }
  return g;
}

}  // namespace contjump
