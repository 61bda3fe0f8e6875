#include "contjump/profiles.hpp"

#include <array>
#include <cmath>
#include <mutex>

namespace contjump {

namespace bump {

double f(double rho) {
  if (rho >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - rho));
}

double df(double rho) {
  if (rho >= 1.0) return 0.0;
  double q = 1.0 - rho;
  return -f(rho) / (q * q);
}

double d2f(double rho) {
  if (rho >= 1.0) return 0.0;
  double q = 1.0 - rho;
  double q3 = q * q * q;
  return f(rho) * (1.0 / (q3 * q) - 2.0 / q3);
}

namespace {

struct UnitIntegrals {
  double mass;
  double second;
};

// Midpoint rule on [0,1]^d times 2^d by symmetry; nodes per full dimension: 1024 (d=1), 256 otherwise.
UnitIntegrals compute_unit(int dim) {
  int full = dim == 1 ? 1024 : 256;
  int half = full / 2;
  double h = 2.0 / full;
  double mass = 0.0, second = 0.0;
  auto node = [&](int i) { return (i + 0.5) * h; };
  if (dim == 1) {
    for (int i = 0; i < half; ++i) {
      double u = node(i), v = f(u * u);
      mass += v;
      second += v * u * u;
    }
  } else if (dim == 2) {
    for (int i = 0; i < half; ++i)
      for (int j = 0; j < half; ++j) {
        double u = node(i), w = node(j), v = f(u * u + w * w);
        mass += v;
        second += v * u * u;
      }
  } else {
    for (int i = 0; i < half; ++i)
      for (int j = 0; j < half; ++j) {
        double rij = node(i) * node(i) + node(j) * node(j);
        if (rij >= 1.0) continue;
        for (int k = 0; k < half; ++k) {
          double v = f(rij + node(k) * node(k));
          mass += v;
          second += v * node(i) * node(i);
        }
      }
  }
  double cell = std::pow(h, dim) * std::pow(2.0, dim);
  return {mass * cell, second * cell};
}

const UnitIntegrals& unit(int dim) {
  static std::array<UnitIntegrals, kMaxDim> cache{};
  static std::array<std::once_flag, kMaxDim> flags;
  if (dim < 1 || dim > kMaxDim) throw InvalidParameter("dimension must be in 1..3");
  std::call_once(flags[dim - 1], [dim] { cache[dim - 1] = compute_unit(dim); });
  return cache[dim - 1];
}

}  // namespace

double unit_mass(int dim) { return unit(dim).mass; }
double unit_second_moment(int dim) { return unit(dim).second; }

}  // namespace bump

void TestProfile::validate(const TorusGeometry& geom) const {
  if (!(radius > 0.0)) throw InvalidParameter("test profile radius must be positive");
  if (!std::isfinite(amplitude)) throw InvalidParameter("test profile amplitude must be finite");
  if (!(radius < 0.5 * geom.side())) throw ConfigurationError("test profile radius must be below L/2");
}

double TestProfile::value(const TorusGeometry& geom, const Vec& x) const {
  double rho = geom.distance2(center, x) / (radius * radius);
  return amplitude * bump::f(rho);
}

Vec TestProfile::gradient(const TorusGeometry& geom, const Vec& x) const {
  Vec u = geom.min_image_diff(center, x);
  double r2 = radius * radius;
  double rho = norm2(u) / r2;
  if (rho >= 1.0) return Vec{};
  return (amplitude * bump::df(rho) * 2.0 / r2) * u;
}

double TestProfile::laplacian(const TorusGeometry& geom, const Vec& x) const {
  double r2 = radius * radius;
  double rho = geom.distance2(center, x) / r2;
  if (rho >= 1.0) return 0.0;
  return amplitude * (bump::d2f(rho) * 4.0 * rho / r2 + bump::df(rho) * 2.0 * geom.dim() / r2);
}

bool TestProfile::reaches(const TorusGeometry& geom, const Vec& x, double reach) const {
  double r = radius + reach;
  return geom.distance2(center, x) < r * r;
}

double TestProfile::integral(int dim) const {
  return amplitude * std::pow(radius, dim) * bump::unit_mass(dim);
}

RadialProfile RadialProfile::uniform_ball(double radius, double height) {
  RadialProfile p{ProfileShape::UniformBall, radius, height};
  p.validate();
  return p;
}

RadialProfile RadialProfile::smooth_bump(double radius, double height) {
  RadialProfile p{ProfileShape::SmoothBump, radius, height};
  p.validate();
  return p;
}

void RadialProfile::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw InvalidParameter("profile radius must be positive");
  if (!(height >= 0.0) || !std::isfinite(height)) throw InvalidParameter("profile height must be nonnegative");
}

double RadialProfile::value(const Vec& h, int dim) const {
  double r2 = 0.0;
  for (int k = 0; k < dim; ++k) r2 += h[k] * h[k];
  double rho = r2 / (radius * radius);
  if (shape == ProfileShape::UniformBall) return rho <= 1.0 ? height : 0.0;
  return height * bump::f(rho);
}

Vec RadialProfile::gradient(const Vec& h, int dim) const {
  if (shape != ProfileShape::SmoothBump) throw NotDifferentiable("uniform-ball profile has no gradient");
  double r2 = radius * radius;
  double n2 = 0.0;
  for (int k = 0; k < dim; ++k) n2 += h[k] * h[k];
  double rho = n2 / r2;
  if (rho >= 1.0) return Vec{};
  Vec g{};
  double s = height * bump::df(rho) * 2.0 / r2;
  for (int k = 0; k < dim; ++k) g[k] = s * h[k];
  return g;
}

double RadialProfile::mass(int dim) const {
  double rd = std::pow(radius, dim);
  if (shape == ProfileShape::UniformBall) return height * unit_ball_volume(dim) * rd;
  return height * rd * bump::unit_mass(dim);
}

double RadialProfile::second_moment(int dim) const {
  double rd2 = std::pow(radius, dim + 2);
  if (shape == ProfileShape::UniformBall) return height * unit_ball_volume(dim) * rd2 / (dim + 2);
  return height * rd2 * bump::unit_second_moment(dim);
}

Vec RadialProfile::sample(Rng& rng, int dim) const {
  if (!(height > 0.0)) throw DomainError("cannot sample from a zero profile");
  for (;;) {
    Vec h{};
    for (int k = 0; k < dim; ++k) h[k] = radius * (2.0 * uniform01(rng) - 1.0);
    double v = value(h, dim);
    if (v <= 0.0) continue;
    if (shape == ProfileShape::UniformBall || uniform01(rng) * height < v) return h;
  }
}

}  // namespace contjump
