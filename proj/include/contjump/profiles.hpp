#pragma once

#include "contjump/geometry.hpp"
#include "contjump/random.hpp"

namespace contjump {

/** @brief Unit bump f(rho) = exp(1 - 1/(1 - rho)) on rho = |u|^2 < 1, and its rho-derivatives. */
namespace bump {
double f(double rho);
double df(double rho);
double d2f(double rho);
/** @brief Integral of f(|u|^2) over the unit ball (cached tensor-grid midpoint rule). */
double unit_mass(int dim);
/** @brief Integral of f(|u|^2) (u^1)^2 over the unit ball (same grid). */
double unit_second_moment(int dim);
}  // namespace bump

/** @brief Smooth-bump test function centred on the torus. */
struct TestProfile {
  Vec center{};
  double radius = 1.0;
  double amplitude = 1.0;

  void validate(const TorusGeometry& geom) const;
  double value(const TorusGeometry& geom, const Vec& x) const;
  Vec gradient(const TorusGeometry& geom, const Vec& x) const;
  double laplacian(const TorusGeometry& geom, const Vec& x) const;
  /** @brief True when x lies within radius + reach of the centre. */
  bool reaches(const TorusGeometry& geom, const Vec& x, double reach) const;
  double integral(int dim) const;
};

enum class ProfileShape { UniformBall, SmoothBump };

/** @brief Even, nonnegative, compactly supported profile used for the kernel parts a and b. */
struct RadialProfile {
  ProfileShape shape = ProfileShape::SmoothBump;
  double radius = 1.0;
  double height = 1.0;

  static RadialProfile uniform_ball(double radius, double height);
  static RadialProfile smooth_bump(double radius, double height);

  void validate() const;
  bool differentiable() const { return shape == ProfileShape::SmoothBump; }
  double value(const Vec& h, int dim) const;
  /** @brief Throws NotDifferentiable for the uniform ball. */
  Vec gradient(const Vec& h, int dim) const;
  double mass(int dim) const;
  double second_moment(int dim) const;
  double sup() const { return height; }
  /** @brief Draw from the density value / mass. */
  Vec sample(Rng& rng, int dim) const;
};

}  // namespace contjump
