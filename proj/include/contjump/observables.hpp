#pragma once

#include <span>
#include <variant>
#include <vector>

#include "contjump/geometry.hpp"
#include "contjump/profiles.hpp"
#include "contjump/random.hpp"

namespace contjump {

/** @brief g(s) = constant + linear.s + s^T Q s + sum_j cubic_j s_j^3; Q row-major N x N. Empty parts are zero. */
struct PolynomialOuter {
  double constant = 0.0;
  std::vector<double> linear;
  std::vector<double> quadratic;
  std::vector<double> cubic;
};

/** @brief g(s) = scale * prod_j tanh(slope_j s_j + shift_j). */
struct TanhProductOuter {
  double scale = 1.0;
  std::vector<double> slope;
  std::vector<double> shift;
};

/** @brief g(s) = scale * exp(-|s - center|^2 / (2 width^2)). */
struct GaussianOuter {
  double scale = 1.0;
  std::vector<double> center;
  double width = 1.0;
};

using OuterFunction = std::variant<PolynomialOuter, TanhProductOuter, GaussianOuter>;

/** @brief F(gamma) = g(<phi_1,gamma>, ..., <phi_N,gamma>). */
struct CylinderFunction {
  std::vector<TestProfile> profiles;
  OuterFunction outer;
};

/** @brief F(gamma) = exp(<phi,gamma>). */
struct ExponentialFunction {
  TestProfile profile;
};

/** @brief Either observable family, exposed through its profile sums and outer function. */
class Observable {
 public:
  Observable(CylinderFunction f);  // NOLINT(google-explicit-constructor)
  Observable(ExponentialFunction f);  // NOLINT(google-explicit-constructor)

  bool is_exponential() const { return exponential_; }
  const TestProfile& exponential_profile() const { return profiles_.front(); }
  const std::vector<TestProfile>& profiles() const { return profiles_; }
  std::size_t arity() const { return profiles_.size(); }
  const OuterFunction& outer_function() const { return outer_; }

  double outer(std::span<const double> s) const;
  void outer_gradient(std::span<const double> s, std::span<double> grad) const;
  /** @brief Row-major N x N Hessian. */
  void outer_hessian(std::span<const double> s, std::span<double> hess) const;

  /** @brief True if some profile reaches within `reach` of x. */
  bool touches(const TorusGeometry& geom, const Vec& x, double reach) const;

  void validate(const TorusGeometry& geom) const;

 private:
  std::vector<TestProfile> profiles_;
  OuterFunction outer_;
  bool exponential_ = false;
};

/** @brief N sums <phi_j, gamma>. */
std::vector<double> profile_sums(const Observable& F, const TorusGeometry& geom, const Configuration& gamma);

/** @brief Profile values phi_j(x), written to out (size N). */
void profile_values(const Observable& F, const TorusGeometry& geom, const Vec& x, std::span<double> out);

double evaluate(const Observable& F, const TorusGeometry& geom, const Configuration& gamma);

/** @brief Gradient of F in the position of point `index`. */
Vec point_grad_at(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, std::size_t index);
double point_laplacian_at(const Observable& F, const TorusGeometry& geom, const Configuration& gamma,
                          std::size_t index);

/** @brief As above, locating x in gamma; throws MembershipError if x is absent. */
Vec point_grad(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, const Vec& x);
double point_laplacian(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, const Vec& x);

/** @brief sum_i d^2 F / dx_i^k dx_j^k for distinct points i, j. */
double mixed_second(const Observable& F, const TorusGeometry& geom, const Configuration& gamma, std::size_t i,
                    std::size_t j);

/** @brief Poisson(z) configuration on the torus. */
Configuration sample_poisson(const TorusGeometry& geom, double z, Rng& rng);

}  // namespace contjump
