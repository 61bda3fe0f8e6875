#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "contjump/errors.hpp"

namespace contjump {

inline constexpr int kMaxDim = 3;

/** @brief Point or displacement; coordinates beyond the active dimension are zero. */
using Vec = std::array<double, kMaxDim>;

inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec operator-(const Vec& a) { return {-a[0], -a[1], -a[2]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm2(const Vec& a) { return dot(a, a); }

/** @brief Periodic box [0,L)^d with the minimal-image metric. */
class TorusGeometry {
 public:
  TorusGeometry(int dim, double side);

  int dim() const { return dim_; }
  double side() const { return side_; }
  double volume() const { return std::pow(side_, dim_); }

  /** @brief Map every active coordinate into [0,L). */
  Vec wrap(const Vec& x) const;

  /** @brief Representative of y - x with coordinates in [-L/2, L/2). */
  Vec min_image_diff(const Vec& x, const Vec& y) const;

  /** @brief Representative of an arbitrary displacement in [-L/2, L/2)^d. */
  Vec reduce(const Vec& v) const;

  double distance2(const Vec& x, const Vec& y) const { return norm2(min_image_diff(x, y)); }
  double distance(const Vec& x, const Vec& y) const { return std::sqrt(distance2(x, y)); }

  /** @brief Throws ConfigurationError unless L > 2 * range. */
  void require_range(double range) const;

 private:
  int dim_;
  double side_;
};

/** @brief Finite point configuration with set semantics. */
struct Configuration {
  std::vector<Vec> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  /** @brief Index of an exactly equal point; throws MembershipError if absent. */
  std::size_t index_of(const Vec& x) const;
};

/** @brief Axis-aligned box [lo, hi) inside the torus, used as a counting window. */
struct Window {
  Vec lo{};
  Vec hi{};

  bool contains(const Vec& x, int dim) const;
  double volume(int dim) const;
};

/** @brief Volume of the unit ball in dimension d. */
double unit_ball_volume(int dim);

}  // namespace contjump
