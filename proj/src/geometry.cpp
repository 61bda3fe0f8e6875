#include "contjump/geometry.hpp"

#include <numbers>
#include <string>

namespace contjump {

TorusGeometry::TorusGeometry(int dim, double side) : dim_(dim), side_(side) {
  if (dim < 1 || dim > kMaxDim) throw InvalidParameter("dimension must be in 1..3");
  if (!(side > 0.0) || !std::isfinite(side)) throw InvalidParameter("side length must be positive");
}

Vec TorusGeometry::wrap(const Vec& x) const {
  Vec out{};
  for (int k = 0; k < dim_; ++k) {
    double v = x[k] - side_ * std::floor(x[k] / side_);
    if (v >= side_) v = 0.0;
    out[k] = v;
  }
  return out;
}

Vec TorusGeometry::reduce(const Vec& v) const {
  Vec out{};
  for (int k = 0; k < dim_; ++k) {
    double r = v[k] - side_ * std::floor(v[k] / side_ + 0.5);
    if (r >= 0.5 * side_) r -= side_;
    out[k] = r;
  }
  return out;
}

Vec TorusGeometry::min_image_diff(const Vec& x, const Vec& y) const { return reduce(y - x); }

void TorusGeometry::require_range(double range) const {
  if (!(side_ > 2.0 * range)) {
    throw ConfigurationError("torus side " + std::to_string(side_) +
                             " must exceed twice the interaction range " + std::to_string(range));
  }
}

std::size_t Configuration::index_of(const Vec& x) const {
  for (std::size_t i = 0; i < points.size(); ++i)
    if (points[i] == x) return i;
  throw MembershipError("point is not a member of the configuration");
}

bool Window::contains(const Vec& x, int dim) const {
  for (int k = 0; k < dim; ++k)
    if (x[k] < lo[k] || x[k] >= hi[k]) return false;
  return true;
}

double Window::volume(int dim) const {
  double v = 1.0;
  for (int k = 0; k < dim; ++k) v *= hi[k] - lo[k];
  return v;
}

double unit_ball_volume(int dim) {
  switch (dim) {
    case 1: return 2.0;
    case 2: return std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi / 3.0;
    default: throw InvalidParameter("dimension must be in 1..3");
  }
}

}  // namespace contjump
