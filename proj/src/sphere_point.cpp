#include "sphgp/sphere_point.hpp"

#include "sphgp/errors.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sphgp {

SpherePoint SpherePoint::project(std::span<const double> raw, double bias) {
  if (!(bias > 0.0)) throw std::invalid_argument("bias must be positive");
  Eigen::VectorXd extended(static_cast<Eigen::Index>(raw.size()) + 1);
  for (std::size_t i = 0; i < raw.size(); ++i) extended[static_cast<Eigen::Index>(i)] = raw[i];
  extended[extended.size() - 1] = bias;
  const double norm = extended.norm();
  return SpherePoint(extended / norm, norm);
}

SpherePoint SpherePoint::normalize(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("cannot normalize a zero or non-finite vector");
  return SpherePoint(v / norm, norm);
}

double SpherePoint::dot(const SpherePoint& other) const {
  if (other.dimension() != dimension()) {
    throw DimensionError("sphere point dimension mismatch: " + std::to_string(dimension()) + " vs " +
                                std::to_string(other.dimension()));
  }
  return coords_.dot(other.coords_);
}

Eigen::MatrixXd to_matrix(std::span<const SpherePoint> points) {
  if (points.empty()) return {};
  const int d = points.front().dimension();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].dimension() != d) throw DimensionError("sphere points of mixed dimension");
    out.row(static_cast<Eigen::Index>(i)) = points[i].coords().transpose();
  }
  return out;
}

}  // namespace sphgp
