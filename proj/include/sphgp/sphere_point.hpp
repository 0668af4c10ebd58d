#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace sphgp {

/// A unit vector on S^{d-1}. Keeps the pre-projection norm for an optional radial component.
class SpherePoint {
 public:
  /// Appends `bias` to `raw` and divides by the norm of the extended vector.
  /// The result lives in dimension raw.size() + 1.
  static SpherePoint project(std::span<const double> raw, double bias);

  /// Normalizes an arbitrary non-zero vector (no bias augmentation).
  static SpherePoint normalize(const Eigen::VectorXd& v);

  const Eigen::VectorXd& coords() const { return coords_; }
  double stored_norm() const { return stored_norm_; }
  int dimension() const { return static_cast<int>(coords_.size()); }

  double dot(const SpherePoint& other) const;

 private:
  SpherePoint(Eigen::VectorXd coords, double norm) : coords_(std::move(coords)), stored_norm_(norm) {}

  Eigen::VectorXd coords_;
  double stored_norm_ = 1.0;
};

/// Row-stacked coordinates (one point per row). Throws if dimensions disagree.
Eigen::MatrixXd to_matrix(std::span<const SpherePoint> points);

/// Uniform samples on S^{d-1} as rows, from normalized standard Gaussians.
template <typename Rng>
Eigen::MatrixXd sample_sphere(Eigen::Index n, int dimension, Rng& rng);

}  // namespace sphgp

#include <random>

namespace sphgp {

template <typename Rng>
Eigen::MatrixXd sample_sphere(Eigen::Index n, int dimension, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd points(n, dimension);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < dimension; ++j) points(i, j) = normal(rng);
    const double norm = points.row(i).norm();
    if (norm == 0.0) {
      --i;
      continue;
    }
    points.row(i) /= norm;
  }
  return points;
}

}  // namespace sphgp
