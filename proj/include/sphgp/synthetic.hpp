#pragma once

#include "sphgp/data_io.hpp"
#include "sphgp/harmonics.hpp"

#include <Eigen/Core>

#include <cstdint>

namespace sphgp {

/// One draw f = sum_l sqrt(sigma^2 lambda_l) xi^T phi_l from the truncated poly-decay prior,
/// represented by its coefficients on complete fundamental sets.
class PriorSample {
 public:
  PriorSample(int dimension, int max_frequency, double beta, double variance, std::uint64_t seed);

  Eigen::VectorXd operator()(const Eigen::MatrixXd& points) const;
  const HarmonicBasis& basis() const { return basis_; }

 private:
  HarmonicBasis basis_;
  Eigen::VectorXd coefficients_;
};

struct SphereRegression {
  Eigen::MatrixXd points;  // uniform on S^{d-1}
  Eigen::VectorXd latent;
  Eigen::VectorXd targets;  // latent + N(0, noise_sd^2)
};

/// Regression data drawn directly on the sphere from a prior sample.
SphereRegression sample_sphere_regression(const PriorSample& f, Eigen::Index n, double noise_sd, std::uint64_t seed);

/// Tabular regression: raw inputs N(0, I) in R^{dimension-1}, target from a prior sample
/// evaluated at the bias-projected input plus Gaussian noise.
Dataset synthetic_regression(Eigen::Index n, int dimension, int max_frequency, double beta, double noise_sd,
                             double bias, std::uint64_t seed);

/// Binary task in the style of a particle-physics benchmark: eight Gaussian kinematic-like
/// features named after the SUSY low-level columns, target `signal` from a noisy nonlinear score.
Dataset synthetic_binary(Eigen::Index n, std::uint64_t seed);

/// Writes a data set as CSV with its column names (x0, x1, ... and y when unnamed).
std::string to_csv(const Dataset& data);

}  // namespace sphgp
