#pragma once

#include "sphgp/sphere_point.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sphgp {

/// Phase directions V_l for one frequency together with the Cholesky factor of
/// their Gegenbauer Gram matrix A_l = ((l + alpha) / alpha) C_l^(alpha)(V_l V_l^T).
///
/// Features built from a set are orthonormal under the uniform probability
/// measure on the sphere whether or not the set is complete.
struct FundamentalSet {
  int frequency = 1;
  int dimension = 3;
  Eigen::MatrixXd directions;  // m x d, unit rows
  Eigen::MatrixXd gram_chol;   // lower-triangular factor of A_l + jitter * I
  double condition_number = 1.0;
  double jitter = 0.0;
  std::string warning;

  Eigen::Index size() const { return directions.rows(); }
};

inline constexpr double kBuildMaxCondition = 1e8;
inline constexpr double kReorthogonalizeMaxCondition = 1e12;

/// A_l for the given (unit) rows.
Eigen::MatrixXd gegenbauer_gram(int frequency, const Eigen::MatrixXd& directions);

/// Picks `count` directions by greedy maximal residual-variance selection from a
/// seeded candidate pool and accepts them once cond(A_l) < 1e8. Restarts with a
/// larger pool a bounded number of times before giving up.
FundamentalSet build_fundamental_set(int frequency, int dimension, int count, std::uint64_t seed);

/// Re-normalizes rows and recomputes the Cholesky factor. If A_l is numerically
/// singular, the smallest jitter in {1e-10, ..., 1e-4} * trace / m that repairs it is
/// added and a warning is recorded. Throws NumericalError when no jitter helps.
FundamentalSet reorthogonalize(const FundamentalSet& set);
FundamentalSet make_fundamental_set(int frequency, Eigen::MatrixXd directions);

/// Truncated harmonic feature basis for frequencies 0..max_frequency.
/// Frequency 0 is the constant feature; sets()[l - 1] holds frequency l.
class HarmonicBasis {
 public:
  HarmonicBasis() = default;
  HarmonicBasis(int dimension, std::vector<FundamentalSet> sets);

  /// phase_counts[l] for l = 0..max_frequency; phase_counts[0] must be 1.
  /// A count of 0 leaves that frequency empty. Counts above N(l, d) are rejected.
  static HarmonicBasis build(int dimension, const std::vector<int>& phase_counts, std::uint64_t seed);

  int dimension() const { return dimension_; }
  int max_frequency() const { return static_cast<int>(sets_.size()); }
  Eigen::Index num_features() const;

  const std::vector<FundamentalSet>& sets() const { return sets_; }
  const FundamentalSet& set(int frequency) const { return sets_.at(frequency - 1); }
  void replace_set(FundamentalSet set);

  /// Phase count per frequency, starting with 1 for l = 0.
  std::vector<int> phase_counts() const;
  /// Frequency of every feature, in feature order.
  std::vector<int> feature_frequency() const;
  /// Index of the first feature of frequency l.
  Eigen::Index offset(int frequency) const;

 private:
  int dimension_ = 0;
  std::vector<FundamentalSet> sets_;
};

/// Orthogonalized features phi(x), concatenated over frequencies.
Eigen::VectorXd features(const HarmonicBasis& basis, const SpherePoint& x);

/// Features for every row of `points` (B x d); returns B x M. Rows are processed
/// independently so `threads > 1` gives identical results.
Eigen::MatrixXd feature_matrix(const HarmonicBasis& basis, const Eigen::MatrixXd& points, int threads = 1);

/// Raw (pre-Cholesky) Gegenbauer responses ((l+alpha)/alpha) C_l(V x) for one set; B x m.
Eigen::MatrixXd raw_responses(const FundamentalSet& set, const Eigen::MatrixXd& points);

struct MonteCarloGram {
  Eigen::MatrixXd mean;            // E[phi phi^T]
  Eigen::MatrixXd standard_error;  // per-entry standard error of the mean
};

/// Empirical second moment of the features under uniform x on the sphere.
MonteCarloGram monte_carlo_gram(const HarmonicBasis& basis, Eigen::Index n_samples, std::uint64_t seed);

/// Text section: versioned header, d, max frequency, per-frequency counts and
/// row-major float64 directions written as hex floats (bit exact).
std::string serialize_basis(const HarmonicBasis& basis);
HarmonicBasis deserialize_basis(std::string_view text);

}  // namespace sphgp
