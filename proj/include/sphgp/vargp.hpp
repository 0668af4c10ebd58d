#pragma once

#include "sphgp/adam.hpp"
#include "sphgp/harmonics.hpp"
#include "sphgp/kernels.hpp"
#include "sphgp/likelihood.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sphgp {

enum class KernelFamily { poly_decay, composed_relu, ntk_relu };

std::string to_string(KernelFamily family);

struct KernelSpec {
  KernelFamily family = KernelFamily::poly_decay;
  int depth = 2;          // composed_relu / ntk_relu
  double lambda0 = 1.0;   // poly_decay: eigenvalue of the constant frequency
};

inline constexpr double kBetaMin = 0.05;
inline constexpr double kBetaMax = 10.0;

/// Trainable kernel and likelihood hyper-parameters, all in log space.
struct KernelHyper {
  double log_beta = 0.0;      // poly_decay only
  double log_variance = 0.0;  // radial variance sigma^2
  double log_noise = -2.302585092994046;  // Gaussian noise variance (log 0.1)
};

/// Phase truncation: 0 keeps complete fundamental sets, otherwise at most this many phases per frequency.
struct ModelOptions {
  int dimension = 3;
  int max_frequency = 3;
  int phase_truncation = 0;
  std::uint64_t seed = 0;
};

struct VariationalState;

/// Inter-domain sparse GP structure: the harmonic basis (initial phases for
/// truncated frequencies, fixed phases for complete ones) and the kernel family.
/// The inducing prior covariance is diagonal with entries 1 / (sigma^2 lambda_l).
class InducingModel {
 public:
  InducingModel(HarmonicBasis basis, KernelSpec kernel);

  /// Builds the basis. Frequencies whose fixed-shape eigenvalue is zero get no features.
  static InducingModel create(const KernelSpec& kernel, const ModelOptions& options);

  const HarmonicBasis& basis() const { return basis_; }
  const KernelSpec& kernel() const { return kernel_; }
  int dimension() const { return basis_.dimension(); }
  int max_frequency() const { return basis_.max_frequency(); }
  Eigen::Index num_features() const { return basis_.num_features(); }

  /// Frequencies whose phases are variational parameters (truncated sets).
  const std::vector<int>& trainable_frequencies() const { return trainable_; }
  bool has_beta() const { return kernel_.family == KernelFamily::poly_decay; }

  /// Eigenvalues (without sigma^2) for the given hyper-parameters.
  std::vector<double> eigenvalues(const KernelHyper& hyper) const;
  /// Spectrum including the radial variance.
  Spectrum spectrum(const KernelHyper& hyper) const;
  /// lambda of each feature's frequency.
  Eigen::VectorXd lambda_per_feature(const KernelHyper& hyper) const;

  /// Basis with the state's (re-orthogonalized) phases for truncated frequencies.
  HarmonicBasis basis_for(const VariationalState& state) const;

  /// Fixed-shape eigenvalues computed once at construction (empty for poly_decay).
  const std::vector<double>& fixed_eigenvalues() const { return fixed_eigenvalues_; }

 private:
  HarmonicBasis basis_;
  KernelSpec kernel_;
  std::vector<double> fixed_eigenvalues_;
  std::vector<int> trainable_;
  std::vector<int> feature_frequency_;
};

/// q(u) = N(mean, S), S = cov_factor cov_factor^T, plus trainable hyper-parameters and phases.
struct VariationalState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov_factor;  // lower-triangular with positive diagonal
  KernelHyper hyper;
  std::vector<Eigen::MatrixXd> phases;  // one m x d block per trainable frequency
};

/// q(u) = p(u): zero mean, S = K_uu.
VariationalState prior_state(const InducingModel& model, const KernelHyper& hyper);

/// Gradient with the same layout as VariationalState. The cov_factor diagonal holds
/// d/d log(R_jj); hyper-parameter entries are with respect to their log values.
struct StateGradient {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov_factor;
  double log_beta = 0.0;
  double log_variance = 0.0;
  double log_noise = 0.0;
  std::vector<Eigen::MatrixXd> phases;
};

/// cov[f(x), u]: the orthogonalized harmonic features at x.
Eigen::VectorXd kuf(const InducingModel& model, const VariationalState& state, const SpherePoint& x);

/// Diagonal of K_uu, 1 / (sigma^2 lambda_l) per feature. Throws if a populated frequency has lambda = 0.
Eigen::VectorXd kuu_diag(const InducingModel& model, const KernelHyper& hyper);

struct Predictive {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::MatrixXd covariance;  // only when requested
};

/// Latent predictive q(f) at the rows of `points`.
Predictive predict(const InducingModel& model, const VariationalState& state, const Eigen::MatrixXd& points,
                   bool full_cov = false);

/// KL[q(u) || p(u)] with the diagonal prior.
double kl_term(const InducingModel& model, const VariationalState& state);

/// (n_total / batch) * sum_batch E_q[log p(y | f)] - KL.
double elbo(const InducingModel& model, const VariationalState& state, const Eigen::MatrixXd& points,
            const Eigen::VectorXd& targets, const Likelihood& likelihood, double n_total);

/// Exact gradient of elbo(); the value is written to `value` when given.
StateGradient elbo_gradients(const InducingModel& model, const VariationalState& state,
                             const Eigen::MatrixXd& points, const Eigen::VectorXd& targets,
                             const Likelihood& likelihood, double n_total, double* value = nullptr);

/// Sufficient statistics of a full Gaussian data set under fixed features:
/// Phi^T Phi, Phi^T y, y^T y. Exact ELBO and gradient in O(M^3), independent of N.
struct GaussianStatistics {
  Eigen::MatrixXd gram;
  Eigen::VectorXd projection;
  double target_sq = 0.0;
  Eigen::Index count = 0;

  static GaussianStatistics from_features(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets);
};

StateGradient elbo_gradients(const InducingModel& model, const VariationalState& state,
                             const GaussianStatistics& stats, double n_total, double* value = nullptr);

/// Maps a state to one flat vector (and back) in the order mean, cov_factor lower
/// triangle (column-major, log diagonal), log_beta, log_variance, log_noise, phases.
class ParameterLayout {
 public:
  enum class Group { variational, hyper, phase };

  ParameterLayout(const InducingModel& model, const Likelihood& likelihood);

  Eigen::Index size() const { return static_cast<Eigen::Index>(groups_.size()); }
  Eigen::VectorXd pack(const VariationalState& state) const;
  Eigen::VectorXd pack(const StateGradient& gradient) const;
  void unpack(const Eigen::VectorXd& flat, VariationalState& state) const;

  Group group(Eigen::Index i) const { return groups_.at(static_cast<std::size_t>(i)); }
  std::string name(Eigen::Index i) const;

 private:
  Eigen::Index features_ = 0;
  bool has_beta_ = false;
  bool has_noise_ = false;
  std::vector<int> phase_frequencies_;
  std::vector<Eigen::Index> phase_rows_;
  int dimension_ = 0;
  std::vector<Group> groups_;
};

struct FitConfig {
  int iterations = 1000;
  int batch_size = 256;
  double lr_variational = 1e-2;
  double lr_hyper = 1e-3;
  double lr_phase = 1e-3;
  std::uint64_t seed = 0;
  int log_interval = 1;
  int threads = 1;
};

struct TraceRow {
  int iteration = 0;
  double elbo = 0.0;
  double wallclock_s = 0.0;
};

struct FitResult {
  VariationalState state;
  std::vector<TraceRow> trace;
  Adam optimizer;
  std::vector<std::string> warnings;
};

/// Adam ascent on every trainable parameter; phases are re-orthogonalized after each
/// step and log(beta) is kept inside [log 0.05, log 10]. Deterministic for a fixed seed.
/// Throws NumericalError if the objective or its gradient stops being finite.
FitResult fit(const InducingModel& model, VariationalState initial, const Eigen::MatrixXd& points,
              const Eigen::VectorXd& targets, const Likelihood& likelihood, const FitConfig& config,
              const Adam* resume = nullptr);

struct GradientCheckRow {
  std::string parameter;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double relative_error = 0.0;
  bool pass = false;
};

struct GradientCheckOptions {
  double step = 1e-5;
  double relative_tolerance = 1e-4;
  double absolute_floor = 1e-7;
  /// Test hook: adds 1.0 to the analytic gradient at this flat index.
  std::optional<Eigen::Index> corrupt_index;
};

/// Central finite differences of elbo() against elbo_gradients() for every flat parameter.
std::vector<GradientCheckRow> gradient_check(const InducingModel& model, const VariationalState& state,
                                             const Eigen::MatrixXd& points, const Eigen::VectorXd& targets,
                                             const Likelihood& likelihood, double n_total,
                                             const GradientCheckOptions& options = {});

/// Affine map from model target units back to the original units.
struct TargetTransform {
  double shift = 0.0;
  double scale = 1.0;
};

struct Metrics {
  std::optional<double> rmse;
  std::optional<double> nll;
  std::optional<double> auc;
};

struct PredictionRow {
  double target = 0.0;
  double mean = 0.0;      // original units, or P(y = 1)
  double variance = 0.0;  // predictive variance of y (regression)
};

struct Evaluation {
  Metrics metrics;
  std::vector<PredictionRow> predictions;
};

/// Regression: RMSE and mean negative log predictive density in original units.
/// Binary: ROC AUC and mean Bernoulli negative log likelihood.
Evaluation evaluate(const InducingModel& model, const VariationalState& state, const Eigen::MatrixXd& points,
                    const Eigen::VectorXd& targets, const Likelihood& likelihood,
                    const TargetTransform& transform = {});

}  // namespace sphgp
