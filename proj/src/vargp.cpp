#include "sphgp/vargp.hpp"

#include "sphgp/data_io.hpp"
#include "sphgp/errors.hpp"
#include "sphgp/metrics.hpp"
#include "sphgp/special_math.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sphgp {

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::poly_decay: return "poly_decay";
    case KernelFamily::composed_relu: return "composed_relu";
    case KernelFamily::ntk_relu: return "ntk_relu";
  }
  return "unknown";
}

namespace {

constexpr double kVarianceTolerance = 1e-10;
constexpr Eigen::Index kFeatureCacheLimit = 20'000'000;

std::uint64_t harmonic_count_or_max(int l, int d) {
  try {
    return num_harmonics(l, d);
  } catch (const std::overflow_error&) {
    return std::numeric_limits<std::uint64_t>::max();
  }
}

std::vector<double> fixed_shape_eigenvalues(const KernelSpec& kernel, int dimension, int max_frequency) {
  switch (kernel.family) {
    case KernelFamily::poly_decay: return {};
    case KernelFamily::composed_relu:
      return funk_hecke_spectrum(compose_shape(ShapeFunction::relu(), kernel.depth), dimension, max_frequency)
          .eigenvalues;
    case KernelFamily::ntk_relu:
      return funk_hecke_spectrum(ntk_relu_shape(kernel.depth), dimension, max_frequency).eigenvalues;
  }
  throw std::invalid_argument("unknown kernel family");
}

// N(l, d) as a double, the weight of lambda_l in k(x, x).
double harmonic_weight(int l, double alpha) { return zonal_scale(l, alpha) * gegenbauer_at_one(alpha, l); }

// Everything the forward pass needs that depends only on hyper-parameters.
struct Prior {
  Eigen::VectorXd w;         // sigma^2 lambda per feature
  Eigen::VectorXd dw_dbeta;  // d w / d log beta per feature
  double k0 = 0.0;           // sigma^2 sum_l N_l lambda_l
  double dk0_dbeta = 0.0;
  double noise = 0.0;
};

Prior make_prior(const InducingModel& model, const KernelHyper& hyper) {
  const std::vector<double> lambda = model.eigenvalues(hyper);
  const double sigma2 = std::exp(hyper.log_variance);
  const double beta = std::exp(hyper.log_beta);
  const double alpha = gegenbauer_alpha(model.dimension());
  Prior p;
  p.noise = std::exp(hyper.log_noise);
  std::vector<double> dlambda(lambda.size(), 0.0);
  if (model.has_beta()) {
    for (std::size_t l = 1; l < lambda.size(); ++l) dlambda[l] = -beta * std::log(static_cast<double>(l)) * lambda[l];
  }
  for (std::size_t l = 0; l < lambda.size(); ++l) {
    const double n_l = harmonic_weight(static_cast<int>(l), alpha);
    p.k0 += n_l * lambda[l];
    p.dk0_dbeta += n_l * dlambda[l];
  }
  p.k0 *= sigma2;
  p.dk0_dbeta *= sigma2;

  const std::vector<int> freq = model.basis().feature_frequency();
  const auto m = static_cast<Eigen::Index>(freq.size());
  p.w.resize(m);
  p.dw_dbeta.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto l = static_cast<std::size_t>(freq[static_cast<std::size_t>(j)]);
    if (!(lambda[l] > 0.0)) {
      throw NumericalError("frequency " + std::to_string(l) + " has features but a zero eigenvalue");
    }
    p.w[j] = sigma2 * lambda[l];
    p.dw_dbeta[j] = sigma2 * dlambda[l];
  }
  return p;
}

void check_state(const InducingModel& model, const VariationalState& state) {
  const Eigen::Index m = model.num_features();
  if (state.mean.size() != m || state.cov_factor.rows() != m || state.cov_factor.cols() != m) {
    throw DimensionError("variational state does not match the model's " + std::to_string(m) + " features");
  }
  if (state.phases.size() != model.trainable_frequencies().size()) {
    throw DimensionError("variational state has the wrong number of phase blocks");
  }
  if (m > 0 && !(state.cov_factor.diagonal().minCoeff() > 0.0)) {
    throw NumericalError("covariance factor needs a positive diagonal");
  }
}

double kl_value(const Prior& p, const VariationalState& s) {
  const Eigen::MatrixXd r = s.cov_factor.triangularView<Eigen::Lower>();
  const Eigen::VectorXd s_diag = r.rowwise().squaredNorm();
  const auto m = static_cast<double>(s.mean.size());
  return 0.5 * (p.w.dot(s_diag) + p.w.dot(s.mean.cwiseAbs2()) - m - p.w.array().log().sum() -
                2.0 * s.cov_factor.diagonal().array().log().sum());
}

// Gradient pieces with respect to (m, R, w, k0, log noise) of the data term, before the KL.
struct DataGradient {
  double value = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov_factor;
  Eigen::VectorXd w;
  double k0 = 0.0;
  double log_noise = 0.0;
};

// Adds the KL gradient, chains w and k0 to the hyper-parameters and applies the
// log-diagonal parameterization.
StateGradient assemble(const InducingModel& model, const Prior& p, const VariationalState& s, DataGradient d,
                       double* value) {
  const Eigen::MatrixXd r = s.cov_factor.triangularView<Eigen::Lower>();
  const Eigen::VectorXd s_diag = r.rowwise().squaredNorm();
  const Eigen::VectorXd m2 = s.mean.cwiseAbs2();

  StateGradient g;
  g.mean = d.mean - p.w.cwiseProduct(s.mean);
  Eigen::MatrixXd rbar = d.cov_factor - p.w.asDiagonal() * r;
  rbar.diagonal() += s.cov_factor.diagonal().cwiseInverse();
  rbar = rbar.triangularView<Eigen::Lower>();
  rbar.diagonal() = rbar.diagonal().cwiseProduct(s.cov_factor.diagonal());
  g.cov_factor = std::move(rbar);

  const Eigen::VectorXd wbar = d.w - 0.5 * (s_diag + m2 - p.w.cwiseInverse());
  g.log_variance = wbar.dot(p.w) + d.k0 * p.k0;
  g.log_beta = model.has_beta() ? wbar.dot(p.dw_dbeta) + d.k0 * p.dk0_dbeta : 0.0;
  g.log_noise = d.log_noise;
  if (value) *value = d.value - kl_value(p, s);
  return g;
}

struct Forward {
  Eigen::MatrixXd phi;
  Eigen::MatrixXd a;  // phi diag(w)
  Eigen::VectorXd mean;
  Eigen::MatrixXd t;  // a R
  Eigen::VectorXd var;
};

Forward forward(const Prior& p, const VariationalState& s, Eigen::MatrixXd phi) {
  Forward f;
  f.phi = std::move(phi);
  f.a = f.phi * p.w.asDiagonal();
  f.mean = f.a * s.mean;
  f.t = f.a * s.cov_factor.triangularView<Eigen::Lower>();
  f.var = (p.k0 - (f.phi.cwiseAbs2() * p.w).array()).matrix() + f.t.rowwise().squaredNorm();
  return f;
}

void check_variance(const Eigen::VectorXd& var, double k0) {
  const double tol = kVarianceTolerance * std::max(1.0, k0);
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    if (!(var[i] >= -tol)) {
      std::ostringstream msg;
      msg << "predictive variance " << var[i] << " is negative beyond tolerance at row " << i;
      throw NumericalError(msg.str());
    }
  }
}

// Data term on a batch and, optionally, its gradient including the phases.
struct BatchResult {
  DataGradient data;
  std::vector<Eigen::MatrixXd> phases;
};

BatchResult batch_term(const InducingModel& model, const Prior& p, const VariationalState& s,
                       const HarmonicBasis& basis, const Eigen::MatrixXd& points, Eigen::MatrixXd phi,
                       const Eigen::VectorXd& y, const Likelihood& lik, double n_total, bool want_gradient) {
  const Eigen::Index b = points.rows();
  if (b == 0) throw DataError("empty batch");
  if (y.size() != b) throw DimensionError("targets and points differ in length");
  const Forward f = forward(p, s, std::move(phi));
  check_variance(f.var, p.k0);

  const double c = n_total / static_cast<double>(b);
  Eigen::VectorXd gmu(b), gv(b);
  double sum = 0.0;
  double glog_noise = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const double v = lik.kind == Likelihood::Kind::gaussian ? f.var[i] : std::max(f.var[i], 0.0);
    const ExpectedLogLik e = expected_log_likelihood(lik, y[i], f.mean[i], v, p.noise);
    sum += e.value;
    gmu[i] = c * e.d_mean;
    gv[i] = c * e.d_var;
    glog_noise += c * e.d_log_noise;
  }

  BatchResult out;
  out.data.value = c * sum;
  if (!want_gradient) return out;

  const Eigen::MatrixXd r = s.cov_factor.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd gv_t = gv.asDiagonal() * f.t;
  out.data.mean = f.a.transpose() * gmu;
  out.data.cov_factor = (2.0 * f.a.transpose() * gv_t).triangularView<Eigen::Lower>();
  out.data.k0 = gv.sum();
  out.data.log_noise = lik.has_noise() ? glog_noise : 0.0;

  // Gradient with respect to A = phi diag(w) with the w factor removed.
  const Eigen::MatrixXd abar = gmu * s.mean.transpose() + 2.0 * gv_t * r.transpose();
  out.data.w = (abar.cwiseProduct(f.phi) - gv.asDiagonal() * f.phi.cwiseAbs2()).colwise().sum().transpose();

  const auto& trainable = model.trainable_frequencies();
  if (trainable.empty()) return out;
  const Eigen::MatrixXd phibar = (abar - 2.0 * gv.asDiagonal() * f.phi) * p.w.asDiagonal();
  const double alpha = gegenbauer_alpha(model.dimension());
  for (std::size_t k = 0; k < trainable.size(); ++k) {
    const int l = trainable[k];
    const FundamentalSet& set = basis.set(l);
    const Eigen::Index m = set.size();
    const Eigen::Index off = basis.offset(l);
    const double scale = zonal_scale(l, alpha);
    const Eigen::MatrixXd& lower = set.gram_chol;
    const Eigen::MatrixXd& v = set.directions;

    // phi_blk = G L^{-T}: gradients with respect to the raw responses G and the factor L.
    Eigen::MatrixXd g_g = phibar.middleCols(off, m);
    lower.triangularView<Eigen::Lower>().solveInPlace<Eigen::OnTheRight>(g_g);
    const Eigen::MatrixXd lbar = (-g_g.transpose() * f.phi.middleCols(off, m)).triangularView<Eigen::Lower>();

    // Cholesky backward: gram_bar = L^{-T} sym(P) L^{-1}, P = lower(L^T lbar) with halved diagonal.
    Eigen::MatrixXd ph = (lower.transpose() * lbar).triangularView<Eigen::Lower>();
    ph.diagonal() *= 0.5;
    Eigen::MatrixXd gram_bar = 0.5 * (ph + ph.transpose());
    lower.transpose().triangularView<Eigen::Upper>().solveInPlace(gram_bar);
    lower.triangularView<Eigen::Lower>().solveInPlace<Eigen::OnTheRight>(gram_bar);

    Eigen::MatrixXd xv = points * v.transpose();
    for (Eigen::Index j = 0; j < xv.cols(); ++j) {
      for (Eigen::Index i = 0; i < xv.rows(); ++i) xv(i, j) = scale * gegenbauer_derivative(alpha, l, xv(i, j));
    }
    Eigen::MatrixXd vv = v * v.transpose();
    for (Eigen::Index j = 0; j < vv.cols(); ++j) {
      for (Eigen::Index i = 0; i < vv.rows(); ++i) vv(i, j) = scale * gegenbauer_derivative(alpha, l, vv(i, j));
    }
    Eigen::MatrixXd dv = g_g.cwiseProduct(xv).transpose() * points + 2.0 * gram_bar.cwiseProduct(vv) * v;

    // Back through the row normalization of the raw phase parameters.
    const Eigen::MatrixXd& raw = s.phases[k];
    Eigen::MatrixXd du(m, v.cols());
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::RowVectorXd vi = v.row(i);
      const Eigen::RowVectorXd di = dv.row(i);
      du.row(i) = (di - di.dot(vi) * vi) / raw.row(i).norm();
    }
    out.phases.push_back(std::move(du));
  }
  return out;
}

}  // namespace

InducingModel::InducingModel(HarmonicBasis basis, KernelSpec kernel)
    : basis_(std::move(basis)), kernel_(kernel) {
  if (basis_.dimension() == 0) throw std::invalid_argument("model needs a harmonic basis");
  if (!(kernel_.lambda0 > 0.0)) throw std::invalid_argument("lambda_0 must be positive");
  if (kernel_.family != KernelFamily::poly_decay && kernel_.depth < 1) {
    throw std::invalid_argument("kernel depth must be >= 1");
  }
  fixed_eigenvalues_ = fixed_shape_eigenvalues(kernel_, basis_.dimension(), basis_.max_frequency());
  for (int l = 1; l <= basis_.max_frequency(); ++l) {
    const auto m = static_cast<std::uint64_t>(basis_.set(l).size());
    if (m > 0 && m < harmonic_count_or_max(l, basis_.dimension())) trainable_.push_back(l);
  }
  feature_frequency_ = basis_.feature_frequency();
}

InducingModel InducingModel::create(const KernelSpec& kernel, const ModelOptions& options) {
  if (options.max_frequency < 0) throw std::invalid_argument("max_frequency must be >= 0");
  if (options.phase_truncation < 0) throw std::invalid_argument("phase truncation must be >= 0");
  const std::vector<double> fixed = fixed_shape_eigenvalues(kernel, options.dimension, options.max_frequency);
  std::vector<int> counts{1};
  for (int l = 1; l <= options.max_frequency; ++l) {
    if (!fixed.empty() && !(fixed[static_cast<std::size_t>(l)] > 0.0)) {
      counts.push_back(0);
      continue;
    }
    const std::uint64_t full = harmonic_count_or_max(l, options.dimension);
    if (options.phase_truncation == 0) {
      if (full > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
        throw std::invalid_argument("complete fundamental set at frequency " + std::to_string(l) +
                                    " is too large; use phase truncation");
      }
      counts.push_back(static_cast<int>(full));
    } else {
      counts.push_back(static_cast<int>(std::min<std::uint64_t>(full, options.phase_truncation)));
    }
  }
  return InducingModel(HarmonicBasis::build(options.dimension, counts, options.seed), kernel);
}

std::vector<double> InducingModel::eigenvalues(const KernelHyper& hyper) const {
  if (kernel_.family != KernelFamily::poly_decay) return fixed_eigenvalues_;
  return poly_decay_spectrum(std::exp(hyper.log_beta), dimension(), max_frequency(), kernel_.lambda0).eigenvalues;
}

Spectrum InducingModel::spectrum(const KernelHyper& hyper) const {
  Spectrum s;
  if (kernel_.family == KernelFamily::poly_decay) {
    s = poly_decay_spectrum(std::exp(hyper.log_beta), dimension(), max_frequency(), kernel_.lambda0);
  } else {
    s.dimension = dimension();
    s.eigenvalues = fixed_eigenvalues_;
    s.source = SpectrumSource::funk_hecke;
    s.label = kernel_.family == KernelFamily::ntk_relu ? "ntk" + std::to_string(kernel_.depth)
                                                       : "relu^" + std::to_string(kernel_.depth);
  }
  s.radial_variance = std::exp(hyper.log_variance);
  return s;
}

Eigen::VectorXd InducingModel::lambda_per_feature(const KernelHyper& hyper) const {
  const std::vector<double> lambda = eigenvalues(hyper);
  Eigen::VectorXd out(static_cast<Eigen::Index>(feature_frequency_.size()));
  for (std::size_t j = 0; j < feature_frequency_.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] = lambda[static_cast<std::size_t>(feature_frequency_[j])];
  }
  return out;
}

HarmonicBasis InducingModel::basis_for(const VariationalState& state) const {
  if (state.phases.size() != trainable_.size()) throw DimensionError("wrong number of phase blocks");
  if (trainable_.empty()) return basis_;
  HarmonicBasis out = basis_;
  for (std::size_t k = 0; k < trainable_.size(); ++k) {
    const int l = trainable_[k];
    if (state.phases[k].rows() != basis_.set(l).size() || state.phases[k].cols() != dimension()) {
      throw DimensionError("phase block for frequency " + std::to_string(l) + " has the wrong shape");
    }
    out.replace_set(make_fundamental_set(l, state.phases[k]));
  }
  return out;
}

VariationalState prior_state(const InducingModel& model, const KernelHyper& hyper) {
  const Eigen::VectorXd w = kuu_diag(model, hyper).cwiseInverse();
  VariationalState s;
  s.mean = Eigen::VectorXd::Zero(w.size());
  s.cov_factor = w.cwiseSqrt().cwiseInverse().asDiagonal();
  s.hyper = hyper;
  for (int l : model.trainable_frequencies()) s.phases.push_back(model.basis().set(l).directions);
  return s;
}

Eigen::VectorXd kuf(const InducingModel& model, const VariationalState& state, const SpherePoint& x) {
  return features(model.basis_for(state), x);
}

Eigen::VectorXd kuu_diag(const InducingModel& model, const KernelHyper& hyper) {
  return make_prior(model, hyper).w.cwiseInverse();
}

Predictive predict(const InducingModel& model, const VariationalState& state, const Eigen::MatrixXd& points,
                   bool full_cov) {
  check_state(model, state);
  const Prior p = make_prior(model, state.hyper);
  const HarmonicBasis basis = model.basis_for(state);
  const Forward f = forward(p, state, feature_matrix(basis, points));
  check_variance(f.var, p.k0);
  Predictive out;
  out.mean = f.mean;
  out.variance = f.var.cwiseMax(0.0);
  if (full_cov) {
    out.covariance = mercer_gram(model.spectrum(state.hyper), points, points) - f.a * f.phi.transpose() +
                     f.t * f.t.transpose();
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    out.covariance.diagonal() = out.variance;
  }
  return out;
}

double kl_term(const InducingModel& model, const VariationalState& state) {
  check_state(model, state);
  return kl_value(make_prior(model, state.hyper), state);
}

double elbo(const InducingModel& model, const VariationalState& state, const Eigen::MatrixXd& points,
            const Eigen::VectorXd& targets, const Likelihood& likelihood, double n_total) {
  check_state(model, state);
  const Prior p = make_prior(model, state.hyper);
  const HarmonicBasis basis = model.basis_for(state);
  const BatchResult r =
      batch_term(model, p, state, basis, points, feature_matrix(basis, points), targets, likelihood, n_total, false);
  return r.data.value - kl_value(p, state);
}

namespace {

StateGradient gradients_with_features(const InducingModel& model, const VariationalState& state,
                                      const HarmonicBasis& basis, const Eigen::MatrixXd& points,
                                      Eigen::MatrixXd phi, const Eigen::VectorXd& targets,
                                      const Likelihood& likelihood, double n_total, double* value) {
  const Prior p = make_prior(model, state.hyper);
  BatchResult r = batch_term(model, p, state, basis, points, std::move(phi), targets, likelihood, n_total, true);
  StateGradient g = assemble(model, p, state, std::move(r.data), value);
  g.phases = std::move(r.phases);
  return g;
}

}  // namespace

StateGradient elbo_gradients(const InducingModel& model, const VariationalState& state,
                             const Eigen::MatrixXd& points, const Eigen::VectorXd& targets,
                             const Likelihood& likelihood, double n_total, double* value) {
  check_state(model, state);
  const HarmonicBasis basis = model.basis_for(state);
  return gradients_with_features(model, state, basis, points, feature_matrix(basis, points), targets, likelihood,
                                 n_total, value);
}

GaussianStatistics GaussianStatistics::from_features(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets) {
  if (features.rows() != targets.size()) throw DimensionError("features and targets differ in length");
  GaussianStatistics s;
  s.gram = features.transpose() * features;
  s.projection = features.transpose() * targets;
  s.target_sq = targets.squaredNorm();
  s.count = targets.size();
  return s;
}

StateGradient elbo_gradients(const InducingModel& model, const VariationalState& state,
                             const GaussianStatistics& stats, double n_total, double* value) {
  check_state(model, state);
  if (!model.trainable_frequencies().empty()) {
    throw std::invalid_argument("sufficient statistics need fixed features (no trainable phases)");
  }
  if (stats.count <= 0) throw DataError("empty data set");
  if (stats.gram.rows() != model.num_features()) throw DimensionError("statistics do not match the model");
  const Prior p = make_prior(model, state.hyper);
  const auto n = static_cast<double>(stats.count);
  const double c = n_total / n;
  const double noise = p.noise;
  const Eigen::MatrixXd r = state.cov_factor.triangularView<Eigen::Lower>();

  const Eigen::VectorXd a = p.w.cwiseProduct(state.mean);
  const Eigen::VectorXd ga = stats.gram * a;
  const double sse = stats.target_sq - 2.0 * a.dot(stats.projection) + a.dot(ga);
  const Eigen::MatrixXd wgw = p.w.asDiagonal() * stats.gram * p.w.asDiagonal();
  const Eigen::MatrixXd wgw_r = wgw * r;
  const double var_sum = n * p.k0 - p.w.dot(stats.gram.diagonal()) + (r.transpose() * wgw_r).trace();
  if (!(var_sum >= -kVarianceTolerance * std::max(1.0, p.k0) * n)) {
    throw NumericalError("summed predictive variance is negative");
  }
  const double sq = sse + var_sum;

  DataGradient d;
  d.value = c * (-0.5 * n * std::log(2.0 * std::numbers::pi * noise) - 0.5 * sq / noise);
  const Eigen::VectorXd da = c * (stats.projection - ga) / noise;
  d.mean = p.w.cwiseProduct(da);
  d.cov_factor = (-c / noise * wgw_r).triangularView<Eigen::Lower>();
  const Eigen::MatrixXd s_mat = r * r.transpose();
  d.w = da.cwiseProduct(state.mean) -
        c / (2.0 * noise) * (2.0 * stats.gram.cwiseProduct(s_mat) * p.w - stats.gram.diagonal());
  d.k0 = -c * n / (2.0 * noise);
  d.log_noise = c * (-0.5 * n + 0.5 * sq / noise);
  return assemble(model, p, state, std::move(d), value);
}

ParameterLayout::ParameterLayout(const InducingModel& model, const Likelihood& likelihood)
    : features_(model.num_features()),
      has_beta_(model.has_beta()),
      has_noise_(likelihood.has_noise()),
      phase_frequencies_(model.trainable_frequencies()),
      dimension_(model.dimension()) {
  const Eigen::Index m = features_;
  groups_.assign(static_cast<std::size_t>(m + m * (m + 1) / 2), Group::variational);
  if (has_beta_) groups_.push_back(Group::hyper);
  groups_.push_back(Group::hyper);
  if (has_noise_) groups_.push_back(Group::hyper);
  for (int l : phase_frequencies_) {
    const Eigen::Index rows = model.basis().set(l).size();
    phase_rows_.push_back(rows);
    groups_.insert(groups_.end(), static_cast<std::size_t>(rows * dimension_), Group::phase);
  }
}

Eigen::VectorXd ParameterLayout::pack(const VariationalState& state) const {
  Eigen::VectorXd out(size());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < features_; ++j) out[k++] = state.mean[j];
  for (Eigen::Index j = 0; j < features_; ++j) {
    out[k++] = std::log(state.cov_factor(j, j));
    for (Eigen::Index i = j + 1; i < features_; ++i) out[k++] = state.cov_factor(i, j);
  }
  if (has_beta_) out[k++] = state.hyper.log_beta;
  out[k++] = state.hyper.log_variance;
  if (has_noise_) out[k++] = state.hyper.log_noise;
  for (std::size_t b = 0; b < phase_rows_.size(); ++b) {
    for (Eigen::Index i = 0; i < phase_rows_[b]; ++i) {
      for (int c = 0; c < dimension_; ++c) out[k++] = state.phases[b](i, c);
    }
  }
  return out;
}

Eigen::VectorXd ParameterLayout::pack(const StateGradient& g) const {
  Eigen::VectorXd out(size());
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < features_; ++j) out[k++] = g.mean[j];
  for (Eigen::Index j = 0; j < features_; ++j) {
    for (Eigen::Index i = j; i < features_; ++i) out[k++] = g.cov_factor(i, j);
  }
  if (has_beta_) out[k++] = g.log_beta;
  out[k++] = g.log_variance;
  if (has_noise_) out[k++] = g.log_noise;
  for (std::size_t b = 0; b < phase_rows_.size(); ++b) {
    for (Eigen::Index i = 0; i < phase_rows_[b]; ++i) {
      for (int c = 0; c < dimension_; ++c) out[k++] = g.phases[b](i, c);
    }
  }
  return out;
}

void ParameterLayout::unpack(const Eigen::VectorXd& flat, VariationalState& state) const {
  if (flat.size() != size()) throw DimensionError("flat parameter vector has the wrong length");
  Eigen::Index k = 0;
  state.mean.resize(features_);
  for (Eigen::Index j = 0; j < features_; ++j) state.mean[j] = flat[k++];
  state.cov_factor = Eigen::MatrixXd::Zero(features_, features_);
  for (Eigen::Index j = 0; j < features_; ++j) {
    state.cov_factor(j, j) = std::exp(flat[k++]);
    for (Eigen::Index i = j + 1; i < features_; ++i) state.cov_factor(i, j) = flat[k++];
  }
  if (has_beta_) state.hyper.log_beta = flat[k++];
  state.hyper.log_variance = flat[k++];
  if (has_noise_) state.hyper.log_noise = flat[k++];
  state.phases.resize(phase_rows_.size());
  for (std::size_t b = 0; b < phase_rows_.size(); ++b) {
    state.phases[b].resize(phase_rows_[b], dimension_);
    for (Eigen::Index i = 0; i < phase_rows_[b]; ++i) {
      for (int c = 0; c < dimension_; ++c) state.phases[b](i, c) = flat[k++];
    }
  }
}

std::string ParameterLayout::name(Eigen::Index index) const {
  if (index < 0 || index >= size()) throw std::out_of_range("parameter index out of range");
  Eigen::Index k = index;
  if (k < features_) return "mean[" + std::to_string(k) + "]";
  k -= features_;
  for (Eigen::Index j = 0; j < features_; ++j) {
    const Eigen::Index len = features_ - j;
    if (k < len) {
      const Eigen::Index i = j + k;
      return i == j ? "log_cov_factor[" + std::to_string(i) + "," + std::to_string(j) + "]"
                    : "cov_factor[" + std::to_string(i) + "," + std::to_string(j) + "]";
    }
    k -= len;
  }
  if (has_beta_) {
    if (k == 0) return "log_beta";
    --k;
  }
  if (k == 0) return "log_variance";
  --k;
  if (has_noise_) {
    if (k == 0) return "log_noise";
    --k;
  }
  for (std::size_t b = 0; b < phase_rows_.size(); ++b) {
    const Eigen::Index len = phase_rows_[b] * dimension_;
    if (k < len) {
      return "phase[l=" + std::to_string(phase_frequencies_[b]) + "][" + std::to_string(k / dimension_) + "," +
             std::to_string(k % dimension_) + "]";
    }
    k -= len;
  }
  return "unknown";
}

FitResult fit(const InducingModel& model, VariationalState initial, const Eigen::MatrixXd& points,
              const Eigen::VectorXd& targets, const Likelihood& likelihood, const FitConfig& config,
              const Adam* resume) {
  check_state(model, initial);
  if (points.rows() != targets.size()) throw DimensionError("points and targets differ in length");
  if (points.rows() == 0) throw DataError("no training rows");
  if (points.cols() != model.dimension()) throw DimensionError("points do not match the model dimension");
  if (config.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (config.log_interval < 1) throw std::invalid_argument("log interval must be >= 1");

  const auto start = std::chrono::steady_clock::now();
  const ParameterLayout layout(model, likelihood);
  FitResult result;
  result.optimizer = resume ? *resume : Adam(layout.size());
  if (result.optimizer.first_moment().size() != layout.size()) {
    throw DimensionError("optimizer state does not match the parameter layout");
  }

  Eigen::VectorXd rates(layout.size());
  for (Eigen::Index i = 0; i < layout.size(); ++i) {
    switch (layout.group(i)) {
      case ParameterLayout::Group::variational: rates[i] = config.lr_variational; break;
      case ParameterLayout::Group::hyper: rates[i] = config.lr_hyper; break;
      case ParameterLayout::Group::phase: rates[i] = config.lr_phase; break;
    }
  }

  const Eigen::Index n = points.rows();
  const auto n_total = static_cast<double>(n);
  const Eigen::Index batch = config.batch_size <= 0 ? n : std::min<Eigen::Index>(config.batch_size, n);
  const bool fixed_features = model.trainable_frequencies().empty();
  const bool full_batch = batch == n;

  std::optional<GaussianStatistics> stats;
  Eigen::MatrixXd cached;
  if (fixed_features && (full_batch && likelihood.kind == Likelihood::Kind::gaussian)) {
    stats = GaussianStatistics::from_features(feature_matrix(model.basis(), points, config.threads), targets);
  } else if (fixed_features && n * model.num_features() <= kFeatureCacheLimit) {
    cached = feature_matrix(model.basis(), points, config.threads);
  }

  VariationalState state = std::move(initial);
  Eigen::VectorXd params = layout.pack(state);
  std::vector<std::vector<Eigen::Index>> batches;
  std::size_t next_batch = 0;
  std::uint64_t epoch = 0;

  for (int it = 1; it <= config.iterations; ++it) {
    double value = 0.0;
    StateGradient grad;
    if (stats) {
      grad = elbo_gradients(model, state, *stats, n_total, &value);
    } else {
      if (next_batch == batches.size()) {
        batches = minibatches(n, batch, config.seed + 0x9e3779b97f4a7c15ULL * (++epoch));
        next_batch = 0;
      }
      const auto& idx = batches[next_batch++];
      Eigen::MatrixXd x(static_cast<Eigen::Index>(idx.size()), points.cols());
      Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = points.row(idx[i]);
        y[static_cast<Eigen::Index>(i)] = targets[idx[i]];
      }
      const HarmonicBasis basis = model.basis_for(state);
      Eigen::MatrixXd phi;
      if (cached.size() > 0) {
        phi.resize(x.rows(), cached.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) phi.row(static_cast<Eigen::Index>(i)) = cached.row(idx[i]);
      } else {
        phi = feature_matrix(basis, x, config.threads);
      }
      grad = gradients_with_features(model, state, basis, x, std::move(phi), y, likelihood, n_total, &value);
    }

    const Eigen::VectorXd flat_grad = layout.pack(grad);
    if (!std::isfinite(value) || !flat_grad.allFinite()) {
      throw NumericalError("ELBO or its gradient is not finite at iteration " + std::to_string(it));
    }
    if ((it - 1) % config.log_interval == 0 || it == config.iterations) {
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.trace.push_back({it - 1, value, elapsed});
    }

    result.optimizer.ascend(params, flat_grad, rates);
    layout.unpack(params, state);
    if (model.has_beta()) {
      state.hyper.log_beta = std::clamp(state.hyper.log_beta, std::log(kBetaMin), std::log(kBetaMax));
    }
    const auto& trainable = model.trainable_frequencies();
    for (std::size_t k = 0; k < trainable.size(); ++k) {
      const FundamentalSet set = make_fundamental_set(trainable[k], state.phases[k]);
      if (!set.warning.empty()) result.warnings.push_back("iteration " + std::to_string(it) + ": " + set.warning);
      state.phases[k] = set.directions;
    }
    params = layout.pack(state);
  }
  result.state = std::move(state);
  return result;
}

std::vector<GradientCheckRow> gradient_check(const InducingModel& model, const VariationalState& state,
                                             const Eigen::MatrixXd& points, const Eigen::VectorXd& targets,
                                             const Likelihood& likelihood, double n_total,
                                             const GradientCheckOptions& options) {
  const ParameterLayout layout(model, likelihood);
  Eigen::VectorXd analytic = layout.pack(elbo_gradients(model, state, points, targets, likelihood, n_total));
  if (options.corrupt_index) {
    if (*options.corrupt_index < 0 || *options.corrupt_index >= layout.size()) {
      throw std::out_of_range("corrupt index out of range");
    }
    analytic[*options.corrupt_index] += 1.0;
  }
  const Eigen::VectorXd base = layout.pack(state);
  std::vector<GradientCheckRow> rows;
  rows.reserve(static_cast<std::size_t>(layout.size()));
  VariationalState probe = state;
  for (Eigen::Index i = 0; i < layout.size(); ++i) {
    Eigen::VectorXd x = base;
    x[i] = base[i] + options.step;
    layout.unpack(x, probe);
    const double up = elbo(model, probe, points, targets, likelihood, n_total);
    x[i] = base[i] - options.step;
    layout.unpack(x, probe);
    const double down = elbo(model, probe, points, targets, likelihood, n_total);

    GradientCheckRow row;
    row.parameter = layout.name(i);
    row.analytic = analytic[i];
    row.finite_difference = (up - down) / (2.0 * options.step);
    const double diff = std::abs(row.analytic - row.finite_difference);
    const double denom = std::max({std::abs(row.analytic), std::abs(row.finite_difference),
                                   std::numeric_limits<double>::min()});
    row.relative_error = diff / denom;
    row.pass = std::isfinite(diff) &&
               (row.relative_error <= options.relative_tolerance || diff <= options.absolute_floor);
    rows.push_back(std::move(row));
  }
  return rows;
}

Evaluation evaluate(const InducingModel& model, const VariationalState& state, const Eigen::MatrixXd& points,
                    const Eigen::VectorXd& targets, const Likelihood& likelihood, const TargetTransform& transform) {
  if (points.rows() != targets.size()) throw DimensionError("points and targets differ in length");
  if (points.rows() == 0) throw DataError("no evaluation rows");
  const Predictive pred = predict(model, state, points);
  const Eigen::Index n = targets.size();
  Evaluation out;
  out.predictions.resize(static_cast<std::size_t>(n));
  double nll = 0.0;

  if (likelihood.kind == Likelihood::Kind::gaussian) {
    const double noise = std::exp(state.hyper.log_noise);
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mean = transform.shift + transform.scale * pred.mean[i];
      const double var = transform.scale * transform.scale * (pred.variance[i] + noise);
      const double r = targets[i] - mean;
      sse += r * r;
      nll += 0.5 * std::log(2.0 * std::numbers::pi * var) + 0.5 * r * r / var;
      out.predictions[static_cast<std::size_t>(i)] = {targets[i], mean, var};
    }
    out.metrics.rmse = std::sqrt(sse / static_cast<double>(n));
    out.metrics.nll = nll / static_cast<double>(n);
    return out;
  }

  Eigen::VectorXd prob(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = targets[i];
    if (y != 0.0 && y != 1.0) throw DataError("binary evaluation needs targets in {0, 1}");
    prob[i] = predictive_probability(likelihood, pred.mean[i], pred.variance[i]);
    const double p = std::clamp(prob[i], 1e-15, 1.0 - 1e-15);
    nll -= y == 1.0 ? std::log(p) : std::log1p(-p);
    out.predictions[static_cast<std::size_t>(i)] = {y, prob[i], pred.variance[i]};
  }
  out.metrics.nll = nll / static_cast<double>(n);
  out.metrics.auc = roc_auc(prob, targets);
  return out;
}

}  // namespace sphgp
