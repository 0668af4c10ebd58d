#include "oracles.hpp"

#include "sphgp/errors.hpp"
#include "sphgp/data_io.hpp"
#include "sphgp/special_math.hpp"
#include "sphgp/vargp.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <random>

using namespace sphgp;

namespace {

std::vector<double> poly_lambda(double beta, int lmax) {
  std::vector<double> out{1.0};
  for (int l = 1; l <= lmax; ++l) out.push_back(std::pow(static_cast<double>(l), -beta));
  return out;
}

Eigen::VectorXd weights(const InducingModel& model, const KernelHyper& hyper) {
  return kuu_diag(model, hyper).cwiseInverse();
}

/// A state away from the prior: random mean, random lower factor, perturbed phases.
VariationalState random_state(const InducingModel& model, const KernelHyper& hyper, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  VariationalState s = prior_state(model, hyper);
  const Eigen::VectorXd w = weights(model, hyper);
  const Eigen::Index m = w.size();
  for (Eigen::Index j = 0; j < m; ++j) s.mean[j] = 0.5 * normal(rng) / std::sqrt(w[j]);
  for (Eigen::Index j = 0; j < m; ++j) {
    s.cov_factor(j, j) = std::exp(0.3 * normal(rng)) / std::sqrt(w[j]);
    for (Eigen::Index i = j + 1; i < m; ++i) s.cov_factor(i, j) = 0.1 * normal(rng) / std::sqrt(w[i]);
  }
  for (auto& block : s.phases) {
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] += 0.05 * normal(rng);
  }
  return s;
}

struct Data {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Data regression_data(int d, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Data out{sample_sphere(n, d, rng), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) out.y[i] = std::sin(2.0 * out.x(i, 0)) + out.x(i, 1) * out.x(i, 2) + 0.1 * normal(rng);
  return out;
}

Data binary_data(int d, Eigen::Index n, std::uint64_t seed) {
  Data out = regression_data(d, n, seed);
  for (Eigen::Index i = 0; i < n; ++i) out.y[i] = out.y[i] > 0.2 ? 1.0 : 0.0;
  return out;
}

/// q(u) at the exact Gaussian posterior for fixed hyper-parameters.
VariationalState optimal_state(const InducingModel& model, const KernelHyper& hyper, const Data& data) {
  const Eigen::VectorXd w = weights(model, hyper);
  const double noise = std::exp(hyper.log_noise);
  const Eigen::MatrixXd a = feature_matrix(model.basis(), data.x) * w.asDiagonal();
  Eigen::MatrixXd precision = a.transpose() * a / noise;
  precision.diagonal() += w;
  const Eigen::MatrixXd cov = precision.llt().solve(Eigen::MatrixXd::Identity(w.size(), w.size()));
  VariationalState s = prior_state(model, hyper);
  s.mean = cov * a.transpose() * data.y / noise;
  s.cov_factor = cov.llt().matrixL();
  return s;
}

bool all_pass(const std::vector<GradientCheckRow>& rows) {
  bool ok = true;
  for (const auto& r : rows) {
    if (!r.pass) {
      ok = false;
      MESSAGE(r.parameter << ": analytic " << r.analytic << " fd " << r.finite_difference);
    }
  }
  return ok;
}

}  // namespace

TEST_CASE("model construction") {
  SUBCASE("complete sets") {
    const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 4, 0, 1});
    CHECK(model.num_features() == 25);
    CHECK(model.trainable_frequencies().empty());
    CHECK(model.has_beta());
  }
  SUBCASE("truncated sets") {
    const auto model = InducingModel::create(KernelSpec{}, ModelOptions{5, 4, 6, 1});
    // N(l, 5) = 1, 5, 14, 30, 55: frequency 1 stays complete.
    CHECK(model.num_features() == 1 + 5 + 6 + 6 + 6);
    CHECK(model.trainable_frequencies() == std::vector<int>{2, 3, 4});
  }
  SUBCASE("ReLU frequencies with zero eigenvalue get no features") {
    const auto model = InducingModel::create(KernelSpec{KernelFamily::composed_relu, 1, 1.0}, ModelOptions{3, 6, 0, 1});
    const auto counts = model.basis().phase_counts();
    CHECK(counts == std::vector<int>{1, 3, 5, 0, 9, 0, 13});
    CHECK(!model.has_beta());
  }
  SUBCASE("eigenvalues follow the hyper-parameters") {
    const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 5, 0, 1});
    KernelHyper hyper;
    hyper.log_beta = std::log(2.0);
    hyper.log_variance = std::log(3.0);
    const auto lam = model.eigenvalues(hyper);
    const auto ref = poly_lambda(2.0, 5);
    for (int l = 0; l <= 5; ++l) CHECK(lam[l] == doctest::Approx(ref[l]).epsilon(1e-15));
    const Eigen::VectorXd k = kuu_diag(model, hyper);
    const auto freq = model.basis().feature_frequency();
    for (Eigen::Index j = 0; j < k.size(); ++j) CHECK(k[j] == doctest::Approx(1.0 / (3.0 * ref[freq[j]])).epsilon(1e-14));
    CHECK(model.spectrum(hyper).radial_variance == doctest::Approx(3.0).epsilon(1e-15));
  }
}

TEST_CASE("inducing prior: the Nystrom form over complete sets is the kernel") {
  // With cov[f, u] = phi and K_uu = diag(1 / (sigma^2 lambda)), K_fu K_uu^{-1} K_uf must equal K_ff.
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{4, 5, 0, 3});
  KernelHyper hyper;
  hyper.log_beta = std::log(1.4);
  hyper.log_variance = std::log(0.7);
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = sample_sphere(30, 4, rng);
  const Eigen::MatrixXd phi = feature_matrix(model.basis(), x);
  const Eigen::MatrixXd nystrom = phi * kuu_diag(model, hyper).cwiseInverse().asDiagonal() * phi.transpose();
  const Eigen::MatrixXd ref = oracle::zonal_gram(x, x, 4, poly_lambda(1.4, 5), 0.7);
  CHECK((nystrom - ref).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((kuf(model, prior_state(model, hyper), SpherePoint::normalize(x.row(3).transpose())) - phi.row(3).transpose())
            .cwiseAbs()
            .maxCoeff() <= 1e-13);
}

TEST_CASE("prior recovery") {
  for (int truncation : {0, 4}) {
    const auto model = InducingModel::create(KernelSpec{}, ModelOptions{5, 4, truncation, 2});
    KernelHyper hyper;
    hyper.log_beta = std::log(0.8);
    hyper.log_variance = std::log(1.7);
    const VariationalState s = prior_state(model, hyper);
    CHECK(kl_term(model, s) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd x = sample_sphere(25, 5, rng);
    const Predictive p = predict(model, s, x, true);
    const Eigen::MatrixXd prior = mercer_gram(model.spectrum(hyper), x, x);
    CHECK(p.mean.cwiseAbs().maxCoeff() == 0.0);
    CHECK((p.covariance - prior).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((p.variance - prior.diagonal()).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("KL against the dense Gaussian formula") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 4, 0, 2});
  KernelHyper hyper;
  hyper.log_beta = std::log(1.5);
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const VariationalState s = random_state(model, hyper, rng);
    const Eigen::MatrixXd cov = s.cov_factor * s.cov_factor.transpose();
    const Eigen::MatrixXd k = kuu_diag(model, hyper).asDiagonal();
    const double ref = oracle::gaussian_kl(s.mean, cov, k);
    CHECK(kl_term(model, s) == doctest::Approx(ref).epsilon(1e-10));
  }
  double smallest = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) smallest = std::min(smallest, kl_term(model, random_state(model, hyper, rng)));
  CHECK(smallest >= 0.0);
}

TEST_CASE("predictive moments") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{4, 3, 5, 2});
  KernelHyper hyper;
  std::mt19937_64 rng(2);
  const VariationalState s = random_state(model, hyper, rng);
  const Eigen::MatrixXd x = sample_sphere(20, 4, rng);
  const Predictive full = predict(model, s, x, true);
  const Predictive diag = predict(model, s, x);
  CHECK((full.mean - diag.mean).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((full.variance - diag.variance).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((full.covariance - full.covariance.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(diag.variance.minCoeff() >= 0.0);

  // Mean and variance written out with dense matrices.
  const HarmonicBasis basis = model.basis_for(s);
  const Eigen::MatrixXd phi = feature_matrix(basis, x);
  const Eigen::MatrixXd kuu = kuu_diag(model, hyper).asDiagonal();
  const Eigen::MatrixXd kinv = kuu.inverse();
  const Eigen::MatrixXd cov = s.cov_factor * s.cov_factor.transpose();
  const Eigen::VectorXd mean = phi * kinv * s.mean;
  const double k0 = prior_variance(model.spectrum(hyper));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd p = phi.row(i).transpose();
    const double var = k0 - p.dot(kinv * p) + p.dot(kinv * cov * kinv * p);
    CHECK(diag.variance[i] == doctest::Approx(var).epsilon(1e-9));
  }
  CHECK((diag.mean - mean).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + mean.cwiseAbs().maxCoeff()));
  CHECK_THROWS_AS(predict(model, s, sample_sphere(3, 5, rng)), DimensionError);
}

TEST_CASE("optimal ELBO equals the log marginal likelihood") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 6, 0, 4});
  const Data data = regression_data(3, 45, 17);
  KernelHyper hyper;
  hyper.log_beta = std::log(1.3);
  hyper.log_variance = std::log(0.9);
  hyper.log_noise = std::log(0.05);
  const VariationalState best = optimal_state(model, hyper, data);
  const Likelihood lik = Likelihood::gaussian();
  const double n = static_cast<double>(data.y.size());
  auto log_marginal = [&](double beta, double variance, double noise) {
    return oracle::log_marginal(oracle::zonal_gram(data.x, data.x, 3, poly_lambda(beta, 6), variance), data.y, noise);
  };
  const double exact = log_marginal(1.3, 0.9, 0.05);
  CHECK(elbo(model, best, data.x, data.y, lik, n) == doctest::Approx(exact).epsilon(1e-9));

  // Any other q gives a lower bound.
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    CHECK(elbo(model, random_state(model, hyper, rng), data.x, data.y, lik, n) < exact);
  }

  // At the optimum the hyper-parameter gradients are those of the log marginal.
  const StateGradient g = elbo_gradients(model, best, data.x, data.y, lik, n);
  const double h = 1e-5;
  const double d_beta = (log_marginal(1.3 * std::exp(h), 0.9, 0.05) - log_marginal(1.3 * std::exp(-h), 0.9, 0.05)) / (2 * h);
  const double d_var = (log_marginal(1.3, 0.9 * std::exp(h), 0.05) - log_marginal(1.3, 0.9 * std::exp(-h), 0.05)) / (2 * h);
  const double d_noise = (log_marginal(1.3, 0.9, 0.05 * std::exp(h)) - log_marginal(1.3, 0.9, 0.05 * std::exp(-h))) / (2 * h);
  CHECK(g.log_beta == doctest::Approx(d_beta).epsilon(1e-5));
  CHECK(g.log_variance == doctest::Approx(d_var).epsilon(1e-5));
  CHECK(g.log_noise == doctest::Approx(d_noise).epsilon(1e-5));
  const Eigen::VectorXd prior_pull = weights(model, hyper).cwiseProduct(best.mean);
  CHECK(g.mean.cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + prior_pull.cwiseAbs().maxCoeff()));
}

TEST_CASE("beta gradient changes sign around the best smoothness") {
  // The collapsed bound's beta-gradient is positive when beta is too small and negative when too large.
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 8, 0, 4});
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  const Eigen::MatrixXd x = sample_sphere(200, 3, rng);
  // Target drawn from the beta = 3 prior with sigma^2 = 1.
  const Eigen::MatrixXd phi = feature_matrix(model.basis(), x);
  const auto lam = poly_lambda(3.0, 8);
  const auto freq = model.basis().feature_frequency();
  Eigen::VectorXd coef(phi.cols());
  for (Eigen::Index j = 0; j < coef.size(); ++j) coef[j] = std::sqrt(lam[freq[j]]) * normal(rng);
  const Data data{x, phi * coef + 0.05 * Eigen::VectorXd::NullaryExpr(200, [&] { return normal(rng); })};

  auto beta_gradient = [&](double beta) {
    KernelHyper hyper;
    hyper.log_beta = std::log(beta);
    hyper.log_noise = std::log(0.0025);
    return elbo_gradients(model, optimal_state(model, hyper, data), data.x, data.y, Likelihood::gaussian(), 200.0)
        .log_beta;
  };
  CHECK(beta_gradient(0.5) > 0.0);
  CHECK(beta_gradient(9.0) < 0.0);
}

TEST_CASE("analytic gradients match finite differences") {
  struct Case {
    KernelSpec kernel;
    ModelOptions options;
    Likelihood likelihood;
  };
  const std::vector<Case> cases = {
      {KernelSpec{}, ModelOptions{4, 3, 3, 1}, Likelihood::gaussian()},
      {KernelSpec{}, ModelOptions{4, 3, 3, 1}, Likelihood::bernoulli(Likelihood::Link::probit)},
      {KernelSpec{KernelFamily::composed_relu, 2, 1.0}, ModelOptions{4, 3, 3, 1}, Likelihood::bernoulli(Likelihood::Link::logit)},
      {KernelSpec{KernelFamily::ntk_relu, 2, 1.0}, ModelOptions{3, 3, 2, 1}, Likelihood::gaussian()},
  };
  std::mt19937_64 rng(33);
  for (const auto& c : cases) {
    const auto model = InducingModel::create(c.kernel, c.options);
    const Data data = c.likelihood.kind == Likelihood::Kind::gaussian ? regression_data(c.options.dimension, 15, 4)
                                                                       : binary_data(c.options.dimension, 15, 4);
    KernelHyper hyper;
    hyper.log_beta = std::log(1.2);
    hyper.log_variance = std::log(0.8);
    hyper.log_noise = std::log(0.2);
    const VariationalState s = random_state(model, hyper, rng);
    const auto rows = gradient_check(model, s, data.x, data.y, c.likelihood, 40.0);
    CHECK(rows.size() == static_cast<std::size_t>(ParameterLayout(model, c.likelihood).size()));
    CHECK(all_pass(rows));
  }
}

TEST_CASE("gradient check detects a corrupted entry") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 2, 0, 1});
  const Data data = regression_data(3, 10, 1);
  std::mt19937_64 rng(2);
  const VariationalState s = random_state(model, KernelHyper{}, rng);
  GradientCheckOptions options;
  options.corrupt_index = 4;
  const auto rows = gradient_check(model, s, data.x, data.y, Likelihood::gaussian(), 10.0, options);
  int failures = 0;
  for (const auto& r : rows) failures += r.pass ? 0 : 1;
  CHECK(failures == 1);
  CHECK(!rows[4].pass);
}

TEST_CASE("sufficient statistics reproduce the per-point objective") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{4, 3, 0, 1});
  const Data data = regression_data(4, 60, 8);
  std::mt19937_64 rng(9);
  KernelHyper hyper;
  hyper.log_noise = std::log(0.3);
  const VariationalState s = random_state(model, hyper, rng);
  double v1 = 0.0, v2 = 0.0;
  const StateGradient a = elbo_gradients(model, s, data.x, data.y, Likelihood::gaussian(), 60.0, &v1);
  const auto stats = GaussianStatistics::from_features(feature_matrix(model.basis(), data.x), data.y);
  const StateGradient b = elbo_gradients(model, s, stats, 60.0, &v2);
  CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
  const ParameterLayout layout(model, Likelihood::gaussian());
  const Eigen::VectorXd fa = layout.pack(a), fb = layout.pack(b);
  CHECK((fa - fb).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + fa.cwiseAbs().maxCoeff()));
}

TEST_CASE("minibatch objective is unbiased") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 3, 2, 1});
  for (const Likelihood lik : {Likelihood::gaussian(), Likelihood::bernoulli()}) {
    const Data data = lik.kind == Likelihood::Kind::gaussian ? regression_data(3, 40, 3) : binary_data(3, 40, 3);
    std::mt19937_64 rng(4);
    const VariationalState s = random_state(model, KernelHyper{}, rng);
    const double full = elbo(model, s, data.x, data.y, lik, 40.0);
    const double first = elbo(model, s, data.x.topRows(20), data.y.head(20), lik, 40.0);
    const double second = elbo(model, s, data.x.bottomRows(20), data.y.tail(20), lik, 40.0);
    CHECK(0.5 * (first + second) == doctest::Approx(full).epsilon(1e-12));

    // Data terms over one shuffled epoch of uneven batches, weighted by batch size.
    const double kl = kl_term(model, s);
    double epoch = 0.0;
    for (const auto& batch : minibatches(40, 7, 5)) {
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(batch.size()), 3);
      Eigen::VectorXd yb(static_cast<Eigen::Index>(batch.size()));
      for (std::size_t i = 0; i < batch.size(); ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = data.x.row(batch[i]);
        yb[static_cast<Eigen::Index>(i)] = data.y[batch[i]];
      }
      epoch += static_cast<double>(batch.size()) / 40.0 * (elbo(model, s, xb, yb, lik, 40.0) + kl);
    }
    CHECK(std::abs(epoch - (full + kl)) <= 1e-9 * std::abs(full + kl));
  }
}

TEST_CASE("parameter layout") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{4, 2, 3, 1});
  const ParameterLayout layout(model, Likelihood::gaussian());
  const Eigen::Index m = model.num_features();  // 1 + 3 + 3
  CHECK(m == 7);
  CHECK(layout.size() == m + m * (m + 1) / 2 + 3 + 2 * 3 * 4);
  std::mt19937_64 rng(5);
  const VariationalState s = random_state(model, KernelHyper{}, rng);
  VariationalState back = prior_state(model, KernelHyper{});
  layout.unpack(layout.pack(s), back);
  CHECK((back.mean - s.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.cov_factor - s.cov_factor).cwiseAbs().maxCoeff() <= 1e-15 * s.cov_factor.cwiseAbs().maxCoeff());
  CHECK((back.phases[0] - s.phases[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(layout.name(0) == "mean[0]");
  CHECK(layout.name(m) == "log_cov_factor[0,0]");
  CHECK(layout.name(m + 1) == "cov_factor[1,0]");
  CHECK(layout.group(0) == ParameterLayout::Group::variational);
  CHECK(layout.group(layout.size() - 1) == ParameterLayout::Group::phase);
  const ParameterLayout binary(model, Likelihood::bernoulli());
  CHECK(binary.size() == layout.size() - 1);
}

TEST_CASE("fit") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 4, 4, 2});
  const Data data = regression_data(3, 120, 12);
  KernelHyper hyper;
  FitConfig config;
  config.iterations = 60;
  config.batch_size = 40;
  config.lr_variational = 0.05;
  config.lr_hyper = 0.01;
  config.lr_phase = 0.01;
  config.log_interval = 7;

  SUBCASE("deterministic for a seed and improving") {
    const FitResult a = fit(model, prior_state(model, hyper), data.x, data.y, Likelihood::gaussian(), config);
    const FitResult b = fit(model, prior_state(model, hyper), data.x, data.y, Likelihood::gaussian(), config);
    CHECK(a.state.mean == b.state.mean);
    CHECK(a.state.cov_factor == b.state.cov_factor);
    CHECK(a.state.phases[0] == b.state.phases[0]);
    // Rows at iterations 0, 7, ..., 56 plus the last one.
    CHECK(a.trace.size() == 10);
    CHECK(a.trace.front().iteration == 0);
    CHECK(a.trace.back().iteration == 59);
    const double before = elbo(model, prior_state(model, hyper), data.x, data.y, Likelihood::gaussian(), 120.0);
    CHECK(elbo(model, a.state, data.x, data.y, Likelihood::gaussian(), 120.0) > before);
    CHECK(a.optimizer.step() == 60);
  }
  SUBCASE("resuming continues the same trajectory") {
    config.batch_size = 0;
    const FitResult whole = fit(model, prior_state(model, hyper), data.x, data.y, Likelihood::gaussian(), config);
    config.iterations = 30;
    const FitResult first = fit(model, prior_state(model, hyper), data.x, data.y, Likelihood::gaussian(), config);
    const FitResult second = fit(model, first.state, data.x, data.y, Likelihood::gaussian(), config, &first.optimizer);
    CHECK((whole.state.mean - second.state.mean).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("beta stays inside its bounds") {
    config.iterations = 3;
    config.lr_hyper = 50.0;
    const FitResult r = fit(model, prior_state(model, hyper), data.x, data.y, Likelihood::gaussian(), config);
    const double beta = std::exp(r.state.hyper.log_beta);
    CHECK(beta >= kBetaMin * (1 - 1e-12));
    CHECK(beta <= kBetaMax * (1 + 1e-12));
  }
  SUBCASE("phases stay orthonormal") {
    const FitResult r = fit(model, prior_state(model, hyper), data.x, data.y, Likelihood::gaussian(), config);
    const HarmonicBasis basis = model.basis_for(r.state);
    for (int l : model.trainable_frequencies()) {
      const auto& set = basis.set(l);
      const Eigen::MatrixXd a = gegenbauer_gram(l, set.directions);
      CHECK((set.gram_chol * set.gram_chol.transpose() - a).cwiseAbs().maxCoeff() <= 1e-10 * a.cwiseAbs().maxCoeff());
    }
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(fit(model, prior_state(model, hyper), data.x.leftCols(2), data.y, Likelihood::gaussian(), config),
                    DimensionError);
    CHECK_THROWS_AS(fit(model, prior_state(model, hyper), data.x, data.y.head(5), Likelihood::gaussian(), config),
                    DimensionError);
  }
}

TEST_CASE("evaluation metrics") {
  const auto model = InducingModel::create(KernelSpec{}, ModelOptions{3, 3, 0, 2});
  std::mt19937_64 rng(7);
  const VariationalState s = random_state(model, KernelHyper{}, rng);
  const Data data = regression_data(3, 30, 5);
  const TargetTransform t{2.0, 3.0};
  const Evaluation e = evaluate(model, s, data.x, data.y, Likelihood::gaussian(), t);
  const Predictive p = predict(model, s, data.x);
  const double noise = std::exp(s.hyper.log_noise);
  double sse = 0.0, nll = 0.0;
  for (Eigen::Index i = 0; i < 30; ++i) {
    const double mu = 2.0 + 3.0 * p.mean[i];
    const double var = 9.0 * (p.variance[i] + noise);
    sse += (data.y[i] - mu) * (data.y[i] - mu);
    nll -= -0.5 * std::log(2 * std::numbers::pi * var) - 0.5 * (data.y[i] - mu) * (data.y[i] - mu) / var;
  }
  CHECK(*e.metrics.rmse == doctest::Approx(std::sqrt(sse / 30)).epsilon(1e-13));
  CHECK(*e.metrics.nll == doctest::Approx(nll / 30).epsilon(1e-13));
  CHECK(!e.metrics.auc);

  const Data bin = binary_data(3, 30, 5);
  const Evaluation b = evaluate(model, s, bin.x, bin.y, Likelihood::bernoulli());
  CHECK(b.metrics.auc.has_value());
  CHECK(b.metrics.nll.has_value());
  CHECK(!b.metrics.rmse);
  CHECK(b.predictions.size() == 30);
  for (const auto& row : b.predictions) CHECK((row.mean >= 0.0 && row.mean <= 1.0));
}
