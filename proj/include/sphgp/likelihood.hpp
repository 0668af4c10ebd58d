#pragma once

#include <string>

namespace sphgp {

struct Likelihood {
  enum class Kind { gaussian, bernoulli };
  enum class Link { probit, logit };

  Kind kind = Kind::gaussian;
  Link link = Link::probit;

  static Likelihood gaussian() { return {Kind::gaussian, Link::probit}; }
  static Likelihood bernoulli(Link link = Link::probit) { return {Kind::bernoulli, link}; }

  bool has_noise() const { return kind == Kind::gaussian; }
};

std::string to_string(Likelihood::Kind kind);
std::string to_string(Likelihood::Link link);

inline constexpr int kGaussHermiteNodes = 20;

/// E_{f ~ N(mean, var)}[log p(y | f)] and its partial derivatives.
/// `noise` is the Gaussian noise variance (ignored for Bernoulli).
struct ExpectedLogLik {
  double value = 0.0;
  double d_mean = 0.0;
  double d_var = 0.0;
  double d_log_noise = 0.0;
};

/// Gaussian: closed form. Bernoulli: 20-node Gauss-Hermite; the derivatives are
/// those of the quadrature rule itself. Bernoulli targets must be 0 or 1.
ExpectedLogLik expected_log_likelihood(const Likelihood& lik, double y, double mean, double var, double noise);

/// log Phi(z), accurate in the far left tail.
double log_normal_cdf(double z);

/// P(y = 1) under f ~ N(mean, var). Probit uses Phi(mean / sqrt(1 + var)); logit uses quadrature.
double predictive_probability(const Likelihood& lik, double mean, double var);

}  // namespace sphgp
