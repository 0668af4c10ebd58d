#include "sphgp/likelihood.hpp"

#include "sphgp/errors.hpp"
#include "sphgp/special_math.hpp"

#include <cmath>
#include <numbers>

namespace sphgp {

namespace {

const QuadratureRule& hermite_rule() {
  static const QuadratureRule rule = gauss_hermite(kGaussHermiteNodes);
  return rule;
}

const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kInvSqrtPi = 1.0 / std::sqrt(std::numbers::pi);

// Below this variance the quadrature derivative in var is replaced by E[g''] / 2.
constexpr double kSmallVariance = 1e-10;

struct LinkTerms {
  double value;   // log p(y | f)
  double first;   // d/df
  double second;  // d^2/df^2
};

LinkTerms link_terms(Likelihood::Link link, double sign, double f) {
  const double z = sign * f;
  if (link == Likelihood::Link::probit) {
    const double log_cdf = log_normal_cdf(z);
    const double ratio = std::exp(-0.5 * z * z - kLogSqrt2Pi - log_cdf);  // phi(z) / Phi(z)
    return {log_cdf, sign * ratio, -ratio * (z + ratio)};
  }
  // log sigmoid(z) = -softplus(-z)
  const double softplus = z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
  const double sig_neg = 1.0 / (1.0 + std::exp(z));  // sigmoid(-z)
  return {-softplus, sign * sig_neg, -sig_neg * (1.0 - sig_neg)};
}

}  // namespace

std::string to_string(Likelihood::Kind kind) { return kind == Likelihood::Kind::gaussian ? "gaussian" : "bernoulli"; }
std::string to_string(Likelihood::Link link) { return link == Likelihood::Link::probit ? "probit" : "logit"; }

double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(0.5 * std::erfc(-z / std::numbers::sqrt2));
  // Asymptotic series of the Mills ratio.
  const double z2 = z * z;
  return -0.5 * z2 - std::log(-z) - kLogSqrt2Pi + std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

ExpectedLogLik expected_log_likelihood(const Likelihood& lik, double y, double mean, double var, double noise) {
  ExpectedLogLik out;
  if (lik.kind == Likelihood::Kind::gaussian) {
    const double r = y - mean;
    const double sq = r * r + var;
    out.value = -0.5 * std::log(2.0 * std::numbers::pi * noise) - 0.5 * sq / noise;
    out.d_mean = r / noise;
    out.d_var = -0.5 / noise;
    out.d_log_noise = -0.5 + 0.5 * sq / noise;
    return out;
  }
  if (y != 0.0 && y != 1.0) throw DataError("Bernoulli likelihood needs targets in {0, 1}");
  const double sign = 2.0 * y - 1.0;
  const auto& rule = hermite_rule();
  const double v = std::max(var, 0.0);
  const double spread = std::sqrt(2.0 * v);
  double second_moment = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double weight = rule.weights[k] * kInvSqrtPi;
    const LinkTerms t = link_terms(lik.link, sign, mean + spread * rule.nodes[k]);
    out.value += weight * t.value;
    out.d_mean += weight * t.first;
    if (v > kSmallVariance) {
      out.d_var += weight * t.first * rule.nodes[k] / spread;
    } else {
      second_moment += weight * t.second;
    }
  }
  if (!(v > kSmallVariance)) out.d_var = 0.5 * second_moment;
  return out;
}

double predictive_probability(const Likelihood& lik, double mean, double var) {
  const double v = std::max(var, 0.0);
  if (lik.link == Likelihood::Link::probit) {
    return 0.5 * std::erfc(-(mean / std::sqrt(1.0 + v)) / std::numbers::sqrt2);
  }
  const auto& rule = hermite_rule();
  const double spread = std::sqrt(2.0 * v);
  double p = 0.0;
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    p += rule.weights[k] * kInvSqrtPi / (1.0 + std::exp(-(mean + spread * rule.nodes[k])));
  }
  return p;
}

}  // namespace sphgp
