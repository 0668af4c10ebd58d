#pragma once

#include <cstdint>
#include <vector>

namespace sphgp {

/// Gegenbauer polynomial C_l^(alpha). For zonal functions on S^{d-1}, alpha = (d-2)/2.
struct GegenbauerParams {
  double alpha = 0.5;
  int degree = 0;
};

/// alpha = (d-2)/2; throws std::domain_error for d < 3.
double gegenbauer_alpha(int dimension);

/// C_l^(alpha)(t) via the upward three-term recurrence.
/// Arguments within 1e-12 of [-1, 1] are clamped; anything further out is a domain error,
/// as is alpha <= 0.
double gegenbauer(const GegenbauerParams& params, double t);
double gegenbauer(double alpha, int degree, double t);

/// d/dt C_l^(alpha)(t) = 2 alpha C_{l-1}^(alpha+1)(t).
double gegenbauer_derivative(double alpha, int degree, double t);

/// All values C_0..C_max_degree at t, in one pass of the recurrence.
std::vector<double> gegenbauer_all(double alpha, int max_degree, double t);

/// C_l^(alpha)(1) = binom(l + 2 alpha - 1, l), evaluated as a running product.
double gegenbauer_at_one(double alpha, int degree);

/// (l + alpha) / alpha, the addition-theorem scaling of frequency l.
inline double zonal_scale(int degree, double alpha) { return (degree + alpha) / alpha; }

/// Exact binomial coefficient; throws std::overflow_error when it does not fit in 64 bits.
std::uint64_t binomial_exact(std::uint64_t n, std::uint64_t k);

/// Binomial coefficient as a double: exact integer path when it fits, log-gamma otherwise.
double binomial(double n, double k);

/// Number of linearly independent degree-l harmonics on S^{d-1}:
/// 1 for l = 0, else (2l + d - 2) / (d - 2) * binom(l + d - 3, l).
/// Throws std::overflow_error if the count does not fit in 64 bits.
std::uint64_t num_harmonics(int degree, int dimension);

/// Funk-Hecke constant under the normalized surface measure:
/// c_d = Gamma(d/2) / (sqrt(pi) Gamma((d-1)/2)).
double funk_hecke_constant(int dimension);

/// Gauss rule on a fixed interval: nodes strictly increasing, weights positive.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;

  template <typename F>
  double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(nodes[i]);
    return acc;
  }
};

/// n-point Gauss-Legendre rule on [-1, 1]; exact for polynomials of degree <= 2n - 1.
QuadratureRule gauss_legendre(int n);

/// n-point Gauss-Hermite rule for the weight exp(-x^2) on the real line (physicists').
/// Weights sum to sqrt(pi).
QuadratureRule gauss_hermite(int n);

}  // namespace sphgp
