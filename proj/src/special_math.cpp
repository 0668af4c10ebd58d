#include "sphgp/special_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sphgp {

namespace {

constexpr double kClampTolerance = 1e-12;

double clamp_unit(double t) {
  if (!(std::abs(t) <= 1.0 + kClampTolerance)) {
    throw std::domain_error("Gegenbauer argument outside [-1, 1]: " + std::to_string(t));
  }
  return std::clamp(t, -1.0, 1.0);
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0)) throw std::domain_error("Gegenbauer alpha must be positive");
}

}  // namespace

double gegenbauer_alpha(int dimension) {
  if (dimension < 3) throw std::domain_error("sphere dimension d must be >= 3");
  return 0.5 * (dimension - 2);
}

double gegenbauer(double alpha, int degree, double t) {
  check_alpha(alpha);
  if (degree < 0) throw std::domain_error("Gegenbauer degree must be non-negative");
  t = clamp_unit(t);
  if (degree == 0) return 1.0;
  double prev = 1.0;
  double curr = 2.0 * alpha * t;
  for (int l = 2; l <= degree; ++l) {
    const double next = (2.0 * (l + alpha - 1.0) * t * curr - (l + 2.0 * alpha - 2.0) * prev) / l;
    prev = curr;
    curr = next;
  }
  return curr;
}

double gegenbauer(const GegenbauerParams& params, double t) {
  return gegenbauer(params.alpha, params.degree, t);
}

double gegenbauer_derivative(double alpha, int degree, double t) {
  check_alpha(alpha);
  if (degree < 0) throw std::domain_error("Gegenbauer degree must be non-negative");
  if (degree == 0) {
    clamp_unit(t);
    return 0.0;
  }
  return 2.0 * alpha * gegenbauer(alpha + 1.0, degree - 1, t);
}

std::vector<double> gegenbauer_all(double alpha, int max_degree, double t) {
  check_alpha(alpha);
  if (max_degree < 0) throw std::domain_error("Gegenbauer degree must be non-negative");
  t = clamp_unit(t);
  std::vector<double> values(static_cast<std::size_t>(max_degree) + 1);
  values[0] = 1.0;
  if (max_degree >= 1) values[1] = 2.0 * alpha * t;
  for (int l = 2; l <= max_degree; ++l) {
    values[l] = (2.0 * (l + alpha - 1.0) * t * values[l - 1] - (l + 2.0 * alpha - 2.0) * values[l - 2]) / l;
  }
  return values;
}

double gegenbauer_at_one(double alpha, int degree) {
  check_alpha(alpha);
  double value = 1.0;
  for (int k = 1; k <= degree; ++k) value *= (k + 2.0 * alpha - 1.0) / k;
  return value;
}

__extension__ typedef unsigned __int128 uint128;

std::uint64_t binomial_exact(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  uint128 result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) is divisible by i at every step.
    result = result * (n - k + i) / i;
    if (result > std::numeric_limits<std::uint64_t>::max()) {
      throw std::overflow_error("binomial(" + std::to_string(n) + ", " + std::to_string(k) +
                                ") overflows 64 bits");
    }
  }
  return static_cast<std::uint64_t>(result);
}

double binomial(double n, double k) {
  if (k < 0.0 || k > n) return 0.0;
  const bool integral = std::floor(n) == n && std::floor(k) == k;
  if (integral && n <= 60.0) {
    return static_cast<double>(binomial_exact(static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(k)));
  }
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
}

std::uint64_t num_harmonics(int degree, int dimension) {
  if (dimension < 3) throw std::domain_error("num_harmonics requires d >= 3");
  if (degree < 0) throw std::domain_error("num_harmonics requires l >= 0");
  if (degree == 0) return 1;
  const auto l = static_cast<std::uint64_t>(degree);
  const auto d = static_cast<std::uint64_t>(dimension);
  const uint128 numerator =
      static_cast<uint128>(2 * l + d - 2) * binomial_exact(l + d - 3, l);
  const uint128 count = numerator / (d - 2);
  if (count > std::numeric_limits<std::uint64_t>::max()) {
    throw std::overflow_error("num_harmonics(" + std::to_string(degree) + ", " + std::to_string(dimension) +
                              ") overflows 64 bits");
  }
  return static_cast<std::uint64_t>(count);
}

double funk_hecke_constant(int dimension) {
  if (dimension < 3) throw std::domain_error("funk_hecke_constant requires d >= 3");
  const double d = dimension;
  return std::exp(std::lgamma(0.5 * d) - std::lgamma(0.5 * (d - 1.0))) / std::sqrt(std::numbers::pi);
}

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre requires n >= 1");
  QuadratureRule rule;
  rule.order = n;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Newton on P_n from the Chebyshev-like guess; roots come out in decreasing order.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double derivative = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      derivative = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / derivative;
      x -= dx;
      if (std::abs(dx) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    // Re-evaluate the derivative at the converged root.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    derivative = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * derivative * derivative);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite requires n >= 1");
  QuadratureRule rule;
  rule.order = n;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const double pi_quarter = std::pow(std::numbers::pi, -0.25);
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    // Initial guesses for the largest roots first (Numerical Recipes, gauher).
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * rule.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * rule.nodes[1];
    } else {
      z = 2.0 * z - rule.nodes[i - 2];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Orthonormal Hermite recurrence.
      double p1 = pi_quarter;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    double p1 = pi_quarter;
    double p2 = 0.0;
    for (int j = 0; j < n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
    }
    pp = std::sqrt(2.0 * n) * p2;
    rule.nodes[i] = z;
    rule.weights[i] = 2.0 / (pp * pp);
    rule.nodes[n - 1 - i] = -z;
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  // Largest roots were filled first; flip to increasing order.
  std::vector<std::size_t> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rule.nodes[a] < rule.nodes[b]; });
  QuadratureRule sorted;
  sorted.order = n;
  for (auto idx : order) {
    sorted.nodes.push_back(rule.nodes[idx]);
    sorted.weights.push_back(rule.weights[idx]);
  }
  return sorted;
}

}  // namespace sphgp
