#pragma once

#include "sphgp/sphere_point.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace sphgp {

/// Angular part kappa(t) of a zonal kernel, t = cos(angle). Normalized so kappa(1) = 1.
class ShapeFunction {
 public:
  enum class Kind { relu_arccos, composed, ntk_relu, tabulated };

  /// Arc-cosine ReLU shape.
  static ShapeFunction relu();
  /// Any callable on [-1, 1]; no normalization is imposed.
  static ShapeFunction tabulated(std::function<double(double)> fn, std::string name);

  double operator()(double t) const { return fn_(t); }

  Kind kind() const { return kind_; }
  int depth() const { return depth_; }
  const std::string& name() const { return name_; }

 private:
  friend ShapeFunction compose_shape(const ShapeFunction& base, int depth);
  friend ShapeFunction ntk_relu_shape(int depth);

  ShapeFunction(Kind kind, int depth, std::function<double(double)> fn, std::string name)
      : kind_(kind), depth_(depth), fn_(std::move(fn)), name_(std::move(name)) {}

  Kind kind_ = Kind::tabulated;
  int depth_ = 1;
  std::function<double(double)> fn_;
  std::string name_;
};

/// kappa(t) = (t (pi - arccos t) + sqrt(1 - t^2)) / pi.
double relu_shape(double t);
/// kappa'(t) = (pi - arccos t) / pi.
double relu_shape_derivative(double t);

/// kappa applied `depth` times; depth 1 is the base itself. Requires base(1) = 1.
ShapeFunction compose_shape(const ShapeFunction& base, int depth);

/// Normalized ReLU neural tangent kernel shape Theta^L(t) / Theta^L(1):
/// Sigma^0 = Theta^0 = t, Sigma^l = kappa(Sigma^{l-1}), Theta^l = Sigma^l + Theta^{l-1} kappa'(Sigma^{l-1}).
ShapeFunction ntk_relu_shape(int depth);

enum class SpectrumSource { funk_hecke, poly_decay };

/// Eigenvalues lambda_0..lambda_lmax of a zonal kernel on S^{d-1}, plus the constant radial variance.
struct Spectrum {
  int dimension = 3;
  std::vector<double> eigenvalues;
  SpectrumSource source = SpectrumSource::poly_decay;
  std::string label;
  double beta = 0.0;  // poly_decay only
  double radial_variance = 1.0;

  int max_frequency() const { return static_cast<int>(eigenvalues.size()) - 1; }
};

/// Default Funk-Hecke quadrature order for a truncation level.
int default_quadrature_order(int max_frequency);

/// lambda_l = c_d / C_l(1) * integral of kappa(t) C_l(t) (1 - t^2)^((d-3)/2) dt over [-1, 1],
/// evaluated with Gauss-Legendre in theta = arccos(t), where the weight becomes sin^{d-2}(theta).
/// quad_order = 0 selects default_quadrature_order. Results in [-1e-10, 0) clamp to zero;
/// anything more negative throws NumericalError.
Spectrum funk_hecke_spectrum(const ShapeFunction& shape, int dimension, int max_frequency, int quad_order = 0);

/// lambda_l = l^{-beta} for l >= 1 and lambda_0 = lambda0 (default 1).
Spectrum poly_decay_spectrum(double beta, int dimension, int max_frequency, double lambda0 = 1.0);

/// sum_l ((l + alpha) / alpha) lambda_l C_l(t), without the radial variance.
double mercer_shape(const Spectrum& spectrum, double t);

/// sigma^2 * mercer_shape(x^T x').
double mercer_eval(const Spectrum& spectrum, const SpherePoint& x, const SpherePoint& y);

/// Gram matrix of mercer_eval over the rows of `a` and `b`.
Eigen::MatrixXd mercer_gram(const Spectrum& spectrum, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// k(x, x) = sigma^2 sum_l N(l, d) lambda_l, the same for every point on the sphere.
double prior_variance(const Spectrum& spectrum);

/// CSV with header `frequency,relative_eigenvalue` and rows (l, lambda_l / lambda_1) for l >= 1,
/// 17 significant digits. Requires lambda_1 > 0.
std::string spectrum_csv(const Spectrum& spectrum);
void export_spectrum(const Spectrum& spectrum, const std::filesystem::path& path);

}  // namespace sphgp
