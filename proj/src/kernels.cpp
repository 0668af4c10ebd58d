#include "sphgp/kernels.hpp"

#include "sphgp/errors.hpp"
#include "sphgp/special_math.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sphgp {

namespace {

constexpr double kClamp = 1e-12;
constexpr double kNegativeEigenvalueTolerance = 1e-10;

double clamp_shape_arg(double t) {
  if (!(std::abs(t) <= 1.0 + kClamp)) throw std::domain_error("shape function argument outside [-1, 1]");
  return std::clamp(t, -1.0, 1.0);
}

}  // namespace

double relu_shape(double t) {
  t = clamp_shape_arg(t);
  return (t * (std::numbers::pi - std::acos(t)) + std::sqrt(1.0 - t * t)) / std::numbers::pi;
}

double relu_shape_derivative(double t) {
  t = clamp_shape_arg(t);
  return (std::numbers::pi - std::acos(t)) / std::numbers::pi;
}

ShapeFunction ShapeFunction::relu() { return ShapeFunction(Kind::relu_arccos, 1, &relu_shape, "relu"); }

ShapeFunction ShapeFunction::tabulated(std::function<double(double)> fn, std::string name) {
  if (!fn) throw std::invalid_argument("tabulated shape needs a callable");
  return ShapeFunction(Kind::tabulated, 1, std::move(fn), std::move(name));
}

ShapeFunction compose_shape(const ShapeFunction& base, int depth) {
  if (depth < 1) throw std::invalid_argument("composition depth must be >= 1");
  if (std::abs(base(1.0) - 1.0) > 1e-12) throw std::invalid_argument("compose_shape needs a base with kappa(1) = 1");
  if (depth == 1) return base;
  auto fn = [base, depth](double t) {
    for (int i = 0; i < depth; ++i) t = base(t);
    return t;
  };
  return ShapeFunction(ShapeFunction::Kind::composed, base.depth() * depth, fn,
                       base.name() + "^" + std::to_string(depth));
}

ShapeFunction ntk_relu_shape(int depth) {
  if (depth < 1) throw std::invalid_argument("NTK depth must be >= 1");
  auto fn = [depth](double t) {
    t = clamp_shape_arg(t);
    double sigma = t;
    double theta = t;
    for (int l = 1; l <= depth; ++l) {
      const double next = relu_shape(sigma);
      theta = next + theta * relu_shape_derivative(sigma);
      sigma = next;
    }
    // Theta^L(1) = L + 1.
    return theta / (depth + 1.0);
  };
  return ShapeFunction(ShapeFunction::Kind::ntk_relu, depth, fn, "ntk" + std::to_string(depth));
}

int default_quadrature_order(int max_frequency) { return std::max(64, max_frequency + 32); }

Spectrum funk_hecke_spectrum(const ShapeFunction& shape, int dimension, int max_frequency, int quad_order) {
  const double alpha = gegenbauer_alpha(dimension);
  if (max_frequency < 0) throw std::invalid_argument("max_frequency must be >= 0");
  if (quad_order == 0) quad_order = default_quadrature_order(max_frequency);
  if (quad_order < max_frequency + 16) throw std::invalid_argument("quadrature order must be >= max_frequency + 16");

  const QuadratureRule rule = gauss_legendre(quad_order);
  const double c_d = funk_hecke_constant(dimension);
  std::vector<double> integrals(static_cast<std::size_t>(max_frequency) + 1, 0.0);
  for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
    const double theta = 0.5 * std::numbers::pi * (rule.nodes[k] + 1.0);
    const double w = 0.5 * std::numbers::pi * rule.weights[k] * std::pow(std::sin(theta), dimension - 2);
    const double t = std::cos(theta);
    const double kappa = shape(t);
    const auto c = gegenbauer_all(alpha, max_frequency, t);
    for (int l = 0; l <= max_frequency; ++l) integrals[l] += w * kappa * c[l];
  }

  Spectrum out;
  out.dimension = dimension;
  out.source = SpectrumSource::funk_hecke;
  out.label = shape.name();
  out.eigenvalues.resize(integrals.size());
  for (int l = 0; l <= max_frequency; ++l) {
    double lambda = c_d * integrals[l] / gegenbauer_at_one(alpha, l);
    if (lambda < 0.0) {
      if (lambda < -kNegativeEigenvalueTolerance) {
        std::ostringstream msg;
        msg << "shape '" << shape.name() << "' has negative eigenvalue " << lambda << " at frequency " << l;
        throw NumericalError(msg.str());
      }
      lambda = 0.0;
    }
    out.eigenvalues[l] = lambda;
  }
  if (std::none_of(out.eigenvalues.begin(), out.eigenvalues.end(), [](double v) { return v > 0.0; })) {
    throw NumericalError("shape '" + shape.name() + "' has an all-zero spectrum");
  }
  return out;
}

Spectrum poly_decay_spectrum(double beta, int dimension, int max_frequency, double lambda0) {
  if (!(beta > 0.0)) throw std::invalid_argument("poly-decay order beta must be positive");
  if (!(lambda0 > 0.0)) throw std::invalid_argument("lambda_0 must be positive");
  gegenbauer_alpha(dimension);
  if (max_frequency < 0) throw std::invalid_argument("max_frequency must be >= 0");
  Spectrum out;
  out.dimension = dimension;
  out.source = SpectrumSource::poly_decay;
  out.beta = beta;
  out.label = "poly";
  out.eigenvalues.resize(static_cast<std::size_t>(max_frequency) + 1);
  out.eigenvalues[0] = lambda0;
  for (int l = 1; l <= max_frequency; ++l) out.eigenvalues[l] = std::pow(static_cast<double>(l), -beta);
  return out;
}

double mercer_shape(const Spectrum& spectrum, double t) {
  const double alpha = gegenbauer_alpha(spectrum.dimension);
  const auto c = gegenbauer_all(alpha, spectrum.max_frequency(), t);
  double acc = 0.0;
  for (int l = 0; l <= spectrum.max_frequency(); ++l) acc += zonal_scale(l, alpha) * spectrum.eigenvalues[l] * c[l];
  return acc;
}

double mercer_eval(const Spectrum& spectrum, const SpherePoint& x, const SpherePoint& y) {
  if (x.dimension() != spectrum.dimension || y.dimension() != spectrum.dimension) {
    throw DimensionError("point dimension does not match spectrum dimension " + std::to_string(spectrum.dimension));
  }
  return spectrum.radial_variance * mercer_shape(spectrum, x.dot(y));
}

Eigen::MatrixXd mercer_gram(const Spectrum& spectrum, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != spectrum.dimension || b.cols() != spectrum.dimension) {
    throw DimensionError("point dimension does not match spectrum dimension " + std::to_string(spectrum.dimension));
  }
  const Eigen::MatrixXd inner = a * b.transpose();
  Eigen::MatrixXd gram(inner.rows(), inner.cols());
  for (Eigen::Index j = 0; j < inner.cols(); ++j) {
    for (Eigen::Index i = 0; i < inner.rows(); ++i) {
      gram(i, j) = spectrum.radial_variance * mercer_shape(spectrum, inner(i, j));
    }
  }
  return gram;
}

double prior_variance(const Spectrum& spectrum) { return spectrum.radial_variance * mercer_shape(spectrum, 1.0); }

std::string spectrum_csv(const Spectrum& spectrum) {
  if (spectrum.max_frequency() < 1 || !(spectrum.eigenvalues[1] > 0.0)) {
    throw std::invalid_argument("relative eigenvalues need lambda_1 > 0");
  }
  std::ostringstream os;
  os << "frequency,relative_eigenvalue\n";
  os << std::setprecision(17);
  for (int l = 1; l <= spectrum.max_frequency(); ++l) {
    os << l << "," << spectrum.eigenvalues[l] / spectrum.eigenvalues[1] << "\n";
  }
  return os.str();
}

void export_spectrum(const Spectrum& spectrum, const std::filesystem::path& path) {
  const std::string text = spectrum_csv(spectrum);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace sphgp
