#include "sphgp/synthetic.hpp"

#include "sphgp/kernels.hpp"
#include "sphgp/special_math.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace sphgp {

namespace {

std::vector<int> complete_counts(int dimension, int max_frequency) {
  std::vector<int> counts{1};
  for (int l = 1; l <= max_frequency; ++l) counts.push_back(static_cast<int>(num_harmonics(l, dimension)));
  return counts;
}

}  // namespace

PriorSample::PriorSample(int dimension, int max_frequency, double beta, double variance, std::uint64_t seed)
    : basis_(HarmonicBasis::build(dimension, complete_counts(dimension, max_frequency), seed ^ 0x5bd1e995ULL)) {
  const Spectrum spec = poly_decay_spectrum(beta, dimension, max_frequency);
  const std::vector<int> freq = basis_.feature_frequency();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  coefficients_.resize(static_cast<Eigen::Index>(freq.size()));
  for (std::size_t j = 0; j < freq.size(); ++j) {
    coefficients_[static_cast<Eigen::Index>(j)] =
        std::sqrt(variance * spec.eigenvalues[static_cast<std::size_t>(freq[j])]) * normal(rng);
  }
}

Eigen::VectorXd PriorSample::operator()(const Eigen::MatrixXd& points) const {
  return feature_matrix(basis_, points) * coefficients_;
}

SphereRegression sample_sphere_regression(const PriorSample& f, Eigen::Index n, double noise_sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SphereRegression out;
  out.points = sample_sphere(n, f.basis().dimension(), rng);
  out.latent = f(out.points);
  std::normal_distribution<double> normal(0.0, noise_sd);
  out.targets = out.latent;
  for (Eigen::Index i = 0; i < n; ++i) out.targets[i] += normal(rng);
  return out;
}

Dataset synthetic_regression(Eigen::Index n, int dimension, int max_frequency, double beta, double noise_sd,
                             double bias, std::uint64_t seed) {
  const PriorSample f(dimension, max_frequency, beta, 1.0, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.task = Task::regression;
  data.inputs.resize(n, dimension - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < dimension - 1; ++j) data.inputs(i, j) = normal(rng);
  }
  data.targets = f(project_to_sphere(data, bias));
  std::normal_distribution<double> noise(0.0, noise_sd);
  for (Eigen::Index i = 0; i < n; ++i) data.targets[i] += noise(rng);
  for (int j = 0; j < dimension - 1; ++j) data.feature_names.push_back("x" + std::to_string(j));
  data.target_name = "y";
  return data;
}

Dataset synthetic_binary(Eigen::Index n, std::uint64_t seed) {
  constexpr int kFeatures = 8;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset data;
  data.task = Task::binary;
  data.inputs.resize(n, kFeatures);
  data.targets.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < kFeatures; ++j) data.inputs(i, j) = normal(rng);
    const auto x = data.inputs.row(i);
    const double score = x(0) * x(1) + 0.8 * std::sin(1.5 * x(2)) + 0.6 * x(3) - 0.5 * (x(4) * x(4) - 1.0) +
                         0.3 * x(5) * x(6) + 0.5 * normal(rng);
    data.targets[i] = score > 0.0 ? 1.0 : 0.0;
  }
  data.feature_names = {"lepton_1_pT",  "lepton_1_eta", "lepton_1_phi",           "lepton_2_pT",
                        "lepton_2_eta", "lepton_2_phi", "missing_energy_magnitude", "missing_energy_phi"};
  data.target_name = "signal";
  return data;
}

std::string to_csv(const Dataset& data) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int j = 0; j < data.raw_dimension(); ++j) {
    os << (j < static_cast<int>(data.feature_names.size()) ? data.feature_names[static_cast<std::size_t>(j)]
                                                            : "x" + std::to_string(j))
       << ",";
  }
  os << (data.target_name.empty() ? "y" : data.target_name) << "\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.raw_dimension(); ++j) os << data.inputs(i, j) << ",";
    if (data.task == Task::binary) os << static_cast<int>(data.targets[i]) << "\n";
    else os << data.targets[i] << "\n";
  }
  return os.str();
}

}  // namespace sphgp
