#pragma once

#include "sphgp/data_io.hpp"
#include "sphgp/likelihood.hpp"
#include "sphgp/vargp.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace sphgp {

enum class DataSource { csv, synthetic_regression, synthetic_binary };

std::string to_string(DataSource source);

/// Everything that determines a run besides the input bytes. Text form is flat
/// `key = value` lines; unknown keys are errors and omitted keys keep their defaults.
struct RunConfig {
  // Kernel
  KernelFamily kernel = KernelFamily::poly_decay;
  double beta_init = 1.0;
  int depth = 2;
  double lambda0 = 1.0;
  double variance_init = 1.0;
  int max_frequency = 8;
  int phase_truncation = 0;  // 0 = complete fundamental sets ("full")

  // Likelihood
  Likelihood::Kind likelihood = Likelihood::Kind::gaussian;
  Likelihood::Link link = Likelihood::Link::probit;
  double noise_init = 0.1;  // Gaussian noise variance

  // Optimizer
  int iterations = 1000;
  int batch_size = 256;  // 0 = full batch
  double lr_variational = 1e-2;
  double lr_hyper = 1e-3;
  double lr_phase = 1e-3;
  int log_interval = 1;

  // Seeds
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;

  // Data
  DataSource source = DataSource::synthetic_regression;
  std::string data;    // CSV path, relative paths resolve against the data root
  std::string schema;  // schema path, relative paths resolve against the config file's directory
  double test_fraction = 0.2;
  SplitMode split = SplitMode::shuffled;
  double bias = 1.0;
  double max_rejected_fraction = 0.05;
  int synthetic_rows = 2000;
  int synthetic_dimension = 4;
  int synthetic_max_frequency = 8;
  double synthetic_beta = 2.0;
  double synthetic_noise = 0.1;  // standard deviation

  // Execution
  int threads = 1;

  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::filesystem::path& path);
  /// Every field, defaults materialized, in a fixed order.
  std::string serialize() const;
  /// Throws ConfigError on the first invalid field.
  void validate() const;
  /// FNV-1a of serialize(), as 16 hex digits.
  std::string hash() const;

  Likelihood make_likelihood() const;
  KernelSpec make_kernel() const;
  KernelHyper make_hyper() const;
  FitConfig make_fit() const;

  bool operator==(const RunConfig&) const = default;
};

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace sphgp
