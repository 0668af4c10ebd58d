#pragma once

#include "sphgp/config.hpp"
#include "sphgp/vargp.hpp"

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace sphgp {

struct CommandOptions {
  std::filesystem::path out_dir = "runs";
  std::optional<std::uint64_t> seed;
  bool parallel = false;
  bool overwrite = false;
  /// Base for relative data paths when SPHGP_DATA_DIR is unset (the config file's directory).
  std::filesystem::path config_dir = ".";
  std::ostream* log = nullptr;
};

/// Absolute paths pass through; relative ones resolve against SPHGP_DATA_DIR when set,
/// otherwise against `fallback`.
std::filesystem::path resolve_data_path(const std::string& path, const std::filesystem::path& fallback);

/// Regression: {"rmse", "nll"}; binary: {"auc", "nll"}.
std::string metrics_json(const Metrics& metrics);

struct TrainReport {
  std::filesystem::path run_dir;
  RunConfig effective;
  Metrics metrics;
  std::size_t trace_rows = 0;
  std::vector<std::string> warnings;
};

/// Validates, loads or generates data, splits, fits and writes
/// config.effective.cfg, trace.csv, checkpoint.json, metrics.json and predictions.csv
/// under <out>/run-<config hash>/.
TrainReport cmd_train(RunConfig config, const CommandOptions& options);

struct EvalReport {
  Metrics metrics;
  Task task = Task::regression;
  std::filesystem::path metrics_path;
  std::filesystem::path predictions_path;
};

/// Scores a checkpoint on a CSV file (all rows). Without a schema the checkpoint's columns are used.
EvalReport cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& data,
                    const std::optional<std::filesystem::path>& schema, const std::filesystem::path& out_dir);

/// `poly:<beta>`, `relu:<depth>` or `ntk:<depth>`.
struct KernelRequest {
  KernelFamily family = KernelFamily::poly_decay;
  double beta = 1.0;
  int depth = 1;
  std::string label;
};
KernelRequest parse_kernel_request(const std::string& text);

/// One relative-eigenvalue CSV per kernel, named eigvals-<label>.csv.
std::vector<std::filesystem::path> cmd_eigvals(const std::vector<std::string>& kernels, int dimension,
                                               int max_frequency, const std::filesystem::path& out_dir);

/// Small internally generated problem matching the config's kernel and likelihood:
/// d = 4, at most 3 frequencies, 3 phases per frequency, 20 points, a random state.
struct GradcheckProblem {
  InducingModel model;
  VariationalState state;
  Eigen::MatrixXd points;
  Eigen::VectorXd targets;
  Likelihood likelihood;
  double n_total = 0.0;
};
GradcheckProblem make_gradcheck_problem(const RunConfig& config, std::uint64_t seed);

struct GradcheckReport {
  std::vector<GradientCheckRow> rows;
  bool pass = false;
};
GradcheckReport cmd_gradcheck(const RunConfig& config, std::uint64_t seed,
                              std::optional<Eigen::Index> corrupt_index = std::nullopt);
std::string format_gradcheck(const GradcheckReport& report);

/// {"error": {"command", "type", "message"}} for a caught exception.
std::string error_record(const std::string& command, const std::exception& error);
/// 2 configuration, 3 data, 4 numerical, 5 dimension, 1 anything else.
int exit_code_for(const std::exception& error);

}  // namespace sphgp
