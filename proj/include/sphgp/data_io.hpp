#pragma once

#include "sphgp/sphere_point.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sphgp {

enum class Task { regression, binary };

std::string to_string(Task task);
Task parse_task(std::string_view text);

/// Column roles for a CSV file. Text form, one `key = value` per line:
///   target = <column>
///   features = <c1>, <c2>, ...   (omitted: every other column)
///   task = regression | binary
struct Schema {
  std::string target;
  std::vector<std::string> features;
  Task task = Task::regression;

  static Schema parse(std::string_view text);
  static Schema load(const std::filesystem::path& path);
  std::string serialize() const;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-column affine standardization fitted on training rows.
struct ColumnScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;  // population standard deviation; 1 where it is zero

  static ColumnScaler fit(const RowMatrix& inputs);
  RowMatrix apply(const RowMatrix& inputs) const;
};

struct TargetScaler {
  double mean = 0.0;
  double scale = 1.0;

  static TargetScaler fit(const Eigen::VectorXd& targets);
  Eigen::VectorXd apply(const Eigen::VectorXd& targets) const;
};

struct Dataset {
  RowMatrix inputs;  // N x raw dimension
  Eigen::VectorXd targets;
  Task task = Task::regression;
  std::vector<std::string> feature_names;
  std::string target_name;
  std::size_t rejected_rows = 0;

  Eigen::Index size() const { return inputs.rows(); }
  int raw_dimension() const { return static_cast<int>(inputs.cols()); }
  /// FNV-1a over the shape, inputs and targets.
  std::uint64_t content_hash() const;
};

/// RFC 4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<std::vector<std::string>> parse_csv_records(std::string_view text);

/// Parses a CSV with a header row. Rows with a missing or non-numeric value in a used
/// column are dropped and counted; more than `max_rejected_fraction` of the rows
/// rejected is a DataError. Binary targets must be 0 or 1.
Dataset parse_csv(std::string_view text, const Schema& schema, double max_rejected_fraction = 0.05);
Dataset load_csv(const std::filesystem::path& path, const Schema& schema, double max_rejected_fraction = 0.05);

/// Train/test partition with scalers fitted on the training rows only.
struct Split {
  Dataset train;  // standardized
  Dataset test;   // standardized with the training scalers
  ColumnScaler input_scaler;
  std::optional<TargetScaler> target_scaler;  // regression only
  std::uint64_t seed = 0;
};

enum class SplitMode { shuffled, tail };

/// `shuffled` permutes rows with `seed`; `tail` keeps file order and tests on the last rows.
Split split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed,
                    SplitMode mode = SplitMode::shuffled);

/// Applies fitted scalers to another data set (evaluation of a saved model).
Dataset standardize(const Dataset& data, const ColumnScaler& inputs, const std::optional<TargetScaler>& targets);

/// Appends the bias to every standardized row and normalizes onto S^{d_raw}; rows of the result.
Eigen::MatrixXd project_to_sphere(const Dataset& data, double bias);
std::vector<SpherePoint> sphere_points(const Dataset& data, double bias);

/// Seeded random partition of 0..n-1 into batches of `batch_size` (the last may be shorter).
std::vector<std::vector<Eigen::Index>> minibatches(Eigen::Index n, Eigen::Index batch_size, std::uint64_t epoch_seed);

}  // namespace sphgp
