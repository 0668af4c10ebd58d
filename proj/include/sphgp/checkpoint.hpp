#pragma once

#include "sphgp/adam.hpp"
#include "sphgp/config.hpp"
#include "sphgp/data_io.hpp"
#include "sphgp/vargp.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sphgp {

inline constexpr int kCheckpointVersion = 1;

/// A trained model with everything needed to predict on new raw rows.
struct Checkpoint {
  RunConfig config;
  Task task = Task::regression;
  std::vector<std::string> feature_names;
  std::string target_name;
  double bias = 1.0;
  ColumnScaler input_scaler;
  std::optional<TargetScaler> target_scaler;
  KernelSpec kernel;
  Likelihood likelihood;
  HarmonicBasis basis;
  VariationalState state;
  Adam optimizer;
  std::uint64_t data_hash = 0;

  InducingModel model() const { return InducingModel(basis, kernel); }
};

/// JSON container; the basis is embedded as its bit-exact text section.
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sphgp
