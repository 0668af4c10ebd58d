#include "sphgp/commands.hpp"
#include "sphgp/config.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace sphgp;

struct Common {
  std::string config;
  std::string out = "runs";
  std::optional<std::uint64_t> seed;
  bool parallel = false;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Run configuration (key = value text)");
  if (needs_config) opt->required();
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Override the model seed");
  auto* par = cmd->add_flag("--parallel", c.parallel, "Use all hardware threads for feature computation");
  cmd->add_flag("--deterministic", c.deterministic, "Single-threaded, bit-reproducible execution (default)")
      ->excludes(par);
}

RunConfig load_config(const Common& c) {
  return c.config.empty() ? RunConfig{} : RunConfig::load(c.config);
}

std::filesystem::path config_dir(const Common& c) {
  if (c.config.empty()) return std::filesystem::current_path();
  const auto parent = std::filesystem::path(c.config).parent_path();
  return parent.empty() ? std::filesystem::current_path() : parent;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse variational GPs with spherical harmonic features"};
  app.require_subcommand(1);

  Common train_opts;
  bool overwrite = false;
  auto* train = app.add_subcommand("train", "Fit a model and write checkpoint, trace and metrics");
  add_common(train, train_opts, true);
  train->add_flag("--overwrite", overwrite, "Replace an existing run directory");

  Common eval_opts;
  std::string checkpoint, data, schema;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a CSV file");
  add_common(eval, eval_opts, false);
  eval->add_option("--checkpoint", checkpoint, "checkpoint.json from a training run")->required();
  eval->add_option("--data", data, "CSV file (relative paths use SPHGP_DATA_DIR when set)")->required();
  eval->add_option("--schema", schema, "Schema file; defaults to the checkpoint's columns");

  Common eig_opts;
  std::vector<std::string> kernels;
  int dimension = 3;
  int max_frequency = 10;
  auto* eig = app.add_subcommand("eigvals", "Export relative eigenvalues lambda_l / lambda_1");
  add_common(eig, eig_opts, false);
  eig->add_option("--kernel", kernels, "poly:<beta>, relu:<depth> or ntk:<depth>; repeatable")->required();
  eig->add_option("--dim", dimension, "Ambient dimension d of the sphere S^{d-1}")->capture_default_str();
  eig->add_option("--max-frequency", max_frequency, "Highest frequency")->capture_default_str();

  Common grad_opts;
  std::optional<long long> corrupt;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic ELBO gradients with finite differences");
  add_common(grad, grad_opts, false);
  grad->add_option("--corrupt-gradient", corrupt, "Test hook: perturb one analytic gradient entry")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*train) {
      CommandOptions options;
      options.out_dir = train_opts.out;
      options.seed = train_opts.seed;
      options.parallel = train_opts.parallel;
      options.overwrite = overwrite;
      options.config_dir = config_dir(train_opts);
      options.log = &std::cerr;
      const TrainReport report = cmd_train(load_config(train_opts), options);
      std::cout << "run directory: " << report.run_dir.string() << "\n"
                << "trace rows: " << report.trace_rows << "\n"
                << metrics_json(report.metrics);
      return 0;
    }
    if (*eval) {
      const auto data_path = resolve_data_path(data, std::filesystem::current_path());
      std::optional<std::filesystem::path> schema_path;
      if (!schema.empty()) schema_path = resolve_data_path(schema, std::filesystem::current_path());
      const EvalReport report = cmd_eval(checkpoint, data_path, schema_path, eval_opts.out);
      std::cout << metrics_json(report.metrics);
      return 0;
    }
    if (*eig) {
      for (const auto& path : cmd_eigvals(kernels, dimension, max_frequency, eig_opts.out)) {
        std::cout << path.string() << "\n";
      }
      return 0;
    }
    if (*grad) {
      const RunConfig config = load_config(grad_opts);
      std::optional<Eigen::Index> index;
      if (corrupt) index = static_cast<Eigen::Index>(*corrupt);
      const GradcheckReport report = cmd_gradcheck(config, grad_opts.seed.value_or(config.seed), index);
      std::cout << format_gradcheck(report);
      return report.pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << error_record(command, e) << "\n";
    return exit_code_for(e);
  }
  return 1;
}
