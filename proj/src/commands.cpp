#include "sphgp/commands.hpp"

#include "sphgp/checkpoint.hpp"
#include "sphgp/data_io.hpp"
#include "sphgp/errors.hpp"
#include "sphgp/kernels.hpp"
#include "sphgp/synthetic.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

namespace sphgp {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream os;
  os << "iteration,elbo,wallclock_s\n" << std::setprecision(17);
  for (const auto& row : trace) os << row.iteration << "," << row.elbo << "," << row.wallclock_s << "\n";
  return os.str();
}

std::string predictions_csv(const Evaluation& eval, Task task) {
  std::ostringstream os;
  os << std::setprecision(17);
  if (task == Task::regression) {
    os << "target,mean,variance\n";
    for (const auto& p : eval.predictions) os << p.target << "," << p.mean << "," << p.variance << "\n";
  } else {
    os << "target,probability\n";
    for (const auto& p : eval.predictions) os << p.target << "," << p.mean << "\n";
  }
  return os.str();
}

Eigen::VectorXd original_units(const Eigen::VectorXd& standardized, const std::optional<TargetScaler>& scaler) {
  if (!scaler) return standardized;
  return (standardized.array() * scaler->scale + scaler->mean).matrix();
}

TargetTransform transform_for(const std::optional<TargetScaler>& scaler) {
  if (!scaler) return {};
  return {scaler->mean, scaler->scale};
}

void log_line(const CommandOptions& options, const std::string& line) {
  if (options.log) *options.log << line << "\n";
}

}  // namespace

std::filesystem::path resolve_data_path(const std::string& path, const std::filesystem::path& fallback) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("SPHGP_DATA_DIR"); root && *root) return std::filesystem::path(root) / p;
  return fallback / p;
}

std::string metrics_json(const Metrics& metrics) {
  nlohmann::json j = nlohmann::json::object();
  if (metrics.rmse) j["rmse"] = *metrics.rmse;
  if (metrics.nll) j["nll"] = *metrics.nll;
  if (metrics.auc) j["auc"] = *metrics.auc;
  return j.dump(2) + "\n";
}

TrainReport cmd_train(RunConfig config, const CommandOptions& options) {
  if (options.seed) config.seed = *options.seed;
  config.threads = options.parallel ? std::max(1U, std::thread::hardware_concurrency()) : 1;
  config.validate();
  const std::filesystem::path run_dir = options.out_dir / ("run-" + config.hash());
  if (std::filesystem::exists(run_dir) && !options.overwrite) {
    throw ConfigError("run directory " + run_dir.string() + " exists; pass --overwrite to replace it");
  }

  // Data.
  Dataset data;
  if (config.source == DataSource::csv) {
    const std::filesystem::path schema_path(config.schema);
    const Schema schema = Schema::load(schema_path.is_absolute() ? schema_path : options.config_dir / schema_path);
    const bool binary = schema.task == Task::binary;
    if (binary != (config.likelihood == Likelihood::Kind::bernoulli)) {
      throw ConfigError("likelihood " + to_string(config.likelihood) + " does not fit task " + to_string(schema.task));
    }
    data = load_csv(resolve_data_path(config.data, options.config_dir), schema, config.max_rejected_fraction);
    if (data.rejected_rows > 0) log_line(options, "rejected rows: " + std::to_string(data.rejected_rows));
  } else if (config.source == DataSource::synthetic_regression) {
    data = synthetic_regression(config.synthetic_rows, config.synthetic_dimension, config.synthetic_max_frequency,
                                config.synthetic_beta, config.synthetic_noise, config.bias, config.split_seed + 17);
  } else {
    data = synthetic_binary(config.synthetic_rows, config.split_seed + 17);
  }
  const Split split = split_dataset(data, config.test_fraction, config.split_seed, config.split);
  const Eigen::MatrixXd x_train = project_to_sphere(split.train, config.bias);
  const Eigen::MatrixXd x_test = project_to_sphere(split.test, config.bias);

  // Model and fit.
  ModelOptions mo;
  mo.dimension = static_cast<int>(x_train.cols());
  mo.max_frequency = config.max_frequency;
  mo.phase_truncation = config.phase_truncation;
  mo.seed = config.seed;
  const InducingModel model = InducingModel::create(config.make_kernel(), mo);
  const Likelihood likelihood = config.make_likelihood();
  log_line(options, "features: " + std::to_string(model.num_features()) + ", training rows: " +
                        std::to_string(x_train.rows()) + ", dimension: " + std::to_string(mo.dimension));
  FitResult fitted = fit(model, prior_state(model, config.make_hyper()), x_train, split.train.targets, likelihood,
                         config.make_fit());

  const Evaluation eval = evaluate(model, fitted.state, x_test, original_units(split.test.targets, split.target_scaler),
                                   likelihood, transform_for(split.target_scaler));

  // Artifacts.
  TrainReport report;
  report.effective = config;
  report.run_dir = run_dir;
  std::filesystem::create_directories(report.run_dir);

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.task = data.task;
  ckpt.feature_names = data.feature_names;
  ckpt.target_name = data.target_name;
  ckpt.bias = config.bias;
  ckpt.input_scaler = split.input_scaler;
  ckpt.target_scaler = split.target_scaler;
  ckpt.kernel = model.kernel();
  ckpt.likelihood = likelihood;
  ckpt.basis = model.basis();
  ckpt.state = fitted.state;
  ckpt.optimizer = fitted.optimizer;
  ckpt.data_hash = data.content_hash();

  write_text(report.run_dir / "config.effective.cfg", config.serialize());
  write_text(report.run_dir / "trace.csv", trace_csv(fitted.trace));
  save_checkpoint(ckpt, report.run_dir / "checkpoint.json");
  write_text(report.run_dir / "metrics.json", metrics_json(eval.metrics));
  write_text(report.run_dir / "predictions.csv", predictions_csv(eval, data.task));

  report.metrics = eval.metrics;
  report.trace_rows = fitted.trace.size();
  report.warnings = std::move(fitted.warnings);
  for (const auto& w : report.warnings) log_line(options, "warning: " + w);
  return report;
}

EvalReport cmd_eval(const std::filesystem::path& checkpoint_path, const std::filesystem::path& data_path,
                    const std::optional<std::filesystem::path>& schema_path, const std::filesystem::path& out_dir) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  Schema schema;
  if (schema_path) {
    schema = Schema::load(*schema_path);
    if (schema.task != ckpt.task) {
      throw DataError("checkpoint was trained for " + to_string(ckpt.task) + " but the data schema declares " +
                      to_string(schema.task));
    }
  } else {
    schema.target = ckpt.target_name;
    schema.features = ckpt.feature_names;
    schema.task = ckpt.task;
  }
  const Dataset data = load_csv(data_path, schema, ckpt.config.max_rejected_fraction);
  if (data.raw_dimension() != ckpt.input_scaler.mean.size()) {
    throw DimensionError("data has " + std::to_string(data.raw_dimension()) + " feature columns but the checkpoint expects " +
                         std::to_string(ckpt.input_scaler.mean.size()));
  }
  const Dataset standardized = standardize(data, ckpt.input_scaler, std::nullopt);
  const Eigen::MatrixXd x = project_to_sphere(standardized, ckpt.bias);
  const InducingModel model = ckpt.model();
  if (x.cols() != model.dimension()) {
    throw DimensionError("projected data has dimension " + std::to_string(x.cols()) + " but the model expects " +
                         std::to_string(model.dimension()));
  }
  const Evaluation eval = evaluate(model, ckpt.state, x, data.targets, ckpt.likelihood, transform_for(ckpt.target_scaler));

  std::filesystem::create_directories(out_dir);
  EvalReport report;
  report.metrics = eval.metrics;
  report.task = ckpt.task;
  report.metrics_path = out_dir / "metrics.json";
  report.predictions_path = out_dir / "predictions.csv";
  write_text(report.metrics_path, metrics_json(eval.metrics));
  write_text(report.predictions_path, predictions_csv(eval, ckpt.task));
  return report;
}

KernelRequest parse_kernel_request(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("kernel spec '" + text + "' must look like poly:<beta>, relu:<L> or ntk:<L>");
  const std::string kind = text.substr(0, colon);
  const std::string arg = text.substr(colon + 1);
  KernelRequest r;
  std::size_t used = 0;
  try {
    if (kind == "poly") {
      r.family = KernelFamily::poly_decay;
      r.beta = std::stod(arg, &used);
      if (!(r.beta > 0.0)) throw ConfigError("poly-decay beta must be > 0");
      r.label = "poly-beta" + arg;
    } else if (kind == "relu" || kind == "ntk") {
      r.family = kind == "relu" ? KernelFamily::composed_relu : KernelFamily::ntk_relu;
      r.depth = std::stoi(arg, &used);
      if (r.depth < 1) throw ConfigError("kernel depth must be >= 1");
      r.label = kind + "-L" + arg;
    } else {
      throw ConfigError("unknown kernel kind '" + kind + "'");
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ConfigError*>(&e)) throw;
    throw ConfigError("cannot parse kernel spec '" + text + "'");
  }
  if (used != arg.size()) throw ConfigError("cannot parse kernel spec '" + text + "'");
  return r;
}

std::vector<std::filesystem::path> cmd_eigvals(const std::vector<std::string>& kernels, int dimension,
                                               int max_frequency, const std::filesystem::path& out_dir) {
  if (kernels.empty()) throw ConfigError("eigvals needs at least one --kernel");
  std::vector<KernelRequest> requests;
  for (const auto& k : kernels) requests.push_back(parse_kernel_request(k));
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> out;
  for (const auto& r : requests) {
    Spectrum s;
    switch (r.family) {
      case KernelFamily::poly_decay: s = poly_decay_spectrum(r.beta, dimension, max_frequency); break;
      case KernelFamily::composed_relu:
        s = funk_hecke_spectrum(compose_shape(ShapeFunction::relu(), r.depth), dimension, max_frequency);
        break;
      case KernelFamily::ntk_relu: s = funk_hecke_spectrum(ntk_relu_shape(r.depth), dimension, max_frequency); break;
    }
    const auto path = out_dir / ("eigvals-" + r.label + ".csv");
    export_spectrum(s, path);
    out.push_back(path);
  }
  return out;
}

GradcheckProblem make_gradcheck_problem(const RunConfig& config, std::uint64_t seed) {
  constexpr int kDimension = 4;
  constexpr Eigen::Index kPoints = 20;
  ModelOptions mo;
  mo.dimension = kDimension;
  mo.max_frequency = std::min(config.max_frequency, 3);
  mo.phase_truncation = 3;
  mo.seed = seed;
  InducingModel model = InducingModel::create(config.make_kernel(), mo);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  KernelHyper hyper = config.make_hyper();
  if (model.has_beta()) hyper.log_beta += 0.2 * normal(rng);
  hyper.log_variance += 0.2 * normal(rng);
  hyper.log_noise = std::log(0.3) + 0.2 * normal(rng);

  VariationalState state = prior_state(model, hyper);
  for (Eigen::Index j = 0; j < state.mean.size(); ++j) state.mean[j] = 0.5 * normal(rng);
  for (Eigen::Index j = 0; j < state.cov_factor.cols(); ++j) {
    state.cov_factor(j, j) *= std::exp(0.2 * normal(rng));
    for (Eigen::Index i = j + 1; i < state.cov_factor.rows(); ++i) state.cov_factor(i, j) = 0.05 * normal(rng);
  }
  for (auto& block : state.phases) {
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] += 0.1 * normal(rng);
    block.rowwise().normalize();
  }

  Eigen::MatrixXd points = sample_sphere(kPoints, kDimension, rng);
  const Likelihood likelihood = config.make_likelihood();
  Eigen::VectorXd targets(kPoints);
  for (Eigen::Index i = 0; i < kPoints; ++i) {
    const double z = normal(rng);
    targets[i] = likelihood.kind == Likelihood::Kind::gaussian ? z : (z > 0.0 ? 1.0 : 0.0);
  }
  return {std::move(model), std::move(state), std::move(points), std::move(targets), likelihood, 50.0};
}

GradcheckReport cmd_gradcheck(const RunConfig& config, std::uint64_t seed, std::optional<Eigen::Index> corrupt_index) {
  config.validate();
  const GradcheckProblem p = make_gradcheck_problem(config, seed);
  GradientCheckOptions options;
  options.corrupt_index = corrupt_index;
  GradcheckReport report;
  report.rows = gradient_check(p.model, p.state, p.points, p.targets, p.likelihood, p.n_total, options);
  report.pass = std::all_of(report.rows.begin(), report.rows.end(), [](const auto& r) { return r.pass; });
  return report;
}

std::string format_gradcheck(const GradcheckReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(28) << "parameter" << std::right << std::setw(18) << "analytic" << std::setw(18)
     << "finite_diff" << std::setw(12) << "rel_err" << "  status\n";
  std::size_t failed = 0;
  std::string first_failure;
  for (const auto& r : report.rows) {
    os << std::left << std::setw(28) << r.parameter << std::right << std::scientific << std::setprecision(9)
       << std::setw(18) << r.analytic << std::setw(18) << r.finite_difference << std::setprecision(3)
       << std::setw(12) << r.relative_error << "  " << (r.pass ? "ok" : "FAIL") << "\n"
       << std::defaultfloat;
    if (!r.pass) {
      if (failed == 0) first_failure = r.parameter;
      ++failed;
    }
  }
  os << "checked " << report.rows.size() << " parameters, " << failed << " failed";
  if (failed > 0) os << " (first: " << first_failure << ")";
  os << "\n";
  return os.str();
}

std::string error_record(const std::string& command, const std::exception& error) {
  std::string type = "error";
  if (dynamic_cast<const ConfigError*>(&error)) type = "config_error";
  else if (dynamic_cast<const DataError*>(&error)) type = "data_error";
  else if (dynamic_cast<const NumericalError*>(&error)) type = "numerical_error";
  else if (dynamic_cast<const DimensionError*>(&error)) type = "dimension_error";
  nlohmann::json j;
  j["error"] = {{"command", command}, {"type", type}, {"message", error.what()}};
  return j.dump();
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error)) return 2;
  if (dynamic_cast<const DataError*>(&error)) return 3;
  if (dynamic_cast<const NumericalError*>(&error)) return 4;
  if (dynamic_cast<const DimensionError*>(&error)) return 5;
  return 1;
}

}  // namespace sphgp
