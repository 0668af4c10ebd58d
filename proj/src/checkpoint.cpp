#include "sphgp/checkpoint.hpp"

#include "sphgp/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace sphgp {

namespace {

using nlohmann::json;

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vec(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json mat(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vec(m.row(i).transpose()));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Eigen::MatrixXd to_mat(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows) throw DataError("checkpoint matrix has the wrong row count");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Eigen::VectorXd r = to_vec(data.at(static_cast<std::size_t>(i)));
    if (r.size() != cols) throw DataError("checkpoint matrix has a ragged row");
    m.row(i) = r.transpose();
  }
  return m;
}

KernelFamily family_from(const std::string& s) {
  if (s == "poly_decay") return KernelFamily::poly_decay;
  if (s == "composed_relu") return KernelFamily::composed_relu;
  if (s == "ntk_relu") return KernelFamily::ntk_relu;
  throw DataError("checkpoint has unknown kernel family '" + s + "'");
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  const InducingModel model = c.model();
  const Spectrum spectrum = model.spectrum(c.state.hyper);
  json phases = json::array();
  for (const auto& p : c.state.phases) phases.push_back(mat(p));

  json j;
  j["format"] = "sphgp-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config_hash"] = c.config.hash();
  j["config"] = c.config.serialize();
  j["data_hash"] = hex64(c.data_hash);
  j["task"] = to_string(c.task);
  j["feature_names"] = c.feature_names;
  j["target_name"] = c.target_name;
  j["bias"] = c.bias;
  j["input_scaler"] = {{"mean", vec(c.input_scaler.mean)}, {"scale", vec(c.input_scaler.scale)}};
  j["target_scaler"] = c.target_scaler ? json{{"mean", c.target_scaler->mean}, {"scale", c.target_scaler->scale}}
                                       : json(nullptr);
  j["kernel"] = {{"family", to_string(c.kernel.family)}, {"depth", c.kernel.depth}, {"lambda0", c.kernel.lambda0}};
  j["likelihood"] = {{"kind", to_string(c.likelihood.kind)}, {"link", to_string(c.likelihood.link)}};
  j["basis"] = serialize_basis(c.basis);
  j["spectrum"] = {{"eigenvalues", spectrum.eigenvalues}, {"radial_variance", spectrum.radial_variance}};
  j["state"] = {{"mean", vec(c.state.mean)},
                {"cov_factor", mat(c.state.cov_factor)},
                {"log_beta", c.state.hyper.log_beta},
                {"log_variance", c.state.hyper.log_variance},
                {"log_noise", c.state.hyper.log_noise},
                {"phases", phases}};
  j["optimizer"] = {{"step", c.optimizer.step()},
                    {"first_moment", vec(c.optimizer.first_moment())},
                    {"second_moment", vec(c.optimizer.second_moment())}};
  return j.dump(1) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format") != "sphgp-checkpoint") throw DataError("not a checkpoint file");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    c.config = RunConfig::parse(j.at("config").get<std::string>());
    if (c.config.hash() != j.at("config_hash").get<std::string>()) throw DataError("checkpoint config hash mismatch");
    c.data_hash = std::stoull(j.at("data_hash").get<std::string>(), nullptr, 16);
    c.task = parse_task(j.at("task").get<std::string>());
    c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    c.target_name = j.at("target_name").get<std::string>();
    c.bias = j.at("bias").get<double>();
    c.input_scaler.mean = to_vec(j.at("input_scaler").at("mean"));
    c.input_scaler.scale = to_vec(j.at("input_scaler").at("scale"));
    if (!j.at("target_scaler").is_null()) {
      c.target_scaler = TargetScaler{j["target_scaler"].at("mean").get<double>(),
                                     j["target_scaler"].at("scale").get<double>()};
    }
    const auto& k = j.at("kernel");
    c.kernel = {family_from(k.at("family").get<std::string>()), k.at("depth").get<int>(),
                k.at("lambda0").get<double>()};
    const auto& lik = j.at("likelihood");
    c.likelihood.kind =
        lik.at("kind") == "gaussian" ? Likelihood::Kind::gaussian : Likelihood::Kind::bernoulli;
    c.likelihood.link = lik.at("link") == "probit" ? Likelihood::Link::probit : Likelihood::Link::logit;
    c.basis = deserialize_basis(j.at("basis").get<std::string>());
    const auto& s = j.at("state");
    c.state.mean = to_vec(s.at("mean"));
    c.state.cov_factor = to_mat(s.at("cov_factor"));
    c.state.hyper.log_beta = s.at("log_beta").get<double>();
    c.state.hyper.log_variance = s.at("log_variance").get<double>();
    c.state.hyper.log_noise = s.at("log_noise").get<double>();
    for (const auto& p : s.at("phases")) c.state.phases.push_back(to_mat(p));
    const auto& o = j.at("optimizer");
    const Eigen::VectorXd first = to_vec(o.at("first_moment"));
    c.optimizer = Adam(first.size());
    c.optimizer.restore(o.at("step").get<long>(), first, to_vec(o.at("second_moment")));
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace sphgp
