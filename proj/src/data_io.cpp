#include "sphgp/data_io.hpp"

#include "sphgp/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace sphgp {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::optional<double> parse_number(const std::string& field) {
  const std::string t = trim(field);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

void fnv1a(std::uint64_t& h, const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

Dataset select_rows(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.task = data.task;
  out.feature_names = data.feature_names;
  out.target_name = data.target_name;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), data.inputs.cols());
  out.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = data.inputs.row(rows[i]);
    out.targets[static_cast<Eigen::Index>(i)] = data.targets[rows[i]];
  }
  return out;
}

}  // namespace

std::string to_string(Task task) { return task == Task::regression ? "regression" : "binary"; }

Task parse_task(std::string_view text) {
  const std::string t = trim(text);
  if (t == "regression") return Task::regression;
  if (t == "binary") return Task::binary;
  throw ConfigError("unknown task '" + t + "' (expected regression or binary)");
}

Schema Schema::parse(std::string_view text) {
  Schema schema;
  bool have_task = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("schema line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key == "target") {
      schema.target = value;
    } else if (key == "features") {
      std::istringstream cols(value);
      std::string col;
      while (std::getline(cols, col, ',')) {
        col = trim(col);
        if (!col.empty()) schema.features.push_back(col);
      }
    } else if (key == "task") {
      schema.task = parse_task(value);
      have_task = true;
    } else {
      throw ConfigError("schema line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (schema.target.empty()) throw ConfigError("schema needs a target column");
  if (!have_task) throw ConfigError("schema needs a task");
  return schema;
}

Schema Schema::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string Schema::serialize() const {
  std::ostringstream os;
  os << "target = " << target << "\n";
  if (!features.empty()) {
    os << "features = ";
    for (std::size_t i = 0; i < features.size(); ++i) os << (i ? ", " : "") << features[i];
    os << "\n";
  }
  os << "task = " << to_string(task) << "\n";
  return os.str();
}

ColumnScaler ColumnScaler::fit(const RowMatrix& inputs) {
  if (inputs.rows() == 0) throw DataError("cannot fit a scaler on zero rows");
  ColumnScaler s;
  s.mean = inputs.colwise().mean().transpose();
  s.scale.resize(inputs.cols());
  for (Eigen::Index j = 0; j < inputs.cols(); ++j) {
    const double sd = std::sqrt((inputs.col(j).array() - s.mean[j]).square().mean());
    s.scale[j] = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

RowMatrix ColumnScaler::apply(const RowMatrix& inputs) const {
  if (inputs.cols() != mean.size()) throw DimensionError("scaler width does not match the inputs");
  RowMatrix out = inputs;
  out.rowwise() -= mean.transpose();
  out.array().rowwise() /= scale.transpose().array();
  return out;
}

TargetScaler TargetScaler::fit(const Eigen::VectorXd& targets) {
  if (targets.size() == 0) throw DataError("cannot fit a scaler on zero rows");
  TargetScaler s;
  s.mean = targets.mean();
  const double sd = std::sqrt((targets.array() - s.mean).square().mean());
  s.scale = sd > 0.0 ? sd : 1.0;
  return s;
}

Eigen::VectorXd TargetScaler::apply(const Eigen::VectorXd& targets) const {
  return ((targets.array() - mean) / scale).matrix();
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::int64_t shape[2] = {inputs.rows(), inputs.cols()};
  fnv1a(h, shape, sizeof(shape));
  fnv1a(h, inputs.data(), static_cast<std::size_t>(inputs.size()) * sizeof(double));
  fnv1a(h, targets.data(), static_cast<std::size_t>(targets.size()) * sizeof(double));
  return h;
}

std::vector<std::vector<std::string>> parse_csv_records(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t i = 0;
  auto end_record = [&] {
    record.push_back(std::move(field));
    field.clear();
    // A record made of a single empty field is a blank line.
    if (!(record.size() == 1 && record[0].empty() && !field_started)) records.push_back(std::move(record));
    record.clear();
    field_started = false;
  };
  while (i < text.size()) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          i += 2;
          continue;
        }
        quoted = false;
      } else {
        field.push_back(ch);
      }
      ++i;
      continue;
    }
    switch (ch) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n': end_record(); break;
      default:
        field.push_back(ch);
        field_started = true;
    }
    ++i;
  }
  if (quoted) throw DataError("CSV ends inside a quoted field");
  if (!field.empty() || !record.empty() || field_started) end_record();
  return records;
}

Dataset parse_csv(std::string_view text, const Schema& schema, double max_rejected_fraction) {
  const auto records = parse_csv_records(text);
  if (records.empty()) throw DataError("CSV has no header row");
  const auto& header = records.front();
  std::vector<std::string> names;
  for (const auto& h : header) names.push_back(trim(h));
  auto column = [&](const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw DataError("column '" + name + "' not found in CSV header");
    return static_cast<std::size_t>(it - names.begin());
  };

  Dataset data;
  data.task = schema.task;
  data.target_name = schema.target;
  const std::size_t target_col = column(schema.target);
  std::vector<std::size_t> feature_cols;
  if (schema.features.empty()) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (c != target_col) {
        feature_cols.push_back(c);
        data.feature_names.push_back(names[c]);
      }
    }
  } else {
    for (const auto& f : schema.features) {
      feature_cols.push_back(column(f));
      data.feature_names.push_back(f);
    }
  }
  if (feature_cols.empty()) throw DataError("schema selects no feature columns");

  const std::size_t total = records.size() - 1;
  if (total == 0) throw DataError("CSV has no data rows");
  std::vector<double> values;
  std::vector<double> targets;
  values.reserve(total * feature_cols.size());
  std::vector<double> row(feature_cols.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != names.size()) {
      throw DataError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(rec.size()) + " fields, expected " +
                      std::to_string(names.size()));
    }
    bool ok = true;
    for (std::size_t k = 0; k < feature_cols.size() && ok; ++k) {
      const auto v = parse_number(rec[feature_cols[k]]);
      if (v) row[k] = *v;
      else ok = false;
    }
    const auto y = parse_number(rec[target_col]);
    if (!ok || !y) {
      ++data.rejected_rows;
      continue;
    }
    if (schema.task == Task::binary && *y != 0.0 && *y != 1.0) {
      throw DataError("binary target must be 0 or 1 (row " + std::to_string(r + 1) + ")");
    }
    values.insert(values.end(), row.begin(), row.end());
    targets.push_back(*y);
  }
  const double fraction = static_cast<double>(data.rejected_rows) / static_cast<double>(total);
  if (fraction > max_rejected_fraction) {
    std::ostringstream msg;
    msg << data.rejected_rows << " of " << total << " rows have missing or non-numeric values (limit "
        << max_rejected_fraction * 100.0 << "%)";
    throw DataError(msg.str());
  }
  if (targets.empty()) throw DataError("no usable rows");
  const auto n = static_cast<Eigen::Index>(targets.size());
  data.inputs = Eigen::Map<const RowMatrix>(values.data(), n, static_cast<Eigen::Index>(feature_cols.size()));
  data.targets = Eigen::Map<const Eigen::VectorXd>(targets.data(), n);
  return data;
}

Dataset load_csv(const std::filesystem::path& path, const Schema& schema, double max_rejected_fraction) {
  return parse_csv(read_file(path), schema, max_rejected_fraction);
}

Split split_dataset(const Dataset& data, double test_fraction, std::uint64_t seed, SplitMode mode) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in (0, 1)");
  const Eigen::Index n = data.size();
  const auto n_test = static_cast<Eigen::Index>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n) throw DataError("data set too small for the requested split");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  if (mode == SplitMode::shuffled) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  const auto cut = static_cast<std::ptrdiff_t>(n - n_test);
  const std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + cut);
  const std::vector<Eigen::Index> test_rows(order.begin() + cut, order.end());

  Split out;
  out.seed = seed;
  const Dataset train = select_rows(data, train_rows);
  out.input_scaler = ColumnScaler::fit(train.inputs);
  if (data.task == Task::regression) out.target_scaler = TargetScaler::fit(train.targets);
  out.train = standardize(train, out.input_scaler, out.target_scaler);
  out.test = standardize(select_rows(data, test_rows), out.input_scaler, out.target_scaler);
  out.train.rejected_rows = data.rejected_rows;
  return out;
}

Dataset standardize(const Dataset& data, const ColumnScaler& inputs, const std::optional<TargetScaler>& targets) {
  Dataset out = data;
  out.inputs = inputs.apply(data.inputs);
  if (targets) out.targets = targets->apply(data.targets);
  return out;
}

Eigen::MatrixXd project_to_sphere(const Dataset& data, double bias) {
  const Eigen::Index n = data.size();
  Eigen::MatrixXd out(n, data.inputs.cols() + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd raw = data.inputs.row(i).transpose();
    out.row(i) = SpherePoint::project(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), bias)
                     .coords()
                     .transpose();
  }
  return out;
}

std::vector<SpherePoint> sphere_points(const Dataset& data, double bias) {
  std::vector<SpherePoint> out;
  out.reserve(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const Eigen::VectorXd raw = data.inputs.row(i).transpose();
    out.push_back(
        SpherePoint::project(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), bias));
  }
  return out;
}

std::vector<std::vector<Eigen::Index>> minibatches(Eigen::Index n, Eigen::Index batch_size, std::uint64_t epoch_seed) {
  if (n <= 0) throw DataError("no rows to batch");
  if (batch_size <= 0) throw ConfigError("batch size must be positive");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<Eigen::Index>> out;
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index stop = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + start, order.begin() + stop);
  }
  return out;
}

}  // namespace sphgp
