#include "sphgp/config.hpp"

#include "sphgp/errors.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace sphgp {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad(key, v, "a finite real");
  return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "an integer");
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  const long long x = parse_integer(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) bad(key, v, "a 32-bit integer");
  return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "an unsigned 64-bit integer");
  return out;
}

std::string real(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

KernelFamily parse_family(const std::string& key, const std::string& v) {
  if (v == "poly_decay") return KernelFamily::poly_decay;
  if (v == "composed_relu") return KernelFamily::composed_relu;
  if (v == "ntk_relu") return KernelFamily::ntk_relu;
  bad(key, v, "poly_decay | composed_relu | ntk_relu");
}

}  // namespace

std::string to_string(DataSource source) {
  switch (source) {
    case DataSource::csv: return "csv";
    case DataSource::synthetic_regression: return "synthetic_regression";
    case DataSource::synthetic_binary: return "synthetic_binary";
  }
  return "unknown";
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"kernel", [&](auto& k, auto& v) { c.kernel = parse_family(k, v); }},
      {"beta_init", [&](auto& k, auto& v) { c.beta_init = parse_real(k, v); }},
      {"depth", [&](auto& k, auto& v) { c.depth = parse_int(k, v); }},
      {"lambda0", [&](auto& k, auto& v) { c.lambda0 = parse_real(k, v); }},
      {"variance_init", [&](auto& k, auto& v) { c.variance_init = parse_real(k, v); }},
      {"max_frequency", [&](auto& k, auto& v) { c.max_frequency = parse_int(k, v); }},
      {"phase_truncation",
       [&](auto& k, auto& v) { c.phase_truncation = v == "full" ? 0 : parse_int(k, v); }},
      {"likelihood",
       [&](auto& k, auto& v) {
         if (v == "gaussian") c.likelihood = Likelihood::Kind::gaussian;
         else if (v == "bernoulli") c.likelihood = Likelihood::Kind::bernoulli;
         else bad(k, v, "gaussian | bernoulli");
       }},
      {"link",
       [&](auto& k, auto& v) {
         if (v == "probit") c.link = Likelihood::Link::probit;
         else if (v == "logit") c.link = Likelihood::Link::logit;
         else bad(k, v, "probit | logit");
       }},
      {"noise_init", [&](auto& k, auto& v) { c.noise_init = parse_real(k, v); }},
      {"iterations", [&](auto& k, auto& v) { c.iterations = parse_int(k, v); }},
      {"batch_size", [&](auto& k, auto& v) { c.batch_size = v == "full" ? 0 : parse_int(k, v); }},
      {"lr_variational", [&](auto& k, auto& v) { c.lr_variational = parse_real(k, v); }},
      {"lr_hyper", [&](auto& k, auto& v) { c.lr_hyper = parse_real(k, v); }},
      {"lr_phase", [&](auto& k, auto& v) { c.lr_phase = parse_real(k, v); }},
      {"log_interval", [&](auto& k, auto& v) { c.log_interval = parse_int(k, v); }},
      {"seed", [&](auto& k, auto& v) { c.seed = parse_u64(k, v); }},
      {"split_seed", [&](auto& k, auto& v) { c.split_seed = parse_u64(k, v); }},
      {"source",
       [&](auto& k, auto& v) {
         if (v == "csv") c.source = DataSource::csv;
         else if (v == "synthetic_regression") c.source = DataSource::synthetic_regression;
         else if (v == "synthetic_binary") c.source = DataSource::synthetic_binary;
         else bad(k, v, "csv | synthetic_regression | synthetic_binary");
       }},
      {"data", [&](auto&, auto& v) { c.data = v; }},
      {"schema", [&](auto&, auto& v) { c.schema = v; }},
      {"test_fraction", [&](auto& k, auto& v) { c.test_fraction = parse_real(k, v); }},
      {"split",
       [&](auto& k, auto& v) {
         if (v == "shuffled") c.split = SplitMode::shuffled;
         else if (v == "tail") c.split = SplitMode::tail;
         else bad(k, v, "shuffled | tail");
       }},
      {"bias", [&](auto& k, auto& v) { c.bias = parse_real(k, v); }},
      {"max_rejected_fraction", [&](auto& k, auto& v) { c.max_rejected_fraction = parse_real(k, v); }},
      {"synthetic_rows", [&](auto& k, auto& v) { c.synthetic_rows = parse_int(k, v); }},
      {"synthetic_dimension", [&](auto& k, auto& v) { c.synthetic_dimension = parse_int(k, v); }},
      {"synthetic_max_frequency", [&](auto& k, auto& v) { c.synthetic_max_frequency = parse_int(k, v); }},
      {"synthetic_beta", [&](auto& k, auto& v) { c.synthetic_beta = parse_real(k, v); }},
      {"synthetic_noise", [&](auto& k, auto& v) { c.synthetic_noise = parse_real(k, v); }},
      {"threads", [&](auto& k, auto& v) { c.threads = parse_int(k, v); }},
  };

  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string t = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
    it->second(key, value);
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "kernel = " << to_string(kernel) << "\n"
     << "beta_init = " << real(beta_init) << "\n"
     << "depth = " << depth << "\n"
     << "lambda0 = " << real(lambda0) << "\n"
     << "variance_init = " << real(variance_init) << "\n"
     << "max_frequency = " << max_frequency << "\n"
     << "phase_truncation = " << (phase_truncation == 0 ? std::string("full") : std::to_string(phase_truncation))
     << "\n"
     << "likelihood = " << to_string(likelihood) << "\n"
     << "link = " << to_string(link) << "\n"
     << "noise_init = " << real(noise_init) << "\n"
     << "iterations = " << iterations << "\n"
     << "batch_size = " << (batch_size == 0 ? std::string("full") : std::to_string(batch_size)) << "\n"
     << "lr_variational = " << real(lr_variational) << "\n"
     << "lr_hyper = " << real(lr_hyper) << "\n"
     << "lr_phase = " << real(lr_phase) << "\n"
     << "log_interval = " << log_interval << "\n"
     << "seed = " << seed << "\n"
     << "split_seed = " << split_seed << "\n"
     << "source = " << to_string(source) << "\n"
     << "data = " << data << "\n"
     << "schema = " << schema << "\n"
     << "test_fraction = " << real(test_fraction) << "\n"
     << "split = " << (split == SplitMode::shuffled ? "shuffled" : "tail") << "\n"
     << "bias = " << real(bias) << "\n"
     << "max_rejected_fraction = " << real(max_rejected_fraction) << "\n"
     << "synthetic_rows = " << synthetic_rows << "\n"
     << "synthetic_dimension = " << synthetic_dimension << "\n"
     << "synthetic_max_frequency = " << synthetic_max_frequency << "\n"
     << "synthetic_beta = " << real(synthetic_beta) << "\n"
     << "synthetic_noise = " << real(synthetic_noise) << "\n"
     << "threads = " << threads << "\n";
  return os.str();
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(kernel != KernelFamily::poly_decay || beta_init > 0.0, "beta_init must be > 0");
  require(kernel != KernelFamily::poly_decay || (beta_init >= kBetaMin && beta_init <= kBetaMax),
          "beta_init must lie in [0.05, 10]");
  require(kernel == KernelFamily::poly_decay || depth >= 1, "depth must be >= 1");
  require(lambda0 > 0.0, "lambda0 must be > 0");
  require(variance_init > 0.0, "variance_init must be > 0");
  require(max_frequency >= 0, "max_frequency must be >= 0");
  require(phase_truncation >= 0, "phase_truncation must be 'full' or a positive integer");
  require(noise_init > 0.0, "noise_init must be > 0");
  require(iterations >= 0, "iterations must be >= 0");
  require(batch_size >= 0, "batch_size must be 'full' or a positive integer");
  require(lr_variational > 0.0 && lr_hyper > 0.0 && lr_phase > 0.0, "learning rates must be > 0");
  require(log_interval >= 1, "log_interval must be >= 1");
  require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie in (0, 1)");
  require(bias > 0.0, "bias must be > 0");
  require(max_rejected_fraction >= 0.0 && max_rejected_fraction <= 1.0, "max_rejected_fraction must lie in [0, 1]");
  require(threads >= 1, "threads must be >= 1");
  if (source == DataSource::csv) {
    require(!data.empty(), "source = csv needs a data path");
    require(!schema.empty(), "source = csv needs a schema path");
  } else {
    require(synthetic_rows >= 10, "synthetic_rows must be >= 10");
    require(synthetic_noise > 0.0, "synthetic_noise must be > 0");
    if (source == DataSource::synthetic_regression) {
      require(synthetic_dimension >= 3, "synthetic_dimension must be >= 3");
      require(synthetic_max_frequency >= 0, "synthetic_max_frequency must be >= 0");
      require(synthetic_beta > 0.0, "synthetic_beta must be > 0");
    }
  }
  const bool binary = source == DataSource::synthetic_binary;
  if (binary) require(likelihood == Likelihood::Kind::bernoulli, "synthetic_binary needs likelihood = bernoulli");
  if (source == DataSource::synthetic_regression) {
    require(likelihood == Likelihood::Kind::gaussian, "synthetic_regression needs likelihood = gaussian");
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

std::string RunConfig::hash() const {
  RunConfig c = *this;
  c.threads = 1;
  return hex64(fnv1a64(c.serialize()));
}

Likelihood RunConfig::make_likelihood() const { return {likelihood, link}; }

KernelSpec RunConfig::make_kernel() const { return {kernel, depth, lambda0}; }

KernelHyper RunConfig::make_hyper() const {
  KernelHyper h;
  h.log_beta = kernel == KernelFamily::poly_decay ? std::log(beta_init) : 0.0;
  h.log_variance = std::log(variance_init);
  h.log_noise = std::log(noise_init);
  return h;
}

FitConfig RunConfig::make_fit() const {
  FitConfig f;
  f.iterations = iterations;
  f.batch_size = batch_size;
  f.lr_variational = lr_variational;
  f.lr_hyper = lr_hyper;
  f.lr_phase = lr_phase;
  f.seed = seed;
  f.log_interval = log_interval;
  f.threads = threads;
  return f;
}

}  // namespace sphgp
