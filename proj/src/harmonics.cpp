#include "sphgp/harmonics.hpp"

#include "sphgp/errors.hpp"
#include "sphgp/special_math.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace sphgp {

namespace {

constexpr int kMaxRestarts = 4;
constexpr double kJitterLadder[] = {1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4};
constexpr double kCollapsedCosine = 1.0 - 1e-14;

struct Factor {
  Eigen::MatrixXd lower;
  double condition = std::numeric_limits<double>::infinity();
  bool ok = false;
};

Factor factorize(const Eigen::MatrixXd& gram) {
  Factor out;
  if (gram.rows() == 0) {
    out.ok = true;
    out.condition = 1.0;
    return out;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) return out;
  const double rcond = llt.rcond();
  out.lower = llt.matrixL();
  out.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
  out.ok = out.lower.diagonal().minCoeff() > 0.0;
  return out;
}

Eigen::MatrixXd normalized_rows(Eigen::MatrixXd rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericalError("phase direction has zero or non-finite norm");
    rows.row(i) /= norm;
  }
  return rows;
}

// Greedy pivoted Cholesky on the zonal kernel over a candidate pool: each step
// keeps the candidate with the largest residual variance given those already chosen.
Eigen::MatrixXd greedy_select(int frequency, int dimension, int count, Eigen::Index pool, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd candidates = sample_sphere(pool, dimension, rng);
  const double alpha = gegenbauer_alpha(dimension);
  const double scale = zonal_scale(frequency, alpha);

  Eigen::VectorXd residual = Eigen::VectorXd::Constant(pool, scale * gegenbauer_at_one(alpha, frequency));
  Eigen::MatrixXd partial = Eigen::MatrixXd::Zero(pool, count);
  std::vector<bool> taken(static_cast<std::size_t>(pool), false);
  Eigen::MatrixXd chosen(count, dimension);

  for (int k = 0; k < count; ++k) {
    Eigen::Index pivot = -1;
    double best = -1.0;
    for (Eigen::Index p = 0; p < pool; ++p) {
      if (!taken[static_cast<std::size_t>(p)] && residual[p] > best) {
        best = residual[p];
        pivot = p;
      }
    }
    if (pivot < 0 || !(best > 0.0)) break;
    taken[static_cast<std::size_t>(pivot)] = true;
    chosen.row(k) = candidates.row(pivot);

    const Eigen::VectorXd inner = candidates * candidates.row(pivot).transpose();
    Eigen::VectorXd column(pool);
    for (Eigen::Index q = 0; q < pool; ++q) column[q] = scale * gegenbauer(alpha, frequency, inner[q]);
    if (k > 0) column.noalias() -= partial.leftCols(k) * partial.row(pivot).head(k).transpose();
    column /= std::sqrt(best);
    partial.col(k) = column;
    residual -= column.cwiseAbs2();
  }
  return chosen;
}

}  // namespace

Eigen::MatrixXd gegenbauer_gram(int frequency, const Eigen::MatrixXd& directions) {
  const int d = static_cast<int>(directions.cols());
  const double alpha = gegenbauer_alpha(d);
  const double scale = zonal_scale(frequency, alpha);
  const Eigen::MatrixXd inner = directions * directions.transpose();
  Eigen::MatrixXd gram(inner.rows(), inner.cols());
  for (Eigen::Index j = 0; j < inner.cols(); ++j) {
    for (Eigen::Index i = j; i < inner.rows(); ++i) {
      // Evaluate once per unordered pair so the matrix is exactly symmetric.
      const double value = scale * gegenbauer(alpha, frequency, inner(i, j));
      gram(i, j) = value;
      gram(j, i) = value;
    }
  }
  return gram;
}

FundamentalSet build_fundamental_set(int frequency, int dimension, int count, std::uint64_t seed) {
  if (frequency < 1) throw std::invalid_argument("fundamental sets are defined for l >= 1");
  const auto full = num_harmonics(frequency, dimension);
  if (count < 1 || static_cast<std::uint64_t>(count) > full) {
    throw std::invalid_argument("phase count " + std::to_string(count) + " outside [1, N(l,d) = " +
                                std::to_string(full) + "]");
  }
  double best_condition = std::numeric_limits<double>::infinity();
  Eigen::Index pool = 2 * static_cast<Eigen::Index>(count) + 32;
  for (int attempt = 0; attempt <= kMaxRestarts; ++attempt) {
    const std::uint64_t attempt_seed = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(attempt);
    Eigen::MatrixXd directions = greedy_select(frequency, dimension, count, pool, attempt_seed);
    directions = normalized_rows(std::move(directions));
    const Factor factor = factorize(gegenbauer_gram(frequency, directions));
    if (factor.ok && factor.condition < kBuildMaxCondition) {
      FundamentalSet set;
      set.frequency = frequency;
      set.dimension = dimension;
      set.directions = std::move(directions);
      set.gram_chol = factor.lower;
      set.condition_number = factor.condition;
      return set;
    }
    best_condition = std::min(best_condition, factor.condition);
    pool *= 2;
  }
  std::ostringstream msg;
  msg << "could not build a fundamental set for l=" << frequency << ", d=" << dimension << ", m=" << count
      << "; best condition number " << best_condition;
  throw NumericalError(msg.str());
}

FundamentalSet make_fundamental_set(int frequency, Eigen::MatrixXd directions) {
  FundamentalSet set;
  set.frequency = frequency;
  set.dimension = static_cast<int>(directions.cols());
  set.directions = std::move(directions);
  return reorthogonalize(set);
}

namespace {

// Cholesky of A_l for rows taken as-is, with the jitter ladder as fallback.
FundamentalSet factorize_set(FundamentalSet out) {
  const Eigen::Index m = out.directions.rows();
  out.jitter = 0.0;
  out.warning.clear();
  out.condition_number = 1.0;
  out.gram_chol.resize(m, m);
  if (m == 0) return out;

  const Eigen::MatrixXd gram = gegenbauer_gram(out.frequency, out.directions);
  Factor factor = factorize(gram);
  if (factor.ok && factor.condition <= kReorthogonalizeMaxCondition) {
    out.gram_chol = std::move(factor.lower);
    out.condition_number = factor.condition;
    return out;
  }
  // Rows that coincide (or are antipodal) to rounding give identical features; no jitter
  // turns them back into distinct phases.
  const Eigen::MatrixXd inner = out.directions * out.directions.transpose();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = j + 1; i < m; ++i) {
      if (!(std::abs(inner(i, j)) < kCollapsedCosine)) {
        throw NumericalError("frequency " + std::to_string(out.frequency) + ": phases " + std::to_string(j) +
                             " and " + std::to_string(i) + " collapsed onto each other");
      }
    }
  }
  const double base = gram.trace() / static_cast<double>(m);
  for (double level : kJitterLadder) {
    const double jitter = level * base;
    Eigen::MatrixXd shifted = gram;
    shifted.diagonal().array() += jitter;
    factor = factorize(shifted);
    if (factor.ok && factor.condition <= kReorthogonalizeMaxCondition) {
      std::ostringstream msg;
      msg << "frequency " << out.frequency << ": Gram matrix near-singular, added jitter " << jitter;
      out.gram_chol = std::move(factor.lower);
      out.condition_number = factor.condition;
      out.jitter = jitter;
      out.warning = msg.str();
      return out;
    }
  }
  throw NumericalError("frequency " + std::to_string(out.frequency) +
                       ": phase directions collapsed, Gram matrix rank deficient after maximum jitter");
}

}  // namespace

FundamentalSet reorthogonalize(const FundamentalSet& set) {
  if (set.directions.cols() != set.dimension) throw DimensionError("phase directions have the wrong width");
  FundamentalSet out;
  out.frequency = set.frequency;
  out.dimension = set.dimension;
  out.directions = normalized_rows(set.directions);
  return factorize_set(std::move(out));
}

HarmonicBasis::HarmonicBasis(int dimension, std::vector<FundamentalSet> sets)
    : dimension_(dimension), sets_(std::move(sets)) {
  gegenbauer_alpha(dimension_);
  for (std::size_t i = 0; i < sets_.size(); ++i) {
    const auto& s = sets_[i];
    if (s.frequency != static_cast<int>(i) + 1) throw std::invalid_argument("basis frequencies must be contiguous");
    if (s.size() > 0 && s.directions.cols() != dimension_) throw DimensionError("fundamental set dimension mismatch");
    if (static_cast<std::uint64_t>(s.size()) > num_harmonics(s.frequency, dimension_)) {
      throw std::invalid_argument("phase count exceeds N(l, d)");
    }
  }
}

HarmonicBasis HarmonicBasis::build(int dimension, const std::vector<int>& phase_counts, std::uint64_t seed) {
  if (phase_counts.empty() || phase_counts[0] != 1) {
    throw std::invalid_argument("frequency 0 must carry exactly one (constant) feature");
  }
  std::vector<FundamentalSet> sets;
  for (std::size_t l = 1; l < phase_counts.size(); ++l) {
    const int frequency = static_cast<int>(l);
    if (phase_counts[l] == 0) {
      FundamentalSet empty;
      empty.frequency = frequency;
      empty.dimension = dimension;
      empty.directions.resize(0, dimension);
      sets.push_back(std::move(empty));
      continue;
    }
    sets.push_back(build_fundamental_set(frequency, dimension, phase_counts[l], seed + 1000003ULL * l));
  }
  return HarmonicBasis(dimension, std::move(sets));
}

Eigen::Index HarmonicBasis::num_features() const {
  Eigen::Index total = 1;
  for (const auto& s : sets_) total += s.size();
  return total;
}

void HarmonicBasis::replace_set(FundamentalSet set) {
  if (set.frequency < 1 || set.frequency > max_frequency()) throw std::out_of_range("frequency outside basis");
  if (set.size() != sets_[set.frequency - 1].size()) throw DimensionError("replacement changes the phase count");
  sets_[set.frequency - 1] = std::move(set);
}

std::vector<int> HarmonicBasis::phase_counts() const {
  std::vector<int> counts{1};
  for (const auto& s : sets_) counts.push_back(static_cast<int>(s.size()));
  return counts;
}

std::vector<int> HarmonicBasis::feature_frequency() const {
  std::vector<int> freq{0};
  for (const auto& s : sets_) freq.insert(freq.end(), static_cast<std::size_t>(s.size()), s.frequency);
  return freq;
}

Eigen::Index HarmonicBasis::offset(int frequency) const {
  if (frequency == 0) return 0;
  Eigen::Index off = 1;
  for (int l = 1; l < frequency; ++l) off += sets_.at(l - 1).size();
  return off;
}

Eigen::MatrixXd raw_responses(const FundamentalSet& set, const Eigen::MatrixXd& points) {
  const double alpha = gegenbauer_alpha(set.dimension);
  const double scale = zonal_scale(set.frequency, alpha);
  Eigen::MatrixXd g = points * set.directions.transpose();
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = scale * gegenbauer(alpha, set.frequency, g(i, j));
  }
  return g;
}

namespace {

void fill_features(const HarmonicBasis& basis, const Eigen::MatrixXd& points, Eigen::Index row0, Eigen::Index rows,
                   Eigen::MatrixXd& out) {
  const Eigen::MatrixXd block_points = points.middleRows(row0, rows);
  out.block(row0, 0, rows, 1).setOnes();
  Eigen::Index col = 1;
  for (const auto& set : basis.sets()) {
    if (set.size() == 0) continue;
    Eigen::MatrixXd g = raw_responses(set, block_points);
    // g * L^{-T}: row i becomes (L^{-1} g_i)^T.
    set.gram_chol.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(g);
    out.block(row0, col, rows, set.size()) = g;
    col += set.size();
  }
}

}  // namespace

Eigen::MatrixXd feature_matrix(const HarmonicBasis& basis, const Eigen::MatrixXd& points, int threads) {
  if (points.cols() != basis.dimension()) {
    throw DimensionError("points have dimension " + std::to_string(points.cols()) + " but basis expects " +
                         std::to_string(basis.dimension()));
  }
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd out(n, basis.num_features());
  if (n == 0) return out;
  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    fill_features(basis, points, 0, n, out);
    return out;
  }
  std::vector<std::thread> workers;
  const Eigen::Index chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const Eigen::Index begin = t * chunk;
    const Eigen::Index count = std::min(chunk, n - begin);
    if (count <= 0) break;
    workers.emplace_back([&, begin, count] { fill_features(basis, points, begin, count, out); });
  }
  for (auto& w : workers) w.join();
  return out;
}

Eigen::VectorXd features(const HarmonicBasis& basis, const SpherePoint& x) {
  if (x.dimension() != basis.dimension()) {
    throw DimensionError("point has dimension " + std::to_string(x.dimension()) + " but basis expects " +
                         std::to_string(basis.dimension()));
  }
  const Eigen::MatrixXd row = x.coords().transpose();
  return feature_matrix(basis, row).row(0).transpose();
}

MonteCarloGram monte_carlo_gram(const HarmonicBasis& basis, Eigen::Index n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("monte_carlo_gram needs at least one sample");
  const Eigen::Index m = basis.num_features();
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(m, m);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(m, m);
  constexpr Eigen::Index kChunk = 4096;
  for (Eigen::Index done = 0; done < n_samples; done += kChunk) {
    const Eigen::Index rows = std::min(kChunk, n_samples - done);
    const Eigen::MatrixXd phi = feature_matrix(basis, sample_sphere(rows, basis.dimension(), rng));
    sum.noalias() += phi.transpose() * phi;
    const Eigen::MatrixXd sq = phi.cwiseAbs2();
    sum_sq.noalias() += sq.transpose() * sq;
  }
  const double n = static_cast<double>(n_samples);
  MonteCarloGram out;
  out.mean = sum / n;
  const Eigen::MatrixXd variance = (sum_sq / n - out.mean.cwiseAbs2()).cwiseMax(0.0);
  out.standard_error = (variance / n).cwiseSqrt();
  return out;
}

std::string serialize_basis(const HarmonicBasis& basis) {
  std::ostringstream os;
  os << "sphgp-basis 1\n";
  os << "dimension " << basis.dimension() << "\n";
  os << "max_frequency " << basis.max_frequency() << "\n";
  os << std::hexfloat;
  for (const auto& set : basis.sets()) {
    os << "frequency " << set.frequency << " " << set.size() << "\n";
    for (Eigen::Index i = 0; i < set.directions.rows(); ++i) {
      for (Eigen::Index j = 0; j < set.directions.cols(); ++j) {
        os << (j ? " " : "") << set.directions(i, j);
      }
      os << "\n";
    }
  }
  return os.str();
}

namespace {

double parse_double(const std::string& token) {
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') throw std::runtime_error("basis section: bad number '" + token + "'");
  return value;
}

void expect(std::istream& is, const std::string& keyword) {
  std::string word;
  if (!(is >> word) || word != keyword) {
    throw std::runtime_error("basis section: expected '" + keyword + "', got '" + word + "'");
  }
}

}  // namespace

HarmonicBasis deserialize_basis(std::string_view text) {
  std::istringstream is{std::string(text)};
  expect(is, "sphgp-basis");
  int version = 0;
  is >> version;
  if (version != 1) throw std::runtime_error("unsupported basis section version " + std::to_string(version));
  int dimension = 0;
  int max_frequency = 0;
  expect(is, "dimension");
  is >> dimension;
  expect(is, "max_frequency");
  is >> max_frequency;
  if (!is || dimension < 3 || max_frequency < 0) throw std::runtime_error("basis section: bad header");
  std::vector<FundamentalSet> sets;
  for (int l = 1; l <= max_frequency; ++l) {
    expect(is, "frequency");
    int frequency = 0;
    Eigen::Index count = 0;
    is >> frequency >> count;
    if (!is || frequency != l || count < 0) throw std::runtime_error("basis section: bad frequency record");
    Eigen::MatrixXd directions(count, dimension);
    std::string token;
    for (Eigen::Index i = 0; i < count; ++i) {
      for (int j = 0; j < dimension; ++j) {
        if (!(is >> token)) throw std::runtime_error("basis section: truncated direction data");
        directions(i, j) = parse_double(token);
      }
    }
    if (count == 0) {
      FundamentalSet empty;
      empty.frequency = frequency;
      empty.dimension = dimension;
      empty.directions.resize(0, dimension);
      sets.push_back(std::move(empty));
    } else {
      // Stored rows are already unit length; keep them bit-exact.
      FundamentalSet set;
      set.frequency = frequency;
      set.dimension = dimension;
      set.directions = std::move(directions);
      sets.push_back(factorize_set(std::move(set)));
    }
  }
  return HarmonicBasis(dimension, std::move(sets));
}

}  // namespace sphgp
