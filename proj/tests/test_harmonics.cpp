#include "oracles.hpp"

#include "sphgp/errors.hpp"
#include "sphgp/harmonics.hpp"
#include "sphgp/special_math.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sphgp;

namespace {

std::vector<int> full_counts(int d, int lmax) {
  std::vector<int> c{1};
  for (int l = 1; l <= lmax; ++l) c.push_back(static_cast<int>(num_harmonics(l, d)));
  return c;
}

SpherePoint point(const Eigen::VectorXd& v) { return SpherePoint::normalize(v); }

}  // namespace

TEST_CASE("sphere points") {
  const std::vector<double> zero{0.0, 0.0, 0.0};
  const SpherePoint p = SpherePoint::project(zero, 1.0);
  CHECK(p.dimension() == 4);
  CHECK(p.coords()[3] == 1.0);
  CHECK(p.coords().head(3).norm() == 0.0);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> raw{normal(rng), normal(rng), normal(rng), normal(rng)};
    const SpherePoint q = SpherePoint::project(raw, 0.7);
    CHECK(std::abs(q.coords().norm() - 1.0) <= 1e-12);
  }
  // Scaling the raw row by 2 changes the direction (the bias does not scale) and the stored norm.
  const std::vector<double> raw{1.0, 2.0};
  const std::vector<double> raw2{2.0, 4.0};
  const SpherePoint a = SpherePoint::project(raw, 1.0), b = SpherePoint::project(raw2, 1.0);
  CHECK(a.stored_norm() == doctest::Approx(std::sqrt(6.0)));
  CHECK(b.stored_norm() == doctest::Approx(std::sqrt(21.0)));
  CHECK((a.coords() - b.coords()).norm() > 1e-3);
  CHECK(a.coords().head(2).normalized().isApprox(b.coords().head(2).normalized(), 1e-14));
  const SpherePoint n2 = SpherePoint::normalize(Eigen::Vector3d(2.0, 4.0, 1.0));
  CHECK(n2.stored_norm() == doctest::Approx(std::sqrt(21.0)));

  CHECK_THROWS_AS(a.dot(SpherePoint::project(zero, 1.0)), DimensionError);
}

TEST_CASE("build_fundamental_set examples") {
  const FundamentalSet s1 = build_fundamental_set(1, 3, 3, 11);
  CHECK(s1.size() == 3);
  CHECK(s1.condition_number < kBuildMaxCondition);
  CHECK(s1.gram_chol.diagonal().minCoeff() > 0.0);

  const FundamentalSet one = build_fundamental_set(1, 3, 1, 11);
  CHECK(one.gram_chol(0, 0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  const HarmonicBasis single(3, {one});
  const Eigen::VectorXd phi = features(single, point(one.directions.row(0).transpose()));
  CHECK(phi[0] == 1.0);
  CHECK(phi[1] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));

  for (int d : {3, 4, 6}) {
    for (int l = 1; l <= 4; ++l) {
      const FundamentalSet s = build_fundamental_set(l, d, static_cast<int>(num_harmonics(l, d)), 5);
      for (Eigen::Index i = 0; i < s.size(); ++i) CHECK(std::abs(s.directions.row(i).norm() - 1.0) <= 1e-12);
      CHECK(s.condition_number < kBuildMaxCondition);
    }
  }
  CHECK_THROWS_AS(build_fundamental_set(1, 3, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(build_fundamental_set(1, 3, 0, 0), std::invalid_argument);
}

TEST_CASE("fundamental sets are deterministic in the seed") {
  const FundamentalSet a = build_fundamental_set(3, 5, 12, 99);
  const FundamentalSet b = build_fundamental_set(3, 5, 12, 99);
  const FundamentalSet c = build_fundamental_set(3, 5, 12, 100);
  CHECK(a.directions == b.directions);
  CHECK(a.directions != c.directions);
}

TEST_CASE("addition theorem for complete sets") {
  std::mt19937_64 rng(21);
  for (int d : {3, 5, 8}) {
    const double alpha = gegenbauer_alpha(d);
    const HarmonicBasis basis = HarmonicBasis::build(d, full_counts(d, 5), 17);
    const Eigen::MatrixXd x = sample_sphere(100, d, rng), y = sample_sphere(100, d, rng);
    const Eigen::MatrixXd fx = feature_matrix(basis, x), fy = feature_matrix(basis, y);
    for (int l = 0; l <= 5; ++l) {
      const Eigen::Index off = l == 0 ? 0 : basis.offset(l);
      const Eigen::Index m = l == 0 ? 1 : basis.set(l).size();
      const double bound = 1e-8 * zonal_scale(l, alpha) * oracle::gegenbauer_sum(alpha, l, 1.0);
      double worst = 0.0;
      for (Eigen::Index i = 0; i < 100; ++i) {
        const double lhs = fx.row(i).segment(off, m).dot(fy.row(i).segment(off, m));
        const double rhs = zonal_scale(l, alpha) * oracle::gegenbauer_sum(alpha, l, x.row(i).dot(y.row(i)));
        worst = std::max(worst, std::abs(lhs - rhs));
      }
      CHECK(worst <= bound);
    }
  }
}

TEST_CASE("d = 3, l = 2 inner product equals 5 P2") {
  std::mt19937_64 rng(4);
  const HarmonicBasis basis = HarmonicBasis::build(3, {1, 0, 5}, 2);
  const Eigen::MatrixXd x = sample_sphere(20, 3, rng), y = sample_sphere(20, 3, rng);
  const Eigen::MatrixXd fx = feature_matrix(basis, x), fy = feature_matrix(basis, y);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double lhs = fx.row(i).tail(5).dot(fy.row(i).tail(5));
    CHECK(lhs == doctest::Approx(5.0 * oracle::legendre(2, x.row(i).dot(y.row(i)))).epsilon(1e-10).scale(1.0));
  }
}

TEST_CASE("basis layout") {
  const HarmonicBasis basis = HarmonicBasis::build(4, {1, 4, 3, 0, 2}, 8);
  CHECK(basis.num_features() == 10);
  CHECK(basis.max_frequency() == 4);
  CHECK(basis.phase_counts() == std::vector<int>{1, 4, 3, 0, 2});
  CHECK(basis.feature_frequency() == std::vector<int>{0, 1, 1, 1, 1, 2, 2, 2, 4, 4});
  CHECK(basis.offset(1) == 1);
  CHECK(basis.offset(2) == 5);
  CHECK(basis.offset(4) == 8);
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = sample_sphere(7, 4, rng);
  CHECK((feature_matrix(basis, x).col(0).array() == 1.0).all());
  CHECK_THROWS_AS(HarmonicBasis::build(4, {2, 1}, 0), std::invalid_argument);
  CHECK_THROWS_AS(HarmonicBasis::build(4, {1, 5}, 0), std::invalid_argument);
  CHECK_THROWS_AS(feature_matrix(basis, sample_sphere(3, 5, rng)), DimensionError);
}

TEST_CASE("features agree between single points, batches and threads") {
  std::mt19937_64 rng(6);
  const HarmonicBasis basis = HarmonicBasis::build(5, {1, 5, 10, 8}, 3);
  const Eigen::MatrixXd x = sample_sphere(37, 5, rng);
  const Eigen::MatrixXd one = feature_matrix(basis, x, 1);
  const Eigen::MatrixXd four = feature_matrix(basis, x, 4);
  CHECK(one == four);
  const Eigen::VectorXd f3 = features(basis, point(x.row(3).transpose()));
  CHECK((f3 - one.row(3).transpose()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("Cholesky identity for truncated sets") {
  for (int l = 1; l <= 6; ++l) {
    const FundamentalSet s = build_fundamental_set(l, 6, std::min<int>(10, static_cast<int>(num_harmonics(l, 6))), 40);
    const Eigen::MatrixXd a = gegenbauer_gram(l, s.directions);
    Eigen::MatrixXd w = s.gram_chol.triangularView<Eigen::Lower>().solve(a);
    w = s.gram_chol.triangularView<Eigen::Lower>().solve(w.transpose().eval());
    CHECK((w - Eigen::MatrixXd::Identity(s.size(), s.size())).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("Monte Carlo Gram is the identity within CLT tolerance") {
  SUBCASE("constant only") {
    const HarmonicBasis basis(3, {});
    const MonteCarloGram g = monte_carlo_gram(basis, 1000, 1);
    CHECK(g.mean(0, 0) == 1.0);
    CHECK(g.standard_error(0, 0) == 0.0);
  }
  SUBCASE("complete l = 1, d = 3, 1e6 samples") {
    const HarmonicBasis basis = HarmonicBasis::build(3, {1, 3}, 2);
    const MonteCarloGram g = monte_carlo_gram(basis, 1'000'000, 9);
    CHECK((g.mean - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 5e-3);
  }
  SUBCASE("truncated sets and cross-frequency blocks") {
    const HarmonicBasis basis = HarmonicBasis::build(5, {1, 3, 6, 6}, 12);
    const MonteCarloGram g = monte_carlo_gram(basis, 200'000, 10);
    const Eigen::Index m = basis.num_features();
    const Eigen::MatrixXd dev = (g.mean - Eigen::MatrixXd::Identity(m, m)).cwiseAbs();
    int violations = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < m; ++j) {
        if (dev(i, j) > 5.0 * g.standard_error(i, j) + 1e-12) ++violations;
      }
    }
    CHECK(violations == 0);
  }
}

TEST_CASE("reorthogonalize") {
  const FundamentalSet s = build_fundamental_set(2, 4, 6, 3);
  SUBCASE("idempotent") {
    const FundamentalSet r1 = reorthogonalize(s);
    const FundamentalSet r2 = reorthogonalize(r1);
    CHECK((r1.gram_chol - s.gram_chol).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((r2.gram_chol - r1.gram_chol).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(r1.jitter == 0.0);
    CHECK(r1.warning.empty());
  }
  SUBCASE("scaled rows") {
    FundamentalSet scaled = s;
    scaled.directions *= 2.0;
    const FundamentalSet r = reorthogonalize(scaled);
    CHECK((r.directions - s.directions).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((r.gram_chol - s.gram_chol).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SUBCASE("nearly coincident directions get jitter and a warning") {
    // Two l = 1 directions at angle acos(1 - 1e-12).
    const double t = 1.0 - 1e-12;
    Eigen::MatrixXd v(2, 3);
    v << 1.0, 0.0, 0.0, t, std::sqrt(1.0 - t * t), 0.0;
    const FundamentalSet r = make_fundamental_set(1, v);
    CHECK(r.jitter > 0.0);
    CHECK(!r.warning.empty());
    const Eigen::MatrixXd a = gegenbauer_gram(1, r.directions);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    CHECK(svd.singularValues()(1) / svd.singularValues()(0) < 1e-10);
  }
  SUBCASE("collapsed phases are unrecoverable") {
    Eigen::MatrixXd v(3, 3);
    v << 1, 0, 0, 1, 0, 0, 1, 0, 0;
    CHECK_THROWS_AS(make_fundamental_set(1, v), NumericalError);
  }
}

TEST_CASE("basis serialization is bit exact") {
  const HarmonicBasis basis = HarmonicBasis::build(6, {1, 6, 10, 0, 7}, 77);
  const std::string text = serialize_basis(basis);
  const HarmonicBasis back = deserialize_basis(text);
  CHECK(back.phase_counts() == basis.phase_counts());
  for (int l = 1; l <= basis.max_frequency(); ++l) {
    CHECK(back.set(l).directions == basis.set(l).directions);
    CHECK(back.set(l).gram_chol == basis.set(l).gram_chol);
  }
  CHECK(serialize_basis(back) == text);
  CHECK_THROWS(deserialize_basis("not a basis"));
}
