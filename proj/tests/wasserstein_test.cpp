#include "gse/wasserstein.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "gse/random.hpp"

namespace gse {
namespace {

PointCloud cloud(std::initializer_list<std::initializer_list<double>> rows) {
  return PointCloud::uniform(Matrix(rows));
}

PointCloud random_cloud(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (double& v : m.data()) v = rng.uniform();
  return PointCloud::uniform(std::move(m));
}

// Minimum over all permutations; independent of the assignment solver.
double brute_force_w2(const PointCloud& p, const PointCloud& q) {
  std::vector<std::size_t> perm(p.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i)
      c += squared_distance(p.points.row(i), q.points.row(perm[i]));
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(p.size());
}

SinkhornConfig tight(double blur) {
  SinkhornConfig cfg;
  cfg.blur = blur;
  cfg.tol = 1e-11;
  cfg.max_iters = 100000;
  return cfg;
}

TEST(W2Exact, SinglePair) { EXPECT_DOUBLE_EQ(w2_squared_exact(cloud({{0, 0}}), cloud({{3, 4}})), 25.0); }

TEST(W2Exact, TwoPointShift) {
  EXPECT_DOUBLE_EQ(w2_squared_exact(cloud({{0}, {1}}), cloud({{1}, {2}})), 1.0);
}

TEST(W2Exact, MatchesFactorialEnumeration) {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_cloud(rng, 8, 3);
    const auto q = random_cloud(rng, 8, 3);
    EXPECT_NEAR(w2_squared_exact(p, q), brute_force_w2(p, q), 1e-12);
  }
}

TEST(W2Exact, RejectsUnequalSizes) {
  EXPECT_THROW(w2_squared_exact(cloud({{0}}), cloud({{1}, {2}})), Error);
}

TEST(W2Exact, RejectsNonUniformWeights) {
  PointCloud p{Matrix{{0}, {1}}, {0.25, 0.75}};
  EXPECT_THROW(w2_squared_exact(p, cloud({{1}, {2}})), Error);
}

TEST(Sinkhorn, SinglePairCost) {
  const auto r = w2_squared(cloud({{0}}), cloud({{2}}));
  EXPECT_NEAR(r.cost, 4.0, 0.04);
}

TEST(Sinkhorn, SelfDistanceOfDivergenceVanishes) {
  Rng rng(3);
  const auto p = random_cloud(rng, 10, 2);
  const auto r = w2_squared(p, p, tight(0.05));
  EXPECT_LE(std::abs(r.cost), 1e-6);
  const auto g = grad_wrt_source(p, p, tight(0.05));
  for (double v : g.data()) EXPECT_LE(std::abs(v), 1e-6);
}

TEST(Sinkhorn, TwoPointShiftAgreesWithAssignment) {
  const auto r = w2_squared(cloud({{0}, {1}}), cloud({{1}, {2}}));
  EXPECT_NEAR(r.cost, 1.0, 0.02);
}

TEST(Sinkhorn, SymmetricAndNonNegative) {
  Rng rng(11);
  for (int t = 0; t < 5; ++t) {
    const auto p = random_cloud(rng, 7, 2);
    const auto q = random_cloud(rng, 9, 2);
    const double a = w2_squared(p, q, tight(0.1)).cost;
    const double b = w2_squared(q, p, tight(0.1)).cost;
    EXPECT_NEAR(a, b, 1e-6);
    EXPECT_GE(a, -1e-8);
  }
}

TEST(Sinkhorn, PlanMarginalsAndTransportCost) {
  Rng rng(5);
  const auto p = random_cloud(rng, 6, 2);
  PointCloud q{random_cloud(rng, 4, 2).points, {0.1, 0.2, 0.3, 0.4}};
  SinkhornConfig cfg;
  const auto r = w2_squared(p, q, cfg);
  for (std::size_t i = 0; i < p.size(); ++i) {
    double s = 0.0;
    for (double v : r.plan.row(i)) s += v;
    EXPECT_NEAR(s, p.weights[i], cfg.tol);
  }
  for (std::size_t j = 0; j < q.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += r.plan(i, j);
    EXPECT_NEAR(s, q.weights[j], cfg.tol);
  }
  double tc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < q.size(); ++j)
      tc += r.plan(i, j) * squared_distance(p.points.row(i), q.points.row(j));
  EXPECT_NEAR(tc, r.transport_cost, 1e-6);
}

TEST(Sinkhorn, DimensionMismatchIsAnError) {
  EXPECT_THROW(w2_squared(cloud({{0, 0}}), cloud({{1}})), Error);
}

TEST(Sinkhorn, NonConvergenceReportsResidual) {
  Rng rng(2);
  SinkhornConfig cfg;
  cfg.blur = 1e-3;
  cfg.max_iters = 2;
  cfg.tol = 1e-14;
  try {
    (void)w2_squared(random_cloud(rng, 12, 2), random_cloud(rng, 12, 2), cfg);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(SinkhornGradient, SinglePair) {
  const auto g = grad_wrt_source(cloud({{0}}), cloud({{2}}));
  EXPECT_NEAR(g(0, 0), -4.0, 1e-9);
}

TEST(SinkhornGradient, MatchesCentralDifferences) {
  Rng rng(42);
  const double h = 1e-4;
  const auto cfg = tight(0.2);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = random_cloud(rng, 6, 3);
    const auto q = random_cloud(rng, 6, 3);
    const Matrix g = grad_wrt_source(p, q, cfg);
    Matrix fd(6, 3);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t k = 0; k < 3; ++k) {
        const double x0 = p.points(i, k);
        p.points(i, k) = x0 + h;
        const double up = w2_squared(p, q, cfg).cost;
        p.points(i, k) = x0 - h;
        const double dn = w2_squared(p, q, cfg).cost;
        p.points(i, k) = x0;
        fd(i, k) = (up - dn) / (2 * h);
      }
    EXPECT_LE(frobenius_norm(g - fd) / frobenius_norm(fd), 1e-4);
  }
}

TEST(SinkhornAnnealed, CloseToExactOnSmallClouds) {
  Rng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_cloud(rng, 12, 2);
    const auto q = random_cloud(rng, 12, 2);
    const double exact = w2_squared_exact(p, q);
    const double approx = w2_squared(p, q, tight(0.02)).cost;
    EXPECT_NEAR(approx, exact, 0.02 * exact);
  }
}

}  // namespace
}  // namespace gse
