#include "gse/transport_maps.hpp"

#include <gtest/gtest.h>

#include "gse/random.hpp"

namespace gse {
namespace {

TEST(FitClusters, TwoBlobsMatchBestBipartition) {
  const Matrix x{{0.0}, {0.1}, {0.9}, {1.0}};
  const auto m = fit_clusters(x, 2, 3);
  // Oracle: enumerate every bipartition and keep the smallest within-cluster SSE.
  double best = 1e9;
  unsigned best_mask = 0;
  for (unsigned mask = 1; mask < 15; ++mask) {
    double sse = 0;
    for (unsigned side : {0u, 1u}) {
      double sum = 0, sq = 0;
      int cnt = 0;
      for (unsigned i = 0; i < 4; ++i)
        if (((mask >> i) & 1u) == side) {
          sum += x(i, 0);
          sq += x(i, 0) * x(i, 0);
          ++cnt;
        }
      if (cnt) sse += sq - sum * sum / cnt;
    }
    if (sse < best - 1e-12) {
      best = sse;
      best_mask = mask;
    }
  }
  for (unsigned i = 0; i < 4; ++i)
    for (unsigned j = 0; j < 4; ++j)
      EXPECT_EQ(m.assignment[i] == m.assignment[j], ((best_mask >> i) & 1u) == ((best_mask >> j) & 1u));
}

TEST(FitClusters, SingleClusterIsMean) {
  const Matrix x{{0, 1}, {2, 3}, {4, 8}};
  const auto m = fit_clusters(x, 1, 0);
  EXPECT_NEAR(m.centroids(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(m.centroids(0, 1), 4.0, 1e-12);
}

TEST(FitClusters, KEqualsNGivesSingletons) {
  Rng rng(4);
  Matrix x(6, 2);
  for (double& v : x.data()) v = rng.uniform();
  const auto m = fit_clusters(x, 6, 1);
  std::vector<std::size_t> a = m.assignment;
  std::sort(a.begin(), a.end());
  EXPECT_EQ(std::unique(a.begin(), a.end()), a.end());
  EXPECT_EQ(kmeans(x, 6, 1).inertia, 0.0);
}

TEST(FitClusters, RejectsBadK) {
  EXPECT_THROW(fit_clusters(Matrix{{0}, {1}}, 3, 0), Error);
  EXPECT_THROW(fit_clusters(Matrix{{0}, {1}}, 0, 0), Error);
}

TEST(FitClusters, DeterministicGivenSeed) {
  Rng rng(8);
  Matrix x(50, 3);
  for (double& v : x.data()) v = rng.uniform();
  EXPECT_EQ(fit_clusters(x, 5, 11).assignment, fit_clusters(x, 5, 11).assignment);
}

TEST(ApplyKCluster, ZeroDeltasIsIdentity) {
  const Matrix x{{0.2, 0.4}, {0.6, 0.8}};
  const auto m = fit_clusters(x, 2, 0);
  EXPECT_EQ(apply_kcluster(x, m, {Matrix(2, 2)}), x);
}

TEST(ApplyKCluster, SharedShift) {
  const Matrix x{{0, 0}, {1, 1}, {2, 0}};
  ClusterModel m{1, Matrix(1, 2), {0, 0, 0}, 0};
  const auto y = apply_kcluster(x, m, {Matrix{{0.2, -0.1}}});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(y(i, 0), x(i, 0) + 0.2);
    EXPECT_DOUBLE_EQ(y(i, 1), x(i, 1) - 0.1);
  }
}

TEST(ApplyKCluster, PerClusterShift) {
  ClusterModel m{2, Matrix(2, 2), {0, 1}, 0};
  const auto y = apply_kcluster(Matrix{{0, 0}, {1, 1}}, m, {Matrix{{0.5, 0}, {0, -0.5}}});
  EXPECT_EQ(y, (Matrix{{0.5, 0}, {1, 0.5}}));
}

TEST(ApplyOT, PerRowShift) {
  EXPECT_EQ(apply_ot(Matrix{{0}, {10}}, {Matrix{{2}, {-2}}}), (Matrix{{2}, {8}}));
  EXPECT_EQ(apply_ot(Matrix{{3}}, {Matrix{{0}}}), (Matrix{{3}}));
  EXPECT_THROW(apply_ot(Matrix{{3}}, {Matrix{{0}, {1}}}), Error);
}

TEST(ApplyOT, AgreesWithSingletonClusters) {
  Rng rng(2);
  Matrix x(5, 2), d(5, 2);
  for (double& v : x.data()) v = rng.uniform();
  for (double& v : d.data()) v = rng.uniform() - 0.5;
  ClusterModel m{5, Matrix(5, 2), {0, 1, 2, 3, 4}, 0};
  EXPECT_EQ(apply_kcluster(x, m, {d}), apply_ot(x, {d}));
}

TEST(ApplyMaps, DeltasComposeAdditively) {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(7, 3), a(2, 3), b(2, 3);
    for (double& v : x.data()) v = rng.uniform();
    for (double& v : a.data()) v = rng.uniform() - 0.5;
    for (double& v : b.data()) v = rng.uniform() - 0.5;
    const auto m = fit_clusters(x, 2, trial);
    const Matrix once = apply_kcluster(x, m, {a + b});
    const Matrix twice = apply_kcluster(apply_kcluster(x, m, {a}), m, {b});
    for (std::size_t k = 0; k < once.data().size(); ++k) EXPECT_NEAR(once.data()[k], twice.data()[k], 1e-12);
  }
}

FeatureSchema age_schema(FeatureKind kind) { return FeatureSchema({{"age", kind, true, {}}}); }

TEST(Render, InverseScalesRealDelta) {
  const std::vector<ColumnScaling> sc{{17, 90}};
  const std::vector<double> d{0.05};
  EXPECT_EQ(render_delta(d, age_schema(FeatureKind::kReal), sc), "+3.65 age");
  EXPECT_EQ(render_delta(d, age_schema(FeatureKind::kInteger), sc), "+4 age");
}

TEST(Render, ZeroDeltaIsNoChange) {
  ClusterModel m{1, Matrix{{0.5}}, {0}, 0};
  const auto r = render_explanation(m, {Matrix{{0.0}}}, age_schema(FeatureKind::kReal), {{17, 90}});
  ASSERT_EQ(r.lines.size(), 1u);
  EXPECT_EQ(r.lines[0], "cluster 1 (1 rows): no change");
  EXPECT_TRUE(r.terms.empty());
}

TEST(Render, BagOfWordsTermsSortedByMagnitude) {
  FeatureSchema bow({{"spiky", FeatureKind::kInteger, true, {}},
                     {"the", FeatureKind::kInteger, true, {}},
                     {"horns", FeatureKind::kInteger, true, {}}});
  const std::vector<ColumnScaling> sc{{0, 4}, {0, 4}, {0, 4}};
  const std::vector<double> d{0.5, 0.1, -0.5};
  EXPECT_EQ(render_delta(d, bow, sc), "-2 horns, +2 spiky");
}

TEST(Render, SexAttributeFlip) {
  FeatureSchema s({{"sex", FeatureKind::kBoolean, false, {}}, {"hours", FeatureKind::kReal, true, {}}});
  const std::vector<double> d{-1.0, 0.001};
  EXPECT_EQ(render_delta(d, s, {{0, 1}, {1, 99}}), "-1 sex");
}

TEST(Render, FlagsValuesLeavingTheObservedRange) {
  ClusterModel m{1, Matrix{{0.9}}, {0}, 0};
  const auto r = render_explanation(m, {Matrix{{0.5}}}, age_schema(FeatureKind::kReal), {{0, 10}});
  ASSERT_EQ(r.terms.size(), 1u);
  EXPECT_TRUE(r.terms[0].leaves_range);
}

TEST(Render, RenderedDeltasReapplyWithinRounding) {
  FeatureSchema s({{"age", FeatureKind::kInteger, true, {}},
                   {"income", FeatureKind::kReal, true, {}},
                   {"c", FeatureKind::kCategorical, true, {"a", "b"}}});
  const std::vector<ColumnScaling> sc{{17, 90}, {0, 1000}, {0, 1}, {0, 1}};
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix cent(2, 4), deltas(2, 4);
    for (double& v : cent.data()) v = rng.uniform();
    for (double& v : deltas.data()) v = rng.uniform() - 0.5;
    ClusterModel m{2, cent, {0, 1}, 0};
    const auto r = render_explanation(m, {deltas}, s, sc);
    for (std::size_t c = 0; c < 2; ++c) {
      // Parse back the structured record and re-apply in raw units.
      std::vector<double> shown(4, 0.0);
      const auto names = s.column_names();
      for (const auto& t : r.terms)
        if (t.cluster == c)
          shown[std::find(names.begin(), names.end(), t.feature) - names.begin()] = t.shown;
      for (std::size_t col = 0; col < 4; ++col) {
        const double target = sc[col].unscale(cent(c, col) + deltas(c, col));
        const double rebuilt = sc[col].unscale(cent(c, col)) + shown[col];
        const double tol = col == 1 ? 0.01 * sc[col].range() + 0.005 : 0.5;
        EXPECT_LE(std::abs(target - rebuilt), tol + 1e-9);
      }
    }
  }
}

}  // namespace
}  // namespace gse
