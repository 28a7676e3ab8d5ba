#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gse/metrics.hpp"
#include "gse/transport_maps.hpp"

namespace gse {
namespace {

LabeledDataset make(FeatureSchema schema, Matrix rows, std::vector<ColumnScaling> scaling,
                    std::vector<int> groups = {}) {
  LabeledDataset d;
  d.schema = std::move(schema);
  d.rows = std::move(rows);
  d.scaling = std::move(scaling);
  d.group_of = groups.empty() ? std::vector<int>(d.rows.rows(), 1) : std::move(groups);
  d.num_groups = *std::max_element(d.group_of.begin(), d.group_of.end());
  return d;
}

FeatureSchema age_sex() {
  return FeatureSchema({{"age", FeatureKind::kReal, true, {}}, {"sex", FeatureKind::kBoolean, false, {}}});
}

TEST(Feasibility, IdentityIsFullyFeasibleUnderBothRules) {
  const auto src = make(age_sex(), Matrix{{0.1, 1.0}, {0.5, 0.0}, {0.9, 1.0}}, {{0, 1}, {0, 1}}, {2, 1, 2});
  const auto tgt = src;
  EXPECT_DOUBLE_EQ(feasibility(src, src.rows, FeasibilityRule::from_schema(src.schema)), 100.0);
  EXPECT_DOUBLE_EQ(feasibility(src, src.rows, FeasibilityRule::group_preservation(), &tgt), 100.0);
}

TEST(Feasibility, TwoOfEightSexFlipsGiveSeventyFive) {
  Matrix rows(8, 2), mapped(8, 2);
  for (std::size_t i = 0; i < 8; ++i) {
    rows(i, 0) = 0.1 * static_cast<double>(i);
    rows(i, 1) = i % 2;
    mapped(i, 0) = rows(i, 0) + 0.3;
    mapped(i, 1) = i < 2 ? 1.0 - rows(i, 1) : rows(i, 1);
  }
  const auto src = make(age_sex(), rows, {{0, 1}, {0, 1}});
  EXPECT_DOUBLE_EQ(feasibility(src, mapped, FeasibilityRule::actionability({"sex"})), 75.0);
}

TEST(Feasibility, SingleClusterUsesRowCount) {
  // Four males and one female; the mapping turns one male into a female.
  const Matrix rows{{0.2, 1}, {0.3, 1}, {0.4, 1}, {0.5, 1}, {0.6, 0}};
  Matrix mapped = rows;
  mapped(0, 1) = 0.0;
  const auto src = make(age_sex(), rows, {{0, 1}, {0, 1}}, {2, 2, 2, 2, 1});
  EXPECT_DOUBLE_EQ(feasibility(src, mapped, FeasibilityRule::actionability({"sex"})), 80.0);
  const auto tgt = make(age_sex(), Matrix{{0.2, 1}, {0.6, 0}}, {{0, 1}, {0, 1}}, {2, 1});
  EXPECT_DOUBLE_EQ(feasibility(src, mapped, FeasibilityRule::group_preservation(), &tgt), 80.0);
}

TEST(Feasibility, CategoricalChangeUsesLargestOneHotMove) {
  const FeatureSchema schema({{"color", FeatureKind::kCategorical, false, {"r", "g", "b"}}});
  const auto src = make(schema, Matrix{{1, 0, 0}, {0, 1, 0}}, {{0, 1}, {0, 1}, {0, 1}});
  const Matrix mapped{{0.7, 0.3, 0}, {0, 0.4, 0.6}};
  EXPECT_DOUBLE_EQ(feasibility(src, mapped, FeasibilityRule::actionability({"color"})), 50.0);
}

TEST(Feasibility, NearestTargetTiesGoToLowestIndex) {
  const FeatureSchema schema({{"x", FeatureKind::kReal, true, {}}});
  const auto src = make(schema, Matrix{{0.5}}, {{0, 1}}, {1});
  const auto tgt = make(schema, Matrix{{0.0}, {1.0}}, {{0, 1}}, {1, 2});
  EXPECT_DOUBLE_EQ(feasibility(src, src.rows, FeasibilityRule::group_preservation(), &tgt), 100.0);
}

TEST(Feasibility, Errors) {
  const auto src = make(age_sex(), Matrix{{0.1, 1.0}}, {{0, 1}, {0, 1}});
  EXPECT_THROW(feasibility(src, src.rows, FeasibilityRule::actionability({"race"})), Error);
  EXPECT_THROW(feasibility(src, src.rows, FeasibilityRule::group_preservation()), Error);
  EXPECT_THROW(feasibility(src, src.rows, FeasibilityRule::actionability({"sex"}, 0.0)), Error);
}

LabeledDataset mixed_table(std::size_t n) {
  const FeatureSchema schema({{"flag", FeatureKind::kBoolean, true, {}},
                              {"income", FeatureKind::kReal, true, {}},
                              {"kids", FeatureKind::kInteger, true, {}},
                              {"color", FeatureKind::kCategorical, true, {"r", "g", "b"}}});
  Matrix rows(n, 6);
  for (std::size_t i = 0; i < n; ++i) {
    rows(i, 0) = 1.0;                        // every flag True
    rows(i, 1) = i % 2 ? 1.0 : 0.0;          // raw 0 / 20: stdev 10
    rows(i, 2) = static_cast<double>(i % 5) / 4.0;
    rows(i, 3 + i % 3) = 1.0;
  }
  return make(schema, rows, {{0, 1}, {0, 20}, {0, 4}, {0, 1}, {0, 1}, {0, 1}});
}

std::size_t changed_cells(const Matrix& a, const Matrix& b, std::size_t from, std::size_t to) {
  std::size_t rows = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    bool diff = false;
    for (std::size_t j = from; j < to; ++j) diff |= a(i, j) != b(i, j);
    rows += diff;
  }
  return rows;
}

TEST(Perturb, PrescribedCellCountsPerKind) {
  const auto src = mixed_table(200);
  PerturbationSpec spec;
  spec.feature_fraction = 1.0;
  spec.seed = 12;
  const auto p = perturb(src, spec);
  ASSERT_EQ(p.touched.size(), 4u);
  EXPECT_EQ(changed_cells(src.rows, p.data.rows, 0, 1), 2u);
  EXPECT_EQ(changed_cells(src.rows, p.data.rows, 1, 2), 2u);
  EXPECT_EQ(changed_cells(src.rows, p.data.rows, 2, 3), 2u);
  EXPECT_EQ(changed_cells(src.rows, p.data.rows, 3, 6), 2u);
  for (const auto& t : p.touched) EXPECT_EQ(t.rows.size(), 2u);
}

TEST(Perturb, RealShiftIsFivePercentOfStdev) {
  const auto src = mixed_table(200);
  PerturbationSpec spec;
  spec.feature_fraction = 1.0;
  spec.seed = 3;
  const auto p = perturb(src, spec);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double d = p.data.raw_value(i, 1) - src.raw_value(i, 1);
    if (d != 0.0) {
      EXPECT_NEAR(std::abs(d), 0.5, 1e-9);
    }
    const double k = p.data.raw_value(i, 2) - src.raw_value(i, 2);
    if (k != 0.0) {
      EXPECT_DOUBLE_EQ(std::abs(k), 1.0);
    }
    const double c = p.data.raw_value(i, 3) - src.raw_value(i, 3);
    if (c != 0.0) {
      EXPECT_DOUBLE_EQ(std::abs(c), 1.0);
    }
  }
}

TEST(Perturb, BooleanFlipsTrueValues) {
  const auto src = mixed_table(200);
  PerturbationSpec spec;
  spec.feature_count = 4;
  const auto p = perturb(src, spec);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < src.size(); ++i) flipped += p.data.raw_value(i, 0) == 0.0;
  EXPECT_EQ(flipped, 2u);
}

TEST(Perturb, SmallFeatureStillGetsOneCell) {
  const auto src = mixed_table(50);
  PerturbationSpec spec;
  spec.feature_fraction = 1.0;
  const auto p = perturb(src, spec);
  for (const auto& t : p.touched) EXPECT_EQ(t.rows.size(), 1u);
}

TEST(Perturb, FeatureFractionSelectsRoundedCount) {
  const auto src = mixed_table(20);
  PerturbationSpec spec;  // 0.75 of 4 features
  EXPECT_EQ(perturb(src, spec).touched.size(), 3u);
}

TEST(Perturb, UntouchedCellsBitIdenticalAndDeterministic) {
  const auto src = mixed_table(120);
  PerturbationSpec spec;
  spec.seed = 99;
  const auto a = perturb(src, spec), b = perturb(src, spec);
  EXPECT_EQ(a.data.rows, b.data.rows);
  std::vector<bool> touched_row(src.size(), false);
  for (const auto& t : a.touched)
    for (auto i : t.rows) touched_row[i] = true;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (touched_row[i]) continue;
    for (std::size_t j = 0; j < src.dim(); ++j) EXPECT_EQ(src.rows(i, j), a.data.rows(i, j));
  }
  EXPECT_EQ(a.data.group_of, src.group_of);
}

TEST(Perturb, ConstantRealFeatureIsSkipped) {
  const FeatureSchema schema({{"c", FeatureKind::kReal, true, {}}});
  const auto src = make(schema, Matrix{{0.0}, {0.0}, {0.0}}, {{5, 5}});
  PerturbationSpec spec;
  spec.feature_fraction = 1.0;
  const auto p = perturb(src, spec);
  EXPECT_TRUE(p.touched.empty());
  EXPECT_EQ(p.skipped, std::vector<std::string>{"c"});
}

TEST(Perturb, RejectsZeroFractions) {
  PerturbationSpec spec;
  spec.value_fraction = 0.0;
  EXPECT_THROW(perturb(mixed_table(10), spec), Error);
}

TEST(Omega, TwoPointExample) {
  // Sample 1's sex flips 1 -> 0. Before: shared theta (age +1, sex -1).
  // After: only sample 1 flips (now upward), sample 2 keeps its sex.
  const Matrix p{{0.0, 1.0}, {1.0, 1.0}};
  const Matrix p_eps{{0.0, 0.0}, {1.0, 1.0}};
  const FitOutput before{apply_ot(p, {Matrix{{1, -1}, {1, -1}}}), {1, -1, 1, -1}};
  const FitOutput after{apply_ot(p_eps, {Matrix{{1, 1}, {1, 0}}}), {1, 1, 1, 0}};
  EXPECT_NEAR(omega(p, before, p_eps, after, OmegaMode::kParameterShift), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(omega(p, before, p_eps, after, OmegaMode::kMappedOutputs), std::sqrt(2.0), 1e-12);
}

TEST(Robustness, FixedAdditiveMapGivesOne) {
  const FeatureSchema schema({{"x", FeatureKind::kReal, true, {}}, {"y", FeatureKind::kReal, true, {}}});
  Matrix rows(30, 2);
  for (std::size_t i = 0; i < 30; ++i) rows(i, 0) = 0.03 * i, rows(i, 1) = 1.0 - 0.02 * i;
  const auto src = make(schema, rows, {{0, 1}, {0, 1}});
  const Matrix shift = Matrix(30, 2, 0.25);
  const FitFunction fit = [&](const LabeledDataset& d, const FitOutput*) {
    return FitOutput{d.rows + shift, {0.25, 0.25}};
  };
  PerturbationSpec spec;
  spec.value_fraction = 0.1;
  const auto r = robustness(fit, src, spec, 5, true);
  EXPECT_EQ(r.trials, 5u);
  for (const auto& t : r.per_trial) EXPECT_NEAR(t.omega, 1.0, 1e-12);
  EXPECT_GE(r.omega_worst, r.omega);
}

TEST(Robustness, SingleTrialMeanEqualsWorst) {
  const auto src = mixed_table(40);
  const FitFunction fit = [](const LabeledDataset& d, const FitOutput* warm) {
    Matrix m = d.rows * 2.0;
    (void)warm;
    return FitOutput{m, {}};
  };
  const auto r = robustness(fit, src, {}, 1, false);
  EXPECT_DOUBLE_EQ(r.omega, r.omega_worst);
  EXPECT_GT(r.omega, 0.0);
}

TEST(Robustness, FailedTrialsAreExcludedAndCounted) {
  const auto src = mixed_table(40);
  int calls = 0;
  const FitFunction fit = [&](const LabeledDataset& d, const FitOutput*) {
    if (calls++ == 2) throw Error("objectives-optimizer", "optimize", "diverged");
    return FitOutput{d.rows, {}};
  };
  const auto r = robustness(fit, src, {}, 3, false);
  EXPECT_EQ(r.trials, 2u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].seed, 1u);
  std::ostringstream csv;
  r.write_csv(csv);
  EXPECT_EQ(csv.str().substr(0, 11), "seed,omega\n");
}

TEST(Robustness, WarmStartPassesBaseFit) {
  const auto src = mixed_table(40);
  int warm_calls = 0;
  const FitFunction fit = [&](const LabeledDataset& d, const FitOutput* warm) {
    warm_calls += warm != nullptr;
    return FitOutput{d.rows, {}};
  };
  robustness(fit, src, {}, 4, true);
  EXPECT_EQ(warm_calls, 4);
  EXPECT_THROW(robustness(fit, src, {}, 0, true), Error);
}

}  // namespace
}  // namespace gse
