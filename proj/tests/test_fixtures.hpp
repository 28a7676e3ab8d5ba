#pragma once

#include "gse/data_model.hpp"
#include "gse/random.hpp"

namespace gse::testing_fixtures {

// Group 1: {0} -> {2}; group 2: {10} -> {8}.
inline std::pair<LabeledDataset, LabeledDataset> two_point_groups() {
  LabeledDataset s, t;
  s.schema = t.schema = FeatureSchema({{"x", FeatureKind::kReal, true, {}}});
  s.rows = Matrix{{0.0}, {10.0}};
  t.rows = Matrix{{2.0}, {8.0}};
  s.group_of = t.group_of = {1, 2};
  s.num_groups = t.num_groups = 2;
  s.scaling = t.scaling = {{0.0, 1.0}};
  t.role = Role::kTarget;
  return {s, t};
}

// Two groups told apart by a boolean attribute `s` (last column). Within each
// group the real features (x, y) move by 0.8 in opposite directions, so moving
// along x and y costs 1.28 while flipping the attribute costs 1: the
// whole-distribution optimum flips `s` and maps each group onto the other.
inline std::pair<LabeledDataset, LabeledDataset> opposing_shift(std::size_t per_group, std::uint64_t seed,
                                                                double spread = 0.02) {
  Rng rng(seed);
  LabeledDataset s, t;
  s.schema = t.schema = FeatureSchema({{"x", FeatureKind::kReal, true, {}},
                                       {"y", FeatureKind::kReal, true, {}},
                                       {"s", FeatureKind::kBoolean, false, {}}});
  s.rows = Matrix(2 * per_group, 3);
  t.rows = Matrix(2 * per_group, 3);
  s.group_of.resize(2 * per_group);
  t.group_of.resize(2 * per_group);
  auto jitter = [&] { return spread * (rng.uniform() - 0.5); };
  for (std::size_t i = 0; i < 2 * per_group; ++i) {
    const bool b = i >= per_group;
    const double src = b ? 0.9 : 0.1, dst = b ? 0.1 : 0.9;
    s.rows(i, 0) = src + jitter();
    s.rows(i, 1) = src + jitter();
    s.rows(i, 2) = b ? 1.0 : 0.0;
    t.rows(i, 0) = dst + jitter();
    t.rows(i, 1) = dst + jitter();
    t.rows(i, 2) = b ? 1.0 : 0.0;
    s.group_of[i] = t.group_of[i] = b ? 2 : 1;
  }
  s.num_groups = t.num_groups = 2;
  s.scaling = t.scaling = {{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}};
  t.role = Role::kTarget;
  return {s, t};
}

}  // namespace gse::testing_fixtures
