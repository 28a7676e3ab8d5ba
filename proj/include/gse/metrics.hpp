/*
 * Copyright 2026 The GSE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gse/data_model.hpp"
#include "gse/error.hpp"
#include "gse/matrix.hpp"
#include "gse/random.hpp"

namespace gse {

struct FeasibilityRule {
  enum class Kind { kActionability, kGroupPreservation };

  Kind kind = Kind::kActionability;
  std::vector<std::string> protected_features;
  double tolerance = 0.5;

  static FeasibilityRule actionability(std::vector<std::string> names, double tolerance = 0.5) {
    return {Kind::kActionability, std::move(names), tolerance};
  }
  static FeasibilityRule group_preservation() { return {Kind::kGroupPreservation, {}, 0.5}; }

  // Every feature the schema marks as not actionable.
  static FeasibilityRule from_schema(const FeatureSchema& schema, double tolerance = 0.5) {
    FeasibilityRule r;
    r.tolerance = tolerance;
    for (const auto& f : schema.features())
      if (!f.actionable) r.protected_features.push_back(f.name);
    return r;
  }

  void validate(const FeatureSchema& schema) const {
    if (kind != Kind::kActionability) return;
    if (!(tolerance > 0.0)) throw Error("metrics-harness", "feasibility", "tolerance must be positive");
    for (const auto& n : protected_features) schema.index_of(n, "feasibility");
  }

  nlohmann::json to_json() const {
    if (kind == Kind::kGroupPreservation) return {{"type", "group-preservation"}};
    return {{"type", "actionability"}, {"protected", protected_features}, {"tolerance", tolerance}};
  }

  static FeasibilityRule from_json(const nlohmann::json& j, const FeatureSchema& schema) {
    const std::string type = j.value("type", "actionability");
    if (type == "group-preservation") return group_preservation();
    if (type != "actionability")
      throw Error("metrics-harness", "feasibility", "unknown feasibility rule '" + type + "'");
    const double tol = j.value("tolerance", 0.5);
    if (!j.contains("protected")) return from_schema(schema, tol);
    return actionability(j.at("protected").get<std::vector<std::string>>(), tol);
  }
};

// Raw-unit change of feature f between two scaled rows; for categoricals the
// largest change across its one-hot columns.
inline double raw_change(const LabeledDataset& data, std::span<const double> before, std::span<const double> after,
                         std::size_t f) {
  const std::size_t off = data.schema.column_offset(f);
  double worst = 0.0;
  for (std::size_t k = 0; k < data.schema[f].width(); ++k) {
    const auto& s = data.scaling[off + k];
    worst = std::max(worst, std::abs(s.unscale(after[off + k]) - s.unscale(before[off + k])));
  }
  return worst;
}

// Index of the target row nearest to `row` (squared Euclidean), lowest index on ties.
inline std::size_t nearest_row(const Matrix& rows, std::span<const double> row) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < rows.rows(); ++j) {
    const double d = squared_distance(rows.row(j), row);
    if (d < best_d) best_d = d, best = j;
  }
  return best;
}

// Percentage of source rows whose explanation is feasible.
inline double feasibility(const LabeledDataset& source, const Matrix& mapped, const FeasibilityRule& rule,
                          const LabeledDataset* target = nullptr) {
  if (!mapped.same_shape(source.rows))
    throw Error("metrics-harness", "feasibility", "mapped rows do not align with the source");
  rule.validate(source.schema);
  if (source.size() == 0) return 100.0;
  std::size_t ok = 0;
  if (rule.kind == FeasibilityRule::Kind::kGroupPreservation) {
    if (!target || target->size() == 0)
      throw Error("metrics-harness", "feasibility", "group preservation needs a non-empty target");
    for (std::size_t i = 0; i < source.size(); ++i)
      ok += target->group_of[nearest_row(target->rows, mapped.row(i))] == source.group_of[i];
  } else {
    std::vector<std::size_t> idx;
    for (const auto& n : rule.protected_features) idx.push_back(source.schema.index_of(n, "feasibility"));
    for (std::size_t i = 0; i < source.size(); ++i) {
      bool feasible = true;
      for (std::size_t f : idx)
        if (raw_change(source, source.rows.row(i), mapped.row(i), f) >= rule.tolerance) feasible = false;
      ok += feasible;
    }
  }
  return 100.0 * static_cast<double>(ok) / static_cast<double>(source.size());
}

struct PerturbationSpec {
  double feature_fraction = 0.75;
  double value_fraction = 0.01;
  double real_step = 0.05;  // multiples of the raw source stdev
  std::uint64_t seed = 0;
  std::optional<std::size_t> feature_count;

  void validate() const {
    if (!(feature_fraction > 0.0 && feature_fraction <= 1.0) || !(value_fraction > 0.0 && value_fraction <= 1.0))
      throw Error("metrics-harness", "perturb", "feature_fraction and value_fraction must lie in (0, 1]");
    if (!(real_step > 0.0)) throw Error("metrics-harness", "perturb", "real_step must be positive");
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"feature_fraction", feature_fraction},
                     {"value_fraction", value_fraction},
                     {"real_step", real_step},
                     {"seed", seed}};
    if (feature_count) j["feature_count"] = *feature_count;
    return j;
  }

  static PerturbationSpec from_json(const nlohmann::json& j) {
    PerturbationSpec s;
    s.feature_fraction = j.value("feature_fraction", s.feature_fraction);
    s.value_fraction = j.value("value_fraction", s.value_fraction);
    s.real_step = j.value("real_step", s.real_step);
    s.seed = j.value("seed", s.seed);
    if (j.contains("feature_count")) s.feature_count = j.at("feature_count").get<std::size_t>();
    s.validate();
    return s;
  }
};

struct PerturbedFeature {
  std::size_t feature = 0;
  std::vector<std::size_t> rows;
};

struct Perturbation {
  LabeledDataset data;
  std::vector<PerturbedFeature> touched;
  std::vector<std::string> skipped;
};

inline double population_stdev(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

inline std::size_t cells_to_perturb(double fraction, std::size_t eligible) {
  return std::min(eligible, std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * eligible))));
}

inline Perturbation perturb(const LabeledDataset& source, const PerturbationSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Perturbation out{source, {}, {}};
  const std::size_t F = source.schema.size(), n = source.size();
  std::size_t count = spec.feature_count
                          ? *spec.feature_count
                          : static_cast<std::size_t>(std::llround(spec.feature_fraction * static_cast<double>(F)));
  count = std::min(count, F);
  auto chosen = rng.sample_without_replacement(F, count);
  std::sort(chosen.begin(), chosen.end());

  for (std::size_t f : chosen) {
    const Feature& feat = source.schema[f];
    std::vector<std::size_t> eligible;
    double step = 1.0;
    if (feat.kind == FeatureKind::kBoolean) {
      const bool side = rng.coin();
      for (int attempt = 0; attempt < 2 && eligible.empty(); ++attempt)
        for (std::size_t i = 0; i < n; ++i)
          if ((source.raw_value(i, f) > 0.5) == (attempt == 0 ? side : !side)) eligible.push_back(i);
    } else {
      if (feat.kind == FeatureKind::kReal) {
        std::vector<double> raw(n);
        for (std::size_t i = 0; i < n; ++i) raw[i] = source.raw_value(i, f);
        step = spec.real_step * population_stdev(raw);
      }
      if (step > 0.0) {
        eligible.resize(n);
        for (std::size_t i = 0; i < n; ++i) eligible[i] = i;
      }
    }
    if (eligible.empty()) {
      out.skipped.push_back(feat.name);
      continue;
    }

    auto pick = rng.sample_without_replacement(eligible.size(), cells_to_perturb(spec.value_fraction, eligible.size()));
    std::sort(pick.begin(), pick.end());
    PerturbedFeature pf{f, {}};
    for (std::size_t p : pick) {
      const std::size_t i = eligible[p];
      auto row = out.data.rows.row(i);
      const double v = source.raw_value(i, f);
      double nv = v;
      switch (feat.kind) {
        case FeatureKind::kBoolean:
          nv = v > 0.5 ? 0.0 : 1.0;
          break;
        case FeatureKind::kCategorical: {
          const double last = static_cast<double>(feat.width() - 1);
          nv = rng.coin() ? v + 1.0 : v - 1.0;
          if (nv < 0.0) nv = 1.0;
          if (nv > last) nv = last - 1.0;
          break;
        }
        default:
          nv = rng.coin() ? v + step : v - step;
      }
      out.data.set_raw_value(row, f, nv);
      pf.rows.push_back(i);
    }
    out.touched.push_back(std::move(pf));
  }
  return out;
}

enum class OmegaMode {
  kMappedOutputs,   // ||M(P; theta) - M(P(e); theta(e))|| / ||P - P(e)||
  kParameterShift,  // ||theta - theta(e)|| / ||P - P(e)||
};

inline std::string to_string(OmegaMode m) {
  return m == OmegaMode::kMappedOutputs ? "mapped-outputs" : "parameter-shift";
}

inline OmegaMode parse_omega_mode(const std::string& s) {
  if (s == "mapped-outputs") return OmegaMode::kMappedOutputs;
  if (s == "parameter-shift") return OmegaMode::kParameterShift;
  throw Error("metrics-harness", "robustness", "unknown omega mode '" + s + "'");
}

// Output of fitting an explanation: the mapped source rows and a flat
// parameter vector aligned across fits of the same pipeline.
struct FitOutput {
  Matrix mapped;
  std::vector<double> theta;
};

inline double omega(const Matrix& p, const FitOutput& fit, const Matrix& p_eps, const FitOutput& fit_eps,
                    OmegaMode mode = OmegaMode::kMappedOutputs) {
  const double denom = frobenius_norm(p - p_eps);
  if (!(denom > 0.0)) throw Error("metrics-harness", "robustness", "perturbation left the source unchanged");
  if (mode == OmegaMode::kMappedOutputs) return frobenius_norm(fit.mapped - fit_eps.mapped) / denom;
  if (fit.theta.size() != fit_eps.theta.size())
    throw Error("metrics-harness", "robustness", "parameter vectors differ in size");
  double ss = 0.0;
  for (std::size_t k = 0; k < fit.theta.size(); ++k) ss += (fit.theta[k] - fit_eps.theta[k]) * (fit.theta[k] - fit_eps.theta[k]);
  return std::sqrt(ss) / denom;
}

struct TrialOmega {
  std::uint64_t seed = 0;
  double omega = 0.0;
};

struct TrialFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct RobustnessReport {
  double omega = 0.0;
  double omega_worst = 0.0;
  std::size_t trials = 0;
  OmegaMode mode = OmegaMode::kMappedOutputs;
  std::vector<TrialOmega> per_trial;
  std::vector<TrialFailure> failures;

  nlohmann::json to_json() const {
    nlohmann::json pt = nlohmann::json::array(), fl = nlohmann::json::array();
    for (const auto& t : per_trial) pt.push_back({{"seed", t.seed}, {"omega", t.omega}});
    for (const auto& f : failures) fl.push_back({{"seed", f.seed}, {"error", f.message}});
    return {{"omega", omega},       {"omega_worst", omega_worst}, {"trials", trials},
            {"mode", to_string(mode)}, {"per_trial", pt},          {"failed_trials", fl}};
  }

  void write_csv(std::ostream& os) const {
    os << "seed,omega\n";
    for (const auto& t : per_trial) os << t.seed << ',' << csv::format_number(t.omega) << '\n';
  }
};

// fit(data, warm) learns an explanation on `data`; warm is the fit on the
// unperturbed source when warm-starting, otherwise null.
using FitFunction = std::function<FitOutput(const LabeledDataset&, const FitOutput*)>;

// Trial t uses perturbation seed spec.seed + t. Trials whose fit throws are
// recorded and excluded; it is an error when none succeed.
inline RobustnessReport robustness(const FitFunction& fit, const LabeledDataset& source, const PerturbationSpec& spec,
                                   std::size_t trials, bool warm_start, OmegaMode mode = OmegaMode::kMappedOutputs) {
  if (trials == 0) throw Error("metrics-harness", "robustness", "trials must be >= 1");
  const FitOutput base = fit(source, nullptr);
  RobustnessReport r;
  r.mode = mode;
  for (std::size_t t = 0; t < trials; ++t) {
    PerturbationSpec s = spec;
    s.seed = spec.seed + t;
    try {
      const Perturbation pe = perturb(source, s);
      const FitOutput f = fit(pe.data, warm_start ? &base : nullptr);
      r.per_trial.push_back({s.seed, omega(source.rows, base, pe.data.rows, f, mode)});
    } catch (const Error& e) {
      r.failures.push_back({s.seed, e.what()});
    }
  }
  if (r.per_trial.empty())
    throw Error("metrics-harness", "robustness", "all " + std::to_string(trials) + " trials failed");
  r.trials = r.per_trial.size();
  r.omega_worst = 0.0;
  for (const auto& t : r.per_trial) {
    r.omega += t.omega / static_cast<double>(r.trials);
    r.omega_worst = std::max(r.omega_worst, t.omega);
  }
  r.omega_worst = std::max(r.omega_worst, r.omega);
  return r;
}

}  // namespace gse
