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
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gse/data_model.hpp"
#include "gse/error.hpp"
#include "gse/transport_maps.hpp"
#include "gse/wasserstein.hpp"

namespace gse {

// ---------------------------------------------------------------------------
// PercentExplained

inline PointCloud uniform_cloud(const Matrix& rows) { return PointCloud::uniform(rows); }

// 100 * (1 - W2^2(M(P), Q) / W2^2(P, Q)).
inline double percent_explained(const Matrix& mapped, const Matrix& source, const Matrix& target,
                                const SinkhornConfig& cfg = {}) {
  const double denom = w2_squared(uniform_cloud(source), uniform_cloud(target), cfg).cost;
  if (!(denom > 1e-9))
    throw Error("objectives", "percent_explained", "source and target are indistinguishable (W2^2 ~ 0)");
  const double num = w2_squared(uniform_cloud(mapped), uniform_cloud(target), cfg).cost;
  return 100.0 * (1.0 - num / denom);
}

struct GroupPE {
  int group = 1;
  double pe = 0.0;
};

// PE restricted to each matched (P_g, Q_g) pair; `mapped` is row-aligned with
// `source`.
inline std::vector<GroupPE> group_pe(const Matrix& mapped, const LabeledDataset& source,
                                     const LabeledDataset& target, const SinkhornConfig& cfg = {}) {
  std::vector<GroupPE> out;
  for (const auto& [gs, gt] : matched_group_slices(source, target)) {
    out.push_back({gs.group, percent_explained(mapped.select_rows(gs.rows), source.rows.select_rows(gs.rows),
                                               target.rows.select_rows(gt.rows), cfg)});
  }
  return out;
}

inline double worst_group_pe(const std::vector<GroupPE>& pes) {
  if (pes.empty()) throw Error("objectives", "worst_group_pe", "no groups");
  double w = pes.front().pe;
  for (const auto& g : pes) w = std::min(w, g.pe);
  return w;
}

inline double worst_group_pe(const std::vector<double>& pes) {
  if (pes.empty()) throw Error("objectives", "worst_group_pe", "no groups");
  return *std::min_element(pes.begin(), pes.end());
}

// ---------------------------------------------------------------------------
// Objective specification

enum class BaseLoss { kOneMinusPE, kCrossEntropy };
enum class Aggregator { kMax, kSum, kGroupDro };

inline const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::kMax: return "max";
    case Aggregator::kSum: return "sum";
    case Aggregator::kGroupDro: return "group-dro";
  }
  return "?";
}

inline Aggregator parse_aggregator(const std::string& s) {
  if (s == "max") return Aggregator::kMax;
  if (s == "sum") return Aggregator::kSum;
  if (s == "group-dro") return Aggregator::kGroupDro;
  throw Error("objectives", "config", "unknown aggregator '" + s + "'");
}

struct ObjectiveSpec {
  BaseLoss base_loss = BaseLoss::kOneMinusPE;
  Aggregator aggregator = Aggregator::kGroupDro;
  double dro_step = 0.01;
  double lambda = 0.0;
  bool group_aware = false;

  void validate() const {
    if (!(lambda >= 0.0)) throw Error("objectives", "config", "lambda must be >= 0");
    if (!(dro_step > 0.0)) throw Error("objectives", "config", "group-dro step must be positive");
    // A sum of group losses that are additive over groups collapses to (1 + lambda) L.
    if (group_aware && aggregator == Aggregator::kSum && base_loss == BaseLoss::kCrossEntropy)
      throw Error("objectives", "config",
                  "sum aggregator requires a base loss that is not additive over groups");
  }

  nlohmann::json to_json() const {
    return {{"base_loss", base_loss == BaseLoss::kOneMinusPE ? "one-minus-pe" : "cross-entropy"},
            {"aggregator", to_string(aggregator)},
            {"dro_step", dro_step},
            {"lambda", lambda},
            {"group_aware", group_aware}};
  }
};

struct OptimizerConfig {
  double learning_rate = 1.0;
  int iterations = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw Error("objectives", "config", "learning rate must be positive");
    if (iterations < 1) throw Error("objectives", "config", "iterations must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Mapping families

// Additive mapping M(x; theta) parameterized either per K-means cluster or
// per source row.
struct MappingFamily {
  enum class Kind { kKCluster, kOT };
  Kind kind = Kind::kOT;
  ClusterModel clusters;  // kKCluster only

  static MappingFamily ot() { return {}; }
  static MappingFamily kcluster(ClusterModel m) { return {Kind::kKCluster, std::move(m)}; }

  Matrix zero_params(const Matrix& source_rows) const {
    return kind == Kind::kKCluster ? Matrix(clusters.k, source_rows.cols()) : Matrix(source_rows.rows(), source_rows.cols());
  }

  Matrix apply(const Matrix& rows, const Matrix& theta) const {
    return kind == Kind::kKCluster ? apply_kcluster(rows, clusters, {theta}) : apply_ot(rows, {theta});
  }

  // Chain rule from d loss / d mapped rows to d loss / d theta.
  Matrix pullback(const Matrix& row_grad) const {
    if (kind == Kind::kOT) return row_grad;
    Matrix g(clusters.k, row_grad.cols());
    for (std::size_t i = 0; i < row_grad.rows(); ++i) {
      auto gi = g.row(clusters.assignment[i]);
      auto ri = row_grad.row(i);
      for (std::size_t j = 0; j < ri.size(); ++j) gi[j] += ri[j];
    }
    return g;
  }
};

// ---------------------------------------------------------------------------
// Worst-group loss

struct LossEvaluation {
  double loss = 0.0;
  Matrix grad;                        // shaped like theta
  double global_loss = 0.0;           // 1 - PE on all rows
  std::vector<double> group_losses;   // 1 - PE_g, by group order
  std::vector<int> group_ids;
  std::vector<double> group_weights;  // aggregator weights actually used
  double max_residual = 0.0;

  double pe() const { return 100.0 * (1.0 - global_loss); }
  double wg_pe() const {
    double w = std::numeric_limits<double>::infinity();
    for (double l : group_losses) w = std::min(w, 100.0 * (1.0 - l));
    return w;
  }
};

// F({L_g}) + lambda * L over one-minus-PE losses, with W2^2(P_g, Q_g) cached.
// The group-DRO weights persist across calls to evaluate().
class WorstGroupObjective {
 public:
  WorstGroupObjective(MappingFamily family, const LabeledDataset& source, const LabeledDataset& target,
                      ObjectiveSpec spec, SinkhornConfig cfg)
      : family_(std::move(family)), source_(source.rows), target_(target.rows), spec_(spec), cfg_(cfg) {
    spec_.validate();
    if (spec_.base_loss != BaseLoss::kOneMinusPE)
      throw Error("objectives", "wg_loss", "transport objectives use the one-minus-PE base loss");
    global_denom_ = denominator(source_, target_);
    if (cfg_.debiased) global_self_ = self_term(uniform_cloud(target_), cfg_);
    for (auto& [gs, gt] : matched_group_slices(source, target)) {
      Slice s;
      s.group = gs.group;
      s.rows = gs.rows;
      s.target = target.rows.select_rows(gt.rows);
      s.denom = denominator(source.rows.select_rows(gs.rows), s.target);
      if (cfg_.debiased) s.self = self_term(uniform_cloud(s.target), cfg_);
      s.whole = gs.rows.size() == source.size() && gt.rows.size() == target.size() &&
                std::is_sorted(gs.rows.begin(), gs.rows.end()) && std::is_sorted(gt.rows.begin(), gt.rows.end());
      slices_.push_back(std::move(s));
    }
    dro_weights_.assign(slices_.size(), 1.0 / static_cast<double>(slices_.size()));
  }

  const std::vector<double>& dro_weights() const { return dro_weights_; }
  const MappingFamily& family() const { return family_; }

  LossEvaluation evaluate(const Matrix& theta) {
    const Matrix mapped = family_.apply(source_, theta);
    LossEvaluation ev;
    ev.grad = Matrix(theta.rows(), theta.cols());

    // Whole-distribution term.
    Matrix global_row_grad;
    SinkhornValueAndGrad global;
    {
      global = sinkhorn_value_and_grad(uniform_cloud(mapped), uniform_cloud(target_), cfg_,
                                       cfg_.debiased ? &global_self_ : nullptr);
      ev.global_loss = global.result.cost / global_denom_;
      ev.max_residual = global.result.residual;
      global_row_grad = global.grad * (1.0 / global_denom_);
    }

    std::vector<Matrix> group_row_grads;
    for (const auto& s : slices_) {
      // A group holding every row in order is the whole-distribution problem.
      auto vg = s.whole ? global
                        : sinkhorn_value_and_grad(uniform_cloud(mapped.select_rows(s.rows)), uniform_cloud(s.target),
                                                  cfg_, cfg_.debiased ? &s.self : nullptr);
      ev.group_ids.push_back(s.group);
      ev.group_losses.push_back(vg.result.cost / s.denom);
      ev.max_residual = std::max(ev.max_residual, vg.result.residual);
      group_row_grads.push_back(std::move(vg.grad) * (1.0 / s.denom));
    }

    if (!spec_.group_aware) {
      ev.loss = ev.global_loss;
      ev.grad = family_.pullback(global_row_grad);
      return ev;
    }

    const std::size_t g_count = slices_.size();
    ev.group_weights.assign(g_count, 0.0);
    switch (spec_.aggregator) {
      case Aggregator::kMax: {
        const auto worst = static_cast<std::size_t>(
            std::max_element(ev.group_losses.begin(), ev.group_losses.end()) - ev.group_losses.begin());
        ev.group_weights[worst] = 1.0;
        break;
      }
      case Aggregator::kSum:
        std::fill(ev.group_weights.begin(), ev.group_weights.end(), 1.0);
        break;
      case Aggregator::kGroupDro: {
        double total = 0.0;
        for (std::size_t g = 0; g < g_count; ++g) {
          dro_weights_[g] *= std::exp(spec_.dro_step * ev.group_losses[g]);
          total += dro_weights_[g];
        }
        for (double& q : dro_weights_) q /= total;
        ev.group_weights = dro_weights_;
        break;
      }
    }

    Matrix row_grad(source_.rows(), source_.cols());
    for (std::size_t g = 0; g < g_count; ++g) {
      const double w = ev.group_weights[g];
      if (w == 0.0) continue;
      ev.loss += w * ev.group_losses[g];
      const auto& rows = slices_[g].rows;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto dst = row_grad.row(rows[r]);
        auto src = group_row_grads[g].row(r);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * src[j];
      }
    }
    if (spec_.lambda > 0.0) {
      ev.loss += spec_.lambda * ev.global_loss;
      row_grad += global_row_grad * spec_.lambda;
    }
    ev.grad = family_.pullback(row_grad);
    return ev;
  }

 private:
  struct Slice {
    int group = 1;
    std::vector<std::size_t> rows;
    Matrix target;
    double denom = 1.0;
    SelfTerm self;
    bool whole = false;
  };

  double denominator(const Matrix& p, const Matrix& q) const {
    const double d = w2_squared(uniform_cloud(p), uniform_cloud(q), cfg_).cost;
    if (!(d > 1e-9))
      throw Error("objectives", "wg_loss", "source and target are indistinguishable (W2^2 ~ 0)");
    return d;
  }

  MappingFamily family_;
  Matrix source_, target_;
  ObjectiveSpec spec_;
  SinkhornConfig cfg_;
  double global_denom_ = 1.0;
  SelfTerm global_self_;
  std::vector<Slice> slices_;
  std::vector<double> dro_weights_;
};

// One-shot evaluation of the generalized loss at theta (fresh group-DRO
// weights).
inline LossEvaluation wg_loss(const Matrix& theta, const MappingFamily& family, const LabeledDataset& source,
                              const LabeledDataset& target, const ObjectiveSpec& spec,
                              const SinkhornConfig& cfg = {}) {
  WorstGroupObjective obj(family, source, target, spec, cfg);
  return obj.evaluate(theta);
}

// ---------------------------------------------------------------------------
// Optimization

struct TraceRow {
  int iteration = 0;
  double loss = 0.0;
  double pe = 0.0;
  double wg_pe = 0.0;
  double max_residual = 0.0;
};

struct OptimizeResult {
  Matrix theta;
  std::vector<TraceRow> trace;
  double final_pe = 0.0;
  double final_wg_pe = 0.0;
  std::vector<GroupPE> final_group_pe;
};

class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& message, std::vector<TraceRow> trace)
      : Error("objectives", "optimize", message), trace_(std::move(trace)) {}
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

// Full-batch gradient descent with a fixed step and iteration count from
// theta = 0, or from `warm_start` when given.
inline OptimizeResult optimize(const MappingFamily& family, const LabeledDataset& source,
                               const LabeledDataset& target, const ObjectiveSpec& spec,
                               const OptimizerConfig& opt, const SinkhornConfig& cfg = {},
                               const std::optional<Matrix>& warm_start = std::nullopt) {
  opt.validate();
  WorstGroupObjective objective(family, source, target, spec, cfg);
  OptimizeResult out;
  out.theta = family.zero_params(source.rows);
  if (warm_start) {
    if (!warm_start->same_shape(out.theta))
      throw Error("objectives", "optimize", "warm-start parameters have the wrong shape");
    out.theta = *warm_start;
  }
  for (int it = 0; it < opt.iterations; ++it) {
    const LossEvaluation ev = objective.evaluate(out.theta);
    out.trace.push_back({it, ev.loss, ev.pe(), ev.wg_pe(), ev.max_residual});
    if (!std::isfinite(ev.loss) || !all_finite(ev.grad))
      throw OptimizationError("non-finite loss at iteration " + std::to_string(it), out.trace);
    out.theta -= ev.grad * opt.learning_rate;
  }
  const LossEvaluation last = objective.evaluate(out.theta);
  if (!std::isfinite(last.loss)) throw OptimizationError("non-finite final loss", out.trace);
  out.final_pe = last.pe();
  out.final_wg_pe = last.wg_pe();
  for (std::size_t g = 0; g < last.group_ids.size(); ++g)
    out.final_group_pe.push_back({last.group_ids[g], 100.0 * (1.0 - last.group_losses[g])});
  return out;
}

}  // namespace gse
