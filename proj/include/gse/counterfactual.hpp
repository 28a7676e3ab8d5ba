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
#include <span>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gse/data_model.hpp"
#include "gse/error.hpp"
#include "gse/matrix.hpp"
#include "gse/random.hpp"

namespace gse {

struct ClassifierTraining {
  int epochs = 100;
  double learning_rate = 0.05;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  bool group_dro = false;
  double dro_step = 0.01;

  nlohmann::json to_json() const {
    return {{"epochs", epochs}, {"learning_rate", learning_rate}, {"weight_decay", weight_decay},
            {"seed", seed},     {"group_dro", group_dro},         {"dro_step", dro_step}};
  }
};

// Source-vs-target discriminator: logistic regression or a one-hidden-layer
// ReLU network with a logistic output. Parameters live in one flat vector:
//   logistic:   [w (d), b]
//   one-hidden: [W1 (h x d, row-major), b1 (h), w2 (h), b2]
class Classifier {
 public:
  enum class Arch { kLogistic, kOneHidden };

  Classifier() = default;
  Classifier(Arch arch, std::size_t input_dim, std::size_t hidden = 0)
      : arch_(arch), input_dim_(input_dim), hidden_(arch == Arch::kLogistic ? 0 : hidden) {
    if (arch == Arch::kOneHidden && hidden == 0)
      throw Error("counterfactual-map", "classifier", "hidden width must be >= 1");
    params_.assign(num_params(), 0.0);
  }

  static Classifier logistic(std::vector<double> w, double b) {
    Classifier c(Arch::kLogistic, w.size());
    std::copy(w.begin(), w.end(), c.params_.begin());
    c.params_.back() = b;
    return c;
  }

  Arch arch() const { return arch_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t hidden() const { return hidden_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::size_t num_params() const {
    return arch_ == Arch::kLogistic ? input_dim_ + 1 : hidden_ * input_dim_ + 2 * hidden_ + 1;
  }

  // PyTorch-style uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](std::size_t from, std::size_t count, std::size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (std::size_t k = 0; k < count; ++k) params_[from + k] = (2.0 * rng.uniform() - 1.0) * bound;
    };
    if (arch_ == Arch::kLogistic) {
      std::fill(params_.begin(), params_.end(), 0.0);
      return;
    }
    fill(0, hidden_ * input_dim_ + hidden_, input_dim_);
    fill(hidden_ * input_dim_ + hidden_, hidden_ + 1, hidden_);
  }

  double logit(std::span<const double> x) const {
    if (arch_ == Arch::kLogistic) {
      double z = params_[input_dim_];
      for (std::size_t j = 0; j < input_dim_; ++j) z += params_[j] * x[j];
      return z;
    }
    const std::size_t b1 = hidden_ * input_dim_, w2 = b1 + hidden_, b2 = w2 + hidden_;
    double z = params_[b2];
    for (std::size_t h = 0; h < hidden_; ++h) {
      double a = params_[b1 + h];
      for (std::size_t j = 0; j < input_dim_; ++j) a += params_[h * input_dim_ + j] * x[j];
      if (a > 0.0) z += params_[w2 + h] * a;
    }
    return z;
  }

  // Probability that x comes from the target.
  double predict(std::span<const double> x) const { return sigmoid(logit(x)); }

  // d logit / d x
  std::vector<double> input_gradient(std::span<const double> x) const {
    std::vector<double> g(input_dim_, 0.0);
    if (arch_ == Arch::kLogistic) {
      std::copy(params_.begin(), params_.begin() + static_cast<std::ptrdiff_t>(input_dim_), g.begin());
      return g;
    }
    const std::size_t b1 = hidden_ * input_dim_, w2 = b1 + hidden_;
    for (std::size_t h = 0; h < hidden_; ++h) {
      double a = params_[b1 + h];
      for (std::size_t j = 0; j < input_dim_; ++j) a += params_[h * input_dim_ + j] * x[j];
      if (a <= 0.0) continue;
      for (std::size_t j = 0; j < input_dim_; ++j) g[j] += params_[w2 + h] * params_[h * input_dim_ + j];
    }
    return g;
  }

  // Accumulates scale * d logit / d params into grad.
  void add_param_gradient(std::span<const double> x, double scale, std::vector<double>& grad) const {
    if (arch_ == Arch::kLogistic) {
      for (std::size_t j = 0; j < input_dim_; ++j) grad[j] += scale * x[j];
      grad[input_dim_] += scale;
      return;
    }
    const std::size_t b1 = hidden_ * input_dim_, w2 = b1 + hidden_, b2 = w2 + hidden_;
    for (std::size_t h = 0; h < hidden_; ++h) {
      double a = params_[b1 + h];
      for (std::size_t j = 0; j < input_dim_; ++j) a += params_[h * input_dim_ + j] * x[j];
      if (a <= 0.0) continue;
      grad[w2 + h] += scale * a;
      const double back = scale * params_[w2 + h];
      grad[b1 + h] += back;
      for (std::size_t j = 0; j < input_dim_; ++j) grad[h * input_dim_ + j] += back * x[j];
    }
    grad[b2] += scale;
  }

  static double sigmoid(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }

  // -log sigmoid(z) for label 1, -log(1 - sigmoid(z)) for label 0.
  static double cross_entropy(double z, double label) {
    const double s = label > 0.5 ? -z : z;
    return s > 0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
  }

  nlohmann::json to_json() const {
    return {{"arch", arch_ == Arch::kLogistic ? "logistic" : "one-hidden"},
            {"input_dim", input_dim_},
            {"hidden", hidden_},
            {"params", params_}};
  }

  static Classifier from_json(const nlohmann::json& j) {
    const std::string a = j.at("arch").get<std::string>();
    Classifier c(a == "logistic" ? Arch::kLogistic : Arch::kOneHidden, j.at("input_dim").get<std::size_t>(),
                 j.value("hidden", std::size_t{0}));
    c.params_ = j.at("params").get<std::vector<double>>();
    if (c.params_.size() != c.num_params())
      throw Error("counterfactual-map", "classifier", "parameter count does not match architecture");
    return c;
  }

 private:
  Arch arch_ = Arch::kLogistic;
  std::size_t input_dim_ = 0;
  std::size_t hidden_ = 0;
  std::vector<double> params_;
};

struct TrainingReport {
  std::vector<double> loss;                      // per epoch, the optimized objective
  std::vector<std::vector<double>> dro_weights;  // per epoch when group_dro
  std::vector<double> final_group_loss;          // mean cross-entropy per group
};

// Full-batch gradient descent on source(0)-vs-target(1) cross-entropy with
// weight decay. With group_dro the per-group mean losses are mixed by weights
// q_g <- q_g exp(dro_step L_g) renormalized every epoch. `init` warm-starts.
inline Classifier train_classifier(const LabeledDataset& source, const LabeledDataset& target, Classifier model,
                                   const ClassifierTraining& cfg, TrainingReport* report = nullptr,
                                   bool initialize = true) {
  if (cfg.epochs < 1) throw Error("counterfactual-map", "train", "epochs must be >= 1");
  if (model.input_dim() != source.dim() || source.dim() != target.dim())
    throw Error("counterfactual-map", "train", "classifier input dimension does not match the data");
  if (initialize) model.initialize(cfg.seed);

  const std::size_t ns = source.size(), n = ns + target.size();
  auto row = [&](std::size_t i) { return i < ns ? source.rows.row(i) : target.rows.row(i - ns); };
  auto group = [&](std::size_t i) { return i < ns ? source.group_of[i] : target.group_of[i - ns]; };

  std::vector<int> ids;
  for (std::size_t i = 0; i < n; ++i)
    if (std::find(ids.begin(), ids.end(), group(i)) == ids.end()) ids.push_back(group(i));
  std::sort(ids.begin(), ids.end());
  std::vector<std::size_t> slot(n), count(ids.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    slot[i] = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), group(i)) - ids.begin());
    ++count[slot[i]];
  }
  std::vector<double> q(ids.size(), 1.0 / static_cast<double>(ids.size()));

  std::vector<double> grad(model.num_params());
  std::vector<double> logits(n), group_loss(ids.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::fill(group_loss.begin(), group_loss.end(), 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = model.logit(row(i));
      const double l = Classifier::cross_entropy(logits[i], i < ns ? 0.0 : 1.0);
      group_loss[slot[i]] += l / static_cast<double>(count[slot[i]]);
      total += l / static_cast<double>(n);
    }
    if (!std::isfinite(total))
      throw Error("counterfactual-map", "train", "non-finite loss at epoch " + std::to_string(epoch));

    // Per-row weight on its cross-entropy in the objective.
    std::vector<double> row_weight(n);
    double objective = total;
    if (cfg.group_dro) {
      double z = 0.0;
      for (std::size_t g = 0; g < q.size(); ++g) {
        q[g] *= std::exp(cfg.dro_step * group_loss[g]);
        z += q[g];
      }
      objective = 0.0;
      for (std::size_t g = 0; g < q.size(); ++g) {
        q[g] /= z;
        objective += q[g] * group_loss[g];
      }
      for (std::size_t i = 0; i < n; ++i) row_weight[i] = q[slot[i]] / static_cast<double>(count[slot[i]]);
      if (report) report->dro_weights.push_back(q);
    } else {
      std::fill(row_weight.begin(), row_weight.end(), 1.0 / static_cast<double>(n));
    }
    if (report) report->loss.push_back(objective);

    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double y = i < ns ? 0.0 : 1.0;
      model.add_param_gradient(row(i), row_weight[i] * (Classifier::sigmoid(logits[i]) - y), grad);
    }
    auto& p = model.params();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.learning_rate * (grad[k] + cfg.weight_decay * p[k]);
  }

  if (report) {
    report->final_group_loss.assign(ids.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      report->final_group_loss[slot[i]] +=
          Classifier::cross_entropy(model.logit(row(i)), i < ns ? 0.0 : 1.0) / static_cast<double>(count[slot[i]]);
  }
  return model;
}

struct CounterfactualConfig {
  double proximity_weight = 0.5;
  int max_steps = 200;
  double step_size = 0.05;
  double flip_threshold = 0.5;

  void validate() const {
    if (!(proximity_weight > 0.0) || max_steps < 1 || !(step_size > 0.0) || !(flip_threshold > 0.0))
      throw Error("counterfactual-map", "config", "counterfactual settings must be positive");
  }

  nlohmann::json to_json() const {
    return {{"proximity_weight", proximity_weight}, {"max_steps", max_steps},
            {"step_size", step_size}, {"flip_threshold", flip_threshold}};
  }
};

struct Counterfactual {
  std::vector<double> delta;
  bool flipped = false;
};

// Minimal perturbation pushing h(x + delta) above the flip threshold, found by
// gradient descent on CE(h(x + delta), 1) + proximity_weight |delta|^2. Stops
// at the first flip, refined by bisection along the last step; otherwise
// returns the lowest-objective iterate, which never lowers h below h(x).
inline Counterfactual counterfactual_delta(std::span<const double> x, const Classifier& h,
                                           const CounterfactualConfig& cfg) {
  cfg.validate();
  const std::size_t d = x.size();
  Counterfactual out{std::vector<double>(d, 0.0), false};
  if (h.predict(x) > cfg.flip_threshold) {
    out.flipped = true;
    return out;
  }
  std::vector<double> delta(d, 0.0), point(x.begin(), x.end());
  double best = Classifier::cross_entropy(h.logit(x), 1.0);
  for (int step = 0; step < cfg.max_steps; ++step) {
    const double p = h.predict(point);
    const std::vector<double> previous = delta;
    const auto gz = h.input_gradient(point);
    double norm2 = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double g = -(1.0 - p) * gz[j] + 2.0 * cfg.proximity_weight * delta[j];
      delta[j] -= cfg.step_size * g;
      point[j] = x[j] + delta[j];
      norm2 += delta[j] * delta[j];
    }
    const double z = h.logit(point);
    if (!std::isfinite(z)) break;
    if (Classifier::sigmoid(z) > cfg.flip_threshold) {
      // A single step can overshoot a steep boundary: bisect back toward the
      // previous iterate, keeping the flipped end.
      std::vector<double> lo = previous, hi = delta, mid(d), probe(d);
      for (int k = 0; k < 40; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
          mid[j] = 0.5 * (lo[j] + hi[j]);
          probe[j] = x[j] + mid[j];
        }
        (h.predict(probe) > cfg.flip_threshold ? hi : lo) = mid;
      }
      out.delta = hi;
      out.flipped = true;
      return out;
    }
    const double obj = Classifier::cross_entropy(z, 1.0) + cfg.proximity_weight * norm2;
    if (obj < best) {
      best = obj;
      out.delta = delta;
    }
  }
  return out;
}

struct DiceResult {
  Matrix mapped;
  Matrix deltas;
  std::vector<bool> flipped;
  double flip_rate = 0.0;
};

inline DiceResult apply_dice(const Matrix& source_rows, const Classifier& h, const CounterfactualConfig& cfg) {
  DiceResult r{source_rows, Matrix(source_rows.rows(), source_rows.cols()), {}, 0.0};
  std::size_t flips = 0;
  for (std::size_t i = 0; i < source_rows.rows(); ++i) {
    const auto cf = counterfactual_delta(source_rows.row(i), h, cfg);
    for (std::size_t j = 0; j < cf.delta.size(); ++j) {
      r.deltas(i, j) = cf.delta[j];
      r.mapped(i, j) += cf.delta[j];
    }
    r.flipped.push_back(cf.flipped);
    flips += cf.flipped;
  }
  r.flip_rate = source_rows.rows() ? static_cast<double>(flips) / static_cast<double>(source_rows.rows()) : 0.0;
  return r;
}

struct DicePreset {
  Classifier::Arch arch = Classifier::Arch::kOneHidden;
  std::size_t hidden = 16;
  ClassifierTraining training;
};

inline DicePreset dice_preset(const std::string& name) {
  DicePreset p;
  p.training.weight_decay = 1e-4;
  if (name == "adult-dice") {
    p.training.epochs = 100;
    p.training.learning_rate = 0.05;
  } else if (name == "breast-dice") {
    p.training.epochs = 500;
    p.training.learning_rate = 0.2;
  } else if (name == "civil-dice") {
    p.arch = Classifier::Arch::kLogistic;
    p.hidden = 0;
    p.training.epochs = 1000;
    p.training.learning_rate = 0.5;
  } else if (name == "imagenet-dice") {
    p.arch = Classifier::Arch::kLogistic;
    p.hidden = 0;
    p.training.epochs = 100;
    p.training.learning_rate = 0.1;
  } else {
    throw Error("counterfactual-map", "preset", "unknown dice preset '" + name + "'");
  }
  return p;
}

}  // namespace gse
