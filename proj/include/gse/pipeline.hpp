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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gse/counterfactual.hpp"
#include "gse/data_model.hpp"
#include "gse/error.hpp"
#include "gse/metrics.hpp"
#include "gse/objectives.hpp"
#include "gse/text.hpp"
#include "gse/transport_maps.hpp"
#include "gse/wasserstein.hpp"

#ifndef GSE_VERSION
#define GSE_VERSION "0.0.0"
#endif

namespace gse {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kOutputRootEnv = "GSE_OUTPUT_ROOT";

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

struct DataConfig {
  bool text = false;
  std::string schema, source, target;                // tabular
  std::string source_groups, target_groups;          // text: optional label files
  std::size_t vocab_size = 50;
  std::size_t subsample = 0;  // tabular: keep this many seeded rows per side (0 keeps all)

  json to_json() const {
    if (text) {
      json j{{"kind", "text"}, {"source", source}, {"target", target}, {"vocab_size", vocab_size}};
      if (!source_groups.empty()) j["source_groups"] = source_groups;
      if (!target_groups.empty()) j["target_groups"] = target_groups;
      return j;
    }
    json j{{"kind", "tabular"}, {"schema", schema}, {"source", source}, {"target", target}};
    if (subsample) j["subsample"] = subsample;
    return j;
  }
};

struct MethodConfig {
  enum class Kind { kKCluster, kOT, kDice, kFixed };
  Kind kind = Kind::kKCluster;
  std::size_t k = 1;
  std::string dice_preset;
  DicePreset dice;
  Matrix deltas;                    // fixed: per-row displacement
  std::optional<Matrix> perturbed;  // fixed: displacement used on a perturbed source

  json to_json() const {
    switch (kind) {
      case Kind::kKCluster: return {{"type", "kcluster"}, {"k", k}};
      case Kind::kOT: return {{"type", "ot"}};
      case Kind::kDice: {
        json j{{"type", "dice"},
               {"arch", dice.arch == Classifier::Arch::kLogistic ? "logistic" : "one-hidden"},
               {"hidden", dice.hidden},
               {"training", dice.training.to_json()}};
        if (!dice_preset.empty()) j["preset"] = dice_preset;
        return j;
      }
      case Kind::kFixed: {
        json j{{"type", "fixed"}, {"deltas", matrix_json(deltas)}};
        if (perturbed) j["deltas_perturbed"] = matrix_json(*perturbed);
        return j;
      }
    }
    return {};
  }

  static json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
    return rows;
  }

  static Matrix matrix_from_json(const json& j) {
    return Matrix::from_rows(j.get<std::vector<std::vector<double>>>());
  }
};

struct RobustnessConfig {
  std::size_t trials = 3;
  std::size_t worst_trials = 100;
  bool warm_start = true;
  bool freeze_clusters = false;
  OmegaMode omega_mode = OmegaMode::kMappedOutputs;
  std::string perturbed_source;  // explicit P(e) instead of the random generator

  json to_json() const {
    json j{{"trials", trials},         {"worst_trials", worst_trials},          {"warm_start", warm_start},
           {"freeze_clusters", freeze_clusters}, {"omega_mode", to_string(omega_mode)}};
    if (!perturbed_source.empty()) j["perturbed_source"] = perturbed_source;
    return j;
  }
};

struct RunConfig {
  std::string name = "run";
  DataConfig data;
  json grouping = {{"type", "none"}};
  MethodConfig method;
  bool gse = false;
  ObjectiveSpec objective;
  OptimizerConfig optimizer;
  SinkhornConfig sinkhorn;
  CounterfactualConfig counterfactual;
  json feasibility = {{"type", "actionability"}};
  PerturbationSpec perturbation;
  bool perturbation_seed_explicit = false;
  RobustnessConfig robustness;
  std::uint64_t seed = 0;
  int repeats = 3;
  std::string preset;
  std::string output_dir;

  // Everything needed to reproduce the numbers; the output location is not part of it.
  json to_json() const {
    json opt{{"learning_rate", optimizer.learning_rate}, {"iterations", optimizer.iterations}};
    json sk{{"blur", sinkhorn.blur},
            {"max_iters", sinkhorn.max_iters},
            {"tol", sinkhorn.tol},
            {"scaling", sinkhorn.scaling},
            {"debiased", sinkhorn.debiased}};
    json objective_json = objective.to_json();
    if (method.kind == MethodConfig::Kind::kDice) objective_json["base_loss"] = "cross-entropy";
    json j{{"name", name},
           {"data", data.to_json()},
           {"grouping", grouping},
           {"method", method.to_json()},
           {"mode", gse ? "gse" : "vanilla"},
           {"objective", objective_json},
           {"optimizer", opt},
           {"sinkhorn", sk},
           {"counterfactual", counterfactual.to_json()},
           {"feasibility", feasibility},
           {"perturbation", perturbation.to_json()},
           {"robustness", robustness.to_json()},
           {"seed", seed},
           {"repeats", repeats}};
    if (!preset.empty()) j["preset"] = preset;
    return j;
  }
};

inline void apply_preset(RunConfig& cfg, const std::string& name) {
  struct Row {
    const char* name;
    MethodConfig::Kind kind;
    std::size_t k;
    double lr;
    int iters;
  };
  static const Row rows[] = {
      {"adult-kcluster", MethodConfig::Kind::kKCluster, 10, 10.0, 100},
      {"breast-kcluster", MethodConfig::Kind::kKCluster, 4, 10.0, 100},
      {"civil-kcluster", MethodConfig::Kind::kKCluster, 4, 20.0, 200},
      {"imagenet-kcluster", MethodConfig::Kind::kKCluster, 5, 150.0, 100},
      {"adult-ot", MethodConfig::Kind::kOT, 0, 0.05, 100},
      {"breast-ot", MethodConfig::Kind::kOT, 0, 1.0, 100},
      {"civil-ot", MethodConfig::Kind::kOT, 0, 0.1, 200},
      {"imagenet-ot", MethodConfig::Kind::kOT, 0, 0.5, 100},
  };
  for (const auto& r : rows) {
    if (name != r.name) continue;
    cfg.method = MethodConfig{};
    cfg.method.kind = r.kind;
    if (r.kind == MethodConfig::Kind::kKCluster) cfg.method.k = r.k;
    cfg.optimizer.learning_rate = r.lr;
    cfg.optimizer.iterations = r.iters;
    cfg.preset = name;
    return;
  }
  if (name.size() > 5 && name.ends_with("-dice")) {
    cfg.method = MethodConfig{};
    cfg.method.kind = MethodConfig::Kind::kDice;
    cfg.method.dice = dice_preset(name);
    cfg.method.dice_preset = name;
    cfg.preset = name;
    return;
  }
  throw Error("cli", "preset", "unknown preset '" + name + "'");
}

namespace detail {

inline std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

inline MethodConfig method_from_json(const json& j) {
  MethodConfig m;
  const std::string type = j.at("type").get<std::string>();
  if (type == "kcluster") {
    m.kind = MethodConfig::Kind::kKCluster;
    m.k = j.at("k").get<std::size_t>();
  } else if (type == "ot") {
    m.kind = MethodConfig::Kind::kOT;
  } else if (type == "dice") {
    m.kind = MethodConfig::Kind::kDice;
    if (j.contains("preset")) {
      m.dice_preset = j["preset"].get<std::string>();
      m.dice = dice_preset(m.dice_preset);
    }
    if (j.contains("arch"))
      m.dice.arch = j["arch"].get<std::string>() == "logistic" ? Classifier::Arch::kLogistic : Classifier::Arch::kOneHidden;
    m.dice.hidden = j.value("hidden", m.dice.hidden);
    if (m.dice.arch == Classifier::Arch::kLogistic) m.dice.hidden = 0;
    if (j.contains("training")) {
      const auto& t = j["training"];
      auto& c = m.dice.training;
      c.epochs = t.value("epochs", c.epochs);
      c.learning_rate = t.value("learning_rate", c.learning_rate);
      c.weight_decay = t.value("weight_decay", c.weight_decay);
      c.dro_step = t.value("dro_step", c.dro_step);
    }
  } else if (type == "fixed") {
    m.kind = MethodConfig::Kind::kFixed;
    m.deltas = MethodConfig::matrix_from_json(j.at("deltas"));
    if (j.contains("deltas_perturbed")) m.perturbed = MethodConfig::matrix_from_json(j["deltas_perturbed"]);
  } else {
    throw Error("cli", "config", "unknown method '" + type + "'");
  }
  return m;
}

}  // namespace detail

// Relative paths resolve against `base_dir` (the config file's directory).
inline RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    c.name = j.value("name", c.name);
    const auto& d = j.at("data");
    c.data.text = d.value("kind", "tabular") == "text";
    c.data.source = detail::resolve(base_dir, d.at("source").get<std::string>());
    c.data.target = detail::resolve(base_dir, d.at("target").get<std::string>());
    if (c.data.text) {
      c.data.source_groups = detail::resolve(base_dir, d.value("source_groups", ""));
      c.data.target_groups = detail::resolve(base_dir, d.value("target_groups", ""));
      c.data.vocab_size = d.value("vocab_size", c.data.vocab_size);
    } else {
      c.data.schema = detail::resolve(base_dir, d.at("schema").get<std::string>());
      c.data.subsample = d.value("subsample", c.data.subsample);
    }
    if (j.contains("grouping")) c.grouping = j["grouping"];
    if (j.contains("preset")) apply_preset(c, j["preset"].get<std::string>());
    if (j.contains("method")) c.method = detail::method_from_json(j["method"]);
    const std::string mode = j.value("mode", "vanilla");
    if (mode != "vanilla" && mode != "gse") throw Error("cli", "config", "mode must be 'vanilla' or 'gse'");
    c.gse = mode == "gse";
    if (j.contains("objective")) {
      const auto& o = j["objective"];
      if (o.contains("aggregator")) c.objective.aggregator = parse_aggregator(o["aggregator"].get<std::string>());
      c.objective.dro_step = o.value("dro_step", c.objective.dro_step);
      c.objective.lambda = o.value("lambda", c.objective.lambda);
    }
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      c.optimizer.learning_rate = o.value("learning_rate", c.optimizer.learning_rate);
      c.optimizer.iterations = o.value("iterations", c.optimizer.iterations);
    }
    if (j.contains("sinkhorn")) {
      const auto& s = j["sinkhorn"];
      c.sinkhorn.blur = s.value("blur", c.sinkhorn.blur);
      c.sinkhorn.max_iters = s.value("max_iters", c.sinkhorn.max_iters);
      c.sinkhorn.tol = s.value("tol", c.sinkhorn.tol);
      c.sinkhorn.scaling = s.value("scaling", c.sinkhorn.scaling);
      c.sinkhorn.debiased = s.value("debiased", c.sinkhorn.debiased);
    }
    if (j.contains("counterfactual")) {
      const auto& s = j["counterfactual"];
      auto& cf = c.counterfactual;
      cf.proximity_weight = s.value("proximity_weight", cf.proximity_weight);
      cf.max_steps = s.value("max_steps", cf.max_steps);
      cf.step_size = s.value("step_size", cf.step_size);
      cf.flip_threshold = s.value("flip_threshold", cf.flip_threshold);
    }
    if (j.contains("feasibility")) c.feasibility = j["feasibility"];
    c.seed = j.value("seed", c.seed);
    if (j.contains("perturbation")) {
      c.perturbation = PerturbationSpec::from_json(j["perturbation"]);
      c.perturbation_seed_explicit = j["perturbation"].contains("seed");
    }
    if (!c.perturbation_seed_explicit) c.perturbation.seed = c.seed;
    if (j.contains("robustness")) {
      const auto& r = j["robustness"];
      auto& rc = c.robustness;
      rc.trials = r.value("trials", rc.trials);
      rc.worst_trials = r.value("worst_trials", rc.worst_trials);
      rc.warm_start = r.value("warm_start", rc.warm_start);
      rc.freeze_clusters = r.value("freeze_clusters", rc.freeze_clusters);
      if (r.contains("omega_mode")) rc.omega_mode = parse_omega_mode(r["omega_mode"].get<std::string>());
      rc.perturbed_source = detail::resolve(base_dir, r.value("perturbed_source", ""));
    }
    c.repeats = j.value("repeats", c.repeats);
    c.output_dir = detail::resolve(base_dir, j.value("output_dir", ""));
  } catch (const json::exception& e) {
    throw Error("cli", "config", std::string("malformed run config: ") + e.what());
  }
  if (c.repeats < 1) throw Error("cli", "config", "repeats must be >= 1");
  if (c.method.kind == MethodConfig::Kind::kKCluster && c.method.k == 0)
    throw Error("cli", "config", "kcluster needs k >= 1");
  c.optimizer.validate();
  c.sinkhorn.validate();
  c.counterfactual.validate();
  c.objective.group_aware = c.gse;
  c.objective.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cli", "config", "cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("cli", "config", "malformed config file '" + path + "': " + e.what());
  }
  RunConfig c = run_config_from_json(j, fs::absolute(path).parent_path());
  if (!j.contains("name")) c.name = fs::path(path).stem().string();
  return c;
}

// --out, else the config's output_dir, else $GSE_OUTPUT_ROOT/<name>, else runs/<name>.
inline std::string resolve_output_dir(const RunConfig& cfg, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  const char* root = std::getenv(kOutputRootEnv);
  return (fs::path(root && *root ? root : "runs") / cfg.name).string();
}

// ---------------------------------------------------------------------------
// Data

struct LoadedData {
  LabeledDataset source, target;
  std::vector<std::string> source_docs;  // text runs only
  Vocabulary vocab;
};

// Keeps `count` seeded rows in their original order; 0 or count >= rows keeps all.
inline RawTable subsample_rows(RawTable t, std::size_t count, std::uint64_t seed) {
  if (count == 0 || count >= t.rows()) return t;
  Rng rng(seed);
  auto keep = rng.sample_without_replacement(t.rows(), count);
  std::sort(keep.begin(), keep.end());
  RawTable out{t.schema, t.role, t.values.select_rows(keep), {}};
  for (auto i : keep) out.cells.push_back(std::move(t.cells[i]));
  return out;
}

inline LoadedData load_data(const RunConfig& cfg) {
  LoadedData out;
  if (cfg.data.text) {
    out.source_docs = read_lines(cfg.data.source);
    const auto target_docs = read_lines(cfg.data.target);
    out.vocab = build_vocab(out.source_docs, target_docs, cfg.data.vocab_size);
    std::vector<int> gs, gt;
    if (!cfg.data.source_groups.empty()) gs = read_group_labels(cfg.data.source_groups);
    if (!cfg.data.target_groups.empty()) gt = read_group_labels(cfg.data.target_groups);
    out.source = to_labeled(featurize(out.source_docs, out.vocab), out.vocab, Role::kSource, gs);
    out.target = to_labeled(featurize(target_docs, out.vocab), out.vocab, Role::kTarget, gt);
    const int g = std::max(out.source.num_groups, out.target.num_groups);
    out.source.num_groups = out.target.num_groups = g;
    if (gs.empty() != gt.empty())
      throw Error("cli", "config", "text group labels must be given for both source and target");
    if (gs.empty()) std::tie(out.source, out.target) = assign_groups(out.source, out.target, grouping_rule_from_json(cfg.grouping));
    return out;
  }
  const auto schema = FeatureSchema::load(cfg.data.schema);
  auto [s, t] = preprocess(subsample_rows(ingest_csv(cfg.data.source, schema, Role::kSource), cfg.data.subsample, cfg.seed),
                           subsample_rows(ingest_csv(cfg.data.target, schema, Role::kTarget), cfg.data.subsample, cfg.seed + 1));
  std::tie(out.source, out.target) = assign_groups(std::move(s), std::move(t), grouping_rule_from_json(cfg.grouping));
  return out;
}

// Scales a raw table with an existing dataset's scaling (for an explicit P(e)).
inline LabeledDataset rescale_like(const RawTable& raw, const LabeledDataset& like) {
  if (raw.rows() != like.size())
    throw Error("cli", "robustness", "perturbed source must have the same number of rows as the source");
  LabeledDataset d = like;
  for (std::size_t i = 0; i < raw.rows(); ++i)
    for (std::size_t f = 0; f < like.schema.size(); ++f) d.set_raw_value(d.rows.row(i), f, raw.values(i, f));
  return d;
}

// ---------------------------------------------------------------------------
// Fitting

struct Fit {
  Matrix theta;  // kcluster: k x d; ot, dice, fixed: n x d
  Matrix mapped;
  std::optional<ClusterModel> clusters;
  std::optional<Classifier> classifier;
  std::vector<TraceRow> trace;
  std::vector<bool> flipped;  // dice
  double flip_rate = 0.0;

  std::vector<double> flat_theta() const { return theta.data(); }
};

// `warm` warm-starts the parameters; `frozen` reuses a clustering instead of
// re-running k-means; `perturbed` selects a fixed method's alternative deltas.
inline Fit fit_explanation(const RunConfig& cfg, const LabeledDataset& source, const LabeledDataset& target,
                           std::uint64_t seed, const Fit* warm = nullptr, const ClusterModel* frozen = nullptr,
                           bool perturbed = false) {
  Fit out;
  switch (cfg.method.kind) {
    case MethodConfig::Kind::kFixed: {
      const Matrix& d = perturbed && cfg.method.perturbed ? *cfg.method.perturbed : cfg.method.deltas;
      if (!d.same_shape(source.rows))
        throw Error("cli", "explain", "fixed deltas must be " + std::to_string(source.size()) + " x " +
                                          std::to_string(source.dim()));
      out.theta = d;
      out.mapped = apply_ot(source.rows, {d});
      return out;
    }
    case MethodConfig::Kind::kDice: {
      DicePreset p = cfg.method.dice;
      p.training.seed = seed;
      p.training.group_dro = cfg.gse;
      Classifier h(p.arch, source.dim(), p.hidden);
      bool init = true;
      if (warm && warm->classifier) {
        h = *warm->classifier;
        init = false;
      }
      TrainingReport rep;
      out.classifier = train_classifier(source, target, h, p.training, &rep, init);
      for (std::size_t e = 0; e < rep.loss.size(); ++e) out.trace.push_back({static_cast<int>(e), rep.loss[e], 0, 0, 0});
      auto r = apply_dice(source.rows, *out.classifier, cfg.counterfactual);
      out.theta = std::move(r.deltas);
      out.mapped = std::move(r.mapped);
      out.flipped = std::move(r.flipped);
      out.flip_rate = r.flip_rate;
      return out;
    }
    default:
      break;
  }
  MappingFamily family = MappingFamily::ot();
  if (cfg.method.kind == MethodConfig::Kind::kKCluster) {
    family = MappingFamily::kcluster(frozen ? *frozen : fit_clusters(source.rows, cfg.method.k, seed));
    out.clusters = family.clusters;
  }
  ObjectiveSpec spec = cfg.objective;
  spec.group_aware = cfg.gse;
  OptimizerConfig opt = cfg.optimizer;
  opt.seed = seed;
  std::optional<Matrix> start;
  if (warm) start = warm->theta;
  auto r = optimize(family, source, target, spec, opt, cfg.sinkhorn, start);
  out.theta = std::move(r.theta);
  out.mapped = family.apply(source.rows, out.theta);
  out.trace = std::move(r.trace);
  return out;
}

struct Metrics {
  double pe = 0.0;
  std::vector<GroupPE> group_pe;
  double wg_pe = 0.0;
  double feasible_pct = 0.0;

  json to_json() const {
    json per = json::object();
    for (const auto& g : group_pe) per[std::to_string(g.group)] = g.pe;
    return {{"pe", pe}, {"per_group_pe", per}, {"wg_pe", wg_pe}, {"feasible_pct", feasible_pct}};
  }
};

inline Metrics compute_metrics(const RunConfig& cfg, const LoadedData& data, const Matrix& mapped) {
  Metrics m;
  m.pe = percent_explained(mapped, data.source.rows, data.target.rows, cfg.sinkhorn);
  m.group_pe = group_pe(mapped, data.source, data.target, cfg.sinkhorn);
  m.wg_pe = worst_group_pe(m.group_pe);
  m.feasible_pct = feasibility(data.source, mapped, FeasibilityRule::from_json(cfg.feasibility, data.source.schema),
                               &data.target);
  return m;
}

inline std::vector<std::string> explanation_lines(const RunConfig& cfg, const LoadedData& data, const Fit& fit) {
  std::vector<std::string> lines;
  const bool text = cfg.data.text;
  auto describe = [&](std::span<const double> delta) {
    if (text) {
      const std::string s = ReverseFeaturized{{}, word_edits(delta, data.vocab)}.edit_list();
      return s.empty() ? std::string("no change") : s;
    }
    return render_delta(delta, data.source.schema, data.source.scaling);
  };
  if (fit.clusters) {
    if (!text) return render_explanation(*fit.clusters, {fit.theta}, data.source.schema, data.source.scaling).lines;
    for (std::size_t c = 0; c < fit.clusters->k; ++c) {
      std::size_t members = 0, first = data.source.size();
      for (std::size_t i = 0; i < fit.clusters->assignment.size(); ++i)
        if (fit.clusters->assignment[i] == c) first = std::min(first, i), ++members;
      lines.push_back("cluster " + std::to_string(c + 1) + " (" + std::to_string(members) +
                      " docs): " + describe(fit.theta.row(c)));
      if (first < data.source.size())
        lines.push_back("  e.g. \"" + reverse_featurize(data.source_docs[first], fit.theta.row(c), data.vocab).text +
                        "\"");
    }
    return lines;
  }
  for (std::size_t i = 0; i < fit.theta.rows(); ++i) {
    std::string line = "row " + std::to_string(i + 1) + ": " + describe(fit.theta.row(i));
    if (!fit.flipped.empty() && !fit.flipped[i]) line += " (not flipped)";
    lines.push_back(std::move(line));
  }
  return lines;
}

inline json theta_json(const Fit& fit) {
  json j{{"theta", MethodConfig::matrix_json(fit.theta)}};
  if (fit.clusters) {
    j["clusters"] = {{"k", fit.clusters->k},
                     {"seed", fit.clusters->seed},
                     {"centroids", MethodConfig::matrix_json(fit.clusters->centroids)},
                     {"assignment", fit.clusters->assignment}};
  }
  if (fit.classifier) {
    j["classifier"] = fit.classifier->to_json();
    j["flipped"] = fit.flipped;
    j["flip_rate"] = fit.flip_rate;
  }
  return j;
}

inline Matrix mapped_from_theta(const json& j, const LabeledDataset& source) {
  const Matrix theta = MethodConfig::matrix_from_json(j.at("theta"));
  if (j.contains("clusters")) {
    const auto& c = j["clusters"];
    ClusterModel m{c.at("k").get<std::size_t>(), MethodConfig::matrix_from_json(c.at("centroids")),
                   c.at("assignment").get<std::vector<std::size_t>>(), c.value("seed", std::uint64_t{0})};
    return apply_kcluster(source.rows, m, {theta});
  }
  return apply_ot(source.rows, {theta});
}

// ---------------------------------------------------------------------------
// Files

inline void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cli", "write", "cannot write '" + path.string() + "'");
  out << content;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cli", "read", "missing run artifact '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw Error("cli", "read", "corrupted run artifact '" + path.string() + "': " + e.what());
  }
}

inline std::string trace_csv(const std::vector<TraceRow>& trace, bool dice) {
  std::ostringstream os;
  os << (dice ? "epoch,loss\n" : "iteration,loss,pe,wg_pe,max_residual\n");
  for (const auto& r : trace) {
    os << r.iteration << ',' << csv::format_number(r.loss);
    if (!dice)
      os << ',' << csv::format_number(r.pe) << ',' << csv::format_number(r.wg_pe) << ','
         << csv::format_number(r.max_residual);
    os << '\n';
  }
  return os.str();
}

inline json report_header(const char* command, const RunConfig& cfg) {
  json seeds{{"run", cfg.seed}, {"perturbation", cfg.perturbation.seed}};
  if (cfg.method.kind == MethodConfig::Kind::kKCluster) seeds["clustering"] = cfg.seed;
  if (cfg.method.kind == MethodConfig::Kind::kDice) seeds["classifier"] = cfg.seed;
  return {{"schema_version", kReportSchemaVersion},
          {"tool", "gse"},
          {"version", GSE_VERSION},
          {"command", command},
          {"config", cfg.to_json()},
          {"seeds", seeds}};
}

// Required keys present, every number finite, and wg_pe is the minimum group PE.
inline void validate_report(const json& r) {
  for (const char* key : {"schema_version", "version", "command", "config", "seeds", "pe", "per_group_pe", "wg_pe",
                          "feasible_pct"})
    if (!r.contains(key)) throw Error("cli", "report", std::string("report lacks '") + key + "'");
  if (r["schema_version"] != kReportSchemaVersion) throw Error("cli", "report", "unsupported report schema version");
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& [g, v] : r["per_group_pe"].items()) {
    if (!v.is_number() || !std::isfinite(v.get<double>())) throw Error("cli", "report", "non-finite group PE");
    worst = std::min(worst, v.get<double>());
  }
  for (const char* key : {"pe", "wg_pe", "feasible_pct"})
    if (!r[key].is_number() || !std::isfinite(r[key].get<double>()))
      throw Error("cli", "report", std::string("'") + key + "' is not a finite number");
  if (r["wg_pe"].get<double>() != worst) throw Error("cli", "report", "wg_pe is not the minimum group PE");
}

// ---------------------------------------------------------------------------
// Commands

inline json summarize(const std::vector<double>& v) {
  double mean = 0.0, ss = 0.0;
  for (double x : v) mean += x / static_cast<double>(v.size());
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {{"mean", mean}, {"std", sd}, {"values", v}};
}

// Fits on the configured seed, writes config.json, theta.json,
// explanation.txt, trace.csv and report.json, and returns the report.
inline json cmd_explain(const RunConfig& cfg, const fs::path& out_dir) {
  const LoadedData data = load_data(cfg);
  const Fit fit = fit_explanation(cfg, data.source, data.target, cfg.seed);
  const Metrics m = compute_metrics(cfg, data, fit.mapped);
  const auto lines = explanation_lines(cfg, data, fit);

  json report = report_header("explain", cfg);
  report.update(m.to_json());
  report["explanation"] = lines;
  report["trace_rows"] = fit.trace.size();
  if (fit.classifier) report["flip_rate"] = fit.flip_rate;
  if (cfg.repeats > 1) {
    std::vector<double> pe{m.pe}, wg{m.wg_pe}, feas{m.feasible_pct};
    std::vector<std::uint64_t> seeds{cfg.seed};
    for (int r = 1; r < cfg.repeats; ++r) {
      const std::uint64_t s = cfg.seed + static_cast<std::uint64_t>(r);
      const Metrics mr = compute_metrics(cfg, data, fit_explanation(cfg, data.source, data.target, s).mapped);
      seeds.push_back(s);
      pe.push_back(mr.pe);
      wg.push_back(mr.wg_pe);
      feas.push_back(mr.feasible_pct);
    }
    report["repeats"] = {{"seeds", seeds}, {"pe", summarize(pe)}, {"wg_pe", summarize(wg)},
                         {"feasible_pct", summarize(feas)}};
  }
  validate_report(report);

  fs::create_directories(out_dir);
  write_text(out_dir / "config.json", cfg.to_json().dump(2) + "\n");
  write_text(out_dir / "theta.json", theta_json(fit).dump(2) + "\n");
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text(out_dir / "explanation.txt", text);
  write_text(out_dir / "trace.csv", trace_csv(fit.trace, cfg.method.kind == MethodConfig::Kind::kDice));
  write_text(out_dir / "report.json", report.dump(2) + "\n");
  return report;
}

inline RunConfig config_from_run(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw Error("cli", "read", "run directory '" + run_dir.string() + "' does not exist");
  return run_config_from_json(read_json(run_dir / "config.json"), run_dir);
}

// Recomputes PE, group PE, WG-PE and feasibility from a run's stored
// parameters; writes evaluation.json.
inline json cmd_evaluate(const fs::path& run_dir, const std::optional<json>& feasibility_override = std::nullopt) {
  RunConfig cfg = config_from_run(run_dir);
  if (feasibility_override) cfg.feasibility = *feasibility_override;
  const LoadedData data = load_data(cfg);
  const json theta = read_json(run_dir / "theta.json");
  Matrix mapped;
  try {
    mapped = mapped_from_theta(theta, data.source);
  } catch (const json::exception& e) {
    throw Error("cli", "evaluate", "corrupted theta.json in '" + run_dir.string() + "': " + e.what());
  }
  if (!mapped.same_shape(data.source.rows))
    throw Error("cli", "evaluate", "theta.json does not match the source data");
  json report = report_header("evaluate", cfg);
  report.update(compute_metrics(cfg, data, mapped).to_json());
  validate_report(report);
  write_text(run_dir / "evaluation.json", report.dump(2) + "\n");
  return report;
}

// Fits on P, then on max(trials, worst_trials) perturbations P(e) with seeds
// perturbation.seed + t. omega is the mean over the first `trials`, omega_worst
// the max over all of them. Writes robustness.json and robustness_trials.csv.
inline json cmd_robustness(const RunConfig& cfg, const fs::path& out_dir) {
  const LoadedData data = load_data(cfg);
  const auto& rc = cfg.robustness;
  if (rc.trials == 0 || rc.worst_trials == 0) throw Error("cli", "robustness", "trials must be >= 1");
  const Fit base = fit_explanation(cfg, data.source, data.target, cfg.seed);
  const Metrics m = compute_metrics(cfg, data, base.mapped);

  json report = report_header("robustness", cfg);
  report.update(m.to_json());
  report["explanation"] = explanation_lines(cfg, data, base);

  auto refit = [&](const LabeledDataset& perturbed) {
    const ClusterModel* frozen = rc.freeze_clusters && base.clusters ? &*base.clusters : nullptr;
    return fit_explanation(cfg, perturbed, data.target, cfg.seed, rc.warm_start ? &base : nullptr, frozen, true);
  };

  RobustnessReport rr;
  if (!rc.perturbed_source.empty()) {
    const auto schema = FeatureSchema::load(cfg.data.schema);
    const LabeledDataset pe = rescale_like(ingest_csv(rc.perturbed_source, schema, Role::kSource), data.source);
    const Fit f = refit(pe);
    const FitOutput a{base.mapped, base.flat_theta()}, b{f.mapped, f.flat_theta()};
    const double w = omega(data.source.rows, a, pe.rows, b, rc.omega_mode);
    rr = {w, w, 1, rc.omega_mode, {{cfg.perturbation.seed, w}}, {}};
    report["omega_by_mode"] = {
        {"mapped-outputs", omega(data.source.rows, a, pe.rows, b, OmegaMode::kMappedOutputs)},
        {"parameter-shift", omega(data.source.rows, a, pe.rows, b, OmegaMode::kParameterShift)}};
  } else {
    const std::size_t n = std::max(rc.trials, rc.worst_trials);
    PerturbationSpec spec = cfg.perturbation;
    for (std::size_t t = 0; t < n; ++t) {
      spec.seed = cfg.perturbation.seed + t;
      try {
        const Perturbation p = perturb(data.source, spec);
        const Fit f = refit(p.data);
        rr.per_trial.push_back({spec.seed, omega(data.source.rows, {base.mapped, base.flat_theta()}, p.data.rows,
                                                 {f.mapped, f.flat_theta()}, rc.omega_mode)});
      } catch (const Error& e) {
        rr.failures.push_back({spec.seed, e.what()});
      }
    }
    if (rr.per_trial.empty()) throw Error("metrics-harness", "robustness", "every trial failed");
    rr.mode = rc.omega_mode;
    rr.trials = rr.per_trial.size();
    const std::size_t mean_n = std::min(rc.trials, rr.per_trial.size());
    for (std::size_t t = 0; t < rr.per_trial.size(); ++t) {
      if (t < mean_n) rr.omega += rr.per_trial[t].omega / static_cast<double>(mean_n);
      rr.omega_worst = std::max(rr.omega_worst, rr.per_trial[t].omega);
    }
    rr.omega_worst = std::max(rr.omega_worst, rr.omega);
  }
  report["robustness"] = rr.to_json();
  report["robustness"]["mean_over"] = std::min(rc.trials, rr.trials);
  validate_report(report);

  fs::create_directories(out_dir);
  std::ostringstream trials;
  rr.write_csv(trials);
  write_text(out_dir / "robustness_trials.csv", trials.str());
  write_text(out_dir / "robustness.json", report.dump(2) + "\n");
  return report;
}

// Plot-ready CSVs from a finished run: plot/trace.csv (copied loss trace) and
// plot/group_pe.csv (group, rows, pe). Returns the files written.
inline std::vector<fs::path> cmd_plotdata(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw Error("cli", "plotdata", "run directory '" + run_dir.string() + "' does not exist");
  if (!fs::exists(run_dir / "report.json") || !fs::exists(run_dir / "trace.csv"))
    throw Error("cli", "plotdata", "no run artifacts in '" + run_dir.string() + "'");
  const json report = read_json(run_dir / "report.json");
  const fs::path plot = run_dir / "plot";
  fs::create_directories(plot);
  write_text(plot / "trace.csv", read_text(run_dir / "trace.csv"));
  std::ostringstream g;
  g << "group,pe\n";
  std::vector<std::pair<int, double>> rows;
  for (const auto& [k, v] : report.at("per_group_pe").items()) rows.emplace_back(std::stoi(k), v.get<double>());
  std::sort(rows.begin(), rows.end());
  for (const auto& [k, v] : rows) g << k << ',' << csv::format_number(v) << '\n';
  write_text(plot / "group_pe.csv", g.str());
  return {plot / "trace.csv", plot / "group_pe.csv"};
}

}  // namespace gse
