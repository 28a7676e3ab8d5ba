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
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "gse/data_model.hpp"
#include "gse/kmeans.hpp"
#include "gse/matrix.hpp"

namespace gse {

// K-means partition of the source rows; each cluster shares one displacement.
struct ClusterModel {
  std::size_t k = 1;
  Matrix centroids;
  std::vector<std::size_t> assignment;
  std::uint64_t seed = 0;
};

struct KClusterParams {
  Matrix deltas;  // k x d
};

struct OTParams {
  Matrix deltas;  // n x d
};

inline ClusterModel fit_clusters(const Matrix& source_rows, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > source_rows.rows())
    throw Error("transport-maps", "fit_clusters",
                "k = " + std::to_string(k) + " must lie in [1, " + std::to_string(source_rows.rows()) + "]");
  auto km = kmeans(source_rows, k, seed);
  return {k, std::move(km.centroids), std::move(km.assignment), seed};
}

// M(x; theta) = x + theta[cluster(x)]
inline Matrix apply_kcluster(const Matrix& rows, const ClusterModel& model, const KClusterParams& params) {
  if (model.assignment.size() != rows.rows())
    throw Error("transport-maps", "apply_kcluster", "cluster assignment does not cover the rows");
  if (params.deltas.rows() != model.k || params.deltas.cols() != rows.cols())
    throw Error("transport-maps", "apply_kcluster", "delta shape does not match (k, d)");
  Matrix out = rows;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto o = out.row(i);
    auto d = params.deltas.row(model.assignment[i]);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += d[j];
  }
  return out;
}

// M(x_i; theta_i) = x_i + theta_i
inline Matrix apply_ot(const Matrix& rows, const OTParams& params) {
  if (!params.deltas.same_shape(rows)) throw Error("transport-maps", "apply_ot", "delta shape does not match rows");
  return rows + params.deltas;
}

// ---------------------------------------------------------------------------
// Rendering

struct RenderedTerm {
  std::size_t cluster = 0;
  std::string feature;   // column name, "name=category" for one-hot columns
  double raw_delta = 0;  // unrounded, raw units
  double shown = 0;      // value as displayed
  bool leaves_range = false;
  std::string text;
};

struct RenderedExplanation {
  std::vector<RenderedTerm> terms;
  std::vector<std::string> lines;  // one per cluster

  std::string text() const {
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : terms)
      arr.push_back({{"cluster", t.cluster}, {"feature", t.feature}, {"raw_delta", t.raw_delta},
                     {"shown", t.shown}, {"leaves_range", t.leaves_range}});
    return {{"lines", lines}, {"terms", arr}};
  }
};

namespace detail {

inline std::string format_signed(double v, bool integral) {
  char buf[64];
  if (integral)
    std::snprintf(buf, sizeof buf, "%+.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%+.2f", v);
  return buf;
}

// Columns of one displacement that survive the display threshold, sorted by
// raw magnitude (ties by column name).
inline std::vector<RenderedTerm> render_terms(std::span<const double> delta, std::span<const double> origin,
                                              const FeatureSchema& schema,
                                              const std::vector<ColumnScaling>& scaling, std::size_t cluster) {
  std::vector<RenderedTerm> terms;
  const auto names = schema.column_names();
  std::size_t col = 0;
  for (const auto& f : schema.features()) {
    for (std::size_t k = 0; k < f.width(); ++k, ++col) {
      const double raw = scaling[col].unscale_delta(delta[col]);
      const bool integral = f.discrete();
      const double shown = integral ? std::round(raw) : std::round(raw * 100.0) / 100.0;
      const bool salient =
          integral ? std::abs(raw) >= 0.5 : std::abs(raw) >= 0.01 * scaling[col].range() && shown != 0.0;
      if (!salient) continue;
      RenderedTerm t;
      t.cluster = cluster;
      t.feature = names[col];
      t.raw_delta = raw;
      t.shown = shown;
      if (!origin.empty()) {
        const double moved = origin[col] + delta[col];
        t.leaves_range = moved < -1e-12 || moved > 1.0 + 1e-12;
      }
      t.text = format_signed(shown, integral) + " " + t.feature + (t.leaves_range ? " (beyond observed range)" : "");
      terms.push_back(std::move(t));
    }
  }
  std::stable_sort(terms.begin(), terms.end(), [](const RenderedTerm& a, const RenderedTerm& b) {
    if (std::abs(a.shown) != std::abs(b.shown)) return std::abs(a.shown) > std::abs(b.shown);
    return a.feature < b.feature;
  });
  return terms;
}

inline std::string join_terms(const std::vector<RenderedTerm>& terms) {
  if (terms.empty()) return "no change";
  std::string out;
  for (const auto& t : terms) out += (out.empty() ? "" : ", ") + t.text;
  return out;
}

}  // namespace detail

// Human-readable form of a single scaled-space displacement, e.g.
// "-2 horns, +2 spiky".
inline std::string render_delta(std::span<const double> delta, const FeatureSchema& schema,
                                const std::vector<ColumnScaling>& scaling) {
  return detail::join_terms(detail::render_terms(delta, {}, schema, scaling, 0));
}

inline RenderedExplanation render_explanation(const ClusterModel& model, const KClusterParams& params,
                                              const FeatureSchema& schema,
                                              const std::vector<ColumnScaling>& scaling) {
  RenderedExplanation out;
  for (std::size_t c = 0; c < model.k; ++c) {
    std::size_t members = 0;
    for (auto a : model.assignment) members += a == c;
    std::span<const double> origin;
    if (model.centroids.rows() == model.k) origin = model.centroids.row(c);
    auto terms = detail::render_terms(params.deltas.row(c), origin, schema, scaling, c);
    out.lines.push_back("cluster " + std::to_string(c + 1) + " (" + std::to_string(members) +
                        " rows): " + detail::join_terms(terms));
    out.terms.insert(out.terms.end(), terms.begin(), terms.end());
  }
  return out;
}

}  // namespace gse
