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
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "gse/error.hpp"
#include "gse/kmeans.hpp"
#include "gse/matrix.hpp"

namespace gse {

enum class FeatureKind { kReal, kInteger, kBoolean, kCategorical };

inline const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::kReal: return "real";
    case FeatureKind::kInteger: return "integer";
    case FeatureKind::kBoolean: return "boolean";
    case FeatureKind::kCategorical: return "categorical";
  }
  return "?";
}

inline FeatureKind parse_feature_kind(const std::string& s) {
  if (s == "real") return FeatureKind::kReal;
  if (s == "integer") return FeatureKind::kInteger;
  if (s == "boolean") return FeatureKind::kBoolean;
  if (s == "categorical") return FeatureKind::kCategorical;
  throw Error("data-model", "schema", "unknown feature kind '" + s + "'");
}

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::kReal;
  bool actionable = true;
  std::vector<std::string> categories;  // categorical only

  // Number of explanation-space columns this feature expands to.
  std::size_t width() const { return kind == FeatureKind::kCategorical ? categories.size() : 1; }
  bool discrete() const { return kind != FeatureKind::kReal; }
};

// Ordered feature descriptions. Feature order is the column order of every
// matrix downstream; categorical features expand into one column per category.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<Feature> features) : features_(std::move(features)) {
    validate();
  }

  const std::vector<Feature>& features() const { return features_; }
  std::size_t size() const { return features_.size(); }
  const Feature& operator[](std::size_t i) const { return features_[i]; }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < features_.size(); ++i)
      if (features_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t index_of(const std::string& name, const char* stage) const {
    auto i = find(name);
    if (!i) throw Error("data-model", stage, "unknown feature '" + name + "'");
    return *i;
  }

  std::size_t num_columns() const {
    std::size_t n = 0;
    for (const auto& f : features_) n += f.width();
    return n;
  }

  // First explanation-space column of feature i.
  std::size_t column_offset(std::size_t i) const {
    std::size_t off = 0;
    for (std::size_t j = 0; j < i; ++j) off += features_[j].width();
    return off;
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> out;
    for (const auto& f : features_) {
      if (f.kind == FeatureKind::kCategorical) {
        for (const auto& c : f.categories) out.push_back(f.name + "=" + c);
      } else {
        out.push_back(f.name);
      }
    }
    return out;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& f : features_) {
      if (f.name.empty()) throw Error("data-model", "schema", "feature name is empty");
      if (!seen.insert(f.name).second)
        throw Error("data-model", "schema", "duplicate feature name '" + f.name + "'");
      if (f.kind == FeatureKind::kCategorical) {
        if (f.categories.size() < 2)
          throw Error("data-model", "schema",
                      "categorical feature '" + f.name + "' needs at least 2 categories");
        std::set<std::string> cats(f.categories.begin(), f.categories.end());
        if (cats.size() != f.categories.size())
          throw Error("data-model", "schema", "duplicate category in '" + f.name + "'");
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : features_) {
      nlohmann::json j{{"name", f.name}, {"kind", to_string(f.kind)}, {"actionable", f.actionable}};
      if (f.kind == FeatureKind::kCategorical) j["categories"] = f.categories;
      arr.push_back(std::move(j));
    }
    return {{"features", arr}};
  }

  static FeatureSchema from_json(const nlohmann::json& j) {
    if (!j.contains("features") || !j["features"].is_array())
      throw Error("data-model", "schema", "schema must contain a 'features' array");
    std::vector<Feature> out;
    for (const auto& fj : j["features"]) {
      Feature f;
      f.name = fj.at("name").get<std::string>();
      f.kind = parse_feature_kind(fj.at("kind").get<std::string>());
      f.actionable = fj.value("actionable", true);
      if (fj.contains("categories")) f.categories = fj["categories"].get<std::vector<std::string>>();
      out.push_back(std::move(f));
    }
    return FeatureSchema(std::move(out));
  }

  static FeatureSchema load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("data-model", "schema", "cannot open schema file '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error("data-model", "schema", "malformed schema file '" + path + "': " + e.what());
    }
    return from_json(j);
  }

  friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
    return a.to_json() == b.to_json();
  }

 private:
  std::vector<Feature> features_;
};

enum class Role { kSource, kTarget };

inline const char* to_string(Role r) { return r == Role::kSource ? "source" : "target"; }

// ---------------------------------------------------------------------------
// CSV

namespace csv {

// RFC-4180 record splitting: quoted fields, doubled quotes, CRLF tolerated.
inline std::vector<std::vector<std::string>> parse(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, field_started = false, any = false;
  char ch;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  while (in.get(ch)) {
    any = true;
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      end_field();
      records.push_back(std::move(record));
      record.clear();
    } else if (ch == '\r') {
      // dropped; the following '\n' ends the record
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (quoted) throw Error("data-model", "ingest", "unterminated quoted field");
  if (any && (field_started || !field.empty() || !record.empty())) {
    end_field();
    records.push_back(std::move(record));
  }
  // Blank lines carry no data.
  std::erase_if(records, [](const auto& r) { return r.size() == 1 && r[0].empty(); });
  return records;
}

inline std::string escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << escape(cells[i]);
  }
  out << '\n';
}

// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace csv

// A table as read from disk, columns in schema order. `values` holds the
// numeric reading of each cell (booleans 0/1, categories as their index);
// `cells` keeps the original text.
struct RawTable {
  FeatureSchema schema;
  Role role = Role::kSource;
  Matrix values;
  std::vector<std::vector<std::string>> cells;

  std::size_t rows() const { return values.rows(); }

  void write_csv(std::ostream& out) const {
    std::vector<std::string> header;
    for (const auto& f : schema.features()) header.push_back(f.name);
    csv::write_row(out, header);
    for (const auto& r : cells) csv::write_row(out, r);
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<double> parse_cell(const Feature& f, const std::string& raw) {
  const std::string s = trim(raw);
  switch (f.kind) {
    case FeatureKind::kReal: return parse_number(s);
    case FeatureKind::kInteger: {
      auto v = parse_number(s);
      if (!v || std::floor(*v) != *v) return std::nullopt;
      return v;
    }
    case FeatureKind::kBoolean: {
      std::string l = s;
      std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
      if (l == "1" || l == "true" || l == "yes") return 1.0;
      if (l == "0" || l == "false" || l == "no") return 0.0;
      return std::nullopt;
    }
    case FeatureKind::kCategorical: {
      for (std::size_t k = 0; k < f.categories.size(); ++k)
        if (f.categories[k] == s) return static_cast<double>(k);
      return std::nullopt;
    }
  }
  return std::nullopt;
}

}  // namespace detail

inline RawTable ingest_csv(std::istream& in, const FeatureSchema& schema, Role role,
                           const std::string& label = "<stream>") {
  const auto records = csv::parse(in);
  if (records.empty()) throw Error("data-model", "ingest", label + ": empty file");
  const auto& header = records.front();

  std::vector<std::size_t> col_of_feature(schema.size(), header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = detail::trim(header[c]);
    auto fi = schema.find(name);
    if (!fi) throw Error("data-model", "ingest", label + ": column '" + name + "' is not in the schema");
    col_of_feature[*fi] = c;
  }
  for (std::size_t f = 0; f < schema.size(); ++f)
    if (col_of_feature[f] == header.size())
      throw Error("data-model", "ingest", label + ": missing column '" + schema[f].name + "'");

  RawTable t{schema, role, Matrix(records.size() - 1, schema.size()), {}};
  if (t.values.rows() == 0) throw Error("data-model", "ingest", label + ": no data rows");
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size())
      throw Error("data-model", "ingest",
                  label + ": row " + std::to_string(r) + " has " + std::to_string(rec.size()) +
                      " cells, expected " + std::to_string(header.size()));
    std::vector<std::string> ordered(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const std::string& cell = rec[col_of_feature[f]];
      auto v = detail::parse_cell(schema[f], cell);
      if (!v || !std::isfinite(*v))
        throw Error("data-model", "ingest",
                    label + ": row " + std::to_string(r) + ", column '" + schema[f].name +
                        "': cannot parse '" + cell + "' as " + to_string(schema[f].kind));
      t.values(r - 1, f) = *v;
      ordered[f] = cell;
    }
    t.cells.push_back(std::move(ordered));
  }
  return t;
}

inline RawTable ingest_csv(const std::string& path, const FeatureSchema& schema, Role role) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("data-model", "ingest", "cannot open '" + path + "'");
  return ingest_csv(in, schema, role, path);
}

// ---------------------------------------------------------------------------
// Explanation space

struct ColumnScaling {
  double min = 0.0;
  double max = 0.0;

  double range() const { return max - min; }
  // Constant columns map to 0.
  double scale(double raw) const { return range() > 0.0 ? (raw - min) / range() : 0.0; }
  double unscale(double scaled) const { return range() > 0.0 ? scaled * range() + min : min; }
  // Raw-unit size of a scaled-space displacement.
  double unscale_delta(double delta) const { return delta * range(); }
};

// A dataset in explanation space: one-hot expanded, min-max scaled with
// statistics shared between source and target.
struct LabeledDataset {
  FeatureSchema schema;
  Matrix rows;
  std::vector<int> group_of;  // 1..num_groups
  int num_groups = 1;
  Role role = Role::kSource;
  std::vector<ColumnScaling> scaling;  // one per column

  std::size_t size() const { return rows.rows(); }
  std::size_t dim() const { return rows.cols(); }

  // Raw value of feature f in a scaled row: integers and booleans rounded,
  // categoricals decoded to the index of the largest one-hot entry.
  double raw_value(std::span<const double> row, std::size_t f) const {
    const Feature& feat = schema[f];
    const std::size_t off = schema.column_offset(f);
    if (feat.kind == FeatureKind::kCategorical) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < feat.width(); ++k)
        if (scaling[off + k].unscale(row[off + k]) > scaling[off + best].unscale(row[off + best])) best = k;
      return static_cast<double>(best);
    }
    const double v = scaling[off].unscale(row[off]);
    return feat.kind == FeatureKind::kReal ? v : std::round(v);
  }

  double raw_value(std::size_t i, std::size_t f) const { return raw_value(rows.row(i), f); }

  // Writes raw value v of feature f into a scaled row.
  void set_raw_value(std::span<double> row, std::size_t f, double v) const {
    const Feature& feat = schema[f];
    const std::size_t off = schema.column_offset(f);
    if (feat.kind == FeatureKind::kCategorical) {
      const auto idx = static_cast<std::size_t>(v);
      for (std::size_t k = 0; k < feat.width(); ++k)
        row[off + k] = scaling[off + k].scale(k == idx ? 1.0 : 0.0);
      return;
    }
    row[off] = scaling[off].scale(v);
  }

  // Inverse of the min-max scaling on every column.
  Matrix unscaled() const {
    Matrix out = rows;
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t c = 0; c < out.cols(); ++c) out(i, c) = scaling[c].unscale(rows(i, c));
    return out;
  }

  LabeledDataset with_rows(Matrix new_rows) const {
    LabeledDataset d = *this;
    d.rows = std::move(new_rows);
    return d;
  }
};

inline std::pair<LabeledDataset, LabeledDataset> preprocess(const RawTable& source,
                                                            const RawTable& target) {
  if (!(source.schema == target.schema))
    throw Error("data-model", "preprocess", "source and target schemas differ");
  const FeatureSchema& schema = source.schema;
  const std::size_t cols = schema.num_columns();

  auto expand = [&](const RawTable& t) {
    Matrix m(t.rows(), cols);
    for (std::size_t i = 0; i < t.rows(); ++i) {
      std::size_t c = 0;
      for (std::size_t f = 0; f < schema.size(); ++f) {
        const double v = t.values(i, f);
        if (!std::isfinite(v))
          throw Error("data-model", "preprocess",
                      "non-finite value in row " + std::to_string(i) + ", feature '" + schema[f].name + "'");
        if (schema[f].kind == FeatureKind::kCategorical) {
          for (std::size_t k = 0; k < schema[f].width(); ++k)
            m(i, c + k) = static_cast<std::size_t>(v) == k ? 1.0 : 0.0;
        } else {
          m(i, c) = v;
        }
        c += schema[f].width();
      }
    }
    return m;
  };
  Matrix s = expand(source), t = expand(target);

  std::vector<ColumnScaling> scaling(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const Matrix* m : {&s, &t})
      for (std::size_t i = 0; i < m->rows(); ++i) {
        lo = std::min(lo, (*m)(i, c));
        hi = std::max(hi, (*m)(i, c));
      }
    scaling[c] = {lo, hi};
  }
  for (Matrix* m : {&s, &t})
    for (std::size_t i = 0; i < m->rows(); ++i)
      for (std::size_t c = 0; c < cols; ++c) (*m)(i, c) = scaling[c].scale((*m)(i, c));

  LabeledDataset ls{schema, std::move(s), std::vector<int>(source.rows(), 1), 1, Role::kSource, scaling};
  LabeledDataset lt{schema, std::move(t), std::vector<int>(target.rows(), 1), 1, Role::kTarget, scaling};
  return {std::move(ls), std::move(lt)};
}

// ---------------------------------------------------------------------------
// Groups

struct ByAttribute {
  std::string feature;
};
struct ByMetafeatureQuartiles {
  std::string numerator;    // squared
  std::string denominator;  // divides
};
struct ByClustering {
  std::size_t k = 2;
  std::uint64_t seed = 0;
};
using GroupingRule = std::variant<ByAttribute, ByMetafeatureQuartiles, ByClustering>;

inline nlohmann::json to_json(const GroupingRule& rule) {
  return std::visit(
      [](const auto& r) -> nlohmann::json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ByAttribute>)
          return {{"type", "attribute"}, {"feature", r.feature}};
        else if constexpr (std::is_same_v<T, ByMetafeatureQuartiles>)
          return {{"type", "metafeature-quartiles"}, {"numerator", r.numerator}, {"denominator", r.denominator}};
        else
          return {{"type", "clustering"}, {"k", r.k}, {"seed", r.seed}};
      },
      rule);
}

inline GroupingRule grouping_rule_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "attribute") return ByAttribute{j.at("feature").get<std::string>()};
  if (type == "metafeature-quartiles")
    return ByMetafeatureQuartiles{j.at("numerator").get<std::string>(), j.at("denominator").get<std::string>()};
  if (type == "clustering") return ByClustering{j.at("k").get<std::size_t>(), j.value("seed", std::uint64_t{0})};
  if (type == "none") return ByClustering{1, 0};
  throw Error("data-model", "groups", "unknown grouping rule '" + type + "'");
}

// Linear-interpolation quantile of sorted values.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::pair<LabeledDataset, LabeledDataset> assign_groups(LabeledDataset source, LabeledDataset target,
                                                               const GroupingRule& rule) {
  const std::size_t ns = source.size(), nt = target.size();
  std::vector<int> labels(ns + nt, 1);
  int groups = 1;
  auto raw = [&](std::size_t i, std::size_t f) {
    return i < ns ? source.raw_value(i, f) : target.raw_value(i - ns, f);
  };

  if (const auto* a = std::get_if<ByAttribute>(&rule)) {
    const std::size_t f = source.schema.index_of(a->feature, "groups");
    std::map<double, int> ids;
    for (std::size_t i = 0; i < ns + nt; ++i) ids.emplace(raw(i, f), 0);
    int next = 1;
    for (auto& [v, id] : ids) id = next++;
    for (std::size_t i = 0; i < ns + nt; ++i) labels[i] = ids.at(raw(i, f));
    groups = static_cast<int>(ids.size());
  } else if (const auto* m = std::get_if<ByMetafeatureQuartiles>(&rule)) {
    const std::size_t fn = source.schema.index_of(m->numerator, "groups");
    const std::size_t fd = source.schema.index_of(m->denominator, "groups");
    for (std::size_t f : {fn, fd})
      if (source.schema[f].kind != FeatureKind::kReal)
        throw Error("data-model", "groups", "meta-feature input '" + source.schema[f].name + "' must be real");
    std::vector<double> meta(ns + nt);
    for (std::size_t i = 0; i < ns + nt; ++i) {
      const double den = raw(i, fd);
      if (den == 0.0)
        throw Error("data-model", "groups",
                    "meta-feature undefined: '" + m->denominator + "' is zero in " +
                        (i < ns ? "source" : "target") + " row " + std::to_string(i < ns ? i : i - ns));
      const double num = raw(i, fn);
      meta[i] = num * num / den;
    }
    std::vector<double> sorted = meta;
    std::sort(sorted.begin(), sorted.end());
    const double q1 = quantile_sorted(sorted, 0.25), q3 = quantile_sorted(sorted, 0.75);
    for (std::size_t i = 0; i < ns + nt; ++i) labels[i] = meta[i] <= q1 ? 1 : (meta[i] <= q3 ? 2 : 3);
    groups = 3;
    for (int g = 1; g <= 3; ++g)
      if (std::find(labels.begin(), labels.end(), g) == labels.end())
        throw Error("data-model", "groups", "quartile thresholds left group " + std::to_string(g) + " empty");
  } else {
    const auto& c = std::get<ByClustering>(rule);
    Matrix all(ns + nt, source.dim());
    for (std::size_t i = 0; i < ns; ++i) std::copy(source.rows.row(i).begin(), source.rows.row(i).end(), all.row(i).begin());
    for (std::size_t i = 0; i < nt; ++i) std::copy(target.rows.row(i).begin(), target.rows.row(i).end(), all.row(ns + i).begin());
    const auto km = kmeans(all, c.k, c.seed);
    for (std::size_t i = 0; i < ns + nt; ++i) labels[i] = static_cast<int>(km.assignment[i]) + 1;
    groups = static_cast<int>(c.k);
  }

  source.group_of.assign(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(ns));
  target.group_of.assign(labels.begin() + static_cast<std::ptrdiff_t>(ns), labels.end());
  source.num_groups = target.num_groups = groups;
  return {std::move(source), std::move(target)};
}

struct GroupSlice {
  int group = 1;
  std::vector<std::size_t> rows;
};

// Row indices of each group present in the dataset, ordered by group id.
inline std::vector<GroupSlice> group_slices(const LabeledDataset& d) {
  std::map<int, std::vector<std::size_t>> by;
  for (std::size_t i = 0; i < d.group_of.size(); ++i) by[d.group_of[i]].push_back(i);
  std::vector<GroupSlice> out;
  for (auto& [g, rows] : by) out.push_back({g, std::move(rows)});
  return out;
}

// Paired slices for every group; a group empty on either side is an error.
inline std::vector<std::pair<GroupSlice, GroupSlice>> matched_group_slices(const LabeledDataset& source,
                                                                           const LabeledDataset& target) {
  auto s = group_slices(source), t = group_slices(target);
  std::set<int> ids;
  for (const auto& x : s) ids.insert(x.group);
  for (const auto& x : t) ids.insert(x.group);
  for (int g = 1; g <= std::max(source.num_groups, target.num_groups); ++g) ids.insert(g);
  std::vector<int> missing_s, missing_t;
  auto has = [](const std::vector<GroupSlice>& v, int g) {
    return std::any_of(v.begin(), v.end(), [g](const GroupSlice& x) { return x.group == g; });
  };
  for (int g : ids) {
    if (!has(s, g)) missing_s.push_back(g);
    if (!has(t, g)) missing_t.push_back(g);
  }
  if (!missing_s.empty() || !missing_t.empty()) {
    auto list = [](const std::vector<int>& v) {
      std::string out;
      for (int g : v) out += (out.empty() ? "" : ", ") + std::to_string(g);
      return out;
    };
    std::string msg = "empty group slice:";
    if (!missing_s.empty()) msg += " source lacks group(s) " + list(missing_s) + ";";
    if (!missing_t.empty()) msg += " target lacks group(s) " + list(missing_t) + ";";
    throw Error("data-model", "groups", msg);
  }
  std::vector<std::pair<GroupSlice, GroupSlice>> out;
  for (std::size_t k = 0; k < s.size(); ++k) out.emplace_back(std::move(s[k]), std::move(t[k]));
  return out;
}

}  // namespace gse
