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
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gse/data_model.hpp"
#include "gse/error.hpp"
#include "gse/matrix.hpp"

namespace gse {

struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string token;  // lowercased
};

// Maximal runs of ASCII alphanumerics, lowercased.
inline std::vector<TokenSpan> token_spans(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalnum(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    TokenSpan t{i, i, {}};
    while (i < text.size() && std::isalnum(static_cast<unsigned char>(text[i])))
      t.token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i++]))));
    t.end = i;
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : token_spans(text)) out.push_back(std::move(t.token));
  return out;
}

struct Vocabulary {
  std::vector<std::string> words;
  std::vector<std::size_t> frequency;  // corpus count of each word

  std::size_t size() const { return words.size(); }

  std::optional<std::size_t> find(const std::string& w) const {
    auto it = std::find(words.begin(), words.end(), w);
    if (it == words.end()) return std::nullopt;
    return static_cast<std::size_t>(it - words.begin());
  }
};

inline Vocabulary build_vocab(const std::vector<std::string>& source, const std::vector<std::string>& target,
                              std::size_t cap = 50) {
  if (source.empty() && target.empty()) throw Error("text-featurize", "vocab", "corpus is empty");
  if (cap == 0) throw Error("text-featurize", "vocab", "vocabulary cap must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto* corpus : {&source, &target})
    for (const auto& doc : *corpus)
      for (auto& tok : tokenize(doc)) ++counts[tok];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > cap) ranked.resize(cap);
  Vocabulary v;
  for (auto& [w, c] : ranked) {
    v.words.push_back(w);
    v.frequency.push_back(c);
  }
  return v;
}

struct BowDataset {
  Matrix counts;
  std::vector<std::size_t> doc_ids;
};

inline BowDataset featurize(const std::vector<std::string>& texts, const Vocabulary& vocab) {
  BowDataset out{Matrix(texts.size(), vocab.size()), {}};
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < vocab.size(); ++k) index.emplace(vocab.words[k], k);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.doc_ids.push_back(i);
    for (const auto& tok : tokenize(texts[i]))
      if (auto it = index.find(tok); it != index.end()) out.counts(i, it->second) += 1.0;
  }
  return out;
}

// Integer word-count features on the identity scale so deltas read as counts.
inline LabeledDataset to_labeled(const BowDataset& bow, const Vocabulary& vocab, Role role,
                                 std::vector<int> groups = {}) {
  std::vector<Feature> features;
  for (const auto& w : vocab.words) features.push_back({w, FeatureKind::kInteger, true, {}});
  LabeledDataset d;
  d.schema = FeatureSchema(std::move(features));
  d.rows = bow.counts;
  d.role = role;
  d.scaling.assign(vocab.size(), ColumnScaling{0.0, 1.0});
  d.group_of = groups.empty() ? std::vector<int>(bow.counts.rows(), 1) : std::move(groups);
  if (d.group_of.size() != d.rows.rows())
    throw Error("text-featurize", "featurize", "group labels do not match the number of documents");
  d.num_groups = d.group_of.empty() ? 1 : *std::max_element(d.group_of.begin(), d.group_of.end());
  return d;
}

struct WordEdit {
  std::string word;
  int requested = 0;  // rounded delta
  int applied = 0;    // differs from requested when removing absent words
};

struct ReverseFeaturized {
  std::string text;
  std::vector<WordEdit> edits;

  // Additions first, then removals; larger counts first, ties by word.
  std::string edit_list() const {
    std::string out;
    for (const auto& e : edits) {
      if (!out.empty()) out += ", ";
      out += (e.requested > 0 ? "+" : "-") + std::to_string(std::abs(e.requested)) + " " + e.word;
    }
    return out;
  }
};

inline std::vector<WordEdit> word_edits(std::span<const double> delta, const Vocabulary& vocab) {
  if (delta.size() != vocab.size())
    throw Error("text-featurize", "reverse", "delta length does not match the vocabulary");
  std::vector<WordEdit> edits;
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const int r = static_cast<int>(std::lround(delta[k]));
    if (r != 0) edits.push_back({vocab.words[k], r, 0});
  }
  std::stable_sort(edits.begin(), edits.end(), [](const WordEdit& a, const WordEdit& b) {
    if ((a.requested > 0) != (b.requested > 0)) return a.requested > 0;
    if (std::abs(a.requested) != std::abs(b.requested)) return std::abs(a.requested) > std::abs(b.requested);
    return a.word < b.word;
  });
  return edits;
}

inline ReverseFeaturized reverse_featurize(const std::string& text, std::span<const double> delta,
                                           const Vocabulary& vocab) {
  ReverseFeaturized out{text, word_edits(delta, vocab)};
  for (auto& e : out.edits) {
    if (e.requested >= 0) continue;
    int left = -e.requested;
    while (left > 0) {
      const auto spans = token_spans(out.text);
      auto it = std::find_if(spans.begin(), spans.end(), [&](const TokenSpan& s) { return s.token == e.word; });
      if (it == spans.end()) break;
      std::size_t b = it->begin, en = it->end;
      if (en < out.text.size() && std::isspace(static_cast<unsigned char>(out.text[en])))
        ++en;
      else if (b > 0 && std::isspace(static_cast<unsigned char>(out.text[b - 1])))
        --b;
      out.text.erase(b, en - b);
      --left;
      --e.applied;
    }
  }
  std::string prefix;
  for (auto& e : out.edits) {
    if (e.requested <= 0) continue;
    for (int r = 0; r < e.requested; ++r) prefix += e.word + " ";
    e.applied = e.requested;
  }
  if (!prefix.empty()) {
    if (out.text.empty()) prefix.pop_back();
    out.text = prefix + out.text;
  }
  return out;
}

// One document (or label) per line; a trailing newline does not add a document.
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("text-featurize", "load", "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

inline std::vector<int> read_group_labels(const std::string& path) {
  std::vector<int> out;
  std::size_t n = 0;
  for (const auto& l : read_lines(path)) {
    ++n;
    char* end = nullptr;
    const long v = std::strtol(l.c_str(), &end, 10);
    if (l.empty() || *end != '\0' || v < 1)
      throw Error("text-featurize", "load", path + ": line " + std::to_string(n) + ": group label must be an integer >= 1");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

}  // namespace gse
