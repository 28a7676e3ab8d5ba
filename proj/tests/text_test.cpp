#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "gse/random.hpp"
#include "gse/text.hpp"

namespace gse {
namespace {

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("The cat's  HAT, 2x!"), (std::vector<std::string>{"the", "cat", "s", "hat", "2x"}));
  EXPECT_TRUE(tokenize("  ..;  ").empty());
}

TEST(BuildVocab, OrdersByFrequency) {
  const auto v = build_vocab({"a b b"}, {}, 2);
  EXPECT_EQ(v.words, (std::vector<std::string>{"b", "a"}));
  EXPECT_EQ(v.frequency, (std::vector<std::size_t>{2, 1}));
}

TEST(BuildVocab, LargeCapKeepsEverything) {
  EXPECT_EQ(build_vocab({"x y"}, {"z"}, 50).size(), 3u);
}

TEST(BuildVocab, TiesAreLexicographic) {
  const auto v = build_vocab({"pear apple pear apple", "apple pear zoo"}, {}, 3);
  EXPECT_EQ(v.words, (std::vector<std::string>{"apple", "pear", "zoo"}));
  EXPECT_EQ(build_vocab({"pear apple pear apple", "apple pear"}, {}, 1).words,
            std::vector<std::string>{"apple"});
}

TEST(BuildVocab, EmptyCorpusIsAnError) { EXPECT_THROW(build_vocab({}, {}), Error); }

TEST(Featurize, CountsAndDropsOutOfVocabulary) {
  Vocabulary v{{"b", "a"}, {2, 1}};
  const auto bow = featurize({"b a b", "", "zzz qqq"}, v);
  EXPECT_EQ(bow.counts, (Matrix{{2, 1}, {0, 0}, {0, 0}}));
  EXPECT_EQ(bow.doc_ids, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(featurize({"a b b"}, v).counts, featurize({"b b a"}, v).counts);
}

TEST(ReverseFeaturize, ZeroDeltaLeavesText) {
  Vocabulary v{{"horns"}, {1}};
  const auto r = reverse_featurize("the horns are long", std::vector<double>{0.2}, v);
  EXPECT_EQ(r.text, "the horns are long");
  EXPECT_TRUE(r.edits.empty());
  EXPECT_EQ(r.edit_list(), "");
}

TEST(ReverseFeaturize, RemovesLeftmostOccurrence) {
  Vocabulary v{{"horns"}, {1}};
  const auto r = reverse_featurize("the horns are long", std::vector<double>{-1.0}, v);
  EXPECT_EQ(r.text, "the are long");
  EXPECT_EQ(r.edit_list(), "-1 horns");
}

TEST(ReverseFeaturize, PrependsAdditions) {
  Vocabulary v{{"spiky"}, {1}};
  const auto r = reverse_featurize("a small fish", std::vector<double>{1.7}, v);
  EXPECT_EQ(r.text, "spiky spiky a small fish");
  EXPECT_EQ(r.edit_list(), "+2 spiky");
  EXPECT_EQ(reverse_featurize("", std::vector<double>{2.0}, v).text, "spiky spiky");
}

TEST(ReverseFeaturize, FigureStyleEditList) {
  Vocabulary v{{"horns", "spiky", "fish"}, {3, 2, 1}};
  const auto r = reverse_featurize("a fish with horns and more horns", std::vector<double>{-2.0, 2.0, 0.0}, v);
  EXPECT_EQ(r.edit_list(), "+2 spiky, -2 horns");
  EXPECT_EQ(r.text, "spiky spiky a fish with and more");
}

TEST(ReverseFeaturize, AbsentRemovalIsRecorded) {
  Vocabulary v{{"horns"}, {1}};
  const auto r = reverse_featurize("one horns", std::vector<double>{-3.0}, v);
  EXPECT_EQ(r.text, "one");
  ASSERT_EQ(r.edits.size(), 1u);
  EXPECT_EQ(r.edits[0].requested, -3);
  EXPECT_EQ(r.edits[0].applied, -1);
}

TEST(ReverseFeaturize, PunctuationDoesNotMergeTokens) {
  Vocabulary v{{"b"}, {1}};
  const auto r = reverse_featurize("a,b,c", std::vector<double>{-1.0}, v);
  EXPECT_EQ(r.text, "a,,c");
  EXPECT_EQ(tokenize(r.text), (std::vector<std::string>{"a", "c"}));
}

TEST(ReverseFeaturize, CountDeltaMatchesClippedRoundedDelta) {
  const std::vector<std::string> words{"red", "blue", "green", "fish", "bird", "tree", "stone", "sky"};
  Rng rng(2026);
  std::vector<std::string> docs;
  for (int d = 0; d < 100; ++d) {
    std::string doc;
    const std::size_t len = rng.index(12);
    for (std::size_t t = 0; t < len; ++t) {
      if (!doc.empty()) doc += rng.coin() ? " " : ", ";
      doc += rng.coin() ? words[rng.index(words.size())] : "Filler";
    }
    docs.push_back(doc);
  }
  const auto vocab = build_vocab(docs, {}, 50);
  for (const auto& doc : docs) {
    std::vector<double> delta(vocab.size());
    for (auto& x : delta) x = 6.0 * rng.uniform() - 3.0;
    const auto before = featurize({doc}, vocab).counts;
    const auto after = featurize({reverse_featurize(doc, delta, vocab).text}, vocab).counts;
    for (std::size_t k = 0; k < vocab.size(); ++k) {
      const double expected = std::max(std::round(delta[k]), -before(0, k));
      EXPECT_EQ(after(0, k) - before(0, k), expected) << doc << " / " << vocab.words[k];
    }
  }
}

TEST(ToLabeled, WordCountsKeepIdentityScale) {
  Vocabulary v{{"b", "a"}, {2, 1}};
  const auto d = to_labeled(featurize({"b a b"}, v), v, Role::kSource);
  EXPECT_EQ(d.raw_value(0, 0), 2.0);
  EXPECT_EQ(d.schema[1].name, "a");
  EXPECT_THROW(to_labeled(featurize({"b"}, v), v, Role::kSource, {1, 2}), Error);
}

TEST(ReadLines, OneDocumentPerLine) {
  const std::string path = ::testing::TempDir() + "gse_text_lines.txt";
  std::ofstream(path) << "first doc\r\n\nthird\n";
  EXPECT_EQ(read_lines(path), (std::vector<std::string>{"first doc", "", "third"}));
  std::ofstream(path) << "1\n2\nx\n";
  EXPECT_THROW(read_group_labels(path), Error);
  EXPECT_THROW(read_lines(path + ".missing"), Error);
}

}  // namespace
}  // namespace gse
