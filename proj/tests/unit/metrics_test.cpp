// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <json.hpp>

#include "segsat/engine.hpp"
#include "segsat/error.hpp"
#include "segsat/metrics.hpp"
#include "support/metric_oracles.hpp"

namespace segsat {
namespace {

Corpus corpus(std::initializer_list<const char*> lines) {
  std::vector<std::string> l(lines.begin(), lines.end());
  return tokenize_corpus(l);
}

Corpus random_corpus(Rng& rng, std::size_t sentences) {
  Corpus c(sentences);
  for (auto& s : c) {
    const auto len = rng.uniform_int(0, 20);
    for (std::int64_t i = 0; i < len; ++i) s.push_back("w" + std::to_string(rng.uniform_int(0, 9)));
  }
  return c;
}

TEST(RepRatio, WorkedExamples) {
  EXPECT_DOUBLE_EQ(rep_ratio(corpus({"a a b"})), 1.0 / 3.0);
  EXPECT_EQ(rep_ratio(corpus({"a b c d e f g h i j a"})), 0.0);
  EXPECT_DOUBLE_EQ(rep_ratio(corpus({"a b c d e f g h i a"})), 0.1);
  EXPECT_EQ(rep_ratio(corpus({""})), 0.0);
  EXPECT_EQ(rep_ratio(Corpus{}), 0.0);
}

TEST(RepRatio, MatchesOracleAndIgnoresOrder) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    Corpus c = random_corpus(rng, static_cast<std::size_t>(rng.uniform_int(1, 6)));
    ASSERT_EQ(rep_ratio(c), testing::ratio(testing::rep_counts(c)));
    Corpus r(c.rbegin(), c.rend());
    ASSERT_EQ(rep_ratio(r), rep_ratio(c));
  }
}

TEST(MisRatio, WorkedExamples) {
  EXPECT_DOUBLE_EQ(mis_ratio(corpus({"a b"}), corpus({"a b b c"})), 0.5);
  EXPECT_EQ(mis_ratio(corpus({"x y z"}), corpus({"x y z"})), 0.0);
  EXPECT_EQ(mis_ratio(corpus({""}), corpus({"a a"})), 1.0);
  EXPECT_THROW(mis_ratio(corpus({"a"}), corpus({"a", "b"})), InputError);
}

TEST(MisRatio, MatchesOracleAndZeroIffCovered) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 6));
    Corpus h = random_corpus(rng, n), r = random_corpus(rng, n);
    ASSERT_EQ(mis_ratio(h, r), testing::ratio(testing::mis_counts(h, r)));
    bool covered = true;
    for (std::size_t k = 0; k < n; ++k)
      for (const auto& w : r[k])
        covered &= std::count(h[k].begin(), h[k].end(), w) >= std::count(r[k].begin(), r[k].end(), w);
    ASSERT_EQ(mis_ratio(h, r) == 0.0, covered);
  }
}

TEST(Increments, DefinitionsAndUndefinedCases) {
  const Corpus at = corpus({"a a b"});
  EXPECT_EQ(rep_increment(at, at), 0.0);
  const Corpus clean = corpus({"a b c"});
  EXPECT_THROW(rep_increment(clean, clean), UndefinedMetricError);
  const Corpus refs = corpus({"a b c d"});
  const Corpus hyp = corpus({"a b"}), at_hyp = corpus({"a b c"});
  EXPECT_DOUBLE_EQ(mis_increment(hyp, at_hyp, refs), (0.5 - 0.25) / 0.25);
  EXPECT_EQ(mis_increment(at_hyp, at_hyp, refs), 0.0);
  EXPECT_THROW(mis_increment(hyp, refs, refs), UndefinedMetricError);
}

TEST(Increments, RelativeArithmetic) {
  // r(hyp) = 2/100, r(at) = 1/100.
  Sentence h, a;
  for (int i = 0; i < 100; ++i) {
    h.push_back("t" + std::to_string(i));
    a.push_back("t" + std::to_string(i));
  }
  h[10] = h[9];
  h[50] = h[49];
  a[10] = a[9];
  EXPECT_DOUBLE_EQ(rep_increment(Corpus{h}, Corpus{a}), 1.0);
}

TEST(Bleu, IdentityZeroAndClipping) {
  const Corpus refs = corpus({"the cat sat on the mat", "a b c d e"});
  EXPECT_DOUBLE_EQ(bleu(refs, refs), 100.0);
  EXPECT_EQ(bleu(corpus({"x y z w v u", "q r s t"}), refs), 0.0);
  // "the the the" vs "the cat": clipped unigram precision 1/3, so BLEU-1 = 1/3 x brevity 1.
  EXPECT_NEAR(bleu(corpus({"the the the"}), corpus({"the cat"}), 1), 100.0 / 3.0, 1e-12);
}

TEST(Bleu, MatchesOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Corpus r = random_corpus(rng, n);
    Corpus h = r;
    for (auto& s : h)
      for (auto& w : s)
        if (rng.bernoulli(0.2)) w = "w" + std::to_string(rng.uniform_int(0, 9));
    EXPECT_NEAR(bleu(h, r), testing::bleu_oracle(h, r), 1e-9);
  }
}

TEST(AvgSteps, Mean) {
  std::vector<Translation> ts(2);
  ts[0].steps_used = 5;
  ts[1].steps_used = 2;
  EXPECT_DOUBLE_EQ(avg_steps(ts), 3.5);
  EXPECT_DOUBLE_EQ(avg_steps(std::span<const Translation>(ts.data(), 1)), 5.0);
}

TEST(Report, OmitsIncrementsWithoutReference) {
  const Corpus c = corpus({"a b c", "d e f g"});
  const auto r = evaluate_corpus(c, c);
  const auto j = nlohmann::json::parse(r.to_json());
  EXPECT_DOUBLE_EQ(j["bleu"].get<double>(), 100.0);
  EXPECT_EQ(j["rep_ratio"], 0.0);
  EXPECT_EQ(j["mis_ratio"], 0.0);
  EXPECT_FALSE(j.contains("rep_increment"));
  EXPECT_FALSE(j.contains("mis_increment"));
  const auto with_at = nlohmann::json::parse(evaluate_corpus(c, c, &c).to_json());
  EXPECT_EQ(with_at["rep_increment"], 0.0);
  EXPECT_EQ(with_at["mis_increment"], 0.0);
  EXPECT_NE(r.to_table().find("BLEU"), std::string::npos);
}

TEST(Report, NoteWhenIncrementUndefined) {
  const Corpus refs = corpus({"a b c"});
  const Corpus hyp = corpus({"a a"});
  const auto r = evaluate_corpus(hyp, refs, &refs);
  EXPECT_FALSE(r.rep_increment.has_value());
  EXPECT_FALSE(r.mis_increment.has_value());
  EXPECT_EQ(r.notes.size(), 2u);
}

TEST(Report, TableUsesPercentages) {
  MetricReport r;
  r.rep_ratio = 0.0709;
  r.bleu = 27.114;
  EXPECT_NE(r.to_table().find("7.09%"), std::string::npos);
  EXPECT_NE(r.to_table().find("27.11"), std::string::npos);
}

}  // namespace
}  // namespace segsat
