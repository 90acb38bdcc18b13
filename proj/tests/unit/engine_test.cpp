// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "segsat/engine.hpp"
#include "segsat/error.hpp"
#include "support/reference_at.hpp"
#include "support/test_support.hpp"

namespace segsat {
namespace {

constexpr std::size_t kVocab = 32;

// Emits a fixed token sequence per segment; repeats the last token once a script runs out.
class ScriptedPredictor : public StepPredictor {
 public:
  explicit ScriptedPredictor(std::vector<TokenIds> scripts) : scripts_(std::move(scripts)) {}

  std::vector<std::vector<double>> predict(const DecoderLayout& grid,
                                           std::span<const std::size_t> segments) override {
    grids.push_back(grid);
    std::vector<std::vector<double>> out;
    const std::size_t step = grid.l - 1;
    for (auto seg : segments) {
      std::vector<double> row(kVocab, 0.0);
      const auto& s = scripts_[seg];
      row[static_cast<std::size_t>(s[std::min(step, s.size() - 1)])] = 1.0;
      out.push_back(row);
    }
    return out;
  }

  std::vector<DecoderLayout> grids;

 private:
  std::vector<TokenIds> scripts_;
};

Vocabulary figure_vocab() {
  const std::vector<std::string> words = {"there", "are", "lots", "of", "farmers", "doing", "this", "today", "a", "lot", "in", "the"};
  return Vocabulary::from_tokens(words);
}

TokenIds ids(const Vocabulary& v, const std::string& s, TokenId terminal) {
  TokenIds out = encode(v, s);
  out.push_back(terminal);
  return out;
}

TEST(Engine, FigureOneScenario) {
  const auto v = figure_vocab();
  ScriptedPredictor p({ids(v, "there are", kEos), ids(v, "lots of farmers", kEos), ids(v, "a lot", kDel),
                       ids(v, "doing this today", kEos)});
  const auto t = decode(p, 4, 64);
  EXPECT_EQ(decode_ids(v, t.tokens), "there are lots of farmers doing this today");
  EXPECT_EQ(t.deleted_count, 1u);
  EXPECT_EQ(t.steps_used, 4u);
  EXPECT_EQ(t.status[2], SegmentStatus::kDeleted);
}

TEST(Engine, DoubleDeletionRemovesBoth) {
  const auto v = figure_vocab();
  ScriptedPredictor p({ids(v, "there are", kEos), ids(v, "in the", kDel), ids(v, "in", kDel), ids(v, "lots of", kEos)});
  const auto t = decode(p, 4, 64);
  EXPECT_EQ(decode_ids(v, t.tokens), "there are lots of");
  EXPECT_EQ(t.deleted_count, 2u);
}

TEST(Engine, AllDeletedGivesEmptyTranslation) {
  ScriptedPredictor p({{kDel}, {7, kDel}});
  const auto t = decode(p, 2, 10);
  EXPECT_TRUE(t.tokens.empty());
  EXPECT_EQ(t.deleted_count, 2u);
}

TEST(Engine, ImmediateEosFinishesInOneStep) {
  ScriptedPredictor p({{kEos}, {kEos}, {kEos}});
  const auto t = decode(p, 3, 30);
  EXPECT_TRUE(t.tokens.empty());
  EXPECT_EQ(t.steps_used, 1u);
  for (auto s : t.status) EXPECT_EQ(s, SegmentStatus::kFinished);
}

TEST(Engine, CapStopsRunawaySegments) {
  ScriptedPredictor p({{7}, {8}, {9}});
  const auto t = decode(p, 3, 20);  // cap = ceil(20/3) = 7
  EXPECT_EQ(t.steps_used, 7u);
  for (const auto& seg : t.segments) EXPECT_EQ(seg.size(), 7u);
  for (auto s : t.status) EXPECT_EQ(s, SegmentStatus::kFinished);
  EXPECT_EQ(t.tokens.size(), 21u);
  EXPECT_LE(p.grids.size(), 7u + 1u);
}

TEST(Engine, BudgetBelowKRejected) {
  ScriptedPredictor p(std::vector<TokenIds>{TokenIds{kEos}});
  EXPECT_THROW(decode(p, 3, 2), InputError);
  EXPECT_THROW(decode(p, 0, 2), InputError);
}

TEST(Engine, TieBreakPicksLowerIdAndSkipsStructural) {
  std::vector<double> scores(8, 0.0);
  scores[kPad] = 5.0;
  scores[kBos] = 5.0;
  scores[4] = 2.0;
  scores[6] = 2.0;
  EXPECT_EQ(select_token(scores), 4);
  std::vector<double> flat(8, 1.0);
  EXPECT_EQ(select_token(flat), kEos);
}

TEST(Engine, DeletedSegmentStaysInContext) {
  ScriptedPredictor p({{10, 11, 12, 13, kEos}, {14, 15, kDel}});
  const auto t = decode(p, 2, 40);
  ASSERT_GE(p.grids.size(), 4u);
  // Grid at step index 3 (the fourth prediction) shows both DEL-segment tokens and DEL.
  const auto& g = p.grids[3];
  EXPECT_EQ(g.at(1, 1), 14);
  EXPECT_EQ(g.at(1, 2), 15);
  EXPECT_EQ(g.at(1, 3), kDel);
  EXPECT_EQ(t.tokens, (TokenIds{10, 11, 12, 13}));
}

TEST(Engine, StepStatusMachineAndTrace) {
  ScriptedPredictor p({{10, kEos}, {11, 12, kDel}});
  DecodeState state(2, 40);
  state.record_trace = true;
  decode_step(state, p);
  EXPECT_EQ(state.step, 1u);
  decode_step(state, p);
  EXPECT_EQ(state.status[0], SegmentStatus::kFinished);
  EXPECT_EQ(state.emitted[0].size(), 2u);
  decode_step(state, p);
  EXPECT_EQ(state.status[1], SegmentStatus::kDeleted);
  EXPECT_EQ(state.emitted[0].size(), 2u);
  EXPECT_FALSE(state.any_active());
  EXPECT_THROW(decode_step(state, p), InputError);
  ASSERT_EQ(state.trace.size(), 5u);
  EXPECT_EQ(state.trace.back().step, 3u);
  EXPECT_EQ(state.trace.back().token, kDel);
  EXPECT_STREQ(status_name(state.trace.back().status), "deleted");
}

TEST(Engine, PostprocessContract) {
  DecodeState s(3, 30);
  s.emitted = {{5, 6, kEos}, {5, kDel}, {7, kEos}};
  s.status = {SegmentStatus::kFinished, SegmentStatus::kDeleted, SegmentStatus::kFinished};
  const auto t = postprocess(s);
  EXPECT_EQ(t.tokens, (TokenIds{5, 6, 7}));
  EXPECT_EQ(t.deleted_count, 1u);
  EXPECT_EQ(t.steps_used, 3u);
}

TEST(Engine, SingleSegmentMatchesReferenceGreedy) {
  Model<double> m(testing::tiny_config(kVocab), 21);
  testing::ReferenceAt ref(m);
  Rng rng(22);
  for (int i = 0; i < 10; ++i) {
    const TokenIds src = testing::random_ids(rng, static_cast<std::size_t>(rng.uniform_int(2, 8)), kVocab);
    const auto t = decode(m, src, 1, std::size_t{12});
    TokenIds expected = ref.greedy(src, 12);
    EXPECT_EQ(t.segments[0], expected);
  }
}

TEST(Engine, BatchDecodeWorkersAgreeAndIsolateErrors) {
  Model<float> m(testing::tiny_config(kVocab, 32), 23);
  Rng rng(24);
  std::vector<TokenIds> srcs;
  for (int i = 0; i < 12; ++i) srcs.push_back(testing::random_ids(rng, static_cast<std::size_t>(rng.uniform_int(2, 9)), kVocab));
  srcs[5].clear();
  const auto one = batch_decode(m, std::span<const TokenIds>(srcs), 3, std::nullopt, 1);
  const auto four = batch_decode(m, std::span<const TokenIds>(srcs), 3, std::nullopt, 4);
  ASSERT_EQ(one.size(), srcs.size());
  for (std::size_t i = 0; i < srcs.size(); ++i) {
    EXPECT_EQ(one[i].ok(), i != 5);
    EXPECT_EQ(four[i].ok(), i != 5);
    if (i == 5) {
      EXPECT_FALSE(one[i].error.empty());
      continue;
    }
    EXPECT_EQ(one[i].translation->segments, four[i].translation->segments);
    const auto seq = decode(m, srcs[i], 3);
    EXPECT_EQ(seq.segments, one[i].translation->segments);
  }
  EXPECT_TRUE(batch_decode(m, std::span<const TokenIds>(), 2, std::nullopt, 2).empty());
}

TEST(Engine, ModelDecodeRespectsLimits) {
  Model<float> m(testing::tiny_config(kVocab, 32), 25);
  const TokenIds src = {5, 6, 7};
  EXPECT_THROW(decode(m, src, 7), InputError);
  EXPECT_THROW(decode(m, TokenIds{}, 2), InputError);
  const auto t = decode(m, src, 2);
  EXPECT_LE(t.steps_used, (default_budget(3) + 1) / 2);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LE(t.segments[i].size(), (default_budget(3) + 1) / 2);
  }
}

TEST(Engine, IncrementalContextMatchesFullRecompute) {
  // Every emitted token equals the argmax of a fresh full-prefix forward pass.
  Model<double> m(testing::tiny_config(kVocab), 26);
  const TokenIds src = {9, 10, 11, 12};
  const auto t = decode(m, src, 3, std::size_t{15});
  const auto enc = m.encode(std::span<const TokenIds>(&src, 1));
  for (std::size_t step = 0; step < t.steps_used; ++step) {
    std::vector<TokenIds> prefix(3);
    for (std::size_t i = 0; i < 3; ++i)
      prefix[i].assign(t.segments[i].begin(), t.segments[i].begin() + std::min(step, t.segments[i].size()));
    const auto layout = DecoderLayout::from_emitted(prefix, step + 1);
    NoGradGuard g;
    const auto logits = m.decode_logits(layout, enc).value();
    for (std::size_t i = 0; i < 3; ++i) {
      if (step >= t.segments[i].size()) continue;
      const auto row = logits.row(layout.slot(i, step));
      const std::vector<double> scores(row.begin(), row.end());
      EXPECT_EQ(select_token(scores), t.segments[i][step]);
    }
  }
}

}  // namespace
}  // namespace segsat
