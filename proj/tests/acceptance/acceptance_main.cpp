// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero when
// any criterion fails. Optional arguments select criteria by number.

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "segsat/commands.hpp"
#include "segsat/engine.hpp"
#include "segsat/log.hpp"
#include "segsat/metrics.hpp"
#include "segsat/model.hpp"
#include "segsat/segmenter.hpp"
#include "segsat/training.hpp"
#include "segsat/vocab.hpp"
#include "support/metric_oracles.hpp"
#include "support/reference_at.hpp"
#include "support/test_support.hpp"
#include "support/toy_data.hpp"

namespace segsat {
namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail << "first failure: " << what << "; ";
      pass = false;
    }
  }
};

double cpu_seconds() { return double(std::clock()) / CLOCKS_PER_SEC; }

// ---------------------------------------------------------------------------
// 1. Step mask

void mask_fidelity(Outcome& o) {
  Rng rng(101);
  std::size_t probes = 0, perturbations = 0;
  for (int trial = 0; trial < 6; ++trial) {
    ModelConfig c = testing::tiny_config(30);
    c.d_model = trial % 2 ? 32 : 16;
    c.n_head = trial % 3 == 0 ? 1 : 2;
    Model<double> m(c, 200 + static_cast<std::uint64_t>(trial));
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const auto l = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const TokenIds src = testing::random_ids(rng, static_cast<std::size_t>(rng.uniform_int(2, 7)), 30);
    std::vector<TokenIds> emitted(k);
    for (auto& e : emitted) e = testing::random_ids(rng, l, 30);
    const auto layout = DecoderLayout::from_emitted(emitted, l);
    const std::span<const DecoderLayout> layouts(&layout, 1);
    const auto encoded = m.encode(std::span<const TokenIds>(&src, 1));
    const auto embedded = m.embed_decoder_inputs(layouts).value();

    for (std::size_t probe = 0; probe < layout.slots.size(); ++probe) {
      Var<double> x(embedded, true);
      auto logits = m.project(m.decoder_stack(x, layouts, encoded));
      Tensor<double> w(logits.shape());
      for (std::size_t v = 0; v < c.vocab_size; ++v) w(probe, v) = rng.normal();
      ag::sum(ag::mul(logits, ag::constant(w))).backward();
      const std::size_t t = layout.step_of(probe);
      for (std::size_t slot = 0; slot < layout.slots.size(); ++slot) {
        if (layout.step_of(slot) <= t) continue;
        for (std::size_t j = 0; j < c.d_model; ++j) o.require(x.grad()(slot, j) == 0.0, "nonzero later-step gradient");
      }
      ++probes;
    }

    NoGradGuard no_grad;
    const auto base = m.decode_logits(layout, encoded).value();
    for (std::size_t slot = 0; slot < layout.slots.size(); ++slot) {
      if (layout.step_of(slot) == 0) continue;
      auto perturbed = layout;
      perturbed.slots[slot] = perturbed.slots[slot] == 5 ? 6 : 5;
      const auto changed = m.decode_logits(perturbed, encoded).value();
      for (std::size_t q = 0; q < layout.slots.size(); ++q) {
        if (layout.step_of(q) >= layout.step_of(slot)) continue;
        for (std::size_t v = 0; v < c.vocab_size; ++v) o.require(base(q, v) == changed(q, v), "perturbation leaked");
      }
      ++perturbations;
    }
  }
  o.detail << probes << " gradient probes, " << perturbations << " perturbations";
}

// ---------------------------------------------------------------------------
// 2. K=1 against a plain autoregressive decoder

void at_degeneracy(Outcome& o) {
  ModelConfig c = testing::tiny_config(40);
  c.max_step = 24;
  Model<double> m(c, 301);
  // Sharpen the random model so greedy outputs vary in length and content.
  for (const auto& p : m.parameters())
    if (p->name.find("token_embedding") != std::string::npos)
      for (std::size_t i = 0; i < p->var.value().size(); ++i) p->var.mutable_value()[i] *= 4.0;
  testing::ReferenceAt ref(m);
  Rng rng(302);
  std::size_t token_mismatch = 0, tokens = 0;
  double worst_loss = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const TokenIds src = testing::random_ids(rng, static_cast<std::size_t>(rng.uniform_int(1, 10)), 40);
    const TokenIds tgt = testing::random_ids(rng, static_cast<std::size_t>(rng.uniform_int(1, 12)), 40);
    const auto budget = default_budget(src.size());
    const Translation mine = decode(m, src, 1, budget);
    const TokenIds theirs = ref.greedy(src, std::min(budget, c.max_step));
    tokens += theirs.size();
    if (mine.segments.at(0) != theirs) ++token_mismatch;

    SegmentedTarget st;
    st.segments = {tgt};
    st.terminals = {kEos};
    std::size_t count = 0;
    const double expected = ref.loss_sum(src, tgt, c.eps_ls, &count) / double(count);
    NoGradGuard g;
    const double got = m.training_loss(std::span<const TokenIds>(&src, 1), std::span<const SegmentedTarget>(&st, 1))
                           .value()[0];
    worst_loss = std::max(worst_loss, std::abs(got - expected) / std::max(1.0, std::abs(expected)));
  }
  o.require(token_mismatch == 0, "greedy output differs");
  o.require(worst_loss < 1e-10, "loss differs");
  o.detail << "100 inputs, " << tokens << " reference tokens, " << token_mismatch
           << " mismatching decodes, max loss rel diff " << worst_loss;
}

// ---------------------------------------------------------------------------
// 3. Finite differences on the full loss

void gradient_check(Outcome& o) {
  ModelConfig c = testing::tiny_config(18);
  c.d_model = 8;
  c.d_hidden = 12;
  c.max_segments = 4;
  Model<double> m(c, 401);
  Rng rng(402);
  std::vector<TokenIds> srcs, tgts;
  std::vector<SegmentedTarget> targets;
  for (int b = 0; b < 3; ++b) {
    srcs.push_back(testing::random_ids(rng, static_cast<std::size_t>(rng.uniform_int(3, 6)), 18));
    const TokenIds tgt = testing::random_ids(rng, static_cast<std::size_t>(rng.uniform_int(4, 8)), 18);
    targets.push_back(make_training_target(tgt, 3, 0.5, b == 0 ? 1.0 : 0.0, rng));
  }
  auto loss = [&] { return m.training_loss(srcs, targets).value()[0]; };
  for (const auto& p : m.parameters()) p->var.zero_grad();
  m.training_loss(srcs, targets).backward();

  // A key bias shifts every score of a query row equally, so softmax cancels it and its
  // true gradient is zero. Central differences cannot resolve zero below ulp(loss)/2h, so
  // those tensors are checked for a vanishing analytic gradient instead.
  const auto& params = m.parameters();
  std::vector<std::size_t> live;
  double inert_grad = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params[i]->name;
    if (name.size() > 7 && name.compare(name.size() - 7, 7, ".k.bias") == 0) {
      for (std::size_t j = 0; j < params[i]->var.grad().size(); ++j)
        inert_grad = std::max(inert_grad, std::abs(params[i]->var.grad()[j]));
    } else {
      live.push_back(i);
    }
  }
  o.require(inert_grad < 1e-12, "key bias gradient " + std::to_string(inert_grad));
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  auto pick = [&](std::size_t i) {
    coords.emplace_back(i, static_cast<std::size_t>(rng.uniform_int(0, std::int64_t(params[i]->var.value().size()) - 1)));
  };
  for (auto i : live) pick(i);
  while (coords.size() < 240) pick(live[static_cast<std::size_t>(rng.uniform_int(0, std::int64_t(live.size()) - 1))]);
  const double h = 1e-6;
  double worst = 0.0;
  std::string worst_name;
  NoGradGuard g;
  for (const auto& [i, j] : coords) {
    auto& value = params[i]->var.mutable_value()[j];
    const double saved = value;
    value = saved + h;
    const double up = loss();
    value = saved - h;
    const double down = loss();
    value = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = params[i]->var.grad()[j];
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    if (rel > worst) {
      worst = rel;
      worst_name = params[i]->name;
    }
  }
  o.require(worst < 1e-5, "relative error " + std::to_string(worst) + " at " + worst_name);
  o.detail << coords.size() << " coordinates over " << live.size() << " tensors, max rel err " << worst
           << "; key bias max |grad| " << inert_grad;
}

// ---------------------------------------------------------------------------
// 4. Dividers

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void divider_correctness(Outcome& o) {
  std::size_t cases = 0;
  for (std::size_t t = 1; t <= 64; ++t)
    for (std::size_t k = 1; k <= t; ++k) {
      Boundaries expected;
      for (std::size_t j = 1; j < k; ++j) expected.push_back(ceil_div(j * t, k));
      o.require(equal_divide(t, k) == expected, "equal_divide(" + std::to_string(t) + "," + std::to_string(k) + ")");
      ++cases;
    }

  Rng rng(501);
  const std::size_t draws = 10000;
  std::map<Boundaries, std::size_t> counts;
  for (std::size_t n = 0; n < draws; ++n) counts[rand_divide(6, 3, rng)]++;
  const double cells = 10.0, expected = double(draws) / cells;
  double chi2 = 0.0;
  for (const auto& [b, n] : counts) chi2 += (double(n) - expected) * (double(n) - expected) / expected;
  chi2 += (cells - double(counts.size())) * expected;
  const double pvalue = boost::math::cdf(boost::math::complement(boost::math::chi_squared(cells - 1), chi2));
  o.require(counts.size() == 10 && pvalue > 0.001, "rand_divide not uniform");

  std::size_t random_mode = 0;
  for (std::size_t n = 0; n < draws; ++n) random_mode += sample_divide(12, 4, 0.5, rng).mode == DivideMode::kRandom;
  const double frac = double(random_mode) / double(draws);
  o.require(std::abs(frac - 0.5) <= 0.02, "mode fraction");
  o.require(anneal_p(0, 1000) == 1.0 && anneal_p(1000, 1000) == 0.0, "anneal endpoints");
  o.detail << cases << " equal cases, chi2 p=" << pvalue << ", random fraction " << frac << ", anneal 1.0 -> 0.0";
}

// ---------------------------------------------------------------------------
// 5. Pseudo segment structure

void injection_structure(Outcome& o) {
  Rng rng(601);
  std::size_t injected = 0, good = 0, sentences = 0;
  while (injected < 10000) {
    const TokenIds tgt = testing::random_ids(rng, static_cast<std::size_t>(rng.uniform_int(2, 30)), 60);
    const auto k = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const auto st = make_training_target(tgt, k, 0.5, 0.5, rng);
    ++sentences;
    if (!st.plan.injected) continue;
    ++injected;
    const std::size_t i = st.plan.injected->segment, m = st.plan.injected->prefix_len;
    bool ok = i + 1 < st.segments.size() && st.terminals[i + 1] == kDel && m >= 1 && m <= st.segments[i].size() &&
              st.segments[i + 1] == TokenIds(st.segments[i].begin(), st.segments[i].begin() + std::ptrdiff_t(m));
    std::size_t dels = 0;
    TokenIds rebuilt;
    for (std::size_t s = 0; s < st.segments.size(); ++s) {
      if (st.terminals[s] == kDel) {
        ++dels;
        continue;
      }
      rebuilt.insert(rebuilt.end(), st.segments[s].begin(), st.segments[s].end());
    }
    ok = ok && dels == 1 && rebuilt == tgt;
    good += ok;
  }
  const double rate = double(injected) / double(sentences);
  o.require(good == injected, "malformed pseudo segment");
  o.require(std::abs(rate - 0.5) <= 0.02, "injection rate");
  o.detail << good << "/" << injected << " well formed, injection rate " << rate;
}

// ---------------------------------------------------------------------------
// 6. Metrics

Corpus random_corpus(Rng& rng, std::size_t n) {
  Corpus c(n);
  for (auto& s : c) {
    const auto len = static_cast<std::size_t>(rng.uniform_int(0, 20));
    for (std::size_t i = 0; i < len; ++i) s.push_back("w" + std::to_string(rng.uniform_int(0, 9)));
  }
  return c;
}

void metric_oracles(Outcome& o) {
  Rng rng(701);
  std::size_t rep_off = 0, mis_off = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const Corpus h = random_corpus(rng, n), r = random_corpus(rng, n);
    rep_off += rep_ratio(h) != testing::ratio(testing::rep_counts(h));
    mis_off += mis_ratio(h, r) != testing::ratio(testing::mis_counts(h, r));
  }
  o.require(rep_off == 0 && mis_off == 0, "oracle mismatch");
  const double rep = rep_ratio(tokenize_corpus(std::vector<std::string>{"a a b"}));
  const double mis = mis_ratio(tokenize_corpus(std::vector<std::string>{"a b"}),
                               tokenize_corpus(std::vector<std::string>{"a b b c"}));
  o.require(rep == 1.0 / 3.0, "rep worked example");
  o.require(mis == 0.5, "mis worked example");
  const Corpus refs = tokenize_corpus(std::vector<std::string>{"the cat sat on the mat", "a b c d e"});
  const double self = bleu(refs, refs);
  o.require(self == 100.0, "self bleu");
  o.detail << "1000 corpora (" << rep_off << " rep, " << mis_off << " mis mismatches), rep=" << rep
           << ", mis=" << mis << ", bleu(refs,refs)=" << self;
}

// ---------------------------------------------------------------------------
// 7. Engine semantics

class ScriptedPredictor : public StepPredictor {
 public:
  explicit ScriptedPredictor(std::vector<TokenIds> scripts, std::size_t vocab)
      : scripts_(std::move(scripts)), vocab_(vocab) {}

  std::vector<std::vector<double>> predict(const DecoderLayout& grid, std::span<const std::size_t> segments) override {
    std::vector<std::vector<double>> out;
    for (auto seg : segments) {
      std::vector<double> row(vocab_, 0.0);
      const auto& s = scripts_[seg];
      row[static_cast<std::size_t>(s[std::min(grid.l - 1, s.size() - 1)])] = 1.0;
      out.push_back(row);
    }
    return out;
  }

 private:
  std::vector<TokenIds> scripts_;
  std::size_t vocab_;
};

void engine_semantics(Outcome& o) {
  const std::vector<std::string> words = {"there", "are", "lots", "of", "farmers", "doing", "this", "today",
                                          "a", "lot", "in", "the"};
  const auto v = Vocabulary::from_tokens(words);
  auto seg = [&](const std::string& s, TokenId terminal) {
    TokenIds ids = encode(v, s);
    ids.push_back(terminal);
    return ids;
  };
  ScriptedPredictor figure({seg("there are", kEos), seg("lots of farmers", kEos), seg("a lot", kDel),
                            seg("doing this today", kEos)},
                           v.size());
  const auto t = decode(figure, 4, 64);
  const std::string text = decode_ids(v, t.tokens);
  o.require(text == "there are lots of farmers doing this today", "figure output");
  o.require(t.deleted_count == 1 && t.steps_used == 4, "figure counters");

  ScriptedPredictor twice({seg("there are", kEos), seg("in the", kDel), seg("in", kDel), seg("lots of", kEos)},
                          v.size());
  const auto d = decode(twice, 4, 64);
  const std::string text2 = decode_ids(v, d.tokens);
  o.require(text2 == "there are lots of" && d.deleted_count == 2, "double deletion");
  o.detail << "\"" << text << "\" deleted=" << t.deleted_count << " steps=" << t.steps_used << "; double deletion \""
           << text2 << "\" deleted=" << d.deleted_count;
}

// ---------------------------------------------------------------------------
// 8-10. Toy reversal study

constexpr std::size_t kSymbols = 50;
constexpr std::size_t kTrainPairs = 5000;
constexpr std::size_t kTestPairs = 500;
constexpr std::size_t kSteps = 2000;

struct ToyData {
  Vocabulary vocab;
  ParallelCorpus train;
  std::vector<TokenIds> test_src;
  std::vector<std::string> test_tgt;
};

const ToyData& toy_data() {
  static const ToyData data = [] {
    const auto corpus = testing::make_reversal_corpus(kTrainPairs + kTestPairs, kSymbols, 4, 20, 2026);
    ToyData d;
    const std::vector<std::string> train_lines(corpus.sources.begin(), corpus.sources.begin() + kTrainPairs);
    d.vocab = build_vocab(train_lines, 1, 1000);
    for (std::size_t i = 0; i < corpus.sources.size(); ++i) {
      if (i < kTrainPairs) {
        d.train.sources.push_back(encode(d.vocab, corpus.sources[i]));
        d.train.targets.push_back(encode(d.vocab, corpus.targets[i]));
        d.train.line_numbers.push_back(i);
      } else {
        d.test_src.push_back(encode(d.vocab, corpus.sources[i]));
        d.test_tgt.push_back(corpus.targets[i]);
      }
    }
    return d;
  }();
  return data;
}

RunConfig toy_config(std::size_t k, std::uint64_t seed) {
  RunConfig c;
  c.model.d_model = 64;
  c.model.d_hidden = 128;
  c.model.n_layer = 2;
  c.model.n_head = 4;
  c.model.p_dropout = 0.0;
  c.model.eps_ls = 0.1;
  c.model.max_segments = 8;
  c.model.max_step = 32;
  c.model.precision = 32;
  c.model.vocab_size = toy_data().vocab.size();
  c.k = k;
  c.q = 0.5;
  c.p_schedule = PSchedule::kAnneal;
  c.total_steps = kSteps;
  c.batch_size = 32;
  c.lr_mode = LrMode::kLinear;
  c.lr_start = 2e-3;
  c.lr_end = 2e-4;
  c.log_every = 0;
  c.checkpoint_every = 0;
  c.seed = seed;
  return c;
}

struct ToyModel {
  std::string name;
  std::shared_ptr<Model<float>> model;
  double train_cpu = 0.0;
};

struct ToyEval {
  double exact = 0.0;
  double avg_steps = 0.0;
  double rep = 0.0;
  double mis = 0.0;
};

double g_train_cpu = 0.0;

ToyModel train_toy(const std::string& name, const RunConfig& c) {
  const double start = cpu_seconds();
  auto run = train<float>(c, toy_data().train);
  ToyModel m{name, run.model, cpu_seconds() - start};
  g_train_cpu += m.train_cpu;
  std::cout << "    trained " << name << " in " << m.train_cpu << " s cpu, final loss " << run.log.back().loss
            << std::endl;
  return m;
}

ToyEval evaluate_toy(const ToyModel& m, std::size_t k) {
  const auto& d = toy_data();
  const auto results = batch_decode(*m.model, std::span<const TokenIds>(d.test_src), k, std::nullopt, 1);
  std::vector<std::string> hyps;
  std::vector<Translation> translations;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string h = results[i].ok() ? decode_ids(d.vocab, results[i].translation->tokens) : "";
    exact += h == d.test_tgt[i];
    hyps.push_back(h);
    if (results[i].ok()) translations.push_back(*results[i].translation);
  }
  const Corpus hyp_c = tokenize_corpus(hyps), ref_c = tokenize_corpus(d.test_tgt);
  ToyEval e{double(exact) / double(results.size()), avg_steps(translations), rep_ratio(hyp_c),
            mis_ratio(hyp_c, ref_c)};
  std::cout << "    " << m.name << " k=" << k << ": exact " << e.exact << ", avg_steps " << e.avg_steps << ", rep "
            << e.rep << ", mis " << e.mis << std::endl;
  return e;
}

std::map<std::string, ToyModel>& toy_models() {
  static std::map<std::string, ToyModel> models;
  return models;
}

const ToyModel& toy_model(const std::string& name, const std::function<RunConfig()>& make) {
  auto& models = toy_models();
  auto it = models.find(name);
  if (it == models.end()) it = models.emplace(name, train_toy(name, make())).first;
  return it->second;
}

// Segment models start from the AT encoder.
const std::string& at_checkpoint() {
  static testing::TempDir dir;
  static const std::string path = [] {
    const auto& at = toy_model("at", [] { return toy_config(1, 1); });
    const std::string p = dir.file("at.bin");
    save_trained_checkpoint<float>(*at.model, nullptr, 1, p);
    return p;
  }();
  return path;
}

RunConfig segment_config(std::size_t k, std::uint64_t seed) {
  RunConfig c = toy_config(k, seed);
  c.init_encoder = at_checkpoint();
  return c;
}

void toy_study(Outcome& o) {
  const auto& at = toy_model("at", [] { return toy_config(1, 1); });
  const auto& k2 = toy_model("k2", [] { return segment_config(2, 1); });
  const ToyEval at_eval = evaluate_toy(at, 1);
  const ToyEval k2_eval = evaluate_toy(k2, 2);

  std::vector<ToyEval> base, no_q, no_p;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const std::string s = std::to_string(seed);
    base.push_back(evaluate_toy(toy_model("k4_seed" + s, [=] { return segment_config(4, seed); }), 4));
    no_q.push_back(evaluate_toy(toy_model("k4_q0_seed" + s, [=] {
                                  auto c = segment_config(4, seed);
                                  c.q = 0.0;
                                  return c;
                                }), 4));
    no_p.push_back(evaluate_toy(toy_model("k4_p0_seed" + s, [=] {
                                  auto c = segment_config(4, seed);
                                  c.p_schedule = PSchedule::kConstant;
                                  c.p = 0.0;
                                  return c;
                                }), 4));
  }
  std::size_t q_votes = 0, p_votes = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    q_votes += base[i].rep < no_q[i].rep;
    p_votes += base[i].rep < no_p[i].rep;
  }
  const double step_ratio = base[0].avg_steps / at_eval.avg_steps;
  o.require(g_train_cpu <= 30 * 60, "training exceeded 30 cpu minutes");
  o.require(k2_eval.exact >= 0.90, "(a) K=2 accuracy");
  o.require(step_ratio <= 0.45, "(b) step ratio");
  o.require(q_votes >= 2, "(c) q ablation direction");
  o.require(p_votes >= 2, "(c) p ablation direction");
  o.detail << "(a) K=2 exact " << k2_eval.exact << "; (b) steps K=4/K=1 " << base[0].avg_steps << "/"
           << at_eval.avg_steps << " = " << step_ratio << "; (c) rep q=0.5<q=0 in " << q_votes
           << "/3 seeds, anneal<p=0 in " << p_votes << "/3 seeds; training " << g_train_cpu << " s cpu";
}

void bench_sanity(Outcome& o) {
  const auto& m = toy_model("k4_seed1", [] { return segment_config(4, 1); });
  const auto& d = toy_data();
  const std::span<const TokenIds> sources(d.test_src.data(), 100);
  const auto rows = run_bench(*m.model, sources, {4}, 3, std::nullopt);
  o.require(rows.size() == 2 && rows[0].k == 1 && rows[0].speedup == 1.0, "k=1 speedup");
  o.require(rows.back().speedup > 1.5, "K=4 speedup");
  // Context only: the same sources through the AT model.
  const auto& at = toy_model("at", [] { return toy_config(1, 1); });
  const auto at_rows = run_bench(*at.model, sources, {1}, 3, std::nullopt);
  std::string table = bench_table(rows);
  for (auto& ch : table)
    if (ch == '\n') ch = ';';
  o.detail << table << " AT model " << at_rows[0].seconds_per_sentence << " s/sentence over " << at_rows[0].avg_steps
           << " steps, K=4 vs AT " << at_rows[0].seconds_per_sentence / rows.back().seconds_per_sentence << "x";
}

void determinism(Outcome& o) {
  testing::TempDir dir;
  const auto corpus = testing::make_reversal_corpus(kTrainPairs, kSymbols, 4, 20, 77);
  write_lines(dir.file("train.src"), corpus.sources);
  write_lines(dir.file("train.tgt"), corpus.targets);
  std::vector<std::string> checkpoints;
  for (int run = 0; run < 2; ++run) {
    RunConfig c = toy_config(4, 5);
    c.model.precision = 64;
    c.model.vocab_size = 0;
    c.model.p_dropout = 0.1;
    c.total_steps = kSteps;
    c.train_src = dir.file("train.src");
    c.train_tgt = dir.file("train.tgt");
    c.vocab = dir.file("vocab.txt");
    c.train_cache = dir.file("train.ids");
    c.checkpoint_dir = dir.file("run" + std::to_string(run));
    std::ostringstream out;
    o.require(run_guarded([&] { return cmd_prepare(c, out); }) == kExitOk, "prepare");
    o.require(run_guarded([&] { return cmd_train(c, out); }) == kExitOk, "train");
    checkpoints.push_back(testing::read_text(dir.file("run" + std::to_string(run) + "/checkpoint_last.bin")));
  }
  o.require(!checkpoints[0].empty() && checkpoints[0] == checkpoints[1], "checkpoints differ");
  o.detail << "two " << kSteps << "-step 64-bit runs, " << checkpoints[0].size() << " checkpoint bytes, "
           << (checkpoints[0] == checkpoints[1] ? "identical" : "different");
}

}  // namespace
}  // namespace segsat

int main(int argc, char** argv) {
  using namespace segsat;
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria = {
      {"mask fidelity", mask_fidelity},
      {"AT degeneracy", at_degeneracy},
      {"gradient correctness", gradient_check},
      {"divider correctness", divider_correctness},
      {"injection structure", injection_structure},
      {"metric oracles", metric_oracles},
      {"engine semantics", engine_semantics},
      {"toy end-to-end", toy_study},
      {"benchmark sanity", bench_sanity},
      {"determinism", determinism},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  set_logging(false);
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << i + 1 << " (" << criteria[i].first << ", "
              << std::round(secs * 10) / 10 << " s): " << o.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
