// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace segsat {

struct Translation;

/// Whitespace tokens of one output sentence, control tokens already removed.
using Sentence = std::vector<std::string>;
using Corpus = std::vector<Sentence>;

Corpus tokenize_corpus(std::span<const std::string> lines);

/// Fraction of tokens (over the whole corpus) that repeat one of the nine tokens before
/// them in the same sentence. 0 for an empty corpus.
double rep_ratio(std::span<const Sentence> hyps);

/// Relative increment (r(hyps) - r(at)) / r(at). Throws UndefinedMetricError when r(at) == 0.
double rep_increment(std::span<const Sentence> hyps, std::span<const Sentence> at_hyps);

/// Clipped per-type count deficit of the hypothesis against its reference, summed over
/// the corpus and divided by the total reference length.
double mis_ratio(std::span<const Sentence> hyps, std::span<const Sentence> refs);

double mis_increment(std::span<const Sentence> hyps, std::span<const Sentence> at_hyps,
                     std::span<const Sentence> refs);

/// Corpus BLEU with brevity penalty, no smoothing, scaled to 0-100.
double bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, std::size_t max_n = 4);

double avg_steps(std::span<const Translation> translations);

struct MetricReport {
  double rep_ratio = 0.0;
  double mis_ratio = 0.0;
  std::optional<double> rep_increment;
  std::optional<double> mis_increment;
  double bleu = 0.0;
  std::optional<double> avg_steps;
  std::optional<double> sentences_per_second;
  std::vector<std::string> notes;

  /// Single-line JSON object; absent optionals are omitted.
  std::string to_json() const;
  /// Human-readable table; ratios and increments shown as percentages.
  std::string to_table() const;
};

/// Everything computable from text. Increments are filled only when `at_hyps` is given;
/// an undefined increment is left empty and explained in `notes`.
MetricReport evaluate_corpus(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                             const Corpus* at_hyps = nullptr);

}  // namespace segsat
