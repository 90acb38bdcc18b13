// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segsat/random.hpp"
#include "segsat/vocab.hpp"

namespace segsat {

using Boundaries = std::vector<std::size_t>;

enum class DivideMode { kEqual, kRandom };

struct Injection {
  std::size_t segment = 0;     // 0-based index of the segment that was copied
  std::size_t prefix_len = 0;  // number of leading tokens copied, >= 1
  friend bool operator==(const Injection&, const Injection&) = default;
};

/// Where one target sentence is cut, and how the cut was sampled.
/// Boundaries are token offsets in [1, target_len - 1]; segment j spans
/// [boundaries[j-1], boundaries[j]).
struct DividePlan {
  std::size_t target_len = 0;
  std::size_t k = 1;
  Boundaries boundaries;
  DivideMode mode = DivideMode::kEqual;
  std::optional<Injection> injected;

  friend bool operator==(const DividePlan&, const DividePlan&) = default;
};

/// A target sentence as segments, each closed by EOS or DEL.
struct SegmentedTarget {
  std::vector<TokenIds> segments;  // content only, terminals not included
  std::vector<TokenId> terminals;  // kEos or kDel, one per segment
  DividePlan plan;

  std::size_t k() const { return segments.size(); }
  /// Concatenation of the EOS-terminated segments.
  TokenIds reconstruct() const;
};

/// EQUAL(t, k-1): ceil(j*t/k) for j = 1..k-1. Throws InputError when t < k or k == 0.
Boundaries equal_divide(std::size_t t, std::size_t k);

/// k-1 distinct offsets drawn uniformly from [1, t-1], sorted.
Boundaries rand_divide(std::size_t t, std::size_t k, Rng& rng);

/// Bernoulli(p) choice between equal_divide (s = 0) and rand_divide (s = 1).
DividePlan sample_divide(std::size_t t, std::size_t k, double p, Rng& rng);

/// Linear anneal 1 -> 0 over total_steps; clamps to 0 past the end.
double anneal_p(std::size_t step, std::size_t total_steps);

/// Cut tokens at the given plan's boundaries.
std::vector<TokenIds> apply_plan(std::span<const TokenId> tokens, const DividePlan& plan);

/// With probability q, copies a random prefix of a random segment, closes it with DEL and
/// inserts it immediately after its source. All other segments are closed with EOS.
/// `plan` describes how `segments` were cut and is carried into the result.
SegmentedTarget inject_pseudo_repeat(std::vector<TokenIds> segments, double q, Rng& rng,
                                     DividePlan plan = {});

/// The per-sentence target construction used during training. Draws the injection
/// decision first; an injected sentence is divided into k-1 segments plus the pseudo
/// segment, any other sentence into k segments. Sentences shorter than the segment
/// count get one token per segment.
SegmentedTarget make_training_target(std::span<const TokenId> tokens, std::size_t k, double p,
                                     double q, Rng& rng);

/// One-line JSON record for the training-example debug dump.
std::string plan_to_json(const DividePlan& plan);

}  // namespace segsat
