// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "segsat/config.hpp"
#include "segsat/model.hpp"

namespace segsat {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitItemFailures = 3;

struct TranslateArgs {
  std::string checkpoint;
  std::string vocab;
  std::string input;
  std::string output;
  std::size_t k = 1;
  std::optional<std::size_t> budget;
  std::size_t workers = 1;
  std::string trace;  // empty: no trace file
};

struct DistillArgs {
  std::string checkpoint;
  std::string vocab;
  std::string input;
  std::string output;
  std::size_t workers = 1;
};

struct EvaluateArgs {
  std::string hyp;
  std::string ref;
  std::string at_hyp;  // optional
};

struct BenchArgs {
  std::string checkpoint;
  std::string vocab;
  std::string input;
  std::vector<std::size_t> ks;
  std::size_t repeats = 3;
  std::optional<std::size_t> budget;
};

struct BenchRow {
  std::size_t k = 0;
  double seconds_per_sentence = 0.0;
  double avg_steps = 0.0;
  double speedup = 0.0;  // relative to the k=1 row
};

int cmd_prepare(const RunConfig& config, std::ostream& out);
int cmd_train(const RunConfig& config, std::ostream& out);
int cmd_distill(const DistillArgs& args, std::ostream& out);
int cmd_translate(const TranslateArgs& args, std::ostream& out);
int cmd_evaluate(const EvaluateArgs& args, std::ostream& out);
int cmd_bench(const BenchArgs& args, std::ostream& out);

/// Batch size 1, sequential. A k=1 row is always present and listed first.
template <typename T>
std::vector<BenchRow> run_bench(const Model<T>& model, std::span<const TokenIds> sources,
                                std::vector<std::size_t> ks, std::size_t repeats,
                                std::optional<std::size_t> budget);

std::string bench_table(std::span<const BenchRow> rows);

/// Runs a command body and maps exceptions onto exit codes.
int run_guarded(const std::function<int()>& body);

}  // namespace segsat
