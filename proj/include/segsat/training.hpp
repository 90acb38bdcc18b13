// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <optional>
#include <string>
#include <vector>

#include "segsat/config.hpp"
#include "segsat/model.hpp"
#include "segsat/optim.hpp"

namespace segsat {

/// Aligned id sequences, one pair per kept corpus line.
struct ParallelCorpus {
  std::vector<TokenIds> sources;
  std::vector<TokenIds> targets;
  std::vector<std::uint64_t> line_numbers;  // 0-based line in the raw text files

  std::size_t size() const { return sources.size(); }
};

/// Binary id cache: "SEGIDS1", u64 pair count, then per pair u64 line number,
/// u64 source length, u64 target length, followed by all ids as u32 little-endian
/// (source then target for each pair in order).
void save_id_cache(const std::string& path, const ParallelCorpus& corpus);
ParallelCorpus load_id_cache(const std::string& path);

struct TrainLogRow {
  std::size_t step = 0;
  double p = 0.0;
  double lr = 0.0;
  double loss = 0.0;
  double injection_rate = 0.0;  // running fraction of sentences given a pseudo segment
};

template <typename T>
struct TrainRun {
  std::shared_ptr<Model<T>> model;
  std::unique_ptr<Adam<T>> optimizer;
  std::vector<TrainLogRow> log;  // one row per optimizer step
  std::size_t sentences_seen = 0;
  std::size_t sentences_injected = 0;
  std::size_t skipped_long = 0;
};

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_step;
  /// Called every checkpoint_every steps and once at the end.
  // save(path) writes the current model and optimizer state.
  std::function<void(std::size_t step, bool final, const std::function<void(const std::string&)>& save)>
      on_checkpoint;
  std::ostream* plan_dump = nullptr;
};

/// Runs the full training schedule: fresh DividePlan per sentence per step with
/// p = config.p_at(step), pseudo-segment injection with probability q, label-smoothed
/// loss, Adam with the configured learning-rate schedule. model.vocab_size must be set.
template <typename T>
TrainRun<T> train(const RunConfig& config, const ParallelCorpus& data, const TrainHooks& hooks = {});

/// Checkpoint metadata for a trained model: the model config plus the training k.
std::string checkpoint_metadata(const ModelConfig& model, std::size_t k);
/// Training k recorded in checkpoint metadata, if any.
std::optional<std::size_t> checkpoint_train_k(const std::string& metadata);

template <typename T>
void save_trained_checkpoint(const Model<T>& model, const Adam<T>* optimizer, std::size_t k,
                             const std::string& path);

}  // namespace segsat
