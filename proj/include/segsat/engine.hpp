// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segsat/model.hpp"
#include "segsat/vocab.hpp"

namespace segsat {

enum class SegmentStatus { kActive, kFinished, kDeleted };

const char* status_name(SegmentStatus s);

struct TraceRow {
  std::size_t step = 0;  // 1-based decoding step
  std::size_t segment = 0;
  TokenId token = kPad;
  SegmentStatus status = SegmentStatus::kActive;  // status after the token was applied
};

/// Per-sentence decoding state. Owned by one worker.
struct DecodeState {
  std::size_t k = 0;
  std::size_t budget = 0;
  std::size_t cap = 0;   // per-segment emission limit
  std::size_t step = 0;  // completed steps
  std::vector<SegmentStatus> status;
  std::vector<TokenIds> emitted;  // per segment, terminal included once emitted
  bool record_trace = false;
  std::vector<TraceRow> trace;

  DecodeState(std::size_t k, std::size_t budget, std::size_t max_step = SIZE_MAX);
  bool any_active() const;
  /// Decoder input grid covering steps [0, step].
  DecoderLayout layout() const;
};

struct Translation {
  TokenIds tokens;
  std::vector<TokenIds> segments;  // raw per-segment outputs, terminals included
  std::vector<SegmentStatus> status;
  std::size_t steps_used = 0;
  std::size_t deleted_count = 0;
  std::vector<TraceRow> trace;
};

/// Supplies next-token scores for a single sentence. The engine calls it once per step
/// with the full input grid; it returns one score row (over the whole vocabulary) for
/// each requested segment, predicting that segment's token at the grid's last step.
class StepPredictor {
 public:
  virtual ~StepPredictor() = default;
  virtual std::vector<std::vector<double>> predict(const DecoderLayout& grid,
                                                   std::span<const std::size_t> segments) = 0;
  virtual std::size_t max_steps() const { return SIZE_MAX; }
};

/// Predictor backed by a frozen model and one encoded source.
template <typename T>
class ModelPredictor final : public StepPredictor {
 public:
  ModelPredictor(const Model<T>& model, const TokenIds& source);
  std::vector<std::vector<double>> predict(const DecoderLayout& grid,
                                           std::span<const std::size_t> segments) override;
  std::size_t max_steps() const override { return model_.config().max_step; }

 private:
  const Model<T>& model_;
  EncodedBatch<T> encoded_;
  std::optional<typename Model<T>::StepCache> cache_;
};

/// Argmax over every id except PAD and BOS; ties go to the lower id.
TokenId select_token(std::span<const double> scores);

/// One engine iteration: scores every active segment in a single predictor call,
/// appends the chosen tokens and applies EOS/DEL/cap transitions.
void decode_step(DecodeState& state, StepPredictor& predictor);

/// Drops deleted segments, strips terminals, concatenates in segment order.
Translation postprocess(const DecodeState& state);

/// Runs decode_step until no segment is active.
Translation decode(StepPredictor& predictor, std::size_t k, std::size_t budget, bool trace = false);

/// Default token budget for a source of the given length.
inline std::size_t default_budget(std::size_t source_len) { return 2 * source_len + 16; }

template <typename T>
Translation decode(const Model<T>& model, const TokenIds& source, std::size_t k,
                   std::optional<std::size_t> budget = std::nullopt, bool trace = false);

struct DecodeResult {
  std::optional<Translation> translation;
  std::string error;  // set when translation is empty
  bool ok() const { return translation.has_value(); }
};

/// Decodes every source with up to `workers` threads. Output order follows input order;
/// a failing item records its error without affecting the others.
template <typename T>
std::vector<DecodeResult> batch_decode(const Model<T>& model, std::span<const TokenIds> sources,
                                       std::size_t k, std::optional<std::size_t> budget,
                                       std::size_t workers, bool trace = false);

}  // namespace segsat
