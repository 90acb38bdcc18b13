// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/engine.hpp"

#include <algorithm>
#include <omp.h>

#include "segsat/error.hpp"

namespace segsat {

const char* status_name(SegmentStatus s) {
  switch (s) {
    case SegmentStatus::kActive: return "active";
    case SegmentStatus::kFinished: return "finished";
    case SegmentStatus::kDeleted: return "deleted";
  }
  return "?";
}

DecodeState::DecodeState(std::size_t k_, std::size_t budget_, std::size_t max_step)
    : k(k_), budget(budget_) {
  if (k == 0) throw InputError("segment count must be >= 1");
  if (budget < k) throw InputError("token budget must be at least the segment count");
  cap = std::min((budget + k - 1) / k, max_step);
  status.assign(k, SegmentStatus::kActive);
  emitted.assign(k, {});
}

bool DecodeState::any_active() const {
  return std::any_of(status.begin(), status.end(), [](SegmentStatus s) { return s == SegmentStatus::kActive; });
}

DecoderLayout DecodeState::layout() const {
  return DecoderLayout::from_emitted(emitted, step + 1);
}

template <typename T>
ModelPredictor<T>::ModelPredictor(const Model<T>& model, const TokenIds& source) : model_(model) {
  if (source.empty()) throw InputError("cannot translate an empty source sentence");
  NoGradGuard guard;
  encoded_ = model_.encode(std::span<const TokenIds>(&source, 1));
}

template <typename T>
std::vector<std::vector<double>> ModelPredictor<T>::predict(const DecoderLayout& grid,
                                                            std::span<const std::size_t> segments) {
  NoGradGuard guard;
  if (grid.l == 0) throw InputError("decoder grid has no steps");
  // Grids normally grow by one step per call; anything else replays the grid from step 1.
  if (!cache_ || cache_->k != grid.k || cache_->steps + 1 != grid.l) {
    cache_ = model_.start_step_cache(grid.k);
    TokenIds ids(grid.k);
    for (std::size_t s = 0; s + 1 < grid.l; ++s) {
      for (std::size_t i = 0; i < grid.k; ++i) ids[i] = grid.slots[grid.slot(i, s)];
      model_.decoder_step(*cache_, ids, encoded_);
    }
  }
  TokenIds ids(grid.k);
  for (std::size_t i = 0; i < grid.k; ++i) ids[i] = grid.slots[grid.slot(i, grid.l - 1)];
  Var<T> hidden(model_.decoder_step(*cache_, ids, encoded_));
  Var<T> logits = model_.project(ag::gather_rows(hidden, segments));
  std::vector<std::vector<double>> out(segments.size());
  for (std::size_t r = 0; r < segments.size(); ++r) {
    auto row = logits.value().row(r);
    out[r].assign(row.begin(), row.end());
  }
  return out;
}

template class ModelPredictor<float>;
template class ModelPredictor<double>;

TokenId select_token(std::span<const double> scores) {
  TokenId best = -1;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    const auto id = static_cast<TokenId>(c);
    if (id == kPad || id == kBos) continue;
    if (best < 0 || scores[c] > scores[static_cast<std::size_t>(best)]) best = id;
  }
  if (best < 0) throw InputError("score row has no predictable id");
  return best;
}

void decode_step(DecodeState& state, StepPredictor& predictor) {
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < state.k; ++i)
    if (state.status[i] == SegmentStatus::kActive) active.push_back(i);
  if (active.empty()) throw InputError("decode_step called with no active segment");

  const auto grid = state.layout();
  const auto scores = predictor.predict(grid, active);
  if (scores.size() != active.size()) throw InputError("predictor returned the wrong number of rows");
  ++state.step;
  for (std::size_t r = 0; r < active.size(); ++r) {
    const std::size_t seg = active[r];
    const TokenId tok = select_token(scores[r]);
    state.emitted[seg].push_back(tok);
    if (tok == kEos) state.status[seg] = SegmentStatus::kFinished;
    else if (tok == kDel) state.status[seg] = SegmentStatus::kDeleted;
    else if (state.emitted[seg].size() >= state.cap) state.status[seg] = SegmentStatus::kFinished;
    if (state.record_trace) state.trace.push_back({state.step, seg, tok, state.status[seg]});
  }
}

Translation postprocess(const DecodeState& state) {
  if (state.any_active()) throw InputError("postprocess needs every segment to have stopped");
  Translation t;
  t.segments = state.emitted;
  t.status = state.status;
  for (std::size_t i = 0; i < state.k; ++i) {
    t.steps_used = std::max(t.steps_used, state.emitted[i].size());
    if (state.status[i] == SegmentStatus::kDeleted) {
      ++t.deleted_count;
      continue;
    }
    for (TokenId tok : state.emitted[i]) {
      if (tok == kEos || tok == kDel || tok == kPad) continue;
      t.tokens.push_back(tok);
    }
  }
  t.trace = state.trace;
  return t;
}

Translation decode(StepPredictor& predictor, std::size_t k, std::size_t budget, bool trace) {
  DecodeState state(k, budget, predictor.max_steps());
  state.record_trace = trace;
  while (state.any_active()) decode_step(state, predictor);
  return postprocess(state);
}

template <typename T>
Translation decode(const Model<T>& model, const TokenIds& source, std::size_t k,
                   std::optional<std::size_t> budget, bool trace) {
  if (k > model.config().max_segments) {
    throw InputError("k=" + std::to_string(k) + " exceeds the model's max_segments=" +
                     std::to_string(model.config().max_segments));
  }
  ModelPredictor<T> predictor(model, source);
  return decode(predictor, k, budget.value_or(default_budget(source.size())), trace);
}

template <typename T>
std::vector<DecodeResult> batch_decode(const Model<T>& model, std::span<const TokenIds> sources,
                                       std::size_t k, std::optional<std::size_t> budget,
                                       std::size_t workers, bool trace) {
  if (workers == 0) throw InputError("workers must be >= 1");
  std::vector<DecodeResult> results(sources.size());
  const auto n = static_cast<std::ptrdiff_t>(sources.size());
#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(workers)) if (workers > 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& slot = results[static_cast<std::size_t>(i)];
    try {
      slot.translation = decode(model, sources[static_cast<std::size_t>(i)], k, budget, trace);
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  }
  return results;
}

template Translation decode<float>(const Model<float>&, const TokenIds&, std::size_t,
                                   std::optional<std::size_t>, bool);
template Translation decode<double>(const Model<double>&, const TokenIds&, std::size_t,
                                    std::optional<std::size_t>, bool);
template std::vector<DecodeResult> batch_decode<float>(const Model<float>&, std::span<const TokenIds>,
                                                       std::size_t, std::optional<std::size_t>,
                                                       std::size_t, bool);
template std::vector<DecodeResult> batch_decode<double>(const Model<double>&, std::span<const TokenIds>,
                                                        std::size_t, std::optional<std::size_t>,
                                                        std::size_t, bool);

}  // namespace segsat
