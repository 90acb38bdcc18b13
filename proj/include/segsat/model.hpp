// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "segsat/autograd.hpp"
#include "segsat/kernels.hpp"
#include "segsat/optim.hpp"
#include "segsat/segmenter.hpp"
#include "segsat/vocab.hpp"

namespace segsat {

struct ModelConfig {
  std::size_t d_model = 278;
  std::size_t d_hidden = 507;
  std::size_t n_layer = 5;
  std::size_t n_head = 2;
  double p_dropout = 0.1;
  double eps_ls = 0.15;
  std::size_t max_segments = 16;
  std::size_t max_step = 256;
  std::size_t vocab_size = 0;
  bool share_embeddings = true;
  int precision = 32;

  /// Throws ConfigError naming the violated invariant.
  void validate() const;

  /// Flat key=value lines using exactly the field names above.
  std::string to_text() const;
  /// Unknown keys and malformed values are ConfigErrors; missing keys keep defaults.
  static ModelConfig from_text(std::string_view text);
  /// Applies one key=value assignment.
  void set(std::string_view key, std::string_view value);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Sinusoidal position vector: [2i] = sin(pos / 10000^(2i/d)), [2i+1] = cos(same).
std::vector<double> positional_embedding(std::size_t pos, std::size_t d);

/// Decoder input grid of k segments x l steps, stored segment-major. Step 0 of every
/// segment is BOS; step s > 0 holds the token emitted at step s-1, PAD once the segment
/// has nothing left. Steps are 0-based here; the positional index of step s is s+1.
struct DecoderLayout {
  std::size_t k = 0;
  std::size_t l = 0;
  TokenIds slots;

  std::size_t slot(std::size_t segment, std::size_t step) const { return segment * l + step; }
  std::size_t segment_of(std::size_t slot) const { return slot / l; }
  std::size_t step_of(std::size_t slot) const { return slot % l; }
  TokenId at(std::size_t segment, std::size_t step) const { return slots[slot(segment, step)]; }

  /// Right-shifted inputs for each segment's emitted tokens (terminal included).
  static DecoderLayout from_emitted(std::span<const TokenIds> emitted, std::size_t l);
  /// Throws InputError unless every segment starts with BOS and PAD only trails.
  void validate() const;
};

/// Gold layout plus per-slot targets (PAD past each segment's terminal).
struct TeacherForcing {
  DecoderLayout inputs;
  TokenIds targets;
};

TeacherForcing make_teacher_forcing(const SegmentedTarget& target);

/// (k*l) x (k*l) row-major byte mask over slots: query slot (i,t) may attend key slot
/// (j,s) exactly when s <= t, for every pair of segments.
std::vector<std::uint8_t> build_step_causal_mask(std::size_t k, std::size_t l);

/// Encoder output for a packed batch, with the cross-attention keys/values of every
/// decoder layer computed once.
template <typename T>
struct EncodedBatch {
  Var<T> memory;                        // [sum of source lengths x d_model]
  std::vector<std::size_t> offsets;     // row offset of each source, plus the total
  std::vector<Var<T>> cross_keys;       // one per decoder layer
  std::vector<Var<T>> cross_values;

  std::size_t batch_size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

/// Transformer encoder + segment-aware decoder. Parameters are owned here; the forward
/// methods are const and thread-safe as long as nobody updates weights concurrently.
template <typename T>
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<ParameterPtr<T>>& parameters() const { return params_; }
  ParameterPtr<T> find(const std::string& name) const;

  const ParameterPtr<T>& source_embedding() const { return src_embed_; }
  const ParameterPtr<T>& target_embedding() const { return tgt_embed_; }
  const ParameterPtr<T>& output_projection() const { return out_proj_; }
  const ParameterPtr<T>& segment_embedding() const { return seg_embed_; }

  /// Packs the sources row-wise. `dropout_rng` enables dropout in training mode.
  EncodedBatch<T> encode(std::span<const TokenIds> sources, Rng* dropout_rng = nullptr) const;
  /// Single-source memory, [|src| x d_model].
  Tensor<T> encode(const TokenIds& source) const;

  /// sqrt(d) * E_token + PE(step + 1) + E_seg(segment), packed over layouts.
  Var<T> embed_decoder_inputs(std::span<const DecoderLayout> layouts) const;

  /// Final decoder states, one row per slot of every layout (layouts paired with the
  /// batch's sources in order).
  Var<T> decoder_hidden(std::span<const DecoderLayout> layouts, const EncodedBatch<T>& encoded,
                        Rng* dropout_rng = nullptr) const;

  /// The decoder stack applied to precomputed input embeddings laid out like
  /// embed_decoder_inputs(layouts).
  Var<T> decoder_stack(const Var<T>& inputs, std::span<const DecoderLayout> layouts,
                       const EncodedBatch<T>& encoded, Rng* dropout_rng = nullptr) const;

  /// Self-attention keys and values of the decoder steps run so far, kept per segment so
  /// a step attends them in the same order as a full-layout pass.
  struct StepCache {
    std::size_t k = 0;
    std::size_t steps = 0;
    std::vector<std::vector<std::vector<T>>> keys, values;  // [layer][segment], steps x d_model
  };
  StepCache start_step_cache(std::size_t k) const;

  /// Final decoder states [k x d_model] of step `cache.steps` given that step's input id for
  /// every segment. Matches the corresponding rows of decoder_hidden on the full layout.
  /// Single-source batch, inference only.
  Tensor<T> decoder_step(StepCache& cache, std::span<const TokenId> step_ids, const EncodedBatch<T>& encoded) const;

  /// Logits over the full vocabulary. PAD and BOS columns are present; callers exclude them.
  Var<T> project(const Var<T>& hidden) const;

  Var<T> decode_logits(const DecoderLayout& layout, const EncodedBatch<T>& encoded) const;

  /// Mean label-smoothed NLL over every non-PAD target slot of the batch.
  Var<T> training_loss(std::span<const TokenIds> sources, std::span<const SegmentedTarget> targets,
                       Rng* dropout_rng = nullptr) const;

 private:
  struct Linear {
    ParameterPtr<T> weight;  // [in x out]
    ParameterPtr<T> bias;    // [out]
  };
  struct Norm {
    ParameterPtr<T> gamma;
    ParameterPtr<T> beta;
  };
  struct AttentionWeights {
    Linear q, k, v, out;
  };
  struct EncoderLayer {
    Norm ln1, ln2;
    AttentionWeights self_attn;
    Linear fc1, fc2;
  };
  struct DecoderLayer {
    Norm ln1, ln2, ln3;
    AttentionWeights self_attn, cross_attn;
    Linear fc1, fc2;
  };

  ParameterPtr<T> add_param(const std::string& name, Shape shape);
  Linear make_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Norm make_norm(const std::string& name, std::size_t width);
  AttentionWeights make_attention(const std::string& name, Rng& rng);

  Var<T> linear(const Var<T>& x, const Linear& l) const;
  Var<T> norm(const Var<T>& x, const Norm& n) const;
  Var<T> ffn(const Var<T>& x, const Linear& fc1, const Linear& fc2, Rng* rng) const;
  Var<T> drop(const Var<T>& x, Rng* rng) const;

  ModelConfig config_;
  std::vector<ParameterPtr<T>> params_;
  ParameterPtr<T> src_embed_, tgt_embed_, out_proj_, seg_embed_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  Norm encoder_norm_, decoder_norm_;
};

template <typename T>
void save_checkpoint(const Model<T>& model, const Adam<T>* optimizer, const std::string& path);

/// Restores into an existing model. With a prefix only matching parameters are read and
/// the optimizer is left alone.
template <typename T>
void load_checkpoint(Model<T>& model, Adam<T>* optimizer, const std::string& path,
                     const std::string& prefix = "");

using AnyModel = std::variant<std::shared_ptr<Model<float>>, std::shared_ptr<Model<double>>>;

/// Builds a model of the precision recorded in the checkpoint and fills it.
AnyModel load_model(const std::string& path);
ModelConfig read_checkpoint_config(const std::string& path);

/// Logit columns that are never legal predictions.
inline constexpr TokenId kNonPredictable[] = {kPad, kBos};

}  // namespace segsat
