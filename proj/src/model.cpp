// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "segsat/checkpoint.hpp"
#include "segsat/error.hpp"

namespace segsat {

// ---------------------------------------------------------------------------
// ModelConfig

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::size_t parse_count(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + std::string(key) + "' expects a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    const std::string s(v);
    const double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  }
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + std::string(key) + "' expects true or false, got '" + std::string(v) + "'");
}

std::string format_real(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace

void ModelConfig::validate() const {
  if (d_model == 0 || n_head == 0 || d_model % n_head != 0)
    throw ConfigError("d_model must be a positive multiple of n_head");
  if (d_model % 2 != 0) throw ConfigError("d_model must be even for sinusoidal positions");
  if (d_hidden == 0) throw ConfigError("d_hidden must be positive");
  if (max_segments < 1) throw ConfigError("max_segments must be >= 1");
  if (max_step < 2) throw ConfigError("max_step must be >= 2");
  if (!(eps_ls >= 0.0 && eps_ls < 1.0)) throw ConfigError("eps_ls must lie in [0, 1)");
  if (!(p_dropout >= 0.0 && p_dropout < 1.0)) throw ConfigError("p_dropout must lie in [0, 1)");
  if (vocab_size <= kNumSpecials) throw ConfigError("vocab_size must exceed the 5 control tokens");
  if (precision != 32 && precision != 64) throw ConfigError("precision must be 32 or 64");
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "d_model=" << d_model << '\n'
     << "d_hidden=" << d_hidden << '\n'
     << "n_layer=" << n_layer << '\n'
     << "n_head=" << n_head << '\n'
     << "p_dropout=" << format_real(p_dropout) << '\n'
     << "eps_ls=" << format_real(eps_ls) << '\n'
     << "max_segments=" << max_segments << '\n'
     << "max_step=" << max_step << '\n'
     << "vocab_size=" << vocab_size << '\n'
     << "share_embeddings=" << (share_embeddings ? "true" : "false") << '\n'
     << "precision=" << precision << '\n';
  return os.str();
}

void ModelConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "d_model") d_model = parse_count(key, value);
  else if (key == "d_hidden") d_hidden = parse_count(key, value);
  else if (key == "n_layer") n_layer = parse_count(key, value);
  else if (key == "n_head") n_head = parse_count(key, value);
  else if (key == "p_dropout") p_dropout = parse_real(key, value);
  else if (key == "eps_ls") eps_ls = parse_real(key, value);
  else if (key == "max_segments") max_segments = parse_count(key, value);
  else if (key == "max_step") max_step = parse_count(key, value);
  else if (key == "vocab_size") vocab_size = parse_count(key, value);
  else if (key == "share_embeddings") share_embeddings = parse_bool(key, value);
  else if (key == "precision") precision = static_cast<int>(parse_count(key, value));
  else throw ConfigError("unknown model config key '" + std::string(key) + "'");
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  ModelConfig c;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("model config line " + std::to_string(line_no) + " is not key=value");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Layout, mask, position

std::vector<double> positional_embedding(std::size_t pos, std::size_t d) {
  std::vector<double> pe(d);
  for (std::size_t i = 0; 2 * i < d; ++i) {
    const double angle =
        static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
    pe[2 * i] = std::sin(angle);
    if (2 * i + 1 < d) pe[2 * i + 1] = std::cos(angle);
  }
  return pe;
}

DecoderLayout DecoderLayout::from_emitted(std::span<const TokenIds> emitted, std::size_t l) {
  if (l == 0) throw InputError("decoder layout needs at least one step");
  DecoderLayout layout;
  layout.k = emitted.size();
  layout.l = l;
  layout.slots.assign(layout.k * l, kPad);
  for (std::size_t i = 0; i < layout.k; ++i) {
    layout.slots[layout.slot(i, 0)] = kBos;
    for (std::size_t s = 1; s < l && s - 1 < emitted[i].size(); ++s) {
      layout.slots[layout.slot(i, s)] = emitted[i][s - 1];
    }
  }
  return layout;
}

void DecoderLayout::validate() const {
  if (k == 0 || l == 0 || slots.size() != k * l) throw InputError("decoder layout has inconsistent size");
  for (std::size_t i = 0; i < k; ++i) {
    if (at(i, 0) != kBos) throw InputError("decoder layout segment " + std::to_string(i) + " does not start with BOS");
    bool padded = false;
    for (std::size_t s = 1; s < l; ++s) {
      if (at(i, s) == kPad) padded = true;
      else if (padded) throw InputError("decoder layout has a token after padding in segment " + std::to_string(i));
      if (at(i, s) == kBos) throw InputError("BOS may only appear at step 0");
    }
  }
}

TeacherForcing make_teacher_forcing(const SegmentedTarget& target) {
  if (target.segments.empty() || target.terminals.size() != target.segments.size()) {
    throw InputError("segmented target needs one terminal per segment");
  }
  std::vector<TokenIds> emitted;
  std::size_t l = 0;
  for (std::size_t i = 0; i < target.segments.size(); ++i) {
    TokenIds e = target.segments[i];
    e.push_back(target.terminals[i]);
    l = std::max(l, e.size());
    emitted.push_back(std::move(e));
  }
  TeacherForcing tf;
  tf.inputs = DecoderLayout::from_emitted(emitted, l);
  tf.targets.assign(tf.inputs.k * l, kPad);
  for (std::size_t i = 0; i < emitted.size(); ++i)
    for (std::size_t s = 0; s < emitted[i].size(); ++s) tf.targets[tf.inputs.slot(i, s)] = emitted[i][s];
  return tf;
}

std::vector<std::uint8_t> build_step_causal_mask(std::size_t k, std::size_t l) {
  const std::size_t n = k * l;
  std::vector<std::uint8_t> mask(n * n, 0);
  for (std::size_t q = 0; q < n; ++q) {
    const std::size_t t = q % l;
    for (std::size_t key = 0; key < n; ++key) mask[q * n + key] = (key % l) <= t ? 1 : 0;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Model

template <typename T>
Model<T>::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  if (config_.precision != static_cast<int>(sizeof(T) * 8)) {
    throw ConfigError("model precision " + std::to_string(config_.precision) +
                      " does not match the instantiated scalar type");
  }
  Rng rng(seed);
  const std::size_t d = config_.d_model, v = config_.vocab_size;
  auto normal_init = [&](const ParameterPtr<T>& p, double stddev) {
    for (auto& x : p->var.mutable_value().values()) x = static_cast<T>(rng.normal() * stddev);
  };
  const double embed_std = 1.0 / std::sqrt(static_cast<double>(d));

  src_embed_ = add_param("encoder.token_embedding", {v, d});
  normal_init(src_embed_, embed_std);
  for (std::size_t i = 0; i < config_.n_layer; ++i) {
    const std::string base = "encoder.layer" + std::to_string(i);
    EncoderLayer layer;
    layer.ln1 = make_norm(base + ".ln1", d);
    layer.self_attn = make_attention(base + ".self_attn", rng);
    layer.ln2 = make_norm(base + ".ln2", d);
    layer.fc1 = make_linear(base + ".ffn.fc1", d, config_.d_hidden, rng);
    layer.fc2 = make_linear(base + ".ffn.fc2", config_.d_hidden, d, rng);
    encoder_.push_back(std::move(layer));
  }
  encoder_norm_ = make_norm("encoder.final_ln", d);

  if (config_.share_embeddings) {
    tgt_embed_ = src_embed_;
    out_proj_ = src_embed_;
  } else {
    tgt_embed_ = add_param("decoder.token_embedding", {v, d});
    normal_init(tgt_embed_, embed_std);
  }
  seg_embed_ = add_param("decoder.segment_embedding", {config_.max_segments, d});
  normal_init(seg_embed_, 0.5);
  for (std::size_t i = 0; i < config_.n_layer; ++i) {
    const std::string base = "decoder.layer" + std::to_string(i);
    DecoderLayer layer;
    layer.ln1 = make_norm(base + ".ln1", d);
    layer.self_attn = make_attention(base + ".self_attn", rng);
    layer.ln2 = make_norm(base + ".ln2", d);
    layer.cross_attn = make_attention(base + ".cross_attn", rng);
    layer.ln3 = make_norm(base + ".ln3", d);
    layer.fc1 = make_linear(base + ".ffn.fc1", d, config_.d_hidden, rng);
    layer.fc2 = make_linear(base + ".ffn.fc2", config_.d_hidden, d, rng);
    decoder_.push_back(std::move(layer));
  }
  decoder_norm_ = make_norm("decoder.final_ln", d);
  if (!config_.share_embeddings) {
    out_proj_ = add_param("decoder.output_projection", {v, d});
    normal_init(out_proj_, embed_std);
  }
}

template <typename T>
ParameterPtr<T> Model<T>::add_param(const std::string& name, Shape shape) {
  auto p = std::make_shared<Parameter<T>>();
  p->name = name;
  p->var = Var<T>(Tensor<T>(std::move(shape)), true);
  params_.push_back(p);
  return p;
}

template <typename T>
typename Model<T>::Linear Model<T>::make_linear(const std::string& name, std::size_t in,
                                                std::size_t out, Rng& rng) {
  Linear l;
  l.weight = add_param(name + ".weight", {in, out});
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& x : l.weight->var.mutable_value().values())
    x = static_cast<T>((2.0 * rng.uniform() - 1.0) * bound);
  l.bias = add_param(name + ".bias", {out});
  return l;
}

template <typename T>
typename Model<T>::Norm Model<T>::make_norm(const std::string& name, std::size_t width) {
  Norm n;
  n.gamma = add_param(name + ".gamma", {width});
  n.gamma->var.mutable_value().fill(T(1));
  n.beta = add_param(name + ".beta", {width});
  return n;
}

template <typename T>
typename Model<T>::AttentionWeights Model<T>::make_attention(const std::string& name, Rng& rng) {
  const std::size_t d = config_.d_model;
  AttentionWeights w;
  w.q = make_linear(name + ".q", d, d, rng);
  w.k = make_linear(name + ".k", d, d, rng);
  w.v = make_linear(name + ".v", d, d, rng);
  w.out = make_linear(name + ".out", d, d, rng);
  return w;
}

template <typename T>
ParameterPtr<T> Model<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p;
  return nullptr;
}

template <typename T>
Var<T> Model<T>::linear(const Var<T>& x, const Linear& l) const {
  return ag::add_bias(ag::matmul(x, l.weight->var), l.bias->var);
}

template <typename T>
Var<T> Model<T>::norm(const Var<T>& x, const Norm& n) const {
  return ag::layer_norm(x, n.gamma->var, n.beta->var, T(1e-5));
}

template <typename T>
Var<T> Model<T>::drop(const Var<T>& x, Rng* rng) const {
  if (!rng) return x;
  return ag::dropout(x, config_.p_dropout, *rng);
}

template <typename T>
Var<T> Model<T>::ffn(const Var<T>& x, const Linear& fc1, const Linear& fc2, Rng* rng) const {
  return linear(drop(ag::relu(linear(x, fc1)), rng), fc2);
}

template <typename T>
EncodedBatch<T> Model<T>::encode(std::span<const TokenIds> sources, Rng* rng) const {
  const std::size_t d = config_.d_model;
  EncodedBatch<T> out;
  TokenIds ids;
  out.offsets.push_back(0);
  for (const auto& s : sources) {
    if (s.empty()) throw InputError("cannot encode an empty source sentence");
    ids.insert(ids.end(), s.begin(), s.end());
    out.offsets.push_back(ids.size());
  }
  Tensor<T> pe({ids.size(), d});
  for (std::size_t b = 0; b < sources.size(); ++b) {
    for (std::size_t m = 0; m < sources[b].size(); ++m) {
      const auto v = positional_embedding(m + 1, d);
      auto row = pe.row(out.offsets[b] + m);
      for (std::size_t j = 0; j < d; ++j) row[j] = static_cast<T>(v[j]);
    }
  }
  auto plan = std::make_shared<kernels::AttentionPlan>();
  for (std::size_t b = 0; b < sources.size(); ++b) {
    const std::size_t n = sources[b].size();
    plan->add_block(out.offsets[b], n, out.offsets[b], n);
  }
  const T embed_scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  Var<T> x = ag::add(ag::scale(ag::embedding(src_embed_->var, ids), embed_scale), ag::constant(std::move(pe)));
  x = drop(x, rng);
  for (const auto& layer : encoder_) {
    Var<T> h = norm(x, layer.ln1);
    const auto& w = layer.self_attn;
    Var<T> a = linear(ag::attention(linear(h, w.q), linear(h, w.k), linear(h, w.v), plan, config_.n_head), w.out);
    x = ag::add(x, drop(a, rng));
    x = ag::add(x, drop(ffn(norm(x, layer.ln2), layer.fc1, layer.fc2, rng), rng));
  }
  out.memory = norm(x, encoder_norm_);
  for (const auto& layer : decoder_) {
    out.cross_keys.push_back(linear(out.memory, layer.cross_attn.k));
    out.cross_values.push_back(linear(out.memory, layer.cross_attn.v));
  }
  return out;
}

template <typename T>
Tensor<T> Model<T>::encode(const TokenIds& source) const {
  NoGradGuard guard;
  return encode(std::span<const TokenIds>(&source, 1)).memory.value();
}

template <typename T>
Var<T> Model<T>::embed_decoder_inputs(std::span<const DecoderLayout> layouts) const {
  const std::size_t d = config_.d_model;
  TokenIds ids, segs;
  for (const auto& layout : layouts) {
    if (layout.k > config_.max_segments) {
      throw InputError("layout has " + std::to_string(layout.k) + " segments, model supports " +
                       std::to_string(config_.max_segments));
    }
    ids.insert(ids.end(), layout.slots.begin(), layout.slots.end());
    for (std::size_t s = 0; s < layout.slots.size(); ++s) segs.push_back(static_cast<TokenId>(layout.segment_of(s)));
  }
  Tensor<T> pe({ids.size(), d});
  std::size_t row = 0;
  for (const auto& layout : layouts) {
    std::vector<std::vector<double>> cache(layout.l);
    for (std::size_t s = 0; s < layout.l; ++s) cache[s] = positional_embedding(s + 1, d);
    for (std::size_t slot = 0; slot < layout.slots.size(); ++slot, ++row) {
      const auto& v = cache[layout.step_of(slot)];
      auto r = pe.row(row);
      for (std::size_t j = 0; j < d; ++j) r[j] = static_cast<T>(v[j]);
    }
  }
  const T embed_scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  Var<T> tok = ag::scale(ag::embedding(tgt_embed_->var, ids), embed_scale);
  return ag::add(ag::add(tok, ag::constant(std::move(pe))), ag::embedding(seg_embed_->var, segs));
}

template <typename T>
Var<T> Model<T>::decoder_hidden(std::span<const DecoderLayout> layouts, const EncodedBatch<T>& encoded,
                                Rng* rng) const {
  return decoder_stack(embed_decoder_inputs(layouts), layouts, encoded, rng);
}

template <typename T>
typename Model<T>::StepCache Model<T>::start_step_cache(std::size_t k) const {
  if (k == 0 || k > config_.max_segments) {
    throw InputError("step cache needs 1.." + std::to_string(config_.max_segments) + " segments");
  }
  StepCache cache;
  cache.k = k;
  cache.keys.assign(decoder_.size(), std::vector<std::vector<T>>(k));
  cache.values = cache.keys;
  return cache;
}

template <typename T>
Tensor<T> Model<T>::decoder_step(StepCache& cache, std::span<const TokenId> step_ids,
                                 const EncodedBatch<T>& encoded) const {
  const std::size_t k = cache.k, d = config_.d_model, step = cache.steps;
  if (step_ids.size() != k) throw InputError("one step input per segment is required");
  if (encoded.batch_size() != 1) throw InputError("incremental decoding takes a single source");
  if (step >= config_.max_step) throw InputError("decoder step exceeds max_step");
  NoGradGuard guard;

  TokenIds segs(k);
  for (std::size_t i = 0; i < k; ++i) segs[i] = static_cast<TokenId>(i);
  Tensor<T> pe({k, d});
  const auto pos = positional_embedding(step + 1, d);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < d; ++j) pe(i, j) = static_cast<T>(pos[j]);
  const T embed_scale = static_cast<T>(std::sqrt(static_cast<double>(d)));
  Var<T> tok = ag::scale(ag::embedding(tgt_embed_->var, step_ids), embed_scale);
  Var<T> x = ag::add(ag::add(tok, ag::constant(std::move(pe))), ag::embedding(seg_embed_->var, segs));

  // Every cached row has step <= the current one, so nothing is masked.
  const std::size_t rows = k * (step + 1);
  auto self_plan = std::make_shared<kernels::AttentionPlan>();
  self_plan->add_block(0, k, 0, rows);
  auto cross_plan = std::make_shared<kernels::AttentionPlan>();
  cross_plan->add_block(0, k, 0, encoded.offsets[1]);

  auto gather = [&](std::vector<std::vector<T>>& per_segment, const Tensor<T>& fresh) {
    Tensor<T> all({rows, d});
    for (std::size_t i = 0; i < k; ++i) {
      auto& seg = per_segment[i];
      const auto r = fresh.row(i);
      seg.insert(seg.end(), r.begin(), r.end());
      std::copy(seg.begin(), seg.end(), all.data() + i * (step + 1) * d);
    }
    return ag::constant(std::move(all));
  };

  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const auto& layer = decoder_[i];
    Var<T> h = norm(x, layer.ln1);
    const auto& sw = layer.self_attn;
    Var<T> keys = gather(cache.keys[i], linear(h, sw.k).value());
    Var<T> values = gather(cache.values[i], linear(h, sw.v).value());
    Var<T> a = linear(ag::attention(linear(h, sw.q), keys, values, self_plan, config_.n_head), sw.out);
    x = ag::add(x, a);
    h = norm(x, layer.ln2);
    const auto& cw = layer.cross_attn;
    Var<T> c = linear(ag::attention(linear(h, cw.q), encoded.cross_keys[i], encoded.cross_values[i], cross_plan,
                                    config_.n_head),
                      cw.out);
    x = ag::add(x, c);
    x = ag::add(x, ffn(norm(x, layer.ln3), layer.fc1, layer.fc2, nullptr));
  }
  ++cache.steps;
  return norm(x, decoder_norm_).value();
}

template <typename T>
Var<T> Model<T>::decoder_stack(const Var<T>& inputs, std::span<const DecoderLayout> layouts,
                               const EncodedBatch<T>& encoded, Rng* rng) const {
  if (layouts.size() != encoded.batch_size()) throw InputError("one decoder layout per source is required");
  auto self_plan = std::make_shared<kernels::AttentionPlan>();
  auto cross_plan = std::make_shared<kernels::AttentionPlan>();
  std::size_t offset = 0;
  for (std::size_t b = 0; b < layouts.size(); ++b) {
    const auto& layout = layouts[b];
    layout.validate();
    const std::size_t n = layout.slots.size();
    self_plan->add_block(offset, n, offset, n, build_step_causal_mask(layout.k, layout.l));
    cross_plan->add_block(offset, n, encoded.offsets[b], encoded.offsets[b + 1] - encoded.offsets[b]);
    offset += n;
  }
  if (inputs.rows() != offset || inputs.cols() != config_.d_model) {
    throw InputError("decoder inputs have shape " + shape_string(inputs.shape()) + ", expected [" +
                     std::to_string(offset) + " x " + std::to_string(config_.d_model) + "]");
  }
  Var<T> x = drop(inputs, rng);
  for (std::size_t i = 0; i < decoder_.size(); ++i) {
    const auto& layer = decoder_[i];
    Var<T> h = norm(x, layer.ln1);
    const auto& sw = layer.self_attn;
    Var<T> a = linear(ag::attention(linear(h, sw.q), linear(h, sw.k), linear(h, sw.v), self_plan, config_.n_head), sw.out);
    x = ag::add(x, drop(a, rng));
    h = norm(x, layer.ln2);
    const auto& cw = layer.cross_attn;
    Var<T> c = linear(ag::attention(linear(h, cw.q), encoded.cross_keys[i], encoded.cross_values[i], cross_plan,
                                    config_.n_head),
                      cw.out);
    x = ag::add(x, drop(c, rng));
    x = ag::add(x, drop(ffn(norm(x, layer.ln3), layer.fc1, layer.fc2, rng), rng));
  }
  return norm(x, decoder_norm_);
}

template <typename T>
Var<T> Model<T>::project(const Var<T>& hidden) const {
  return ag::matmul_nt(hidden, out_proj_->var);
}

template <typename T>
Var<T> Model<T>::decode_logits(const DecoderLayout& layout, const EncodedBatch<T>& encoded) const {
  return project(decoder_hidden(std::span<const DecoderLayout>(&layout, 1), encoded));
}

template <typename T>
Var<T> Model<T>::training_loss(std::span<const TokenIds> sources, std::span<const SegmentedTarget> targets,
                               Rng* rng) const {
  if (sources.size() != targets.size()) throw InputError("training batch needs one target per source");
  std::vector<DecoderLayout> layouts;
  TokenIds gold;
  for (const auto& t : targets) {
    auto tf = make_teacher_forcing(t);
    if (tf.inputs.k > config_.max_segments) {
      throw InputError("target has " + std::to_string(tf.inputs.k) + " segments, max_segments is " +
                       std::to_string(config_.max_segments));
    }
    if (tf.inputs.l > config_.max_step) {
      throw InputError("target segment needs " + std::to_string(tf.inputs.l) + " steps, max_step is " +
                       std::to_string(config_.max_step));
    }
    gold.insert(gold.end(), tf.targets.begin(), tf.targets.end());
    layouts.push_back(std::move(tf.inputs));
  }
  const auto encoded = encode(sources, rng);
  Var<T> logits = project(decoder_hidden(layouts, encoded, rng));
  return ag::cross_entropy_label_smoothed(logits, gold, config_.eps_ls, kPad, kNonPredictable);
}

template class Model<float>;
template class Model<double>;

// ---------------------------------------------------------------------------
// Checkpoints

template <typename T>
void save_checkpoint(const Model<T>& model, const Adam<T>* optimizer, const std::string& path) {
  const auto file = make_checkpoint<T>(model.config().to_text(), model.parameters(),
                                       optimizer ? &optimizer->state() : nullptr);
  write_checkpoint_file(path, file);
}

template <typename T>
void load_checkpoint(Model<T>& model, Adam<T>* optimizer, const std::string& path, const std::string& prefix) {
  const auto file = read_checkpoint_file(path);
  restore_checkpoint<T>(file, model.parameters(), prefix.empty() && optimizer ? &optimizer->state() : nullptr,
                        prefix);
}

template void save_checkpoint<float>(const Model<float>&, const Adam<float>*, const std::string&);
template void save_checkpoint<double>(const Model<double>&, const Adam<double>*, const std::string&);
template void load_checkpoint<float>(Model<float>&, Adam<float>*, const std::string&, const std::string&);
template void load_checkpoint<double>(Model<double>&, Adam<double>*, const std::string&, const std::string&);

ModelConfig read_checkpoint_config(const std::string& path) {
  const auto file = read_checkpoint_file(path);
  try {
    return ModelConfig::from_text(file.metadata);
  } catch (const ConfigError& e) {
    throw LoadError("checkpoint " + path + " carries an invalid model config: " + e.what());
  }
}

AnyModel load_model(const std::string& path) {
  const auto file = read_checkpoint_file(path);
  ModelConfig config;
  try {
    config = ModelConfig::from_text(file.metadata);
    config.validate();
  } catch (const ConfigError& e) {
    throw LoadError("checkpoint " + path + " carries an invalid model config: " + e.what());
  }
  if (config.precision == 64) {
    auto m = std::make_shared<Model<double>>(config, 0);
    restore_checkpoint<double>(file, m->parameters(), nullptr, "");
    return m;
  }
  auto m = std::make_shared<Model<float>>(config, 0);
  restore_checkpoint<float>(file, m->parameters(), nullptr, "");
  return m;
}

}  // namespace segsat
