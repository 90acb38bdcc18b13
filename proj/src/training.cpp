// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/training.hpp"

#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "segsat/checkpoint.hpp"
#include "segsat/error.hpp"
#include "segsat/segmenter.hpp"

namespace segsat {

namespace {

constexpr char kCacheMagic[] = "SEGIDS1";

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

class CacheReader {
 public:
  CacheReader(std::vector<unsigned char> buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}
  std::uint64_t u64() { return get(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::size_t remaining() const { return buf_.size() - pos_; }
  [[noreturn]] void fail(const std::string& m) const { throw LoadError("id cache " + path_ + ": " + m); }
  const std::vector<unsigned char>& buf() const { return buf_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::uint64_t get(int width) {
    if (remaining() < static_cast<std::size_t>(width)) fail("truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::vector<unsigned char> buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_id_cache(const std::string& path, const ParallelCorpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot open id cache for writing: " + path);
  out.write(kCacheMagic, 7);
  put_u64(out, corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    put_u64(out, corpus.line_numbers.at(i));
    put_u64(out, corpus.sources[i].size());
    put_u64(out, corpus.targets[i].size());
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (TokenId id : corpus.sources[i]) put_u32(out, static_cast<std::uint32_t>(id));
    for (TokenId id : corpus.targets[i]) put_u32(out, static_cast<std::uint32_t>(id));
  }
  if (!out) throw LoadError("failed writing id cache: " + path);
}

ParallelCorpus load_id_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open id cache: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CacheReader rd(std::move(buf), path);
  if (rd.remaining() < 7 || std::string(rd.buf().begin(), rd.buf().begin() + 7) != std::string(kCacheMagic, 7)) {
    rd.fail("bad magic, not a SEGIDS1 file");
  }
  rd.skip(7);
  const std::uint64_t n = rd.u64();
  if (n > rd.remaining() / 24) rd.fail("corrupted pair count");
  ParallelCorpus c;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> lens;
  std::uint64_t total = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    c.line_numbers.push_back(rd.u64());
    const std::uint64_t s = rd.u64(), t = rd.u64();
    if (s > rd.remaining() || t > rd.remaining()) rd.fail("corrupted length field");
    lens.emplace_back(s, t);
    total += s + t;
  }
  if (total * 4 != rd.remaining()) rd.fail("id payload does not match the index");
  for (const auto& [s, t] : lens) {
    TokenIds src(s), tgt(t);
    for (auto& id : src) id = static_cast<TokenId>(rd.u32());
    for (auto& id : tgt) id = static_cast<TokenId>(rd.u32());
    c.sources.push_back(std::move(src));
    c.targets.push_back(std::move(tgt));
  }
  return c;
}

std::string checkpoint_metadata(const ModelConfig& model, std::size_t k) {
  return model.to_text() + "# train.k=" + std::to_string(k) + "\n";
}

std::optional<std::size_t> checkpoint_train_k(const std::string& metadata) {
  const std::string key = "# train.k=";
  const auto pos = metadata.find(key);
  if (pos == std::string::npos) return std::nullopt;
  try {
    return static_cast<std::size_t>(std::stoull(metadata.substr(pos + key.size())));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

template <typename T>
void save_trained_checkpoint(const Model<T>& model, const Adam<T>* optimizer, std::size_t k,
                             const std::string& path) {
  const auto file = make_checkpoint<T>(checkpoint_metadata(model.config(), k), model.parameters(),
                                       optimizer ? &optimizer->state() : nullptr);
  write_checkpoint_file(path, file);
}

namespace {

class TrainingModeGuard {
 public:
  TrainingModeGuard() : previous_(is_training()) { set_training(true); }
  ~TrainingModeGuard() { set_training(previous_); }

 private:
  bool previous_;
};

}  // namespace

template <typename T>
TrainRun<T> train(const RunConfig& config, const ParallelCorpus& data, const TrainHooks& hooks) {
  config.validate();
  if (data.sources.size() != data.targets.size()) throw InputError("training corpus is not aligned");

  TrainRun<T> run;
  const std::size_t max_len = config.model.max_step - 1;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.sources[i].empty() || data.targets[i].empty()) continue;
    if (data.targets[i].size() > max_len) {
      ++run.skipped_long;
      continue;
    }
    usable.push_back(i);
  }
  if (usable.empty()) throw InputError("no usable training pairs");

  Rng data_rng(config.seed);
  Rng dropout_rng(config.seed ^ 0xd1b54a32d192ed03ULL);
  run.model = std::make_shared<Model<T>>(config.model, config.seed);
  if (!config.init_encoder.empty()) load_checkpoint<T>(*run.model, nullptr, config.init_encoder, "encoder.");
  run.optimizer = std::make_unique<Adam<T>>(run.model->parameters());
  const LrConfig lr_cfg = config.lr_config();

  const std::function<void(const std::string&)> save = [&](const std::string& path) {
    save_trained_checkpoint<T>(*run.model, run.optimizer.get(), config.k, path);
  };

  TrainingModeGuard mode;
  std::vector<std::size_t> order = usable;
  std::size_t cursor = order.size();
  std::vector<TokenIds> sources;
  std::vector<SegmentedTarget> targets;
  for (std::size_t step = 1; step <= config.total_steps; ++step) {
    sources.clear();
    targets.clear();
    const double p = config.p_at(step);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        for (std::size_t i = order.size(); i > 1; --i) {
          const auto j = static_cast<std::size_t>(data_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
          std::swap(order[i - 1], order[j]);
        }
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      sources.push_back(data.sources[idx]);
      targets.push_back(make_training_target(data.targets[idx], config.k, p, config.q, data_rng));
      ++run.sentences_seen;
      if (targets.back().plan.injected) ++run.sentences_injected;
      if (hooks.plan_dump) *hooks.plan_dump << plan_to_json(targets.back().plan) << '\n';
    }
    Var<T> loss = run.model->training_loss(sources, targets, &dropout_rng);
    loss.backward();
    const double lr = lr_schedule(step, lr_cfg);
    run.optimizer->step(lr);

    TrainLogRow row;
    row.step = step;
    row.p = p;
    row.lr = lr;
    row.loss = static_cast<double>(loss.value()[0]);
    row.injection_rate = static_cast<double>(run.sentences_injected) / static_cast<double>(run.sentences_seen);
    run.log.push_back(row);
    if (hooks.on_step) hooks.on_step(row);
    if (hooks.on_checkpoint && config.checkpoint_every > 0 && step % config.checkpoint_every == 0 &&
        step != config.total_steps) {
      hooks.on_checkpoint(step, false, save);
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(config.total_steps, true, save);
  return run;
}

template TrainRun<float> train<float>(const RunConfig&, const ParallelCorpus&, const TrainHooks&);
template TrainRun<double> train<double>(const RunConfig&, const ParallelCorpus&, const TrainHooks&);
template void save_trained_checkpoint<float>(const Model<float>&, const Adam<float>*, std::size_t,
                                             const std::string&);
template void save_trained_checkpoint<double>(const Model<double>&, const Adam<double>*, std::size_t,
                                              const std::string&);

}  // namespace segsat
