// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "segsat/autograd.hpp"
#include "segsat/checkpoint.hpp"
#include "segsat/engine.hpp"
#include "segsat/error.hpp"
#include "segsat/log.hpp"
#include "segsat/metrics.hpp"
#include "segsat/training.hpp"
#include "segsat/vocab.hpp"

namespace segsat {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is not set");
  if (!fs::is_regular_file(path)) throw InputError(what + " not found: " + path);
}

std::vector<TokenIds> encode_lines(const Vocabulary& vocab, std::span<const std::string> lines) {
  std::vector<TokenIds> out;
  out.reserve(lines.size());
  for (const auto& line : lines) out.push_back(encode(vocab, line));
  return out;
}

void check_vocab_size(const ModelConfig& config, const Vocabulary& vocab, const std::string& checkpoint) {
  if (config.vocab_size != vocab.size()) {
    throw InputError("vocabulary has " + std::to_string(vocab.size()) + " entries but checkpoint " + checkpoint +
                     " expects " + std::to_string(config.vocab_size));
  }
}

ParallelCorpus corpus_from_text(const RunConfig& config, const Vocabulary& vocab, std::size_t* skipped_empty) {
  const auto src = read_lines(config.train_src);
  const auto tgt = read_lines(config.train_tgt);
  if (src.size() != tgt.size()) {
    throw InputError("line count mismatch: " + config.train_src + " has " + std::to_string(src.size()) + ", " +
                     config.train_tgt + " has " + std::to_string(tgt.size()));
  }
  ParallelCorpus c;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto s = encode(vocab, src[i]);
    auto t = encode(vocab, tgt[i]);
    if (s.empty() || t.empty()) {
      ++skipped;
      continue;
    }
    c.sources.push_back(std::move(s));
    c.targets.push_back(std::move(t));
    c.line_numbers.push_back(i);
  }
  if (skipped_empty) *skipped_empty = skipped;
  return c;
}

std::string format_fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

template <typename T>
int train_typed(const RunConfig& config, const ParallelCorpus& data, std::ostream& out) {
  fs::create_directories(config.checkpoint_dir);
  const fs::path dir(config.checkpoint_dir);
  std::ofstream log_file(dir / "train_log.tsv", std::ios::trunc);
  if (!log_file) throw InputError("cannot write training log in " + config.checkpoint_dir);
  log_file << "step\tp\tlr\tloss\tinjection_rate\n";
  std::ofstream plan_file;
  if (!config.dump_plans.empty()) {
    plan_file.open(config.dump_plans, std::ios::trunc);
    if (!plan_file) throw InputError("cannot write plan dump: " + config.dump_plans);
  }

  TrainHooks hooks;
  hooks.plan_dump = config.dump_plans.empty() ? nullptr : &plan_file;
  hooks.on_step = [&](const TrainLogRow& row) {
    log_file << row.step << '\t' << std::setprecision(17) << row.p << '\t' << row.lr << '\t' << row.loss << '\t'
             << row.injection_rate << '\n';
    if (config.log_every > 0 && (row.step % config.log_every == 0 || row.step == 1)) {
      log_line("step " + std::to_string(row.step) + " p=" + format_fixed(row.p, 4) + " lr=" +
               std::to_string(row.lr) + " loss=" + format_fixed(row.loss, 4) +
               " inject=" + format_fixed(row.injection_rate, 4));
    }
  };
  hooks.on_checkpoint = [&](std::size_t step, bool final, const std::function<void(const std::string&)>& save) {
    const auto path = (dir / ("checkpoint_" + std::to_string(step) + ".bin")).string();
    save(path);
    log_line("wrote " + path);
    if (final) {
      const auto last = (dir / "checkpoint_last.bin").string();
      fs::copy_file(path, last, fs::copy_options::overwrite_existing);
    }
  };

  const auto run = train<T>(config, data, hooks);
  ojson summary;
  summary["command"] = "train";
  summary["steps"] = config.total_steps;
  summary["final_loss"] = run.log.empty() ? 0.0 : run.log.back().loss;
  summary["sentences_seen"] = run.sentences_seen;
  summary["injection_rate"] =
      run.sentences_seen ? static_cast<double>(run.sentences_injected) / static_cast<double>(run.sentences_seen) : 0.0;
  summary["skipped_long"] = run.skipped_long;
  summary["checkpoint"] = (dir / "checkpoint_last.bin").string();
  out << summary.dump() << '\n';
  return kExitOk;
}

template <typename T>
std::vector<DecodeResult> decode_all(const Model<T>& model, std::span<const TokenIds> sources, std::size_t k,
                                     std::optional<std::size_t> budget, std::size_t workers, bool trace) {
  return batch_decode(model, sources, k, budget, workers, trace);
}

}  // namespace

int cmd_prepare(const RunConfig& config, std::ostream& out) {
  require_file(config.train_src, "training source");
  require_file(config.train_tgt, "training target");
  if (config.vocab.empty()) throw ConfigError("data.vocab path is not set");
  if (config.train_cache.empty()) throw ConfigError("data.train_cache path is not set");

  const auto src = read_lines(config.train_src);
  const auto tgt = read_lines(config.train_tgt);
  if (src.size() != tgt.size()) {
    throw InputError("line count mismatch: " + config.train_src + " has " + std::to_string(src.size()) + ", " +
                     config.train_tgt + " has " + std::to_string(tgt.size()));
  }
  std::vector<std::string> both;
  both.reserve(src.size() + tgt.size());
  both.insert(both.end(), src.begin(), src.end());
  both.insert(both.end(), tgt.begin(), tgt.end());
  const Vocabulary vocab = build_vocab(both, config.min_freq, config.max_vocab);

  std::size_t skipped = 0;
  RunConfig c = config;
  const ParallelCorpus corpus = corpus_from_text(c, vocab, &skipped);
  if (corpus.size() == 0) throw InputError("corpus has no non-empty sentence pairs");
  vocab.save(config.vocab);
  save_id_cache(config.train_cache, corpus);
  if (skipped) log_line("warning: skipped " + std::to_string(skipped) + " pairs with an empty side");

  ojson summary;
  summary["command"] = "prepare";
  summary["pairs"] = corpus.size();
  summary["skipped_empty"] = skipped;
  summary["vocab_size"] = vocab.size();
  out << summary.dump() << '\n';
  return kExitOk;
}

int cmd_train(const RunConfig& config, std::ostream& out) {
  if (config.checkpoint_dir.empty()) throw ConfigError("data.checkpoint_dir path is not set");
  require_file(config.vocab, "vocabulary");
  if (!config.init_encoder.empty()) require_file(config.init_encoder, "encoder init checkpoint");
  const Vocabulary vocab = Vocabulary::load(config.vocab);

  RunConfig c = config;
  if (c.model.vocab_size == 0) {
    c.model.vocab_size = vocab.size();
  } else if (c.model.vocab_size != vocab.size()) {
    throw ConfigError("model.vocab_size=" + std::to_string(c.model.vocab_size) + " but vocabulary has " +
                      std::to_string(vocab.size()) + " entries");
  }
  c.validate();

  ParallelCorpus data;
  if (!c.train_cache.empty() && fs::is_regular_file(c.train_cache)) {
    data = load_id_cache(c.train_cache);
  } else {
    require_file(c.train_src, "training source");
    require_file(c.train_tgt, "training target");
    data = corpus_from_text(c, vocab, nullptr);
  }
  for (const auto* side : {&data.sources, &data.targets}) {
    for (const auto& ids : *side) {
      for (TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
          throw InputError("training data holds id " + std::to_string(id) + " outside the vocabulary");
        }
      }
    }
  }
  log_line("training on " + std::to_string(data.size()) + " pairs, k=" + std::to_string(c.k) +
           " q=" + format_fixed(c.q, 3) + " steps=" + std::to_string(c.total_steps));
  if (c.model.precision == 64) return train_typed<double>(c, data, out);
  return train_typed<float>(c, data, out);
}

int cmd_distill(const DistillArgs& args, std::ostream& out) {
  require_file(args.checkpoint, "checkpoint");
  require_file(args.vocab, "vocabulary");
  require_file(args.input, "source file");
  if (args.output.empty()) throw ConfigError("output path is not set");

  const auto file = read_checkpoint_file(args.checkpoint);
  if (const auto k = checkpoint_train_k(file.metadata); k && *k != 1) {
    throw InputError("checkpoint " + args.checkpoint + " was trained with k=" + std::to_string(*k) +
                     "; distillation needs an autoregressive (k=1) model");
  }
  const Vocabulary vocab = Vocabulary::load(args.vocab);
  const AnyModel any = load_model(args.checkpoint);
  const auto lines = read_lines(args.input);
  const auto sources = encode_lines(vocab, lines);

  out << "# distill: greedy decoding (beam size 1, no beam search)\n";
  std::size_t failures = 0;
  std::vector<std::string> outputs(lines.size());
  std::visit(
      [&](const auto& model) {
        check_vocab_size(model->config(), vocab, args.checkpoint);
        const auto results = decode_all(*model, std::span<const TokenIds>(sources), 1, std::nullopt,
                                        std::max<std::size_t>(1, args.workers), false);
        for (std::size_t i = 0; i < results.size(); ++i) {
          if (results[i].ok()) {
            outputs[i] = decode_ids(vocab, results[i].translation->tokens);
          } else {
            ++failures;
            log_line("line " + std::to_string(i + 1) + ": " + results[i].error);
          }
        }
      },
      any);
  write_lines(args.output, outputs);
  ojson summary;
  summary["command"] = "distill";
  summary["decoding"] = "greedy";
  summary["lines"] = outputs.size();
  summary["failures"] = failures;
  out << summary.dump() << '\n';
  return failures ? kExitItemFailures : kExitOk;
}

int cmd_translate(const TranslateArgs& args, std::ostream& out) {
  require_file(args.checkpoint, "checkpoint");
  require_file(args.vocab, "vocabulary");
  require_file(args.input, "source file");
  if (args.output.empty()) throw ConfigError("output path is not set");
  if (args.k < 1) throw ConfigError("k must be >= 1");

  const Vocabulary vocab = Vocabulary::load(args.vocab);
  const AnyModel any = load_model(args.checkpoint);
  const auto lines = read_lines(args.input);
  const auto sources = encode_lines(vocab, lines);
  const bool trace = !args.trace.empty();

  std::vector<DecodeResult> results;
  const auto t0 = std::chrono::steady_clock::now();
  std::visit(
      [&](const auto& model) {
        check_vocab_size(model->config(), vocab, args.checkpoint);
        if (args.k > model->config().max_segments) {
          throw ConfigError("k=" + std::to_string(args.k) + " exceeds the checkpoint's max_segments=" +
                            std::to_string(model->config().max_segments));
        }
        results = decode_all(*model, std::span<const TokenIds>(sources), args.k, args.budget,
                             std::max<std::size_t>(1, args.workers), trace);
      },
      any);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<std::string> outputs(lines.size());
  std::vector<std::string> errors;
  std::vector<Translation> done;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].ok()) {
      outputs[i] = decode_ids(vocab, results[i].translation->tokens);
      done.push_back(*results[i].translation);
    } else {
      errors.push_back(std::to_string(i) + "\t" + results[i].error);
    }
  }
  write_lines(args.output, outputs);
  const std::string sidecar = args.output + ".errors";
  if (!errors.empty()) {
    write_lines(sidecar, errors);
  } else if (fs::exists(sidecar)) {
    fs::remove(sidecar);
  }
  if (trace) {
    std::ofstream tf(args.trace, std::ios::trunc);
    if (!tf) throw InputError("cannot write trace file: " + args.trace);
    tf << "sentence_id\tstep\tsegment\ttoken\tstatus\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      if (!results[i].ok()) continue;
      for (const auto& row : results[i].translation->trace) {
        tf << i << '\t' << row.step << '\t' << row.segment << '\t' << vocab.token(row.token) << '\t'
           << status_name(row.status) << '\n';
      }
    }
  }

  ojson summary;
  summary["command"] = "translate";
  summary["sentences"] = lines.size();
  summary["failures"] = errors.size();
  summary["k"] = args.k;
  summary["avg_steps"] = done.empty() ? 0.0 : avg_steps(done);
  summary["seconds"] = seconds;
  summary["sentences_per_second"] = seconds > 0 ? static_cast<double>(lines.size()) / seconds : 0.0;
  out << summary.dump() << '\n';
  return errors.empty() ? kExitOk : kExitItemFailures;
}

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  require_file(args.hyp, "hypothesis file");
  require_file(args.ref, "reference file");
  if (!args.at_hyp.empty()) require_file(args.at_hyp, "AT hypothesis file");
  const auto hyp_lines = read_lines(args.hyp);
  const auto ref_lines = read_lines(args.ref);
  if (hyp_lines.size() != ref_lines.size()) {
    throw InputError("misaligned files: " + args.hyp + " has " + std::to_string(hyp_lines.size()) + " lines, " +
                     args.ref + " has " + std::to_string(ref_lines.size()));
  }
  const Corpus hyps = tokenize_corpus(hyp_lines);
  const Corpus refs = tokenize_corpus(ref_lines);
  std::optional<Corpus> at;
  if (!args.at_hyp.empty()) {
    const auto at_lines = read_lines(args.at_hyp);
    if (at_lines.size() != hyp_lines.size()) {
      throw InputError("misaligned files: " + args.at_hyp + " has " + std::to_string(at_lines.size()) +
                       " lines, expected " + std::to_string(hyp_lines.size()));
    }
    at = tokenize_corpus(at_lines);
  }
  const MetricReport report = evaluate_corpus(hyps, refs, at ? &*at : nullptr);
  out << report.to_json() << '\n' << report.to_table();
  return kExitOk;
}

template <typename T>
std::vector<BenchRow> run_bench(const Model<T>& model, std::span<const TokenIds> sources, std::vector<std::size_t> ks,
                                std::size_t repeats, std::optional<std::size_t> budget) {
  if (ks.empty()) throw ConfigError("bench needs at least one k");
  if (sources.empty()) throw InputError("bench needs at least one source sentence");
  repeats = std::max<std::size_t>(repeats, 3);
  ks.erase(std::remove(ks.begin(), ks.end(), std::size_t{1}), ks.end());
  ks.insert(ks.begin(), 1);

  std::vector<BenchRow> rows;
  for (std::size_t k : ks) {
    std::vector<Translation> warm;
    for (const auto& src : sources) warm.push_back(decode(model, src, k, budget));
    double total = 0.0;
    for (std::size_t r = 0; r < repeats; ++r) {
      for (const auto& src : sources) {
        const auto t0 = std::chrono::steady_clock::now();
        const Translation tr = decode(model, src, k, budget);
        total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
    }
    BenchRow row;
    row.k = k;
    row.seconds_per_sentence = total / static_cast<double>(repeats * sources.size());
    row.avg_steps = avg_steps(warm);
    rows.push_back(row);
  }
  rows[0].speedup = 1.0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    rows[i].speedup = rows[i].seconds_per_sentence > 0 ? rows[0].seconds_per_sentence / rows[i].seconds_per_sentence : 0.0;
  }
  return rows;
}

template std::vector<BenchRow> run_bench<float>(const Model<float>&, std::span<const TokenIds>,
                                                std::vector<std::size_t>, std::size_t, std::optional<std::size_t>);
template std::vector<BenchRow> run_bench<double>(const Model<double>&, std::span<const TokenIds>,
                                                 std::vector<std::size_t>, std::size_t, std::optional<std::size_t>);

std::string bench_table(std::span<const BenchRow> rows) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "k" << std::setw(16) << "s/sentence" << std::setw(12) << "avg_steps"
     << "speedup\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(6) << r.k << std::setw(16) << format_fixed(r.seconds_per_sentence, 6)
       << std::setw(12) << format_fixed(r.avg_steps, 2) << format_fixed(r.speedup, 2) << "x\n";
  }
  return os.str();
}

int cmd_bench(const BenchArgs& args, std::ostream& out) {
  require_file(args.checkpoint, "checkpoint");
  require_file(args.vocab, "vocabulary");
  require_file(args.input, "source file");
  const Vocabulary vocab = Vocabulary::load(args.vocab);
  const AnyModel any = load_model(args.checkpoint);
  const auto lines = read_lines(args.input);
  std::vector<TokenIds> sources;
  for (const auto& line : lines) {
    auto ids = encode(vocab, line);
    if (!ids.empty()) sources.push_back(std::move(ids));
  }
  std::vector<BenchRow> rows;
  std::visit(
      [&](const auto& model) {
        check_vocab_size(model->config(), vocab, args.checkpoint);
        for (std::size_t k : args.ks) {
          if (k < 1 || k > model->config().max_segments) {
            throw ConfigError("k=" + std::to_string(k) + " is outside [1, max_segments]");
          }
        }
        rows = run_bench(*model, std::span<const TokenIds>(sources), args.ks, args.repeats, args.budget);
      },
      any);
  ojson rep = ojson::array();
  for (const auto& r : rows) {
    rep.push_back({{"k", r.k},
                   {"seconds_per_sentence", r.seconds_per_sentence},
                   {"avg_steps", r.avg_steps},
                   {"speedup", r.speedup}});
  }
  out << rep.dump() << '\n' << bench_table(rows);
  return kExitOk;
}

int run_guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log_line(std::string("config error: ") + e.what());
    return kExitUsage;
  } catch (const InputError& e) {
    log_line(std::string("input error: ") + e.what());
    return kExitData;
  } catch (const LoadError& e) {
    log_line(std::string("load error: ") + e.what());
    return kExitData;
  } catch (const std::exception& e) {
    log_line(std::string("error: ") + e.what());
    return kExitData;
  }
}

}  // namespace segsat
